#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "carimorph/mesh.hpp"

namespace carimorph {

/// The mean head of the normal (non-caricature) face space. Feature vectors
/// are displacements from it.
template <typename Scalar>
struct BasicMeanHead {
  BasicHeadMesh<Scalar> mesh;

  Eigen::Map<const Vector<Scalar>> coords() const { return mesh.coords(); }
  Eigen::Index size() const { return mesh.vertices.size(); }
};

using MeanHead = BasicMeanHead<double>;

enum class FeatureSource { Reconstruction, Generator, Other };

/// Displacement from the mean head. Direction carries identity, magnitude
/// carries the degree of exaggeration.
template <typename Scalar>
struct BasicFeatureVector {
  Vector<Scalar> values;
  FeatureSource source = FeatureSource::Other;

  Scalar norm() const { return values.norm(); }
  Eigen::Index size() const { return values.size(); }
};

using FeatureVector = BasicFeatureVector<double>;

struct ControlParams {
  double u1 = 1.0;
  double u2 = 0.0;

  static constexpr double kUiMin = 0.0;
  static constexpr double kUiMax = 2.0;
  static constexpr double kUiStep = 0.05;

  /// Clamped copy for the interactive range; the library itself accepts any finite value.
  ControlParams ui_clamped() const {
    return {std::clamp(u1, kUiMin, kUiMax), std::clamp(u2, kUiMin, kUiMax)};
  }
};

template <typename Scalar>
BasicFeatureVector<Scalar> feature_vector(const BasicHeadMesh<Scalar>& head, const BasicMeanHead<Scalar>& mean,
                                          FeatureSource source = FeatureSource::Other) {
  require_same_connectivity(head, mean.mesh, "feature_vector");
  return {head.coords() - mean.coords(), source};
}

/// <a, b> / (|a| |b|). Throws UndefinedIdentity if either vector is zero.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_identity(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  require(a.size() == b.size(), ErrorKind::ShapeMismatch, "feature vectors differ in length");
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  require(na > Scalar(0) && nb > Scalar(0), ErrorKind::UndefinedIdentity,
          "zero feature vector has no identity direction");
  const Scalar c = a.dot(b) / (na * nb);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

template <typename Scalar>
Scalar cosine_identity(const BasicFeatureVector<Scalar>& a, const BasicFeatureVector<Scalar>& b) {
  return cosine_identity(a.values, b.values);
}

/// mean + u * (head - mean)
template <typename Scalar>
BasicHeadMesh<Scalar> exaggerate(const BasicMeanHead<Scalar>& mean, const BasicHeadMesh<Scalar>& head, Scalar u) {
  require_same_connectivity(head, mean.mesh, "exaggerate");
  require(std::isfinite(static_cast<double>(u)), ErrorKind::InvalidArgument, "exaggeration coefficient is not finite");
  BasicHeadMesh<Scalar> out = head;
  out.coords() = mean.coords() + u * (head.coords() - mean.coords());
  return out;
}

/// mean + u1 * dG + u2 * dP
template <typename Scalar>
BasicHeadMesh<Scalar> user_control(const BasicMeanHead<Scalar>& mean, const BasicFeatureVector<Scalar>& d_gen,
                                   const BasicFeatureVector<Scalar>& d_rec, Scalar u1, Scalar u2) {
  require(d_gen.size() == mean.size() && d_rec.size() == mean.size(), ErrorKind::ShapeMismatch,
          "feature vector length does not match the mean head");
  require(std::isfinite(static_cast<double>(u1)) && std::isfinite(static_cast<double>(u2)),
          ErrorKind::InvalidArgument, "control parameters must be finite");
  BasicHeadMesh<Scalar> out = mean.mesh;
  out.coords() = mean.coords() + u1 * d_gen.values + u2 * d_rec.values;
  return out;
}

/// The two-parameter control evaluated directly on the generated caricature
/// and the reconstructed head, as the affine combination
/// (1 - u1 - u2) * mean + u1 * caricature + u2 * head.
/// Algebraically identical to user_control(mean, caricature - mean, head - mean, u1, u2);
/// this form reproduces the stored heads bit-for-bit at (1, 0) and (0, 1).
template <typename Scalar>
BasicHeadMesh<Scalar> blend_heads(const BasicMeanHead<Scalar>& mean, const BasicHeadMesh<Scalar>& caricature,
                                  const BasicHeadMesh<Scalar>& head, Scalar u1, Scalar u2) {
  require_same_connectivity(caricature, mean.mesh, "blend_heads");
  require_same_connectivity(head, mean.mesh, "blend_heads");
  require(std::isfinite(static_cast<double>(u1)) && std::isfinite(static_cast<double>(u2)),
          ErrorKind::InvalidArgument, "control parameters must be finite");
  const Scalar w_mean = Scalar(1) - u1 - u2;
  BasicHeadMesh<Scalar> out = mean.mesh;
  auto coords = out.coords();
  // Terms with zero weight are skipped entirely so a unit weight on one input
  // returns that input exactly (signed zeros included).
  bool first = true;
  auto accumulate = [&](Scalar w, const auto& x) {
    if (w == Scalar(0)) return;
    if (first) {
      coords = w == Scalar(1) ? Vector<Scalar>(x) : Vector<Scalar>(w * x);
      first = false;
    } else {
      coords += w * x;
    }
  };
  accumulate(w_mean, mean.coords());
  accumulate(u1, caricature.coords());
  accumulate(u2, head.coords());
  if (first) coords.setZero();
  return out;
}

}  // namespace carimorph
