#pragma once

#include <cmath>
#include <span>

#include "carimorph/exaggerate.hpp"

namespace carimorph {

struct LossWeights {
  double lambda_cha = 2.0;
  double lambda_cari = 20.0;

  void validate() const {
    require(lambda_cha >= 0.0 && lambda_cari >= 0.0 && std::isfinite(lambda_cha) && std::isfinite(lambda_cari),
            ErrorKind::InvalidArgument, "loss weights must be finite and non-negative");
  }
};

/// LSGAN discriminator objective: fakes pushed to 0, reals to 1.
/// mean(D(fake)^2) + mean((1 - D(real))^2)
template <typename Scalar>
Scalar adv_loss_discriminator(std::span<const Scalar> scores_fake, std::span<const Scalar> scores_real) {
  require(!scores_fake.empty() && !scores_real.empty(), ErrorKind::Batch, "empty score batch");
  Scalar fake = 0, real = 0;
  for (Scalar s : scores_fake) fake += s * s;
  for (Scalar s : scores_real) real += (Scalar(1) - s) * (Scalar(1) - s);
  return fake / Scalar(scores_fake.size()) + real / Scalar(scores_real.size());
}

/// LSGAN generator objective: mean((1 - D(fake))^2).
template <typename Scalar>
Scalar adv_loss_generator(std::span<const Scalar> scores_fake) {
  require(!scores_fake.empty(), ErrorKind::Batch, "empty score batch");
  Scalar sum = 0;
  for (Scalar s : scores_fake) sum += (Scalar(1) - s) * (Scalar(1) - s);
  return sum / Scalar(scores_fake.size());
}

namespace detail {

template <typename DerivedG, typename DerivedP>
void require_identity_pair(const Eigen::MatrixBase<DerivedG>& d_gen, const Eigen::MatrixBase<DerivedP>& d_rec) {
  require(d_gen.size() == d_rec.size(), ErrorKind::ShapeMismatch, "feature vectors differ in length");
  require(d_gen.squaredNorm() > 0 && d_rec.squaredNorm() > 0, ErrorKind::UndefinedIdentity,
          "zero feature vector has no identity direction");
}

}  // namespace detail

/// 1 - cos(dG, dP), in [0, 2].
template <typename DerivedG, typename DerivedP>
typename DerivedG::Scalar character_loss(const Eigen::MatrixBase<DerivedG>& d_gen,
                                         const Eigen::MatrixBase<DerivedP>& d_rec) {
  return typename DerivedG::Scalar(1) - cosine_identity(d_gen, d_rec);
}

/// exp(-cos(dG, dP) * |dG| / |dP|) == exp(-<dG, dP> / |dP|^2).
template <typename DerivedG, typename DerivedP>
typename DerivedG::Scalar caricature_loss(const Eigen::MatrixBase<DerivedG>& d_gen,
                                          const Eigen::MatrixBase<DerivedP>& d_rec) {
  using std::exp;
  const auto cos = cosine_identity(d_gen, d_rec);
  return exp(-cos * d_gen.norm() / d_rec.norm());
}

template <typename Scalar>
Scalar character_loss(const BasicFeatureVector<Scalar>& d_gen, const BasicFeatureVector<Scalar>& d_rec) {
  return character_loss(d_gen.values, d_rec.values);
}

template <typename Scalar>
Scalar caricature_loss(const BasicFeatureVector<Scalar>& d_gen, const BasicFeatureVector<Scalar>& d_rec) {
  return caricature_loss(d_gen.values, d_rec.values);
}

/// Batch expectations: columns are samples, result is the arithmetic mean.
template <typename DerivedG, typename DerivedP>
typename DerivedG::Scalar character_loss_batch(const Eigen::MatrixBase<DerivedG>& d_gen,
                                               const Eigen::MatrixBase<DerivedP>& d_rec) {
  require(d_gen.cols() > 0 && d_gen.cols() == d_rec.cols(), ErrorKind::Batch, "batch sizes differ or are empty");
  typename DerivedG::Scalar sum = 0;
  for (Eigen::Index j = 0; j < d_gen.cols(); ++j) sum += character_loss(d_gen.col(j), d_rec.col(j));
  return sum / typename DerivedG::Scalar(d_gen.cols());
}

template <typename DerivedG, typename DerivedP>
typename DerivedG::Scalar caricature_loss_batch(const Eigen::MatrixBase<DerivedG>& d_gen,
                                                const Eigen::MatrixBase<DerivedP>& d_rec) {
  require(d_gen.cols() > 0 && d_gen.cols() == d_rec.cols(), ErrorKind::Batch, "batch sizes differ or are empty");
  typename DerivedG::Scalar sum = 0;
  for (Eigen::Index j = 0; j < d_gen.cols(); ++j) sum += caricature_loss(d_gen.col(j), d_rec.col(j));
  return sum / typename DerivedG::Scalar(d_gen.cols());
}

/// L_adv + lambda_cha * L_cha + lambda_cari * L_cari
inline double total_loss(double adv, double cha, double cari, const LossWeights& w) {
  require(std::isfinite(adv) && std::isfinite(cha) && std::isfinite(cari), ErrorKind::InvalidArgument,
          "loss terms must be finite");
  return adv + w.lambda_cha * cha + w.lambda_cari * cari;
}

/// d/d(dG) of (1 - cos): -(dP / (|dG||dP|) - cos * dG / |dG|^2).
template <typename DerivedG, typename DerivedP>
Vector<typename DerivedG::Scalar> character_loss_gradient(const Eigen::MatrixBase<DerivedG>& d_gen,
                                                          const Eigen::MatrixBase<DerivedP>& d_rec) {
  detail::require_identity_pair(d_gen, d_rec);
  using Scalar = typename DerivedG::Scalar;
  const Scalar ng = d_gen.norm();
  const Scalar np = d_rec.norm();
  const Scalar cos = d_gen.dot(d_rec) / (ng * np);
  return (cos / (ng * ng)) * d_gen - d_rec / (ng * np);
}

/// d/d(dG) of exp(-<dG, dP> / |dP|^2): -L_cari * dP / |dP|^2.
template <typename DerivedG, typename DerivedP>
Vector<typename DerivedG::Scalar> caricature_loss_gradient(const Eigen::MatrixBase<DerivedG>& d_gen,
                                                           const Eigen::MatrixBase<DerivedP>& d_rec) {
  detail::require_identity_pair(d_gen, d_rec);
  using Scalar = typename DerivedG::Scalar;
  using std::exp;
  const Scalar np2 = d_rec.squaredNorm();
  const Scalar loss = exp(-d_gen.dot(d_rec) / np2);
  return (-loss / np2) * d_rec;
}

/// Gradient of lambda_cha * L_cha + lambda_cari * L_cari with respect to dG.
template <typename DerivedG, typename DerivedP>
Vector<typename DerivedG::Scalar> loss_gradients(const Eigen::MatrixBase<DerivedG>& d_gen,
                                                 const Eigen::MatrixBase<DerivedP>& d_rec, const LossWeights& w) {
  using Scalar = typename DerivedG::Scalar;
  Vector<Scalar> grad = Vector<Scalar>::Zero(d_gen.size());
  detail::require_identity_pair(d_gen, d_rec);
  if (w.lambda_cha != 0.0) grad += Scalar(w.lambda_cha) * character_loss_gradient(d_gen, d_rec);
  if (w.lambda_cari != 0.0) grad += Scalar(w.lambda_cari) * caricature_loss_gradient(d_gen, d_rec);
  return grad;
}

template <typename Scalar>
Vector<Scalar> loss_gradients(const BasicFeatureVector<Scalar>& d_gen, const BasicFeatureVector<Scalar>& d_rec,
                              const LossWeights& w) {
  return loss_gradients(d_gen.values, d_rec.values, w);
}

}  // namespace carimorph
