#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include "carimorph/error.hpp"
#include "carimorph/types.hpp"

namespace carimorph {

/// Fixed-connectivity triangle mesh. The vertex block doubles as the 3*n_v
/// coordinate vector every shape-space operation works on.
template <typename Scalar>
struct BasicHeadMesh {
  Points<Scalar> vertices;
  Faces faces;
  // Optional per-vertex texture coordinates; empty when absent.
  Points2<Scalar> uvs;

  Eigen::Index num_vertices() const { return vertices.rows(); }
  Eigen::Index num_faces() const { return faces.rows(); }
  bool has_uvs() const { return uvs.rows() == vertices.rows() && uvs.rows() > 0; }

  Eigen::Map<Vector<Scalar>> coords() { return {vertices.data(), vertices.size()}; }
  Eigen::Map<const Vector<Scalar>> coords() const { return {vertices.data(), vertices.size()}; }

  template <typename Derived>
  static BasicHeadMesh from_coords(const Eigen::MatrixBase<Derived>& coords, Faces faces) {
    require(coords.size() % 3 == 0, ErrorKind::Dimension, "coordinate vector length is not a multiple of 3");
    BasicHeadMesh mesh;
    mesh.vertices.resize(coords.size() / 3, 3);
    Eigen::Map<Vector<Scalar>>(mesh.vertices.data(), mesh.vertices.size()) = coords;
    mesh.faces = std::move(faces);
    return mesh;
  }
};

using HeadMesh = BasicHeadMesh<double>;

/// Checks the mesh invariants: face indices in range, non-degenerate faces,
/// finite coordinates. Throws Format errors.
template <typename Scalar>
void validate(const BasicHeadMesh<Scalar>& mesh) {
  const auto n = mesh.num_vertices();
  require(mesh.vertices.allFinite(), ErrorKind::Format, "non-finite vertex coordinate");
  for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
    const int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
    require(a >= 0 && a < n && b >= 0 && b < n && c >= 0 && c < n, ErrorKind::Format,
            "face " + std::to_string(f) + " references a vertex out of range");
    require(a != b && b != c && a != c, ErrorKind::Format, "face " + std::to_string(f) + " is degenerate");
  }
  if (mesh.uvs.rows() > 0) {
    require(mesh.uvs.rows() == n, ErrorKind::Format, "uv count does not match vertex count");
    require(mesh.uvs.allFinite(), ErrorKind::Format, "non-finite texture coordinate");
  }
}

template <typename ScalarA, typename ScalarB>
bool same_connectivity(const BasicHeadMesh<ScalarA>& a, const BasicHeadMesh<ScalarB>& b) {
  return a.num_vertices() == b.num_vertices() && a.faces.rows() == b.faces.rows() && a.faces == b.faces;
}

template <typename ScalarA, typename ScalarB>
void require_same_connectivity(const BasicHeadMesh<ScalarA>& a, const BasicHeadMesh<ScalarB>& b,
                               std::string_view what) {
  require(same_connectivity(a, b), ErrorKind::ShapeMismatch,
          std::string(what) + ": meshes do not share connectivity (" + std::to_string(a.num_vertices()) + " vs " +
              std::to_string(b.num_vertices()) + " vertices)");
}

/// Unique undirected edges (i < j) of the triangle set, sorted.
std::vector<std::pair<int, int>> unique_edges(const Faces& faces);

template <typename Scalar>
Scalar bbox_diagonal(const Points<Scalar>& points) {
  if (points.rows() == 0) return Scalar(0);
  return (points.colwise().maxCoeff() - points.colwise().minCoeff()).norm();
}

/// Area-weighted vertex normals, normalized; zero for isolated vertices.
template <typename Scalar>
Points<Scalar> vertex_normals(const BasicHeadMesh<Scalar>& mesh) {
  using Vec3 = Eigen::Matrix<Scalar, 1, 3>;
  Points<Scalar> normals = Points<Scalar>::Zero(mesh.num_vertices(), 3);
  for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
    const Vec3 a = mesh.vertices.row(mesh.faces(f, 0));
    const Vec3 b = mesh.vertices.row(mesh.faces(f, 1));
    const Vec3 c = mesh.vertices.row(mesh.faces(f, 2));
    const Vec3 n = (b - a).cross(c - a);
    for (int k = 0; k < 3; ++k) normals.row(mesh.faces(f, k)) += n;
  }
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    const Scalar len = normals.row(i).norm();
    if (len > Scalar(0)) normals.row(i) /= len;
  }
  return normals;
}

/// Ordered vertex indices with optional names. The 5-point key set (eyes,
/// nose tip, mouth corners) is what pose alignment uses by default.
struct LandmarkIndexSet {
  std::vector<int> indices;
  std::vector<std::string> labels;

  static const std::array<const char*, 5>& default_key_labels() {
    static const std::array<const char*, 5> labels{"eye-left", "eye-right", "nose", "mouth-left", "mouth-right"};
    return labels;
  }

  /// Builds the 5-entry key set; throws unless exactly five indices are given.
  static LandmarkIndexSet key_five(std::vector<int> indices);

  std::size_t size() const { return indices.size(); }

  /// Distinct indices in [0, n_v).
  void validate(Eigen::Index num_vertices) const;
};

/// Similarity transform y = scale * R * x + t.
template <typename Scalar>
struct RigidTransform {
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Scalar scale = Scalar(1);

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }

  Points<Scalar> apply(const Points<Scalar>& points) const {
    Points<Scalar> out = (scale * (points * rotation.transpose())).eval();
    out.rowwise() += translation.transpose();
    return out;
  }

  BasicHeadMesh<Scalar> apply(const BasicHeadMesh<Scalar>& mesh) const {
    BasicHeadMesh<Scalar> out = mesh;
    out.vertices = apply(mesh.vertices);
    return out;
  }

  /// (this * other)(x) == this(other(x))
  RigidTransform compose(const RigidTransform& other) const {
    RigidTransform out;
    out.rotation = rotation * other.rotation;
    out.scale = scale * other.scale;
    out.translation = scale * (rotation * other.translation) + translation;
    return out;
  }

  RigidTransform inverse() const {
    RigidTransform out;
    out.rotation = rotation.transpose();
    out.scale = Scalar(1) / scale;
    out.translation = -(out.scale * (out.rotation * translation));
    return out;
  }

  bool is_valid(Scalar tol = Scalar(1e-10)) const {
    return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
           std::abs(rotation.determinant() - Scalar(1)) < tol && scale > Scalar(0) && translation.allFinite();
  }
};

}  // namespace carimorph
