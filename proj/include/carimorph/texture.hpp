#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "carimorph/mesh.hpp"

namespace carimorph {

/// Affine camera: pixel = M * [x y z 1]^T with last row (0, 0, 0, 1). Pixel
/// rows grow downward, so an upright head seen from +z has a negative second row.
struct ProjectionMatrix {
  Eigen::Matrix<double, 3, 4> matrix = Eigen::Matrix<double, 3, 4>::Zero();

  Eigen::Vector2d project(const Eigen::Vector3d& point) const {
    const Eigen::Vector3d h = matrix.leftCols<3>() * point + matrix.col(3);
    return h.head<2>() / h(2);
  }

  /// Unit direction from the scene toward the camera.
  Eigen::Vector3d toward_camera() const {
    const Eigen::Vector3d r1 = matrix.block<1, 3>(0, 0).transpose();
    const Eigen::Vector3d r2 = matrix.block<1, 3>(1, 0).transpose();
    return r2.cross(r1).normalized();
  }
};

struct ProjectionFit {
  ProjectionMatrix projection;
  double mean_error = 0.0;  // mean pixel distance
  double rms_error = 0.0;
};

/// Least-squares affine camera from >= 6 non-coplanar 3D/2D correspondences.
ProjectionFit estimate_projection(const Points<double>& points3d, const Points2<double>& points2d);

/// Texture coordinates into the source photo. valid[i] is false for vertices
/// projecting outside the image or facing away from the camera.
struct UvCoords {
  Points2<double> uv;
  std::vector<bool> valid;

  Eigen::Index size() const { return uv.rows(); }
};

UvCoords compute_uv(const HeadMesh& mesh, const ProjectionMatrix& projection, int width, int height);

/// Copies uv onto a same-connectivity mesh (e.g. the exaggerated caricature).
HeadMesh with_uvs(HeadMesh mesh, const UvCoords& uv);

/// Per-vertex RGB in [0, 1] plus which vertices carry observed color.
struct VertexColorMap {
  Points<double> colors;
  std::vector<bool> known;

  Eigen::Index size() const { return colors.rows(); }
  std::size_t known_count() const;
  void validate() const;
};

/// Harmonic (uniform graph Laplacian) fill of unknown colors with the known
/// ones as boundary values; known colors are copied through unchanged.
VertexColorMap complete_vertex_colors(const HeadMesh& mesh, const VertexColorMap& partial);
VertexColorMap complete_vertex_colors(Eigen::Index num_vertices, std::span<const std::pair<int, int>> edges,
                                      const VertexColorMap& partial);

/// Adds zero-mean Gaussian noise with the known region's per-channel variance
/// to the unknown vertices, then clamps to [0, 1].
VertexColorMap add_matched_noise(const VertexColorMap& filled, const std::vector<bool>& known_mask,
                                 std::uint64_t seed);

}  // namespace carimorph
