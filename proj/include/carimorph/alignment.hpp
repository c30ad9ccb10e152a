#pragma once

#include <vector>

#include "carimorph/mesh.hpp"

namespace carimorph {

/// Translates the vertex centroid to the origin and scales the bounding-box
/// diagonal to 1. The returned transform maps the input onto the output.
template <typename Scalar>
std::pair<BasicHeadMesh<Scalar>, RigidTransform<Scalar>> center_and_scale(const BasicHeadMesh<Scalar>& mesh) {
  require(mesh.num_vertices() >= 2, ErrorKind::DegenerateGeometry, "need at least two vertices to normalize");
  const Eigen::Matrix<Scalar, 1, 3> centroid = mesh.vertices.colwise().mean();
  const Scalar diagonal = bbox_diagonal(mesh.vertices);
  require(diagonal > Scalar(0) && std::isfinite(static_cast<double>(diagonal)), ErrorKind::DegenerateGeometry,
          "all vertices coincide");

  RigidTransform<Scalar> transform;
  transform.scale = Scalar(1) / diagonal;
  transform.translation = -transform.scale * centroid.transpose();

  BasicHeadMesh<Scalar> out = mesh;
  out.vertices.rowwise() -= centroid;
  out.vertices *= transform.scale;
  return {std::move(out), transform};
}

struct RigidAlignOptions {
  bool refine_with_icp = true;
  int max_icp_iterations = 20;
  // Stop when the all-vertex correspondence RMSE changes by less than this.
  double convergence_tol = 1e-9;
};

struct RigidAlignResult {
  HeadMesh aligned;
  RigidTransform<double> transform;  // maps source onto aligned
  double landmark_rmse = 0.0;
  // Landmark RMSE after the closed-form fit and after each accepted ICP step.
  std::vector<double> landmark_rmse_trace;
  int icp_iterations = 0;
};

/// Least-squares similarity between corresponding point sets (rows), with
/// scale. Throws DegenerateConfiguration for fewer than 3 non-collinear points.
RigidTransform<double> fit_similarity(const Points<double>& source, const Points<double>& target);

/// Closed-form similarity on the landmark pairs, then optional nearest-vertex
/// ICP refinement. A refinement step is only kept if it does not increase the
/// landmark residual.
RigidAlignResult rigid_align(const HeadMesh& source, const HeadMesh& target, const LandmarkIndexSet& landmarks,
                             const RigidAlignOptions& options = {});

}  // namespace carimorph
