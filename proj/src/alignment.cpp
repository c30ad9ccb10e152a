#include "carimorph/alignment.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "carimorph/kdtree.hpp"

namespace carimorph {
namespace {

bool non_collinear(const Points<double>& points) {
  if (points.rows() < 3) return false;
  const Points<double> centered = points.rowwise() - points.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const auto& s = svd.singularValues();
  return s(0) > 0.0 && s(1) > 1e-10 * s(0);
}

Points<double> gather(const Points<double>& points, const std::vector<int>& indices) {
  Points<double> out(static_cast<Eigen::Index>(indices.size()), 3);
  for (std::size_t i = 0; i < indices.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = points.row(indices[i]);
  return out;
}

double rmse(const Points<double>& a, const Points<double>& b) {
  if (a.rows() == 0) return 0.0;
  return std::sqrt((a - b).rowwise().squaredNorm().mean());
}

}  // namespace

RigidTransform<double> fit_similarity(const Points<double>& source, const Points<double>& target) {
  require(source.rows() == target.rows(), ErrorKind::ShapeMismatch, "correspondence sets differ in size");
  require(non_collinear(source) && non_collinear(target), ErrorKind::DegenerateConfiguration,
          "need at least 3 non-collinear correspondences");
  const Eigen::Matrix4d h = Eigen::umeyama(source.transpose(), target.transpose(), true);
  RigidTransform<double> t;
  const Eigen::Matrix3d scaled = h.topLeftCorner<3, 3>();
  t.scale = std::cbrt(scaled.determinant());
  t.rotation = scaled / t.scale;
  t.translation = h.topRightCorner<3, 1>();
  return t;
}

RigidAlignResult rigid_align(const HeadMesh& source, const HeadMesh& target, const LandmarkIndexSet& landmarks,
                             const RigidAlignOptions& options) {
  require_same_connectivity(source, target, "rigid_align");
  landmarks.validate(source.num_vertices());

  const Points<double> target_landmarks = gather(target.vertices, landmarks.indices);
  RigidAlignResult result;
  result.transform = fit_similarity(gather(source.vertices, landmarks.indices), target_landmarks);
  Points<double> current = result.transform.apply(source.vertices);
  result.landmark_rmse = rmse(gather(current, landmarks.indices), target_landmarks);
  result.landmark_rmse_trace.push_back(result.landmark_rmse);

  if (options.refine_with_icp && options.max_icp_iterations > 0) {
    const KdTree3 tree(target.vertices);
    double previous_icp_rmse = std::numeric_limits<double>::infinity();
    const auto n = source.num_vertices();
    const auto k = static_cast<Eigen::Index>(landmarks.size());
    for (int it = 0; it < options.max_icp_iterations; ++it) {
      // Correspondences: nearest target vertex for every vertex, plus the landmark pairs.
      Points<double> from(n + k, 3);
      Points<double> to(n + k, 3);
      double sq = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto hit = tree.nearest(current.row(i).transpose());
        from.row(i) = current.row(i);
        to.row(i) = target.vertices.row(hit.index);
        sq += hit.squared_distance;
      }
      from.bottomRows(k) = gather(current, landmarks.indices);
      to.bottomRows(k) = target_landmarks;
      const double icp_rmse = std::sqrt(sq / static_cast<double>(n));
      if (std::abs(previous_icp_rmse - icp_rmse) < options.convergence_tol) break;
      previous_icp_rmse = icp_rmse;

      const RigidTransform<double> step = fit_similarity(from, to);
      const Points<double> candidate = step.apply(current);
      const double candidate_rmse = rmse(gather(candidate, landmarks.indices), target_landmarks);
      if (candidate_rmse > result.landmark_rmse) break;
      current = candidate;
      result.transform = step.compose(result.transform);
      result.landmark_rmse = candidate_rmse;
      result.landmark_rmse_trace.push_back(candidate_rmse);
      ++result.icp_iterations;
    }
  }

  result.aligned = source;
  result.aligned.vertices = current;
  return result;
}

}  // namespace carimorph
