#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "carimorph/mesh.hpp"

namespace carimorph {

/// Outer-loop schedules and inner-loop controls for non-rigid ICP.
struct NicpConfig {
  std::vector<double> stiffness_schedule;
  std::vector<double> landmark_weight_schedule;
  int inner_iteration_cap = 10;
  // Inner loop stops when the RMS vertex displacement between iterations drops below this.
  double convergence_tol = 1e-6;
  // Weight of the translation column in the edge-difference stiffness term.
  double gamma = 1.0;
  // Correspondences farther than prune_factor * median distance are dropped.
  double prune_factor = 4.0;

  /// Geometric stiffness decay and linear landmark-weight decay over `steps` outer steps.
  static NicpConfig schedule(int steps = 8, double stiffness_from = 50.0, double stiffness_to = 0.2,
                             double landmark_from = 5.0, double landmark_to = 0.0);

  void validate() const;
};

struct LandmarkPair {
  int template_index = 0;
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
};

struct NicpResult {
  HeadMesh deformed_template;
  // Per-vertex affine map x -> A * x + t stored as [A | t].
  std::vector<Eigen::Matrix<double, 3, 4>> per_vertex_affine;
  // Nearest-point RMSE over all template vertices after each outer step.
  std::vector<double> residual_trace;
  // Per outer step: objective (truncated data + stiffness + landmark) before
  // the first inner solve and after each inner solve.
  std::vector<std::vector<double>> objective_trace;
  int total_inner_iterations = 0;
};

NicpResult nicp_register(const HeadMesh& template_mesh, const Points<double>& target_points,
                         std::span<const LandmarkPair> landmarks, const NicpConfig& config = NicpConfig::schedule());

inline NicpResult nicp_register(const HeadMesh& template_mesh, const HeadMesh& target,
                                std::span<const LandmarkPair> landmarks,
                                const NicpConfig& config = NicpConfig::schedule()) {
  return nicp_register(template_mesh, target.vertices, landmarks, config);
}

/// "template_index tx ty tz" per line, "#" comments allowed.
std::vector<LandmarkPair> parse_landmark_pairs(std::istream& in);
std::vector<LandmarkPair> load_landmark_pairs(const std::filesystem::path& path);
void write_landmark_pairs(std::span<const LandmarkPair> pairs, std::ostream& out);

}  // namespace carimorph
