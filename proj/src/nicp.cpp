#include "carimorph/nicp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseQR>

#include "carimorph/kdtree.hpp"

namespace carimorph {
namespace {

using Sparse = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct Correspondences {
  Points<double> points;       // nearest target point per template vertex
  Eigen::VectorXd distances;   // Euclidean
};

Correspondences find_correspondences(const KdTree3& tree, const Points<double>& deformed) {
  Correspondences c;
  c.points.resize(deformed.rows(), 3);
  c.distances.resize(deformed.rows());
  for (Eigen::Index i = 0; i < deformed.rows(); ++i) {
    const auto hit = tree.nearest(deformed.row(i).transpose());
    c.points.row(i) = tree.points().row(hit.index);
    c.distances(i) = std::sqrt(hit.squared_distance);
  }
  return c;
}

double median(Eigen::VectorXd values) {
  const auto n = values.size();
  auto* begin = values.data();
  std::nth_element(begin, begin + n / 2, begin + n);
  const double upper = begin[n / 2];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(begin, begin + n / 2);
  return 0.5 * (lower + upper);
}

// X is (4n x 3): rows 4i..4i+3 hold vertex i's transform transposed, so the
// deformed vertex is [v_i^T 1] * X_i.
Points<double> apply_transforms(const Points<double>& vertices, const Eigen::MatrixX3d& x) {
  Points<double> out(vertices.rows(), 3);
  for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
    out.row(i) = vertices.row(i) * x.middleRows<3>(4 * i) + x.row(4 * i + 3);
  }
  return out;
}

struct Problem {
  const Points<double>& vertices;
  const std::vector<std::pair<int, int>>& edges;
  std::span<const LandmarkPair> landmarks;
  double gamma;
};

double stiffness_energy(const Problem& p, const Eigen::MatrixX3d& x, double alpha) {
  double e = 0.0;
  for (const auto& [i, j] : p.edges) {
    for (int r = 0; r < 4; ++r) {
      const double g = r == 3 ? p.gamma : 1.0;
      e += alpha * alpha * g * g * (x.row(4 * i + r) - x.row(4 * j + r)).squaredNorm();
    }
  }
  return e;
}

double landmark_energy(const Problem& p, const Points<double>& deformed, double beta) {
  double e = 0.0;
  for (const auto& lm : p.landmarks) {
    e += beta * beta * (deformed.row(lm.template_index).transpose() - lm.target).squaredNorm();
  }
  return e;
}

double truncated_data_energy(const Eigen::VectorXd& distances, double radius) {
  return distances.cwiseAbs2().cwiseMin(radius * radius).sum();
}

Eigen::MatrixX3d solve_step(const Problem& p, const Correspondences& corr, const std::vector<bool>& accept,
                            double alpha, double beta) {
  const auto n = p.vertices.rows();
  const auto num_edges = static_cast<Eigen::Index>(p.edges.size());
  const auto num_landmarks = static_cast<Eigen::Index>(p.landmarks.size());
  const Eigen::Index rows = 4 * num_edges + n + num_landmarks;

  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(8 * num_edges + 4 * (n + num_landmarks)));
  Eigen::MatrixX3d rhs = Eigen::MatrixX3d::Zero(rows, 3);

  Eigen::Index row = 0;
  for (const auto& [i, j] : p.edges) {
    for (int r = 0; r < 4; ++r, ++row) {
      const double w = alpha * (r == 3 ? p.gamma : 1.0);
      triplets.emplace_back(row, 4 * i + r, w);
      triplets.emplace_back(row, 4 * j + r, -w);
    }
  }
  auto add_point_row = [&](Eigen::Index vertex, double weight, const Eigen::RowVector3d& target) {
    for (int c = 0; c < 3; ++c) triplets.emplace_back(row, 4 * vertex + c, weight * p.vertices(vertex, c));
    triplets.emplace_back(row, 4 * vertex + 3, weight);
    rhs.row(row) = weight * target;
    ++row;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = accept[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    if (w == 0.0) {
      ++row;
      continue;
    }
    add_point_row(i, w, corr.points.row(i));
  }
  for (const auto& lm : p.landmarks) {
    if (beta == 0.0) {
      ++row;
      continue;
    }
    add_point_row(lm.template_index, beta, lm.target.transpose());
  }

  Sparse a(rows, 4 * n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  const Sparse at = a.transpose();
  const Sparse normal = at * a;
  const Eigen::MatrixX3d atb = at * rhs;

  Eigen::SimplicialLDLT<Sparse> solver(normal);
  require(solver.info() == Eigen::Success, ErrorKind::Solver, "factorization of the NICP system failed");
  const Eigen::VectorXd pivots = solver.vectorD();
  const double largest = pivots.cwiseAbs().maxCoeff();
  if (pivots.minCoeff() > 1e-12 * largest) {
    Eigen::MatrixX3d x = solver.solve(atb);
    require(solver.info() == Eigen::Success && x.allFinite(), ErrorKind::Solver, "NICP solve failed");
    return x;
  }

  // Badly scaled normal equations (very large stiffness): QR on the unsquared system.
  a.makeCompressed();
  Eigen::SparseQR<Sparse, Eigen::COLAMDOrdering<int>> qr;
  qr.setPivotThreshold(1e-14 * a.coeffs().cwiseAbs().maxCoeff());
  qr.compute(a);
  require(qr.info() == Eigen::Success, ErrorKind::Solver, "factorization of the NICP system failed");
  require(qr.rank() == a.cols(), ErrorKind::Solver,
          "NICP system is singular (unconstrained vertices: disconnected template or no correspondences)");
  Eigen::MatrixX3d x = qr.solve(rhs);
  require(qr.info() == Eigen::Success && x.allFinite(), ErrorKind::Solver, "NICP solve failed");
  return x;
}

}  // namespace

NicpConfig NicpConfig::schedule(int steps, double stiffness_from, double stiffness_to, double landmark_from,
                                double landmark_to) {
  require(steps >= 1, ErrorKind::InvalidArgument, "need at least one outer step");
  NicpConfig config;
  for (int k = 0; k < steps; ++k) {
    const double t = steps == 1 ? 1.0 : static_cast<double>(k) / (steps - 1);
    config.stiffness_schedule.push_back(steps == 1 ? stiffness_from
                                                   : stiffness_from * std::pow(stiffness_to / stiffness_from, t));
    config.landmark_weight_schedule.push_back(steps == 1 ? landmark_to
                                                         : landmark_from + (landmark_to - landmark_from) * t);
  }
  return config;
}

void NicpConfig::validate() const {
  require(!stiffness_schedule.empty(), ErrorKind::InvalidArgument, "empty stiffness schedule");
  require(stiffness_schedule.size() == landmark_weight_schedule.size(), ErrorKind::InvalidArgument,
          "stiffness and landmark schedules differ in length");
  for (std::size_t k = 0; k < stiffness_schedule.size(); ++k) {
    require(stiffness_schedule[k] > 0 && std::isfinite(stiffness_schedule[k]), ErrorKind::InvalidArgument,
            "stiffness must be positive and finite");
    require(landmark_weight_schedule[k] >= 0 && std::isfinite(landmark_weight_schedule[k]),
            ErrorKind::InvalidArgument, "landmark weights must be non-negative");
    if (k > 0) {
      require(stiffness_schedule[k] <= stiffness_schedule[k - 1], ErrorKind::InvalidArgument,
              "stiffness schedule must be non-increasing");
      require(landmark_weight_schedule[k] <= landmark_weight_schedule[k - 1], ErrorKind::InvalidArgument,
              "landmark weight schedule must be non-increasing");
    }
  }
  require(landmark_weight_schedule.back() == 0.0, ErrorKind::InvalidArgument,
          "landmark weight schedule must end at 0");
  require(inner_iteration_cap >= 1, ErrorKind::InvalidArgument, "inner iteration cap must be >= 1");
  require(convergence_tol >= 0 && gamma > 0 && prune_factor > 0, ErrorKind::InvalidArgument,
          "tolerance, gamma and prune factor must be positive");
}

NicpResult nicp_register(const HeadMesh& template_mesh, const Points<double>& target_points,
                         std::span<const LandmarkPair> landmarks, const NicpConfig& config) {
  validate(template_mesh);
  config.validate();
  require(template_mesh.num_vertices() > 0, ErrorKind::Registration, "empty template");
  require(target_points.rows() > 0, ErrorKind::Registration, "no target points to register against");
  require(target_points.allFinite(), ErrorKind::Registration, "non-finite target point");
  for (const auto& lm : landmarks) {
    require(lm.template_index >= 0 && lm.template_index < template_mesh.num_vertices(), ErrorKind::InvalidArgument,
            "landmark template index " + std::to_string(lm.template_index) + " out of range");
    require(lm.target.allFinite(), ErrorKind::InvalidArgument, "non-finite landmark target");
  }

  const auto n = template_mesh.num_vertices();
  const auto edges = unique_edges(template_mesh.faces);
  const Problem problem{template_mesh.vertices, edges, landmarks, config.gamma};
  const KdTree3 tree(target_points);

  Eigen::MatrixX3d x = Eigen::MatrixX3d::Zero(4 * n, 3);
  for (Eigen::Index i = 0; i < n; ++i) x.middleRows<3>(4 * i).setIdentity();
  Points<double> deformed = template_mesh.vertices;

  NicpResult result;
  for (std::size_t step = 0; step < config.stiffness_schedule.size(); ++step) {
    const double alpha = config.stiffness_schedule[step];
    const double beta = config.landmark_weight_schedule[step];
    Correspondences corr = find_correspondences(tree, deformed);
    const double radius = config.prune_factor * median(corr.distances);

    auto objective = [&](const Eigen::MatrixX3d& xs, const Points<double>& def, const Correspondences& c) {
      return truncated_data_energy(c.distances, radius) + stiffness_energy(problem, xs, alpha) +
             landmark_energy(problem, def, beta);
    };

    std::vector<double> objectives{objective(x, deformed, corr)};
    for (int inner = 0; inner < config.inner_iteration_cap; ++inner) {
      std::vector<bool> accept(static_cast<std::size_t>(n));
      std::size_t accepted = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        accept[static_cast<std::size_t>(i)] = corr.distances(i) <= radius;
        accepted += accept[static_cast<std::size_t>(i)] ? 1 : 0;
      }
      require(accepted > 0 || (!landmarks.empty() && beta > 0), ErrorKind::Registration,
              "no correspondences survived pruning");

      Eigen::MatrixX3d next = solve_step(problem, corr, accept, alpha, beta);
      Points<double> next_deformed = apply_transforms(template_mesh.vertices, next);
      const double change = std::sqrt((next_deformed - deformed).rowwise().squaredNorm().mean());
      x = std::move(next);
      deformed = std::move(next_deformed);
      corr = find_correspondences(tree, deformed);
      objectives.push_back(objective(x, deformed, corr));
      ++result.total_inner_iterations;
      if (change < config.convergence_tol) break;
    }
    result.objective_trace.push_back(std::move(objectives));
    result.residual_trace.push_back(std::sqrt(corr.distances.cwiseAbs2().mean()));
  }

  result.deformed_template = template_mesh;
  result.deformed_template.vertices = deformed;
  result.per_vertex_affine.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& m = result.per_vertex_affine[static_cast<std::size_t>(i)];
    m.leftCols<3>() = x.middleRows<3>(4 * i).transpose();
    m.col(3) = x.row(4 * i + 3).transpose();
  }
  return result;
}

std::vector<LandmarkPair> parse_landmark_pairs(std::istream& in) {
  std::vector<LandmarkPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    LandmarkPair p;
    if (!(ss >> p.template_index)) {
      std::string rest;
      require(!(std::istringstream(line) >> rest), ErrorKind::Format,
              "line " + std::to_string(line_no) + ": expected 'template_index tx ty tz'");
      continue;
    }
    require(static_cast<bool>(ss >> p.target.x() >> p.target.y() >> p.target.z()), ErrorKind::Format,
            "line " + std::to_string(line_no) + ": expected 'template_index tx ty tz'");
    std::string extra;
    require(!(ss >> extra), ErrorKind::Format, "line " + std::to_string(line_no) + ": trailing fields");
    pairs.push_back(p);
  }
  return pairs;
}

std::vector<LandmarkPair> load_landmark_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path.string() + "'");
  return parse_landmark_pairs(in);
}

void write_landmark_pairs(std::span<const LandmarkPair> pairs, std::ostream& out) {
  out.precision(17);
  for (const auto& p : pairs) {
    out << p.template_index << ' ' << p.target.x() << ' ' << p.target.y() << ' ' << p.target.z() << '\n';
  }
}

}  // namespace carimorph
