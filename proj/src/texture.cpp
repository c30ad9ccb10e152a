#include "carimorph/texture.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>

namespace carimorph {

ProjectionFit estimate_projection(const Points<double>& points3d, const Points2<double>& points2d) {
  const Eigen::Index n = points3d.rows();
  require(n == points2d.rows(), ErrorKind::ShapeMismatch, "3D and 2D landmark counts differ");
  require(n >= 6, ErrorKind::DegenerateConfiguration, "need at least 6 correspondences, got " + std::to_string(n));
  require(points3d.allFinite() && points2d.allFinite(), ErrorKind::InvalidArgument, "non-finite landmark");

  const Points<double> centered = points3d.rowwise() - points3d.colwise().mean();
  Eigen::JacobiSVD<MatrixXd> spread(centered);
  const auto& s = spread.singularValues();
  require(s(0) > 0 && s(2) > 1e-9 * s(0), ErrorKind::DegenerateConfiguration, "3D landmarks are coplanar");

  MatrixXd design(n, 4);
  design.leftCols<3>() = points3d;
  design.col(3).setOnes();
  const Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
  const Eigen::Vector4d row_u = qr.solve(points2d.col(0));
  const Eigen::Vector4d row_v = qr.solve(points2d.col(1));

  ProjectionFit fit;
  fit.projection.matrix.row(0) = row_u.transpose();
  fit.projection.matrix.row(1) = row_v.transpose();
  fit.projection.matrix.row(2) << 0, 0, 0, 1;

  double sum = 0.0, sum_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = (fit.projection.project(points3d.row(i).transpose()) - points2d.row(i).transpose()).norm();
    sum += e;
    sum_sq += e * e;
  }
  fit.mean_error = sum / static_cast<double>(n);
  fit.rms_error = std::sqrt(sum_sq / static_cast<double>(n));
  return fit;
}

UvCoords compute_uv(const HeadMesh& mesh, const ProjectionMatrix& projection, int width, int height) {
  require(width > 0 && height > 0, ErrorKind::InvalidArgument, "image size must be positive");
  require(projection.matrix.allFinite(), ErrorKind::InvalidArgument, "projection matrix is not finite");
  const Points<double> normals = vertex_normals(mesh);
  const Eigen::Vector3d toward = projection.toward_camera();
  const bool facing_test = mesh.num_faces() > 0 && toward.allFinite();

  UvCoords out;
  out.uv.resize(mesh.num_vertices(), 2);
  out.valid.assign(static_cast<std::size_t>(mesh.num_vertices()), true);
  for (Eigen::Index i = 0; i < mesh.num_vertices(); ++i) {
    const Eigen::Vector2d px = projection.project(mesh.vertices.row(i).transpose());
    out.uv(i, 0) = px(0) / width;
    out.uv(i, 1) = px(1) / height;
    const bool inside = px(0) >= 0 && px(0) <= width && px(1) >= 0 && px(1) <= height;
    const bool facing = !facing_test || normals.row(i).dot(toward.transpose()) >= 0;
    out.valid[static_cast<std::size_t>(i)] = inside && facing;
  }
  return out;
}

HeadMesh with_uvs(HeadMesh mesh, const UvCoords& uv) {
  require(uv.size() == mesh.num_vertices(), ErrorKind::ShapeMismatch, "uv count does not match the mesh");
  mesh.uvs = uv.uv;
  return mesh;
}

std::size_t VertexColorMap::known_count() const {
  return static_cast<std::size_t>(std::count(known.begin(), known.end(), true));
}

void VertexColorMap::validate() const {
  require(static_cast<Eigen::Index>(known.size()) == colors.rows(), ErrorKind::ShapeMismatch,
          "known mask does not match color count");
  for (Eigen::Index i = 0; i < colors.rows(); ++i) {
    if (!known[static_cast<std::size_t>(i)]) continue;
    require(colors.row(i).allFinite() && colors.row(i).minCoeff() >= 0.0 && colors.row(i).maxCoeff() <= 1.0,
            ErrorKind::InvalidArgument, "known color at vertex " + std::to_string(i) + " outside [0, 1]");
  }
}

VertexColorMap complete_vertex_colors(const HeadMesh& mesh, const VertexColorMap& partial) {
  require(partial.size() == mesh.num_vertices(), ErrorKind::ShapeMismatch, "color map does not match the mesh");
  const auto edges = unique_edges(mesh.faces);
  return complete_vertex_colors(mesh.num_vertices(), edges, partial);
}

VertexColorMap complete_vertex_colors(Eigen::Index num_vertices, std::span<const std::pair<int, int>> edges,
                                      const VertexColorMap& partial) {
  require(partial.size() == num_vertices, ErrorKind::ShapeMismatch, "color map does not match vertex count");
  partial.validate();
  require(partial.known_count() > 0, ErrorKind::Boundary, "no known colors to interpolate from");

  const auto n = static_cast<std::size_t>(num_vertices);
  std::vector<std::vector<int>> adjacency(n);
  for (const auto& [a, b] : edges) {
    require(a >= 0 && b >= 0 && a < num_vertices && b < num_vertices && a != b, ErrorKind::InvalidArgument,
            "edge references an invalid vertex");
    adjacency[static_cast<std::size_t>(a)].push_back(b);
    adjacency[static_cast<std::size_t>(b)].push_back(a);
  }

  // Every connected component holding an unknown vertex must touch a known one.
  std::vector<int> component(n, -1);
  std::vector<bool> component_has_known;
  for (std::size_t start = 0; start < n; ++start) {
    if (component[start] >= 0) continue;
    const int id = static_cast<int>(component_has_known.size());
    bool has_known = false;
    std::vector<std::size_t> stack{start};
    component[start] = id;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      has_known = has_known || partial.known[v];
      for (int w : adjacency[v]) {
        if (component[static_cast<std::size_t>(w)] < 0) {
          component[static_cast<std::size_t>(w)] = id;
          stack.push_back(static_cast<std::size_t>(w));
        }
      }
    }
    component_has_known.push_back(has_known);
  }

  std::vector<int> unknown_index(n, -1);
  int num_unknown = 0;
  for (std::size_t v = 0; v < n; ++v) {
    if (partial.known[v]) continue;
    require(component_has_known[static_cast<std::size_t>(component[v])], ErrorKind::DisconnectedBoundary,
            "vertex " + std::to_string(v) + " is not connected to any known color");
    unknown_index[v] = num_unknown++;
  }

  VertexColorMap out = partial;
  if (num_unknown == 0) return out;

  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::MatrixX3d rhs = Eigen::MatrixX3d::Zero(num_unknown, 3);
  for (std::size_t v = 0; v < n; ++v) {
    const int row = unknown_index[v];
    if (row < 0) continue;
    triplets.emplace_back(row, row, static_cast<double>(adjacency[v].size()));
    for (int w : adjacency[v]) {
      const int col = unknown_index[static_cast<std::size_t>(w)];
      if (col >= 0) {
        triplets.emplace_back(row, col, -1.0);
      } else {
        rhs.row(row) += partial.colors.row(w);
      }
    }
  }
  Eigen::SparseMatrix<double> laplacian(num_unknown, num_unknown);
  laplacian.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(laplacian);
  require(solver.info() == Eigen::Success, ErrorKind::Solver, "Dirichlet system factorization failed");
  const Eigen::MatrixX3d solution = solver.solve(rhs);
  require(solver.info() == Eigen::Success && solution.allFinite(), ErrorKind::Solver, "Dirichlet solve failed");

  for (std::size_t v = 0; v < n; ++v) {
    if (unknown_index[v] >= 0) out.colors.row(static_cast<Eigen::Index>(v)) = solution.row(unknown_index[v]);
  }
  return out;
}

VertexColorMap add_matched_noise(const VertexColorMap& filled, const std::vector<bool>& known_mask,
                                 std::uint64_t seed) {
  require(static_cast<Eigen::Index>(known_mask.size()) == filled.size(), ErrorKind::ShapeMismatch,
          "known mask does not match color count");
  std::vector<Eigen::Index> known_rows;
  for (Eigen::Index i = 0; i < filled.size(); ++i) {
    if (known_mask[static_cast<std::size_t>(i)]) known_rows.push_back(i);
  }
  require(!known_rows.empty(), ErrorKind::Boundary, "known region is empty");

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (auto i : known_rows) mean += filled.colors.row(i).transpose();
  mean /= static_cast<double>(known_rows.size());
  Eigen::Vector3d variance = Eigen::Vector3d::Zero();
  for (auto i : known_rows) variance += (filled.colors.row(i).transpose() - mean).cwiseAbs2();
  variance /= static_cast<double>(known_rows.size());

  VertexColorMap out = filled;
  out.known = known_mask;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Vector3d stddev = variance.cwiseSqrt();
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (known_mask[static_cast<std::size_t>(i)]) continue;
    for (int c = 0; c < 3; ++c) {
      if (stddev(c) == 0.0) continue;
      out.colors(i, c) = std::clamp(out.colors(i, c) + stddev(c) * normal(rng), 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace carimorph
