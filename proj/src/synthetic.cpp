#include "carimorph/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/QR>

namespace carimorph::synthetic {

HeadMesh head_template(int rings, int segments) {
  require(rings >= 2 && segments >= 3, ErrorKind::InvalidArgument, "head template needs rings >= 2, segments >= 3");
  const double pi = std::numbers::pi;
  const int n = rings * segments + 2;
  HeadMesh mesh;
  mesh.vertices.resize(n, 3);

  auto place = [&](int idx, double theta, double phi) {
    // theta from the top pole, phi around the vertical axis; phi = 0 faces +z.
    double x = 0.8 * std::sin(theta) * std::sin(phi);
    double y = 1.0 * std::cos(theta);
    double z = 0.9 * std::sin(theta) * std::cos(phi);
    if (z > 0) {
      const double r2 = x * x + (y + 0.05) * (y + 0.05);
      z += 0.25 * std::exp(-r2 / 0.02);
    }
    mesh.vertices.row(idx) << x, y, z;
  };

  mesh.vertices.row(0) << 0.0, 1.0, 0.0;
  for (int i = 0; i < rings; ++i) {
    const double theta = pi * (i + 1) / (rings + 1);
    for (int j = 0; j < segments; ++j) place(1 + i * segments + j, theta, 2.0 * pi * j / segments);
  }
  mesh.vertices.row(n - 1) << 0.0, -1.0, 0.0;

  std::vector<std::array<int, 3>> faces;
  auto ring_vertex = [&](int i, int j) { return 1 + i * segments + (j % segments); };
  for (int j = 0; j < segments; ++j) faces.push_back({0, ring_vertex(0, j + 1), ring_vertex(0, j)});
  for (int i = 0; i + 1 < rings; ++i) {
    for (int j = 0; j < segments; ++j) {
      const int a = ring_vertex(i, j), b = ring_vertex(i, j + 1);
      const int c = ring_vertex(i + 1, j), d = ring_vertex(i + 1, j + 1);
      faces.push_back({a, b, c});
      faces.push_back({b, d, c});
    }
  }
  for (int j = 0; j < segments; ++j) {
    faces.push_back({n - 1, ring_vertex(rings - 1, j), ring_vertex(rings - 1, j + 1)});
  }
  mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    mesh.faces.row(static_cast<Eigen::Index>(f)) << faces[f][0], faces[f][2], faces[f][1];
  }
  return mesh;
}

MeanHead default_mean_head(int rings, int segments) { return {head_template(rings, segments)}; }

LandmarkIndexSet key_landmarks(const HeadMesh& head) {
  const std::array<Eigen::Vector2d, 5> targets{Eigen::Vector2d(-0.3, 0.25), Eigen::Vector2d(0.3, 0.25),
                                               Eigen::Vector2d(0.0, -0.05), Eigen::Vector2d(-0.25, -0.4),
                                               Eigen::Vector2d(0.25, -0.4)};
  std::vector<int> indices;
  for (const auto& t : targets) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < head.num_vertices(); ++i) {
      if (head.vertices(i, 2) <= 0) continue;
      const double d = (Eigen::Vector2d(head.vertices(i, 0), head.vertices(i, 1)) - t).squaredNorm();
      if (d < best_d && std::find(indices.begin(), indices.end(), static_cast<int>(i)) == indices.end()) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    require(best >= 0, ErrorKind::DegenerateGeometry, "head has no front-facing vertices");
    indices.push_back(best);
  }
  return LandmarkIndexSet::key_five(std::move(indices));
}

Points<double> smooth_field(const Points<double>& points, std::uint64_t seed, int terms, double max_frequency,
                            double amplitude) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Points<double> field = Points<double>::Zero(points.rows(), 3);
  for (int t = 0; t < terms; ++t) {
    Eigen::Vector3d freq(normal(rng), normal(rng), normal(rng));
    freq *= max_frequency * uniform(rng) / std::max(freq.norm(), 1e-12);
    Eigen::Vector3d dir(normal(rng), normal(rng), normal(rng));
    dir.normalize();
    const double phase = 2.0 * std::numbers::pi * uniform(rng);
    const double weight = 0.5 + uniform(rng);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const double s = std::sin(points.row(i).dot(freq) * std::numbers::pi + phase);
      field.row(i) += weight * s * dir.transpose();
    }
  }
  const double peak = field.rowwise().norm().maxCoeff();
  if (peak > 0) field *= amplitude / peak;
  return field;
}

HeadMesh bend(const HeadMesh& mesh, double fraction) {
  const double diag = bbox_diagonal(mesh.vertices);
  const double amplitude = fraction * diag;
  const double pi = std::numbers::pi;
  HeadMesh out = mesh;
  for (Eigen::Index i = 0; i < mesh.num_vertices(); ++i) {
    const double x = mesh.vertices(i, 0) / diag;
    const double y = mesh.vertices(i, 1) / diag;
    out.vertices(i, 0) += amplitude * 0.8 * std::sin(pi * y);
    out.vertices(i, 2) += amplitude * 0.6 * std::sin(pi * x + 0.5) * std::cos(pi * y);
  }
  return out;
}

MatrixXd smooth_modes(const HeadMesh& mesh, int count, std::uint64_t seed) {
  MatrixXd modes(mesh.vertices.size(), count);
  for (int k = 0; k < count; ++k) {
    const Points<double> f = smooth_field(mesh.vertices, seed + 7919ULL * static_cast<std::uint64_t>(k + 1), 3,
                                          1.0 + 0.5 * k, 1.0);
    modes.col(k) = Eigen::Map<const VectorXd>(f.data(), f.size());
  }
  Eigen::HouseholderQR<MatrixXd> qr(modes);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(modes.rows(), count);
  // Keep each mode pointing the way its generating field did.
  for (int k = 0; k < count; ++k) {
    if (q.col(k).dot(modes.col(k)) < 0) q.col(k) = -q.col(k);
  }
  return q;
}

std::vector<HeadMesh> linear_corpus(const HeadMesh& mean, const MatrixXd& modes, const VectorXd& sigmas, int count,
                                    std::uint64_t seed) {
  require(modes.rows() == mean.vertices.size() && modes.cols() == sigmas.size(), ErrorKind::Dimension,
          "mode matrix does not match mean mesh / sigmas");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<HeadMesh> corpus;
  corpus.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    VectorXd z(sigmas.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = sigmas(k) * normal(rng);
    corpus.push_back(HeadMesh::from_coords(mean.coords() + modes * z, mean.faces));
  }
  return corpus;
}

}  // namespace carimorph::synthetic
