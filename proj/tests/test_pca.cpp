#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Cholesky>

#include "carimorph/bytes.hpp"
#include "carimorph/pca.hpp"
#include "carimorph/synthetic.hpp"
#include "test_support.hpp"

using namespace carimorph;
using carimorph::testing::TempDir;

namespace {

struct LinearWorld {
  HeadMesh base;
  MatrixXd modes;
  VectorXd sigmas;
  std::vector<HeadMesh> meshes;
};

LinearWorld linear_world(int num_modes, int count, std::uint64_t seed, int rings = 8, int segments = 12) {
  LinearWorld w;
  w.base = synthetic::head_template(rings, segments);
  w.modes = synthetic::smooth_modes(w.base, num_modes, seed);
  w.sigmas.resize(num_modes);
  for (int k = 0; k < num_modes; ++k) w.sigmas(k) = 1.0 / (1.0 + k);
  w.meshes = synthetic::linear_corpus(w.base, w.modes, w.sigmas, count, seed + 1);
  return w;
}

double orthonormality_error(const MatrixXd& basis) {
  return (basis.transpose() * basis - MatrixXd::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff();
}

VectorXd arithmetic_mean(const std::vector<HeadMesh>& meshes) {
  VectorXd sum = VectorXd::Zero(meshes.front().vertices.size());
  for (const auto& m : meshes) sum += m.coords();
  return sum / static_cast<double>(meshes.size());
}

// Largest |v_i - mean of neighbours| over the mesh.
double max_laplacian(const HeadMesh& mesh, const std::vector<std::vector<int>>& adjacency) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < mesh.num_vertices(); ++i) {
    Eigen::RowVector3d avg = Eigen::RowVector3d::Zero();
    for (int j : adjacency[static_cast<std::size_t>(i)]) avg += mesh.vertices.row(j);
    avg /= static_cast<double>(adjacency[static_cast<std::size_t>(i)].size());
    worst = std::max(worst, (mesh.vertices.row(i) - avg).norm());
  }
  return worst;
}

std::vector<std::vector<int>> adjacency_of(const HeadMesh& mesh) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(mesh.num_vertices()));
  for (const auto& [a, b] : unique_edges(mesh.faces)) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  return adj;
}

template <typename F>
ErrorKind error_kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidArgument;
}

CariPcaModel golden_model() {
  CariPcaModel m;
  m.mean.resize(6);
  m.mean << 0.5, -1.25, 2.0, 3.0, 4.0, 0.005;
  m.basis = MatrixXd::Zero(6, 2);
  m.basis(0, 0) = 0.6;
  m.basis(1, 0) = 0.8;
  m.basis(2, 1) = 1.0;
  m.variance_ratios.resize(2);
  m.variance_ratios << 0.75, 0.25;
  m.faces.resize(0, 3);
  return m;
}

}  // namespace

TEST_CASE("crc64: standard check value") {
  const std::string text = "123456789";
  const std::vector<std::uint8_t> bytes(text.begin(), text.end());
  CHECK(crc64(bytes) == 0x995DC9BBDF1939FAULL);
}

TEST_CASE("fit: recovers a 10-dimensional linear corpus") {
  const auto w = linear_world(10, 50, 101);
  const auto model = fit_pca(w.meshes, 10);
  CHECK(model.dims() == 10);
  CHECK(model.num_vertices() == w.base.num_vertices());
  CHECK(orthonormality_error(model.basis) < 1e-10);
  CHECK(model.variance_ratios.sum() > 1.0 - 1e-10);
  for (const auto& m : w.meshes) CHECK(reconstruction_error(model, m) < 1e-8);
  // The recovered subspace is the generating one.
  const MatrixXd overlap = w.modes.transpose() * model.basis;
  const Eigen::JacobiSVD<MatrixXd> svd(overlap);
  CHECK(svd.singularValues().minCoeff() > 1.0 - 1e-8);
}

TEST_CASE("fit: variance ratios are ordered, bounded and sum to at most one") {
  const auto w = linear_world(6, 30, 7);
  for (int d : {1, 3, 6, 12}) {
    const auto model = fit_pca(w.meshes, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      CHECK(model.variance_ratios(i) >= 0.0);
      CHECK(model.variance_ratios(i) <= 1.0);
      if (i > 0) CHECK(model.variance_ratios(i) <= model.variance_ratios(i - 1));
    }
    CHECK(model.variance_ratios.sum() <= 1.0 + 1e-12);
    CHECK(orthonormality_error(model.basis) < 1e-10);
  }
}

TEST_CASE("fit: mean is the arithmetic mean regardless of d") {
  const auto w = linear_world(5, 20, 9);
  const VectorXd expected = arithmetic_mean(w.meshes);
  for (int d : {1, 2, 5, 10}) CHECK((fit_pca(w.meshes, d).mean - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fit: sign convention makes the first significant entry positive and fits reproducible") {
  const auto w = linear_world(4, 15, 21);
  const auto a = fit_pca(w.meshes, 4);
  const auto b = fit_pca(w.meshes, 4);
  CHECK(a.basis == b.basis);
  CHECK(a.variance_ratios == b.variance_ratios);
  for (Eigen::Index j = 0; j < a.dims(); ++j) {
    const double scale = a.basis.col(j).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < a.basis.rows(); ++i) {
      if (std::abs(a.basis(i, j)) > 1e-8 * scale) {
        CHECK(a.basis(i, j) > 0.0);
        break;
      }
    }
  }
}

TEST_CASE("fit: duplicated mesh is flagged degenerate") {
  const auto m = synthetic::head_template(6, 8);
  const std::vector<HeadMesh> meshes{m, m};
  const auto model = fit_pca(meshes, 1);
  CHECK(model.degenerate);
  CHECK(model.mean == m.coords());
  CHECK(orthonormality_error(model.basis) < 1e-10);
  CHECK(model.variance_ratios(0) == 0.0);
}

TEST_CASE("fit: rank-one corpus puts all variance on the first component") {
  const auto base = synthetic::head_template(6, 8);
  const MatrixXd mode = synthetic::smooth_modes(base, 1, 4);
  std::vector<HeadMesh> meshes;
  for (double t : {-1.0, 0.5, 2.0}) meshes.push_back(HeadMesh::from_coords(base.coords() + t * mode.col(0), base.faces));
  const auto model = fit_pca(meshes, 2);
  CHECK(std::abs(model.variance_ratios(0) - 1.0) < 1e-12);
  CHECK(std::abs(model.variance_ratios(1)) < 1e-12);
  CHECK(orthonormality_error(model.basis) < 1e-10);
}

TEST_CASE("fit: errors for too many components and mismatched connectivity") {
  const auto w = linear_world(3, 5, 3);
  CHECK(error_kind_of([&] { fit_pca(w.meshes, 5); }) == ErrorKind::Dimension);
  CHECK(error_kind_of([&] { fit_pca(w.meshes, 0); }) == ErrorKind::Dimension);
  auto meshes = w.meshes;
  meshes[2] = synthetic::head_template(6, 9);
  CHECK(error_kind_of([&] { fit_pca(meshes, 2); }) == ErrorKind::ShapeMismatch);
  std::vector<HeadMesh> one{w.meshes.front()};
  CHECK_THROWS_AS(fit_pca(one, 1), Error);
}

TEST_CASE("decode/encode: basic identities") {
  const auto w = linear_world(5, 20, 31);
  const auto model = fit_pca(w.meshes, 5);
  CHECK(decode(model, PcaCoeffs::zero(5)).coords() == model.mean);
  PcaCoeffs e1 = PcaCoeffs::zero(5);
  e1.values(0) = 0.7;
  CHECK((decode(model, e1).coords() - (model.mean + 0.7 * model.basis.col(0))).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(encode(model, model.mean_mesh()).values.cwiseAbs().maxCoeff() < 1e-12);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    PcaCoeffs a{VectorXd(5)};
    for (int k = 0; k < 5; ++k) a.values(k) = n(rng);
    CHECK((encode(model, decode(model, a)).values - a.values).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK(error_kind_of([&] { decode(model, PcaCoeffs::zero(4)); }) == ErrorKind::Dimension);
  CHECK(error_kind_of([&] { encode(model, synthetic::head_template(6, 9)); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("encode: residual matches a dense least-squares oracle") {
  const auto w = linear_world(4, 12, 41);
  const auto model = fit_pca(w.meshes, 4);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 0.1);
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd coords = model.mean;
    for (Eigen::Index i = 0; i < coords.size(); ++i) coords(i) += n(rng);
    const auto mesh = HeadMesh::from_coords(coords, model.faces);
    // Normal equations: (B^T B) x = B^T (m - mean).
    const VectorXd rhs = model.basis.transpose() * (coords - model.mean);
    const VectorXd x = (model.basis.transpose() * model.basis).ldlt().solve(rhs);
    const VectorXd oracle_residual = coords - model.mean - model.basis * x;
    const VectorXd residual = coords - decode(model, encode(model, mesh)).coords();
    CHECK((residual - oracle_residual).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("encode: projection is optimal among all codes") {
  const auto w = linear_world(5, 20, 51);
  const auto model = fit_pca(w.meshes, 5);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    VectorXd coords = model.mean;
    for (Eigen::Index i = 0; i < coords.size(); ++i) coords(i) += 0.05 * n(rng);
    const auto mesh = HeadMesh::from_coords(coords, model.faces);
    PcaCoeffs a{VectorXd(5)};
    for (int k = 0; k < 5; ++k) a.values(k) = n(rng);
    const double best = (coords - decode(model, encode(model, mesh)).coords()).norm();
    const double other = (coords - decode(model, a).coords()).norm();
    CHECK(best <= other + 1e-9);
  }
}

TEST_CASE("reconstruction_error: mean, orthogonal offsets and extrapolation") {
  const auto w = linear_world(5, 40, 61);
  const auto model = fit_pca(w.meshes, 5);
  CHECK(reconstruction_error(model, model.mean_mesh()) == 0.0);

  // Component orthogonal to the basis.
  VectorXd v = VectorXd::Random(model.mean.size());
  v -= model.basis * (model.basis.transpose() * v);
  CHECK(std::abs(reconstruction_error(model, HeadMesh::from_coords(model.mean + v, model.faces)) - 1.0) < 1e-10);

  // Normal-face model cannot represent caricature-style deformations outside its span.
  const MatrixXd extra = synthetic::smooth_modes(w.base, 8, 61);
  const auto normal_fresh = synthetic::linear_corpus(w.base, w.modes, w.sigmas, 10, 999);
  VectorXd strong(8);
  strong << 0, 0, 0, 0, 0, 2.5, 2.0, 1.5;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  double in_distribution = 0.0, caricature = 0.0;
  for (const auto& m : normal_fresh) {
    in_distribution = std::max(in_distribution, reconstruction_error(model, m));
    VectorXd z(8);
    for (int k = 0; k < 8; ++k) z(k) = strong(k) * n(rng);
    const VectorXd outside = extra * z;
    const VectorXd exaggerated = model.mean + 2.0 * (m.coords() - model.mean) +
                                 (outside - w.modes * (w.modes.transpose() * outside));
    caricature = std::min(caricature == 0.0 ? 1e9 : caricature,
                          reconstruction_error(model, HeadMesh::from_coords(exaggerated, m.faces)));
  }
  CHECK(caricature > in_distribution);
}

TEST_CASE("decoded meshes stay as smooth as the training meshes") {
  const auto w = linear_world(10, 60, 71, 16, 24);
  const auto model = fit_pca(w.meshes, 10);
  const auto adjacency = adjacency_of(w.base);
  double training_max = 0.0;
  for (const auto& m : w.meshes) training_max = std::max(training_max, max_laplacian(m, adjacency));

  const VectorXd sigma = model.stddevs();
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> radius(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    VectorXd dir(model.dims());
    for (Eigen::Index k = 0; k < dir.size(); ++k) dir(k) = n(rng);
    // Mahalanobis norm of the code is at most 3.
    const VectorXd alpha = sigma.cwiseProduct(dir.normalized() * radius(rng));
    CHECK(max_laplacian(decode(model, PcaCoeffs{alpha}), adjacency) <= 1.5 * training_max);
  }

  // Direct per-vertex noise of comparable magnitude violates the bound.
  HeadMesh noisy = w.meshes.front();
  const double step = sigma(0) / std::sqrt(static_cast<double>(noisy.vertices.size()));
  for (Eigen::Index i = 0; i < noisy.vertices.size(); ++i) noisy.vertices.data()[i] += 30.0 * step * n(rng);
  CHECK(max_laplacian(noisy, adjacency) > 1.5 * training_max);
}

TEST_CASE("model file: save and load are bit-exact, sidecar restores metadata") {
  const auto w = linear_world(4, 10, 81);
  auto model = fit_pca(w.meshes, 4);
  model.provenance = "unit test corpus";
  TempDir dir("pca_io");
  save_model(model, dir / "m.cpca");
  CHECK(std::filesystem::exists(sidecar_path(dir / "m.cpca")));
  const auto back = load_model(dir / "m.cpca");
  CHECK(back.mean == model.mean);
  CHECK(back.basis == model.basis);
  CHECK(back.variance_ratios == model.variance_ratios);
  CHECK(back.faces == model.faces);
  CHECK(back.provenance == model.provenance);
  CHECK(back.num_samples == model.num_samples);
  CHECK(back.total_variance == model.total_variance);
}

TEST_CASE("model file: layout matches an independently written golden file") {
  const auto golden_bytes = carimorph::testing::read_file(carimorph::testing::fixtures() / "golden_tiny.cpca");
  const std::vector<std::uint8_t> golden(golden_bytes.begin(), golden_bytes.end());
  const auto expected = golden_model();
  CHECK(serialize_model(expected) == golden);
  const auto loaded = deserialize_model(golden);
  CHECK(loaded.mean == expected.mean);
  CHECK(loaded.basis == expected.basis);
  CHECK(loaded.variance_ratios == expected.variance_ratios);
}

TEST_CASE("model file: byte order is fixed, not native") {
  // A writer that used big-endian native order would emit every field byte-swapped.
  const auto text = carimorph::testing::read_file(carimorph::testing::fixtures() / "golden_tiny.cpca");
  std::vector<std::uint8_t> swapped(text.begin(), text.end());
  auto swap_field = [&](std::size_t offset, std::size_t width) {
    std::reverse(swapped.begin() + static_cast<std::ptrdiff_t>(offset),
                 swapped.begin() + static_cast<std::ptrdiff_t>(offset + width));
  };
  for (std::size_t off = 4; off < 16; off += 4) swap_field(off, 4);
  for (std::size_t off = 16; off < swapped.size(); off += 8) swap_field(off, 8);
  CHECK(error_kind_of([&] { deserialize_model(swapped); }) == ErrorKind::Format);

  // Swapping back restores the identical model.
  for (std::size_t off = 4; off < 16; off += 4) swap_field(off, 4);
  for (std::size_t off = 16; off < swapped.size(); off += 8) swap_field(off, 8);
  const auto model = deserialize_model(swapped);
  CHECK(model.mean == golden_model().mean);
}

TEST_CASE("model file: corruption and format errors") {
  const auto bytes = serialize_model(golden_model());
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{15}, bytes.size() / 2, bytes.size() - 1}) {
    const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK(error_kind_of([&] { deserialize_model(truncated); }) == ErrorKind::Corruption);
  }
  auto flipped = bytes;
  flipped[40] ^= 0x10;
  CHECK(error_kind_of([&] { deserialize_model(flipped); }) == ErrorKind::Corruption);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(error_kind_of([&] { deserialize_model(bad_magic); }) == ErrorKind::Format);
  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK(error_kind_of([&] { deserialize_model(bad_version); }) == ErrorKind::Format);
}
