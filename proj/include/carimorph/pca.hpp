#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "carimorph/mesh.hpp"

namespace carimorph {

inline constexpr int kDefaultComponents = 200;

/// Shape code: the coefficient vector of a mesh in the PCA basis.
struct PcaCoeffs {
  VectorXd values;

  Eigen::Index size() const { return values.size(); }
  static PcaCoeffs zero(Eigen::Index d) { return {VectorXd::Zero(d)}; }
};

/// Linear shape space h = mean + basis * alpha over 3*n_v coordinate vectors.
struct CariPcaModel {
  VectorXd mean;             // 3*n_v
  MatrixXd basis;            // 3*n_v x d, orthonormal columns
  VectorXd variance_ratios;  // d, non-increasing
  Faces faces;               // reference connectivity; may be empty for point models

  // Sum of all eigenvalues of the sample covariance (N - 1 normalization);
  // together with the ratios this gives per-component standard deviations.
  double total_variance = 0.0;
  int num_samples = 0;
  // Set when the training data has no variance at all.
  bool degenerate = false;
  std::string provenance;

  Eigen::Index num_vertices() const { return mean.size() / 3; }
  Eigen::Index dims() const { return basis.cols(); }

  /// Per-component standard deviation sqrt(ratio_i * total_variance).
  VectorXd stddevs() const { return (variance_ratios * total_variance).cwiseSqrt(); }

  HeadMesh mean_mesh() const { return HeadMesh::from_coords(mean, faces); }
};

/// PCA over same-connectivity meshes via SVD of the centered data matrix.
/// Components are sign-normalized (first significant entry positive).
CariPcaModel fit_pca(std::span<const HeadMesh> meshes, int d = kDefaultComponents);

/// mean + basis * coeffs, with the model's reference connectivity.
HeadMesh decode(const CariPcaModel& model, const PcaCoeffs& coeffs);

/// basis^T (vertices - mean).
PcaCoeffs encode(const CariPcaModel& model, const HeadMesh& mesh);

/// ||m - decode(encode(m))|| / ||m - mean||, 0 when m is the mean.
double reconstruction_error(const CariPcaModel& model, const HeadMesh& mesh);

// Binary model file: "CPCA", u32 version, u32 n_v, u32 d, f64 mean, f64 basis
// (column-major), f64 ratios, u64 CRC-64/XZ over everything before it. All
// little-endian. A JSON sidecar (<path>.json) carries connectivity and metadata.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const CariPcaModel& model);
CariPcaModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const CariPcaModel& model, const std::filesystem::path& path);
CariPcaModel load_model(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& model_path);

std::uint64_t crc64(std::span<const std::uint8_t> bytes);

}  // namespace carimorph
