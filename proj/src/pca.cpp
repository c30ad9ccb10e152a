#include "carimorph/pca.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include <Eigen/SVD>
#include <boost/crc.hpp>
#include <json.hpp>

#include "carimorph/bytes.hpp"

namespace carimorph {
namespace {

using Crc64Xz = boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, 0xFFFFFFFFFFFFFFFFULL, 0xFFFFFFFFFFFFFFFFULL, true, true>;

constexpr std::uint8_t kMagic[4] = {'C', 'P', 'C', 'A'};

// Two-pass Gram-Schmidt in column order. Columns that collapse (directions of
// zero variance) are replaced by the first canonical axis that survives.
void orthonormalize(MatrixXd& basis) {
  const Eigen::Index rows = basis.rows();
  Eigen::Index next_axis = 0;
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) basis.col(j) -= basis.col(i).dot(basis.col(j)) * basis.col(i);
    }
    double norm = basis.col(j).norm();
    while (norm < 0.5) {
      require(next_axis < rows, ErrorKind::Dimension, "cannot complete an orthonormal basis");
      basis.col(j) = VectorXd::Unit(rows, next_axis++);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index i = 0; i < j; ++i) basis.col(j) -= basis.col(i).dot(basis.col(j)) * basis.col(i);
      }
      norm = basis.col(j).norm();
    }
    basis.col(j) /= norm;
  }
}

void normalize_signs(MatrixXd& basis) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    const double scale = basis.col(j).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < basis.rows(); ++i) {
      if (std::abs(basis(i, j)) > 1e-8 * scale) {
        if (basis(i, j) < 0) basis.col(j) = -basis.col(j);
        break;
      }
    }
  }
}

void require_model_shape(const CariPcaModel& model, const HeadMesh& mesh, const char* what) {
  require(mesh.num_vertices() == model.num_vertices(), ErrorKind::ShapeMismatch,
          std::string(what) + ": mesh has " + std::to_string(mesh.num_vertices()) + " vertices, model has " +
              std::to_string(model.num_vertices()));
  if (model.faces.rows() > 0 && mesh.faces.rows() > 0) {
    require(model.faces == mesh.faces, ErrorKind::ShapeMismatch,
            std::string(what) + ": mesh connectivity differs from the model reference");
  }
}

}  // namespace

std::uint64_t crc64(std::span<const std::uint8_t> bytes) {
  Crc64Xz crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

CariPcaModel fit_pca(std::span<const HeadMesh> meshes, int d) {
  require(meshes.size() >= 2, ErrorKind::Dimension, "PCA needs at least two meshes");
  for (const auto& m : meshes) require_same_connectivity(meshes.front(), m, "fit_pca");
  const auto n = static_cast<Eigen::Index>(meshes.size());
  const Eigen::Index dim = meshes.front().vertices.size();
  require(d >= 1 && d <= std::min<Eigen::Index>(dim, n - 1), ErrorKind::Dimension,
          "component count " + std::to_string(d) + " exceeds min(3*n_v, N-1) = " +
              std::to_string(std::min<Eigen::Index>(dim, n - 1)));

  MatrixXd data(dim, n);
  for (Eigen::Index i = 0; i < n; ++i) data.col(i) = meshes[static_cast<std::size_t>(i)].coords();

  CariPcaModel model;
  model.mean = data.rowwise().mean();
  data.colwise() -= model.mean;
  model.faces = meshes.front().faces;
  model.num_samples = static_cast<int>(n);

  Eigen::BDCSVD<MatrixXd> svd(data, Eigen::ComputeThinU);
  const VectorXd sq = svd.singularValues().array().square();
  const double total = sq.sum();
  model.total_variance = total / static_cast<double>(n - 1);
  model.degenerate = !(total > 0.0);

  model.basis = svd.matrixU().leftCols(d);
  orthonormalize(model.basis);
  normalize_signs(model.basis);

  model.variance_ratios = model.degenerate ? VectorXd::Zero(d) : VectorXd(sq.head(d) / total);
  model.provenance = "fit_pca: " + std::to_string(n) + " meshes, d=" + std::to_string(d);
  return model;
}

HeadMesh decode(const CariPcaModel& model, const PcaCoeffs& coeffs) {
  require(coeffs.size() == model.dims(), ErrorKind::Dimension,
          "coefficient vector has length " + std::to_string(coeffs.size()) + ", model has d=" +
              std::to_string(model.dims()));
  return HeadMesh::from_coords(model.mean + model.basis * coeffs.values, model.faces);
}

PcaCoeffs encode(const CariPcaModel& model, const HeadMesh& mesh) {
  require_model_shape(model, mesh, "encode");
  return {model.basis.transpose() * (mesh.coords() - model.mean)};
}

double reconstruction_error(const CariPcaModel& model, const HeadMesh& mesh) {
  require_model_shape(model, mesh, "reconstruction_error");
  const VectorXd offset = mesh.coords() - model.mean;
  const double denom = offset.norm();
  if (denom == 0.0) return 0.0;
  const VectorXd residual = offset - model.basis * (model.basis.transpose() * offset);
  return residual.norm() / denom;
}

std::vector<std::uint8_t> serialize_model(const CariPcaModel& model) {
  const auto n_v = static_cast<std::uint32_t>(model.num_vertices());
  const auto d = static_cast<std::uint32_t>(model.dims());
  require(model.basis.rows() == model.mean.size() && model.variance_ratios.size() == model.dims(),
          ErrorKind::Dimension, "inconsistent model dimensions");
  ByteWriter w;
  w.reserve(16 + 8 * (static_cast<std::size_t>(model.mean.size()) * (1 + d) + d) + 8);
  w.raw(kMagic);
  w.u32(kModelFormatVersion);
  w.u32(n_v);
  w.u32(d);
  for (Eigen::Index i = 0; i < model.mean.size(); ++i) w.f64(model.mean(i));
  for (Eigen::Index j = 0; j < model.basis.cols(); ++j) {
    for (Eigen::Index i = 0; i < model.basis.rows(); ++i) w.f64(model.basis(i, j));
  }
  for (Eigen::Index i = 0; i < model.variance_ratios.size(); ++i) w.f64(model.variance_ratios(i));
  const std::uint64_t checksum = crc64(w.bytes());
  w.u64(checksum);
  return w.take();
}

CariPcaModel deserialize_model(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 16, ErrorKind::Corruption, "model file truncated in header");
  require(std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()), ErrorKind::Format,
          "bad magic, not a CPCA model file");
  ByteReader r(bytes.subspan(4));
  const std::uint32_t version = r.u32();
  require(version == kModelFormatVersion, ErrorKind::Format,
          "unsupported model version " + std::to_string(version));
  const std::uint64_t n_v = r.u32();
  const std::uint64_t d = r.u32();
  const std::uint64_t dim = 3 * n_v;
  const std::uint64_t expected = 16 + 8 * (dim + dim * d + d) + 8;
  require(bytes.size() == expected, ErrorKind::Corruption,
          "model file has " + std::to_string(bytes.size()) + " bytes, header implies " + std::to_string(expected));
  const std::uint64_t stored = ByteReader(bytes.subspan(bytes.size() - 8)).u64();
  require(crc64(bytes.first(bytes.size() - 8)) == stored, ErrorKind::Corruption, "checksum mismatch");

  CariPcaModel model;
  const auto rows = static_cast<Eigen::Index>(dim);
  const auto cols = static_cast<Eigen::Index>(d);
  model.mean.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) model.mean(i) = r.f64();
  model.basis.resize(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) model.basis(i, j) = r.f64();
  }
  model.variance_ratios.resize(cols);
  for (Eigen::Index i = 0; i < cols; ++i) model.variance_ratios(i) = r.f64();
  return model;
}

std::filesystem::path sidecar_path(const std::filesystem::path& model_path) {
  return std::filesystem::path(model_path.string() + ".json");
}

void save_model(const CariPcaModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorKind::Io, "write failed for '" + path.string() + "'");
  }
  nlohmann::json sidecar;
  sidecar["format"] = "CPCA";
  sidecar["version"] = kModelFormatVersion;
  sidecar["n_v"] = model.num_vertices();
  sidecar["d"] = model.dims();
  sidecar["provenance"] = model.provenance;
  sidecar["total_variance"] = model.total_variance;
  sidecar["num_samples"] = model.num_samples;
  sidecar["degenerate"] = model.degenerate;
  nlohmann::json faces = nlohmann::json::array();
  for (Eigen::Index f = 0; f < model.faces.rows(); ++f) {
    faces.push_back({model.faces(f, 0), model.faces(f, 1), model.faces(f, 2)});
  }
  sidecar["faces"] = std::move(faces);
  std::ofstream out(sidecar_path(path));
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write sidecar for '" + path.string() + "'");
  out << sidecar.dump() << '\n';
}

CariPcaModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CariPcaModel model = deserialize_model(bytes);

  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    std::ifstream sin(side);
    nlohmann::json sidecar;
    try {
      sidecar = nlohmann::json::parse(sin);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Format, "sidecar '" + side.string() + "': " + e.what());
    }
    require(sidecar.value("n_v", -1) == model.num_vertices() && sidecar.value("d", -1) == model.dims(),
            ErrorKind::Format, "sidecar dimensions disagree with the model file");
    model.provenance = sidecar.value("provenance", std::string{});
    model.total_variance = sidecar.value("total_variance", 0.0);
    model.num_samples = sidecar.value("num_samples", 0);
    model.degenerate = sidecar.value("degenerate", false);
    if (sidecar.contains("faces")) {
      const auto& faces = sidecar.at("faces");
      model.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
      try {
        for (std::size_t f = 0; f < faces.size(); ++f) {
          for (int k = 0; k < 3; ++k) {
            model.faces(static_cast<Eigen::Index>(f), k) = faces.at(f).at(static_cast<std::size_t>(k)).get<int>();
          }
        }
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, "sidecar '" + side.string() + "' faces: " + e.what());
      }
    }
    validate(model.mean_mesh());
  }
  return model;
}

}  // namespace carimorph
