#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "carimorph/exaggerate.hpp"
#include "carimorph/losses.hpp"
#include "carimorph/pca.hpp"

namespace carimorph {

/// Linear map from an identity feature to caricature PCA coefficients: c' = W z + b.
struct ToyGenerator {
  MatrixXd weight;  // d x k
  VectorXd bias;    // d

  VectorXd operator()(const VectorXd& feature) const { return weight * feature + bias; }
  bool finite() const { return weight.allFinite() && bias.allFinite(); }
};

/// D(c) = v . tanh(A c + a) + e, or v . c + e when hidden == 0.
struct ToyDiscriminator {
  MatrixXd hidden_weight;  // h x d (empty when affine)
  VectorXd hidden_bias;    // h
  VectorXd out_weight;     // h, or d when affine
  double out_bias = 0.0;

  bool affine() const { return hidden_weight.size() == 0; }
  double operator()(const VectorXd& coeffs) const;
  bool finite() const;
};

struct ToyDataset {
  MatrixXd features;         // k x N identity features
  MatrixXd reconstructions;  // 3n_v x N feature vectors H(p) - mean
  MatrixXd real_coeffs;      // d x M coefficients of real caricatures

  Eigen::Index size() const { return features.cols(); }
};

struct ToyConfig {
  // synthetic world
  int identities = 200;
  int modes = 6;
  int rings = 8;
  int segments = 12;
  double displacement = 0.5;  // expected norm of H(p) - mean
  double exaggeration_min = 1.5;
  double exaggeration_max = 2.0;
  double caricature_noise = 1e-3;
  // trainer
  int steps = 500;
  double learning_rate = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int hidden = 16;
  double init_scale = 0.01;
  LossWeights weights;
  std::uint64_t seed = 1;

  void set(const std::string& key, const std::string& value);
  void validate() const;
};

/// key = value lines, "#" comments allowed. Unknown keys are a format error.
ToyConfig parse_toy_config(std::istream& in, ToyConfig base = {});
ToyConfig load_toy_config(const std::filesystem::path& path, ToyConfig base = {});

struct ToyWorld {
  CariPcaModel model;
  MeanHead mean;
  ToyDataset data;
};

ToyWorld make_toy_world(const ToyConfig& config);

struct ToyTraceRow {
  int step = 0;
  double l_adv_d = 0, l_adv_g = 0, l_cha = 0, l_cari = 0, l_total = 0;
};

struct ToyMetrics {
  double mean_cosine = 0;
  double mean_ratio = 0;  // mean of |dG| / |dP|
};

struct ToyTrainResult {
  ToyGenerator generator;
  ToyDiscriminator discriminator;
  std::vector<ToyTraceRow> trace;
  ToyMetrics final_metrics;
};

/// dG = model.mean + H G(z) - mean for every identity, one column each.
MatrixXd generated_features(const ToyGenerator& generator, const ToyDataset& data, const CariPcaModel& model,
                            const MeanHead& mean);
ToyMetrics evaluate_toy(const ToyGenerator& generator, const ToyDataset& data, const CariPcaModel& model,
                        const MeanHead& mean);

ToyTrainResult train_toy_gan(const ToyDataset& data, const CariPcaModel& model, const MeanHead& mean,
                             const LossWeights& weights, const ToyConfig& config);

void write_trace_csv(const std::vector<ToyTraceRow>& trace, std::ostream& out);

}  // namespace carimorph
