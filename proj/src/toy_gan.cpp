#include "carimorph/toy_gan.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "carimorph/obj_io.hpp"
#include "carimorph/synthetic.hpp"

namespace carimorph {
namespace {

MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * normal(rng);
  }
  return m;
}

// Adam over a flat parameter vector.
struct Adam {
  VectorXd m, v;
  double beta1, beta2, lr, eps;
  int t = 0;

  Adam(Eigen::Index n, const ToyConfig& c)
      : m(VectorXd::Zero(n)), v(VectorXd::Zero(n)), beta1(c.beta1), beta2(c.beta2), lr(c.learning_rate),
        eps(c.adam_epsilon) {}

  void step(VectorXd& params, const VectorXd& grad) {
    ++t;
    m = beta1 * m + (1 - beta1) * grad;
    v = beta2 * v + (1 - beta2) * grad.cwiseAbs2();
    const double c1 = 1 - std::pow(beta1, t);
    const double c2 = 1 - std::pow(beta2, t);
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

VectorXd pack(const ToyGenerator& g) {
  VectorXd flat(g.weight.size() + g.bias.size());
  flat << g.weight.reshaped(), g.bias;
  return flat;
}

void unpack(const VectorXd& flat, ToyGenerator& g) {
  g.weight.reshaped() = flat.head(g.weight.size());
  g.bias = flat.tail(g.bias.size());
}

VectorXd pack(const ToyDiscriminator& d) {
  VectorXd flat(d.hidden_weight.size() + d.hidden_bias.size() + d.out_weight.size() + 1);
  flat << d.hidden_weight.reshaped(), d.hidden_bias, d.out_weight, d.out_bias;
  return flat;
}

void unpack(const VectorXd& flat, ToyDiscriminator& d) {
  Eigen::Index at = 0;
  d.hidden_weight.reshaped() = flat.segment(at, d.hidden_weight.size());
  at += d.hidden_weight.size();
  d.hidden_bias = flat.segment(at, d.hidden_bias.size());
  at += d.hidden_bias.size();
  d.out_weight = flat.segment(at, d.out_weight.size());
  at += d.out_weight.size();
  d.out_bias = flat(at);
}

struct DiscriminatorEval {
  double score;
  VectorXd hidden;  // tanh activations (or the input when affine)
};

DiscriminatorEval forward(const ToyDiscriminator& d, const VectorXd& c) {
  if (d.affine()) return {d.out_weight.dot(c) + d.out_bias, c};
  VectorXd h = (d.hidden_weight * c + d.hidden_bias).array().tanh().matrix();
  return {d.out_weight.dot(h) + d.out_bias, std::move(h)};
}

// Accumulates upstream * dD/dparams into grad (packed layout).
void accumulate_param_grad(const ToyDiscriminator& d, const VectorXd& c, const DiscriminatorEval& e, double upstream,
                           VectorXd& grad) {
  Eigen::Index at = 0;
  if (!d.affine()) {
    const VectorXd delta = upstream * d.out_weight.cwiseProduct((1.0 - e.hidden.array().square()).matrix());
    grad.segment(at, d.hidden_weight.size()) += (delta * c.transpose()).reshaped();
    at += d.hidden_weight.size();
    grad.segment(at, d.hidden_bias.size()) += delta;
    at += d.hidden_bias.size();
  }
  grad.segment(at, d.out_weight.size()) += upstream * e.hidden;
  at += d.out_weight.size();
  grad(at) += upstream;
}

VectorXd input_grad(const ToyDiscriminator& d, const DiscriminatorEval& e) {
  if (d.affine()) return d.out_weight;
  return d.hidden_weight.transpose() * d.out_weight.cwiseProduct((1.0 - e.hidden.array().square()).matrix());
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

double ToyDiscriminator::operator()(const VectorXd& coeffs) const { return forward(*this, coeffs).score; }

bool ToyDiscriminator::finite() const {
  return hidden_weight.allFinite() && hidden_bias.allFinite() && out_weight.allFinite() && std::isfinite(out_bias);
}

void ToyConfig::set(const std::string& key, const std::string& value) {
  auto real = [&] {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == value.size() && !value.empty(), ErrorKind::Format, "'" + key + "': expected a number, got '" + value + "'");
    return v;
  };
  auto integer = [&] {
    const double v = real();
    require(v == std::floor(v), ErrorKind::Format, "'" + key + "': expected an integer");
    return static_cast<long long>(v);
  };
  if (key == "identities") identities = static_cast<int>(integer());
  else if (key == "modes") modes = static_cast<int>(integer());
  else if (key == "rings") rings = static_cast<int>(integer());
  else if (key == "segments") segments = static_cast<int>(integer());
  else if (key == "displacement") displacement = real();
  else if (key == "exaggeration_min") exaggeration_min = real();
  else if (key == "exaggeration_max") exaggeration_max = real();
  else if (key == "caricature_noise") caricature_noise = real();
  else if (key == "steps") steps = static_cast<int>(integer());
  else if (key == "learning_rate") learning_rate = real();
  else if (key == "beta1") beta1 = real();
  else if (key == "beta2") beta2 = real();
  else if (key == "adam_epsilon") adam_epsilon = real();
  else if (key == "hidden") hidden = static_cast<int>(integer());
  else if (key == "init_scale") init_scale = real();
  else if (key == "lambda_cha") weights.lambda_cha = real();
  else if (key == "lambda_cari") weights.lambda_cari = real();
  else if (key == "seed") seed = static_cast<std::uint64_t>(integer());
  else fail(ErrorKind::Format, "unknown toy config key '" + key + "'");
}

void ToyConfig::validate() const {
  weights.validate();
  require(identities >= 2 && modes >= 1 && rings >= 2 && segments >= 3, ErrorKind::InvalidArgument,
          "toy world needs identities >= 2, modes >= 1, rings >= 2, segments >= 3");
  require(identities > modes, ErrorKind::InvalidArgument, "need more identities than modes");
  require(displacement > 0 && exaggeration_min > 0 && exaggeration_max >= exaggeration_min && caricature_noise >= 0,
          ErrorKind::InvalidArgument, "bad toy world scales");
  require(steps >= 0 && learning_rate > 0 && beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && adam_epsilon > 0,
          ErrorKind::InvalidArgument, "bad optimizer settings");
  require(hidden >= 0 && init_scale >= 0, ErrorKind::InvalidArgument, "bad network settings");
}

ToyConfig parse_toy_config(std::istream& in, ToyConfig base) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::Format, "line " + std::to_string(line_no) + ": expected key = value");
    try {
      base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.message());
    }
  }
  return base;
}

ToyConfig load_toy_config(const std::filesystem::path& path, ToyConfig base) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path.string() + "'");
  return parse_toy_config(in, std::move(base));
}

ToyWorld make_toy_world(const ToyConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> exaggeration(config.exaggeration_min, config.exaggeration_max);

  ToyWorld world;
  world.mean = synthetic::default_mean_head(config.rings, config.segments);
  const auto& base = world.mean.mesh;
  const MatrixXd modes = synthetic::smooth_modes(base, config.modes, config.seed ^ 0x9e3779b97f4a7c15ULL);
  // Decreasing per-mode spread with E|dP|^2 = displacement^2.
  VectorXd sigma(config.modes);
  for (int k = 0; k < config.modes; ++k) sigma(k) = 1.0 / (1.0 + 0.3 * k);
  sigma *= config.displacement / sigma.norm();

  const int n = config.identities;
  world.data.features.resize(config.modes, n);
  world.data.reconstructions.resize(base.vertices.size(), n);
  for (int i = 0; i < n; ++i) {
    VectorXd z(config.modes);
    for (int k = 0; k < config.modes; ++k) z(k) = normal(rng);
    world.data.features.col(i) = z;
    world.data.reconstructions.col(i) = modes * sigma.cwiseProduct(z);
  }

  std::vector<HeadMesh> caricatures;
  caricatures.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    VectorXd z(config.modes);
    for (int k = 0; k < config.modes; ++k) z(k) = normal(rng);
    VectorXd coords = base.coords() + exaggeration(rng) * (modes * sigma.cwiseProduct(z));
    for (Eigen::Index j = 0; j < coords.size(); ++j) coords(j) += config.caricature_noise * normal(rng);
    caricatures.push_back(HeadMesh::from_coords(coords, base.faces));
  }
  world.model = fit_pca(caricatures, config.modes);
  world.model.provenance = "toy caricature corpus, seed " + std::to_string(config.seed);
  world.data.real_coeffs.resize(config.modes, n);
  for (int i = 0; i < n; ++i) world.data.real_coeffs.col(i) = encode(world.model, caricatures[static_cast<std::size_t>(i)]).values;
  return world;
}

MatrixXd generated_features(const ToyGenerator& generator, const ToyDataset& data, const CariPcaModel& model,
                            const MeanHead& mean) {
  require(model.mean.size() == mean.size(), ErrorKind::ShapeMismatch, "model and mean head differ in size");
  const MatrixXd coeffs = (generator.weight * data.features).colwise() + generator.bias;
  return (model.basis * coeffs).colwise() + (model.mean - mean.coords());
}

ToyMetrics evaluate_toy(const ToyGenerator& generator, const ToyDataset& data, const CariPcaModel& model,
                        const MeanHead& mean) {
  const MatrixXd d_gen = generated_features(generator, data, model, mean);
  ToyMetrics m;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    m.mean_cosine += cosine_identity(d_gen.col(i), data.reconstructions.col(i));
    m.mean_ratio += d_gen.col(i).norm() / data.reconstructions.col(i).norm();
  }
  m.mean_cosine /= static_cast<double>(data.size());
  m.mean_ratio /= static_cast<double>(data.size());
  return m;
}

ToyTrainResult train_toy_gan(const ToyDataset& data, const CariPcaModel& model, const MeanHead& mean,
                             const LossWeights& weights, const ToyConfig& config) {
  config.validate();
  weights.validate();
  const Eigen::Index d = model.dims();
  const Eigen::Index k = data.features.rows();
  const Eigen::Index n = data.size();
  require(n > 0 && data.real_coeffs.cols() > 0, ErrorKind::Batch, "empty toy dataset");
  require(data.reconstructions.cols() == n && data.reconstructions.rows() == model.mean.size(),
          ErrorKind::ShapeMismatch, "reconstructions do not match the model");
  require(data.real_coeffs.rows() == d, ErrorKind::ShapeMismatch, "real coefficients do not match the model");

  std::mt19937_64 rng(config.seed);
  ToyTrainResult result;
  auto& gen = result.generator;
  auto& disc = result.discriminator;
  gen.weight = gaussian_matrix(d, k, config.init_scale, rng);
  gen.bias = VectorXd::Zero(d);
  if (config.hidden > 0) {
    disc.hidden_weight = gaussian_matrix(config.hidden, d, 1.0 / std::sqrt(static_cast<double>(d)), rng);
    disc.hidden_bias = VectorXd::Zero(config.hidden);
    disc.out_weight = gaussian_matrix(config.hidden, 1, 1.0 / std::sqrt(static_cast<double>(config.hidden)), rng);
  } else {
    disc.out_weight = gaussian_matrix(d, 1, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  }

  VectorXd gen_params = pack(gen);
  VectorXd disc_params = pack(disc);
  Adam gen_opt(gen_params.size(), config);
  Adam disc_opt(disc_params.size(), config);
  const VectorXd offset = model.mean - mean.coords();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_m = 1.0 / static_cast<double>(data.real_coeffs.cols());

  for (int step = 0; step < config.steps; ++step) {
    ToyTraceRow row;
    row.step = step;

    // Discriminator update.
    MatrixXd fake = (gen.weight * data.features).colwise() + gen.bias;
    VectorXd disc_grad = VectorXd::Zero(disc_params.size());
    std::vector<double> fake_scores(static_cast<std::size_t>(n)), real_scores(static_cast<std::size_t>(data.real_coeffs.cols()));
    for (Eigen::Index i = 0; i < n; ++i) {
      const VectorXd c = fake.col(i);
      const auto e = forward(disc, c);
      fake_scores[static_cast<std::size_t>(i)] = e.score;
      accumulate_param_grad(disc, c, e, 2.0 * e.score * inv_n, disc_grad);
    }
    for (Eigen::Index j = 0; j < data.real_coeffs.cols(); ++j) {
      const VectorXd c = data.real_coeffs.col(j);
      const auto e = forward(disc, c);
      real_scores[static_cast<std::size_t>(j)] = e.score;
      accumulate_param_grad(disc, c, e, -2.0 * (1.0 - e.score) * inv_m, disc_grad);
    }
    row.l_adv_d = adv_loss_discriminator<double>(fake_scores, real_scores);
    disc_opt.step(disc_params, disc_grad);
    unpack(disc_params, disc);

    // Generator update against the refreshed discriminator.
    MatrixXd coeff_grad(d, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const VectorXd c = fake.col(i);
      const auto e = forward(disc, c);
      fake_scores[static_cast<std::size_t>(i)] = e.score;
      const VectorXd d_gen = model.basis * c + offset;
      const auto d_rec = data.reconstructions.col(i);
      row.l_cha += character_loss(d_gen, d_rec) * inv_n;
      row.l_cari += caricature_loss(d_gen, d_rec) * inv_n;
      coeff_grad.col(i) = -2.0 * (1.0 - e.score) * inv_n * input_grad(disc, e);
      if (weights.lambda_cha != 0.0 || weights.lambda_cari != 0.0) {
        coeff_grad.col(i) += model.basis.transpose() * loss_gradients(d_gen, d_rec, weights) * inv_n;
      }
    }
    row.l_adv_g = adv_loss_generator<double>(fake_scores);
    row.l_total = row.l_adv_g + weights.lambda_cha * row.l_cha + weights.lambda_cari * row.l_cari;
    VectorXd gen_grad(gen_params.size());
    gen_grad << (coeff_grad * data.features.transpose()).reshaped(), coeff_grad.rowwise().sum();
    require(std::isfinite(row.l_adv_d) && std::isfinite(row.l_total) && gen_grad.allFinite() && disc_grad.allFinite(),
            ErrorKind::Training, "training diverged at step " + std::to_string(step));
    gen_opt.step(gen_params, gen_grad);
    unpack(gen_params, gen);
    require(gen.finite() && disc.finite(), ErrorKind::Training,
            "non-finite parameters after step " + std::to_string(step));
    result.trace.push_back(row);
  }
  result.final_metrics = evaluate_toy(gen, data, model, mean);
  return result;
}

void write_trace_csv(const std::vector<ToyTraceRow>& trace, std::ostream& out) {
  out << "step,l_adv_d,l_adv_g,l_cha,l_cari,l_total\n";
  for (const auto& r : trace) {
    out << r.step << ',' << format_double(r.l_adv_d) << ',' << format_double(r.l_adv_g) << ','
        << format_double(r.l_cha) << ',' << format_double(r.l_cari) << ',' << format_double(r.l_total) << '\n';
  }
}

}  // namespace carimorph
