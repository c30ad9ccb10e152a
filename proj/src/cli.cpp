#include "carimorph/cli.hpp"

#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "carimorph/alignment.hpp"
#include "carimorph/color_io.hpp"
#include "carimorph/log.hpp"
#include "carimorph/nicp.hpp"
#include "carimorph/obj_io.hpp"
#include "carimorph/pca.hpp"
#include "carimorph/scoring.hpp"
#include "carimorph/service.hpp"
#include "carimorph/texture.hpp"
#include "carimorph/toy_gan.hpp"

namespace carimorph {
namespace {

namespace fs = std::filesystem;

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write '" + path.string() + "'");
  return out;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path.string() + "'");
  return in;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for '" + path.string() + "'");
}

std::vector<fs::path> collect_meshes(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(in)) {
        if (entry.is_regular_file() && entry.path().extension() == ".obj") found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      require(fs::exists(in), ErrorKind::Io, "no such file or directory '" + in + "'");
      files.emplace_back(in);
    }
  }
  return files;
}

VectorXd load_vector(const fs::path& path) {
  auto in = open_input(path);
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == token.size(), ErrorKind::Format, path.string() + ": bad number '" + token + "'");
    values.push_back(v);
  }
  return Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void save_vector(const VectorXd& v, const fs::path& path) {
  auto out = open_output(path);
  for (Eigen::Index i = 0; i < v.size(); ++i) out << format_double(v(i)) << '\n';
  finish(out, path);
}

Points2<double> load_points2(const fs::path& path) {
  const VectorXd flat = load_vector(path);
  require(flat.size() % 2 == 0, ErrorKind::Format, path.string() + ": expected 'x y' pairs");
  Points2<double> p(flat.size() / 2, 2);
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) << flat(2 * i), flat(2 * i + 1);
  return p;
}

struct PcaBuildArgs {
  std::vector<std::string> inputs;
  int d = kDefaultComponents;
  std::string out;
  bool raw = false;
  std::string landmarks;
  std::string mean_out;
  std::string provenance;
};

void pca_build(const PcaBuildArgs& a, std::ostream& out) {
  const auto files = collect_meshes(a.inputs);
  require(files.size() >= 2, ErrorKind::InvalidArgument, "need at least 2 meshes, found " + std::to_string(files.size()));
  std::vector<HeadMesh> meshes;
  meshes.reserve(files.size());
  for (const auto& f : files) meshes.push_back(load_mesh(f));
  if (!a.raw) {
    for (auto& m : meshes) m = center_and_scale(m).first;
    if (!a.landmarks.empty()) {
      const auto lm = load_landmarks(a.landmarks);
      for (std::size_t i = 1; i < meshes.size(); ++i) meshes[i] = rigid_align(meshes[i], meshes[0], lm).aligned;
    }
  }
  log::info("fitting " + std::to_string(meshes.size()) + " meshes with d = " + std::to_string(a.d));
  auto model = fit_pca(meshes, a.d);
  model.provenance = a.provenance.empty() ? "carimorph pca build (" + std::to_string(meshes.size()) + " meshes)" : a.provenance;
  save_model(model, a.out);
  if (!a.mean_out.empty()) save_mesh(model.mean_mesh(), a.mean_out);

  out << "meshes " << meshes.size() << "\nvertices " << model.num_vertices() << "\ncomponents " << model.dims()
      << "\nexplained_variance " << format_double(model.variance_ratios.sum()) << '\n';
  if (model.degenerate) out << "warning: zero total variance (degenerate corpus)\n";
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(10, model.dims()); ++i) {
    out << "ratio[" << i << "] " << format_double(model.variance_ratios(i)) << '\n';
  }
}

struct ExaggerateArgs {
  std::string model, mean, head, caricature, coeffs, out;
  double u1 = 1.0, u2 = 0.0;
};

void run_exaggerate(const ExaggerateArgs& a) {
  const auto model = load_model(a.model);
  const MeanHead mean{load_mesh(a.mean)};
  const HeadMesh head = load_mesh(a.head);
  HeadMesh caricature;
  if (!a.caricature.empty()) {
    caricature = load_mesh(a.caricature);
  } else if (!a.coeffs.empty()) {
    caricature = decode(model, PcaCoeffs{load_vector(a.coeffs)});
  } else {
    caricature = decode(model, encode(model, head));
  }
  save_mesh(blend_heads(mean, caricature, head, a.u1, a.u2), a.out);
}

struct RegisterArgs {
  std::string template_mesh, target, landmarks, out, trace;
  int steps = 8;
  double stiffness_from = 50, stiffness_to = 0.2, landmark_from = 5, landmark_to = 0;
  int inner = 10;
};

void run_register(const RegisterArgs& a, std::ostream& out) {
  const auto tmpl = load_mesh(a.template_mesh);
  const auto target = load_mesh(a.target);
  std::vector<LandmarkPair> pairs;
  if (!a.landmarks.empty()) pairs = load_landmark_pairs(a.landmarks);
  auto config = NicpConfig::schedule(a.steps, a.stiffness_from, a.stiffness_to, a.landmark_from, a.landmark_to);
  config.inner_iteration_cap = a.inner;
  const auto result = nicp_register(tmpl, target, pairs, config);
  save_mesh(result.deformed_template, a.out);
  if (!a.trace.empty()) {
    auto trace = open_output(a.trace);
    trace << "outer,inner,objective\n";
    for (std::size_t s = 0; s < result.objective_trace.size(); ++s) {
      for (std::size_t k = 0; k < result.objective_trace[s].size(); ++k) {
        trace << s << ',' << k << ',' << format_double(result.objective_trace[s][k]) << '\n';
      }
    }
    finish(trace, a.trace);
  }
  const double diag = bbox_diagonal(target.vertices);
  out << "final_rmse " << format_double(result.residual_trace.back()) << "\nrelative_rmse "
      << format_double(result.residual_trace.back() / diag) << "\ninner_iterations " << result.total_inner_iterations
      << '\n';
}

struct TextureCompleteArgs {
  std::string mesh, colors, out;
  std::uint64_t seed = 0;
  bool no_noise = false;
};

void texture_complete(const TextureCompleteArgs& a) {
  const auto mesh = load_mesh(a.mesh);
  const auto partial = load_colored_mesh(a.colors);
  require(partial.colors.size() == mesh.num_vertices(), ErrorKind::ShapeMismatch,
          "color file has " + std::to_string(partial.colors.size()) + " vertices, mesh has " +
              std::to_string(mesh.num_vertices()));
  auto filled = complete_vertex_colors(mesh, partial.colors);
  if (!a.no_noise) filled = add_matched_noise(filled, partial.colors.known, a.seed);
  filled.known.assign(filled.known.size(), true);
  save_colored_mesh(mesh, filled, a.out);
}

struct TextureUvArgs {
  std::string mesh, landmarks, points, out;
  int width = 0, height = 0;
};

void texture_uv(const TextureUvArgs& a, std::ostream& out) {
  const auto mesh = load_mesh(a.mesh);
  const auto lm = load_landmarks(a.landmarks);
  lm.validate(mesh.num_vertices());
  const auto pixels = load_points2(a.points);
  require(pixels.rows() == static_cast<Eigen::Index>(lm.indices.size()), ErrorKind::ShapeMismatch,
          "landmark and 2D point counts differ");
  Points<double> points3d(pixels.rows(), 3);
  for (Eigen::Index i = 0; i < pixels.rows(); ++i) points3d.row(i) = mesh.vertices.row(lm.indices[static_cast<std::size_t>(i)]);
  const auto fit = estimate_projection(points3d, pixels);
  const auto uv = compute_uv(mesh, fit.projection, a.width, a.height);
  save_mesh(with_uvs(mesh, uv), a.out);
  const auto valid = std::count(uv.valid.begin(), uv.valid.end(), true);
  out << "reprojection_rmse " << format_double(fit.rms_error) << "\nvalid_vertices " << valid << " / "
      << mesh.num_vertices() << '\n';
}

struct ScoreArgs {
  std::string votes, out;
  std::int64_t s_max = kDefaultMaxVotes;
};

void run_score(const ScoreArgs& a, std::ostream& out) {
  auto in = open_input(a.votes);
  const auto tallies = parse_vote_csv(in, a.s_max);
  require(!tallies.empty(), ErrorKind::Tally, "no votes in '" + a.votes + "'");
  std::vector<std::map<std::string, double>> per_photo;
  for (const auto& [photo, tally] : tallies) per_photo.push_back(score_values(rank_score(tally)));
  const auto averaged = average_scores(per_photo);
  if (a.out.empty()) {
    write_score_csv(averaged, out);
  } else {
    auto file = open_output(a.out);
    write_score_csv(averaged, file);
    finish(file, a.out);
  }
}

struct TrainArgs {
  std::string config, trace;
  std::optional<int> steps, hidden;
  std::optional<double> lr, lambda_cha, lambda_cari;
  std::optional<std::uint64_t> seed;
};

void run_train(const TrainArgs& a, std::ostream& out) {
  ToyConfig config = a.config.empty() ? ToyConfig{} : load_toy_config(a.config);
  if (a.steps) config.steps = *a.steps;
  if (a.hidden) config.hidden = *a.hidden;
  if (a.lr) config.learning_rate = *a.lr;
  if (a.lambda_cha) config.weights.lambda_cha = *a.lambda_cha;
  if (a.lambda_cari) config.weights.lambda_cari = *a.lambda_cari;
  if (a.seed) config.seed = *a.seed;
  const auto world = make_toy_world(config);
  const auto result = train_toy_gan(world.data, world.model, world.mean, config.weights, config);
  if (!a.trace.empty()) {
    auto file = open_output(a.trace);
    write_trace_csv(result.trace, file);
    finish(file, a.trace);
  }
  out << "steps " << config.steps << "\nmean_cosine " << format_double(result.final_metrics.mean_cosine)
      << "\nmean_ratio " << format_double(result.final_metrics.mean_ratio) << '\n';
}

struct ServeArgs {
  std::string model, mean, host = "127.0.0.1";
  std::vector<std::string> heads;
  int port = 8080;
};

Service* g_service = nullptr;

void run_serve(const ServeArgs& a, std::ostream& out) {
  std::vector<HeadSource> sources;
  for (const auto& h : a.heads) sources.push_back(parse_head_source(h));
  Service service(load_session(a.model, a.mean, sources));
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->stop();
  });
  out << "serving on " << a.host << ':' << a.port << std::endl;
  service.run(a.host, a.port);
  g_service = nullptr;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"3D caricature morphable-model engine", "carimorph"};
  app.require_subcommand(1);

  auto* pca = app.add_subcommand("pca", "Build and apply the caricature PCA model");
  pca->require_subcommand(1);
  PcaBuildArgs build;
  auto* pca_build_cmd = pca->add_subcommand("build", "Fit a PCA model to a mesh corpus");
  pca_build_cmd->add_option("--in", build.inputs, "Corpus directory or mesh files")->required();
  pca_build_cmd->add_option("--d", build.d, "Number of components")->check(CLI::PositiveNumber);
  pca_build_cmd->add_option("--out", build.out, "Model file")->required();
  pca_build_cmd->add_flag("--raw", build.raw, "Fit the meshes as given, without centering, scaling or alignment");
  pca_build_cmd->add_option("--landmarks", build.landmarks, "Landmark index file; meshes are rigidly aligned to the first");
  pca_build_cmd->add_option("--mean-out", build.mean_out, "Also write the model mean as OBJ");
  pca_build_cmd->add_option("--provenance", build.provenance, "Provenance string stored in the sidecar");

  std::string enc_model, enc_mesh, enc_out;
  auto* pca_encode_cmd = pca->add_subcommand("encode", "Project a mesh onto the model");
  pca_encode_cmd->add_option("--model", enc_model)->required();
  pca_encode_cmd->add_option("--mesh", enc_mesh)->required();
  pca_encode_cmd->add_option("--out", enc_out, "Coefficient file, one value per line")->required();

  std::string dec_model, dec_coeffs, dec_out;
  auto* pca_decode_cmd = pca->add_subcommand("decode", "Reconstruct a mesh from coefficients");
  pca_decode_cmd->add_option("--model", dec_model)->required();
  pca_decode_cmd->add_option("--coeffs", dec_coeffs)->required();
  pca_decode_cmd->add_option("--out", dec_out)->required();

  ExaggerateArgs ex;
  auto* exaggerate_cmd = app.add_subcommand("exaggerate", "Two-parameter caricature control");
  exaggerate_cmd->add_option("--model", ex.model)->required();
  exaggerate_cmd->add_option("--mean", ex.mean, "Normal-space mean head")->required();
  exaggerate_cmd->add_option("--head", ex.head, "Reconstructed head H(p)")->required();
  auto* car_opt = exaggerate_cmd->add_option("--caricature", ex.caricature, "Generated caricature G(p)");
  exaggerate_cmd->add_option("--coeffs", ex.coeffs, "Caricature PCA coefficients")->excludes(car_opt);
  exaggerate_cmd->add_option("--u1", ex.u1, "Weight of the caricature offset");
  exaggerate_cmd->add_option("--u2", ex.u2, "Weight of the head offset");
  exaggerate_cmd->add_option("--out", ex.out)->required();

  RegisterArgs reg;
  auto* register_cmd = app.add_subcommand("register", "Non-rigid ICP of a template onto a target");
  register_cmd->add_option("--template", reg.template_mesh)->required();
  register_cmd->add_option("--target", reg.target)->required();
  register_cmd->add_option("--landmarks", reg.landmarks, "Lines 'template_index tx ty tz'");
  register_cmd->add_option("--steps", reg.steps)->check(CLI::PositiveNumber);
  register_cmd->add_option("--stiffness-from", reg.stiffness_from);
  register_cmd->add_option("--stiffness-to", reg.stiffness_to);
  register_cmd->add_option("--landmark-from", reg.landmark_from);
  register_cmd->add_option("--landmark-to", reg.landmark_to);
  register_cmd->add_option("--inner", reg.inner, "Inner iteration cap")->check(CLI::PositiveNumber);
  register_cmd->add_option("--trace", reg.trace, "Objective trace CSV");
  register_cmd->add_option("--out", reg.out)->required();

  auto* texture = app.add_subcommand("texture", "Texture projection and color completion");
  texture->require_subcommand(1);
  TextureCompleteArgs tc;
  auto* complete_cmd = texture->add_subcommand("complete", "Fill unknown vertex colors");
  complete_cmd->add_option("--mesh", tc.mesh)->required();
  complete_cmd->add_option("--colors", tc.colors, "Partial colors (.ply or .obj)")->required();
  complete_cmd->add_option("--seed", tc.seed, "Noise seed");
  complete_cmd->add_flag("--no-noise", tc.no_noise, "Skip matched noise");
  complete_cmd->add_option("--out", tc.out)->required();
  TextureUvArgs tu;
  auto* uv_cmd = texture->add_subcommand("uv", "Fit a camera from landmarks and write UVs");
  uv_cmd->add_option("--mesh", tu.mesh)->required();
  uv_cmd->add_option("--landmarks", tu.landmarks, "Landmark vertex indices")->required();
  uv_cmd->add_option("--points", tu.points, "Matching 2D pixel positions, 'x y' per line")->required();
  uv_cmd->add_option("--width", tu.width)->required()->check(CLI::PositiveNumber);
  uv_cmd->add_option("--height", tu.height)->required()->check(CLI::PositiveNumber);
  uv_cmd->add_option("--out", tu.out)->required();

  ScoreArgs sc;
  auto* score_cmd = app.add_subcommand("score", "Rank scores from vote tallies");
  score_cmd->add_option("--votes", sc.votes, "CSV photo_id,candidate_id,votes")->required();
  score_cmd->add_option("--s-max", sc.s_max, "Votes per photo")->check(CLI::PositiveNumber);
  score_cmd->add_option("--out", sc.out, "Output CSV (default stdout)");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train-toy", "Train the toy generator on synthetic data");
  train_cmd->add_option("--config", tr.config, "key = value file");
  train_cmd->add_option("--steps", tr.steps);
  train_cmd->add_option("--hidden", tr.hidden);
  train_cmd->add_option("--lr", tr.lr);
  train_cmd->add_option("--lambda-cha", tr.lambda_cha);
  train_cmd->add_option("--lambda-cari", tr.lambda_cari);
  train_cmd->add_option("--seed", tr.seed);
  train_cmd->add_option("--trace", tr.trace, "Loss trace CSV");

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP service for the studio");
  serve_cmd->add_option("--model", sv.model)->required();
  serve_cmd->add_option("--mean", sv.mean)->required();
  serve_cmd->add_option("--head", sv.heads, "id=head.obj[:caricature.obj], repeatable");
  serve_cmd->add_option("--host", sv.host);
  serve_cmd->add_option("--port", sv.port)->check(CLI::Range(0, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*pca_build_cmd) pca_build(build, out);
    else if (*pca_encode_cmd) save_vector(encode(load_model(enc_model), load_mesh(enc_mesh)).values, enc_out);
    else if (*pca_decode_cmd) save_mesh(decode(load_model(dec_model), PcaCoeffs{load_vector(dec_coeffs)}), dec_out);
    else if (*exaggerate_cmd) run_exaggerate(ex);
    else if (*register_cmd) run_register(reg, out);
    else if (*complete_cmd) texture_complete(tc);
    else if (*uv_cmd) texture_uv(tu, out);
    else if (*score_cmd) run_score(sc, out);
    else if (*train_cmd) run_train(tr, out);
    else if (*serve_cmd) run_serve(sv, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace carimorph
