#include <doctest.h>

#include <sstream>

#include "carimorph/toy_gan.hpp"
#include "test_support.hpp"

using namespace carimorph;

namespace {

ToyTrainResult run(const ToyWorld& world, ToyConfig config, LossWeights weights) {
  config.weights = weights;
  return train_toy_gan(world.data, world.model, world.mean, weights, config);
}

}  // namespace

TEST_CASE("toy config: parsing, overrides and validation") {
  std::istringstream in("# comment\nsteps = 20\n  learning_rate=0.01  \nlambda_cari = 0\nseed = 7\n\nhidden = 0\n");
  const auto c = parse_toy_config(in);
  CHECK(c.steps == 20);
  CHECK(c.learning_rate == 0.01);
  CHECK(c.weights.lambda_cari == 0.0);
  CHECK(c.weights.lambda_cha == 2.0);
  CHECK(c.seed == 7);
  CHECK(c.hidden == 0);

  std::istringstream unknown("stepz = 3\n");
  CHECK_THROWS_AS(parse_toy_config(unknown), Error);
  std::istringstream bad_value("steps = many\n");
  CHECK_THROWS_AS(parse_toy_config(bad_value), Error);
  std::istringstream no_equals("steps 3\n");
  CHECK_THROWS_AS(parse_toy_config(no_equals), Error);

  ToyConfig invalid;
  invalid.learning_rate = -1;
  CHECK_THROWS_AS(invalid.validate(), Error);
  invalid = ToyConfig{};
  invalid.exaggeration_min = 3.0;
  CHECK_THROWS_AS(invalid.validate(), Error);

  const auto fixture = load_toy_config(testing::fixtures() / "toy.cfg");
  CHECK(fixture.steps == 500);
  CHECK_THROWS_AS(load_toy_config("/nonexistent/toy.cfg"), Error);
}

TEST_CASE("toy world: shapes and determinism") {
  ToyConfig c;
  c.identities = 30;
  const auto world = make_toy_world(c);
  CHECK(world.data.size() == 30);
  CHECK(world.data.reconstructions.rows() == 3 * world.mean.mesh.num_vertices());
  CHECK(world.data.real_coeffs.rows() == world.model.dims());
  CHECK(world.model.num_vertices() == world.mean.mesh.num_vertices());
  const auto again = make_toy_world(c);
  CHECK(again.data.features == world.data.features);
  CHECK(again.data.real_coeffs == world.data.real_coeffs);
}

TEST_CASE("toy trainer: bitwise deterministic for a seed") {
  ToyConfig c;
  c.identities = 40;
  c.steps = 60;
  const auto world = make_toy_world(c);
  const auto a = run(world, c, LossWeights{});
  const auto b = run(world, c, LossWeights{});
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].l_total == b.trace[i].l_total);
    CHECK(a.trace[i].l_adv_d == b.trace[i].l_adv_d);
  }
  CHECK(a.generator.weight == b.generator.weight);
  c.seed = 2;
  const auto other = run(make_toy_world(c), c, LossWeights{});
  CHECK(other.generator.weight != a.generator.weight);
}

TEST_CASE("toy trainer: trace csv") {
  std::vector<ToyTraceRow> rows{{0, 0.5, 0.25, 1, 0.125, 3}};
  std::ostringstream out;
  write_trace_csv(rows, out);
  CHECK(out.str() == "step,l_adv_d,l_adv_g,l_cha,l_cari,l_total\n0,0.5,0.25,1,0.125,3\n");
}

TEST_CASE("toy trainer: divergence is reported") {
  ToyConfig c;
  c.identities = 20;
  c.steps = 200;
  c.learning_rate = 1e12;
  c.init_scale = 1e6;
  const auto world = make_toy_world(c);
  try {
    run(world, c, LossWeights{});
    FAIL("expected a training error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Training);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("toy trainer: ablation ordering") {
  ToyConfig c;
  const auto world = make_toy_world(c);
  const auto full = run(world, c, LossWeights{2.0, 20.0});
  const auto no_cari = run(world, c, LossWeights{2.0, 0.0});
  const auto adv_only = run(world, c, LossWeights{0.0, 0.0});
  CHECK(full.trace.size() == static_cast<std::size_t>(c.steps));
  CHECK(full.final_metrics.mean_cosine > 0.9);
  CHECK(full.final_metrics.mean_ratio > 1.0);
  CHECK(full.final_metrics.mean_cosine > adv_only.final_metrics.mean_cosine);
  CHECK(full.final_metrics.mean_ratio > no_cari.final_metrics.mean_ratio);
  const auto reeval = evaluate_toy(full.generator, world.data, world.model, world.mean);
  CHECK(reeval.mean_cosine == full.final_metrics.mean_cosine);
}
