#include <doctest.h>

#include <chrono>
#include <sstream>

#include "carimorph/kdtree.hpp"
#include "carimorph/nicp.hpp"
#include "carimorph/synthetic.hpp"
#include "test_support.hpp"

using namespace carimorph;

namespace {

std::vector<LandmarkPair> pairs_for(const HeadMesh& tmpl, const HeadMesh& target) {
  std::vector<LandmarkPair> pairs;
  for (int i : synthetic::key_landmarks(tmpl).indices) pairs.push_back({i, target.vertices.row(i).transpose()});
  return pairs;
}

double nearest_rmse(const HeadMesh& moved, const HeadMesh& target) {
  const KdTree3 tree(target.vertices);
  double sum = 0;
  for (Eigen::Index i = 0; i < moved.num_vertices(); ++i) {
    const Eigen::Vector3d q = moved.vertices.row(i).transpose();
    sum += (tree.points().row(tree.nearest(q).index).transpose() - q).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(moved.num_vertices()));
}

}  // namespace

TEST_CASE("nicp: default schedule shape") {
  const auto c = NicpConfig::schedule();
  REQUIRE(c.stiffness_schedule.size() == 8);
  CHECK(c.stiffness_schedule.front() == doctest::Approx(50.0));
  CHECK(c.stiffness_schedule.back() == doctest::Approx(0.2));
  CHECK(c.landmark_weight_schedule.front() == 5.0);
  CHECK(c.landmark_weight_schedule.back() == 0.0);
  for (std::size_t k = 1; k < c.stiffness_schedule.size(); ++k) {
    CHECK(c.stiffness_schedule[k] < c.stiffness_schedule[k - 1]);
    CHECK(c.stiffness_schedule[k] / c.stiffness_schedule[k - 1] ==
          doctest::Approx(c.stiffness_schedule[1] / c.stiffness_schedule[0]));
  }
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("nicp: invalid configurations") {
  auto c = NicpConfig::schedule();
  c.landmark_weight_schedule.back() = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = NicpConfig::schedule();
  std::swap(c.stiffness_schedule[0], c.stiffness_schedule[1]);
  CHECK_THROWS_AS(c.validate(), Error);
  c = NicpConfig::schedule();
  c.stiffness_schedule.pop_back();
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(NicpConfig::schedule(0), Error);
  c = NicpConfig::schedule();
  c.inner_iteration_cap = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("nicp: bent copy registers to within 1% of the bbox diagonal") {
  const HeadMesh tmpl = synthetic::head_template(30, 40);
  REQUIRE(tmpl.num_vertices() <= 2000);
  const HeadMesh bent = synthetic::bend(tmpl, 0.05);
  const double diag = bbox_diagonal(tmpl.vertices);
  CHECK(nearest_rmse(tmpl, bent) > 1e-3 * diag);
  const auto pairs = pairs_for(tmpl, bent);
  REQUIRE(pairs.size() == 5);

  const auto start = std::chrono::steady_clock::now();
  const auto result = nicp_register(tmpl, bent, pairs);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  CHECK(nearest_rmse(result.deformed_template, bent) < 0.01 * diag);
  CHECK(result.residual_trace.size() == 8);
  CHECK(result.residual_trace.back() < 0.01 * diag);
  CHECK(result.per_vertex_affine.size() == static_cast<std::size_t>(tmpl.num_vertices()));
  CHECK(result.deformed_template.faces == tmpl.faces);
  CHECK(seconds < 30.0);

  for (const auto& step : result.objective_trace) {
    REQUIRE(step.size() >= 2);
    for (std::size_t i = 1; i < step.size(); ++i) CHECK(step[i] <= step[i - 1] * (1 + 1e-12) + 1e-15);
  }
}

TEST_CASE("nicp: identical target stays put") {
  const HeadMesh tmpl = synthetic::head_template(8, 10);
  const auto result = nicp_register(tmpl, tmpl, pairs_for(tmpl, tmpl), NicpConfig::schedule(3));
  CHECK((result.deformed_template.vertices - tmpl.vertices).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("nicp: very stiff registration moves the template by a single affine map") {
  const HeadMesh tmpl = synthetic::head_template(8, 10);
  Eigen::Matrix3d a;
  a << 1.03, 0.02, 0, -0.01, 0.98, 0.01, 0, 0.02, 1.01;
  const Eigen::Vector3d t(0.02, -0.01, 0.03);
  HeadMesh target = tmpl;
  target.vertices = ((tmpl.vertices * a.transpose()).rowwise() + t.transpose()).eval();

  NicpConfig config;
  config.stiffness_schedule = {1e8};
  config.landmark_weight_schedule = {0.0};
  config.inner_iteration_cap = 30;
  const auto result = nicp_register(tmpl, target, {}, config);
  const auto& first = result.per_vertex_affine.front();
  double spread = 0;
  for (const auto& x : result.per_vertex_affine) spread = std::max(spread, (x - first).cwiseAbs().maxCoeff());
  CHECK(spread < 1e-5);
  CHECK(nearest_rmse(result.deformed_template, target) < 0.05 * bbox_diagonal(tmpl.vertices));
}

TEST_CASE("nicp: input errors") {
  const HeadMesh tmpl = synthetic::head_template(6, 8);
  const std::vector<LandmarkPair> bad{{static_cast<int>(tmpl.num_vertices()), Eigen::Vector3d::Zero()}};
  CHECK_THROWS_AS(nicp_register(tmpl, tmpl, bad), Error);
  try {
    nicp_register(tmpl, Points<double>(0, 3), {});
    FAIL("expected a registration error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Registration);
  }
  Points<double> nan_target = tmpl.vertices;
  nan_target(0, 0) = std::nan("");
  CHECK_THROWS_AS(nicp_register(tmpl, nan_target, {}), Error);
}

TEST_CASE("landmark pairs: round trip and errors") {
  const std::vector<LandmarkPair> pairs{{3, {0.5, -1.25, 2.0}}, {17, {1e-9, 0, 3.75}}};
  std::ostringstream out;
  write_landmark_pairs(pairs, out);
  std::istringstream in("# header\n" + out.str());
  const auto back = parse_landmark_pairs(in);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].template_index == pairs[i].template_index);
    CHECK(back[i].target == pairs[i].target);
  }
  std::istringstream missing("3 0.5 1\n");
  CHECK_THROWS_AS(parse_landmark_pairs(missing), Error);
  std::istringstream extra("3 0.5 1 2 9\n");
  CHECK_THROWS_AS(parse_landmark_pairs(extra), Error);
  CHECK_THROWS_AS(load_landmark_pairs("/nonexistent/pairs.txt"), Error);
  const auto fixture = load_landmark_pairs(carimorph::testing::fixtures() / "landmark_pairs.txt");
  CHECK(fixture.size() == 5);
}

TEST_CASE("nicp: a component without correspondences is a solver error") {
  HeadMesh m;
  m.vertices.resize(12, 3);
  m.faces.resize(12, 3);
  const Faces tet = (Faces(4, 3) << 0, 2, 1, 0, 1, 3, 1, 2, 3, 0, 3, 2).finished();
  const Eigen::RowVector3d offsets[3] = {{0, 0, 0}, {3, 0, 0}, {100, 0, 0}};
  for (int k = 0; k < 3; ++k) {
    m.vertices.middleRows(4 * k, 4) << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
    m.vertices.middleRows(4 * k, 4).rowwise() += offsets[k];
    m.faces.middleRows(4 * k, 4) = tet.array() + 4 * k;
  }
  Points<double> target = m.vertices.topRows(8);
  target.array() += 0.01;
  NicpConfig config;
  config.stiffness_schedule = {1.0};
  config.landmark_weight_schedule = {0.0};
  try {
    nicp_register(m, target, {}, config);
    FAIL("expected a solver error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Solver);
  }
}
