#include <doctest.h>

#include <thread>

#include "carimorph/obj_io.hpp"
#include "carimorph/service.hpp"
#include "carimorph/synthetic.hpp"
#include "test_support.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace carimorph;
using nlohmann::json;

namespace {

SessionState make_state() {
  auto mean = std::make_shared<MeanHead>(synthetic::default_mean_head(8, 10));
  const MatrixXd modes = synthetic::smooth_modes(mean->mesh, 4, 3);
  VectorXd sigmas(4);
  sigmas << 0.5, 0.4, 0.3, 0.2;
  const auto corpus = synthetic::linear_corpus(mean->mesh, modes, 2.0 * sigmas, 20, 4);
  SessionState s;
  s.model = std::make_shared<CariPcaModel>(fit_pca(corpus, 4));
  s.mean = mean;
  const auto heads = synthetic::linear_corpus(mean->mesh, modes, sigmas, 2, 5);
  s.heads["alice"] = {heads[0], corpus[0]};
  s.heads["bob"] = {heads[1], corpus[1]};
  return s;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

std::string binary_body(const HeadMesh& m) {
  const auto b = encode_mesh_binary(m);
  return {b.begin(), b.end()};
}

}  // namespace

TEST_CASE("wire format: binary layout and round trip") {
  const HeadMesh m = synthetic::head_template(6, 8);
  const auto bytes = encode_mesh_binary(m);
  CHECK(bytes.size() == 8 + 12 * static_cast<std::size_t>(m.num_vertices() + m.num_faces()));
  CHECK(bytes[0] == static_cast<std::uint8_t>(m.num_vertices() & 0xff));
  const HeadMesh back = decode_mesh_binary(bytes);
  CHECK(back.faces == m.faces);
  CHECK(back.vertices == m.vertices.cast<float>().cast<double>());
  CHECK(encode_mesh_binary(back) == bytes);
  auto truncated = bytes;
  truncated.pop_back();
  try {
    decode_mesh_binary(truncated);
    FAIL("expected corruption");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Corruption);
  }
  const auto j = json::parse(encode_mesh_json(m));
  CHECK(j["n_v"] == m.num_vertices());
  CHECK(j["vertices"].size() == static_cast<std::size_t>(3 * m.num_vertices()));
  CHECK(j["vertices"][4].get<double>() == m.vertices(1, 1));
}

TEST_CASE("head sources") {
  const auto a = parse_head_source("p1=heads/h.obj");
  CHECK(a.id == "p1");
  CHECK(a.reconstruction == "heads/h.obj");
  CHECK(!a.caricature);
  const auto b = parse_head_source("p2=h.obj:g.obj");
  CHECK(b.caricature == std::filesystem::path("g.obj"));
  CHECK_THROWS_AS(parse_head_source("h.obj"), Error);
  CHECK_THROWS_AS(parse_head_source("=h.obj"), Error);
}

TEST_CASE("handlers: model and heads") {
  const auto s = make_state();
  const auto model = handle_model(s);
  CHECK(model.status == 200);
  const auto j = json::parse(model.body);
  CHECK(j["n_v"] == s.model->num_vertices());
  CHECK(j["d"] == 4);
  CHECK(j["variance_ratios"].size() == 4);
  const auto heads = json::parse(handle_heads(s).body);
  REQUIRE(heads["heads"].size() == 2);
  CHECK(heads["heads"][0]["id"] == "alice");
}

TEST_CASE("handlers: mesh lookup") {
  const auto s = make_state();
  const auto h = handle_mesh(s, "alice", "H", MeshFormat::Binary);
  CHECK(h.status == 200);
  CHECK(h.content_type == "application/octet-stream");
  CHECK(h.body == binary_body(s.heads.at("alice").reconstruction));
  CHECK(handle_mesh(s, "alice", "", MeshFormat::Binary).body == h.body);
  CHECK(handle_mesh(s, "alice", "G", MeshFormat::Binary).body == binary_body(s.heads.at("alice").caricature));
  CHECK(handle_mesh(s, "carol", "H", MeshFormat::Binary).status == 404);
  CHECK(handle_mesh(s, "alice", "X", MeshFormat::Binary).status == 400);
  CHECK(handle_mesh(s, "alice", "H", MeshFormat::Json).content_type == "application/json");
}

TEST_CASE("handlers: exaggerate by head id") {
  const auto s = make_state();
  const auto& slot = s.heads.at("alice");
  auto request = [&](double u1, double u2) {
    return handle_exaggerate(s, json{{"head_id", "alice"}, {"u1", u1}, {"u2", u2}}.dump(), MeshFormat::Binary);
  };
  CHECK(request(1, 0).body == binary_body(slot.caricature));
  CHECK(request(0, 1).body == binary_body(slot.reconstruction));
  CHECK(request(0, 0).body == binary_body(s.mean->mesh));
  CHECK(request(0.5, 0.5).body == binary_body(blend_heads(*s.mean, slot.caricature, slot.reconstruction, 0.5, 0.5)));
  const auto defaults = handle_exaggerate(s, R"({"head_id": "alice"})", MeshFormat::Binary);
  CHECK(defaults.body == binary_body(slot.caricature));

  const HeadMesh mid = decode_mesh_binary(bytes_of(request(0.5, 0.5).body));
  const VectorXd expected = 0.5 * (slot.caricature.coords() + slot.reconstruction.coords());
  CHECK((mid.coords() - expected).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(request(1.25, 0.5).body == request(1.25, 0.5).body);
}

TEST_CASE("handlers: exaggerate from coefficients") {
  const auto s = make_state();
  const PcaCoeffs c = encode(*s.model, s.heads.at("bob").caricature);
  const json body{{"coeffs", std::vector<double>(c.values.data(), c.values.data() + c.values.size())}, {"u1", 1.0}};
  const auto r = handle_exaggerate(s, body.dump(), MeshFormat::Binary);
  CHECK(r.status == 200);
  CHECK(r.body == binary_body(blend_heads(*s.mean, decode(*s.model, c), s.mean->mesh, 1.0, 0.0)));
  const auto wrong = handle_exaggerate(s, R"({"coeffs": [1, 2]})", MeshFormat::Binary);
  CHECK(wrong.status == 400);
}

TEST_CASE("handlers: malformed requests are 400") {
  const auto s = make_state();
  for (const char* body : {"", "{", "[1,2]", R"({"u1": 1})", R"({"head_id": "alice", "coeffs": [0,0,0,0]})",
                           R"({"head_id": 3})", R"({"head_id": "alice", "u1": "big"})",
                           R"({"coeffs": [0, "x", 0, 0]})"}) {
    const auto r = handle_exaggerate(s, body, MeshFormat::Binary);
    CHECK(r.status == 400);
    CHECK(json::parse(r.body).contains("error"));
  }
  CHECK(handle_exaggerate(s, R"({"head_id": "nobody"})", MeshFormat::Binary).status == 404);
}

TEST_CASE("session: validation and loading from files") {
  auto s = make_state();
  CHECK_NOTHROW(s.validate());
  s.heads["bad"] = {synthetic::head_template(6, 8), synthetic::head_template(6, 8)};
  CHECK_THROWS_AS(s.validate(), Error);

  const auto good = make_state();
  testing::TempDir dir("session");
  save_model(*good.model, dir / "m.cpca");
  save_mesh(good.mean->mesh, dir / "mean.obj");
  save_mesh(good.heads.at("alice").reconstruction, dir / "h.obj");
  const auto loaded = load_session(dir / "m.cpca", dir / "mean.obj", {{"a", dir / "h.obj", std::nullopt}});
  REQUIRE(loaded.heads.count("a") == 1);
  const auto& slot = loaded.heads.at("a");
  const HeadMesh expected = decode(*loaded.model, encode(*loaded.model, slot.reconstruction));
  CHECK(slot.caricature.vertices == expected.vertices);
  CHECK_THROWS_AS(load_session(dir / "missing.cpca", dir / "mean.obj", {}), Error);
}

TEST_CASE("session store: snapshots are immutable") {
  SessionStore store(make_state());
  const auto before = store.snapshot();
  store.put_head("carol", before->heads.at("alice"));
  CHECK(before->heads.count("carol") == 0);
  CHECK(store.snapshot()->heads.count("carol") == 1);
  CHECK_THROWS_AS(store.put_head("bad", {synthetic::head_template(6, 8), synthetic::head_template(6, 8)}), Error);
}

TEST_CASE("service: live HTTP round trip") {
  const auto state = make_state();
  Service service(state);
  const int port = service.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);

  auto model = client.Get("/model");
  REQUIRE(model);
  CHECK(model->status == 200);
  CHECK(json::parse(model->body)["d"] == 4);

  auto heads = client.Get("/heads");
  REQUIRE(heads);
  CHECK(json::parse(heads->body)["heads"].size() == 2);

  auto mesh = client.Get("/mesh/alice?which=G");
  REQUIRE(mesh);
  CHECK(mesh->body == binary_body(state.heads.at("alice").caricature));
  auto missing = client.Get("/mesh/nobody");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  const std::string body = R"({"head_id": "alice", "u1": 0.5, "u2": 0.5})";
  auto a = client.Post("/exaggerate", body, "application/json");
  auto b = client.Post("/exaggerate", body, "application/json");
  REQUIRE(a);
  REQUIRE(b);
  CHECK(a->status == 200);
  CHECK(a->body == b->body);
  CHECK(a->body == handle_exaggerate(state, body, MeshFormat::Binary).body);

  auto as_json = client.Post("/exaggerate?format=json", body, "application/json");
  REQUIRE(as_json);
  CHECK(json::parse(as_json->body)["n_v"] == state.mean->mesh.num_vertices());

  auto bad = client.Post("/exaggerate", "{nope", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);

  // Concurrent readers all get the same payload.
  std::vector<std::string> results(8);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < results.size(); ++i) {
    threads.emplace_back([&, i] {
      httplib::Client c("127.0.0.1", port);
      if (auto r = c.Post("/exaggerate", body, "application/json")) results[i] = r->body;
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& r : results) CHECK(r == a->body);

  service.stop();
}

TEST_CASE("service: a busy port is an I/O error") {
  Service first(make_state());
  const int port = first.start("127.0.0.1", 0);
  Service second(make_state());
  try {
    second.start("127.0.0.1", port);
    FAIL("expected the bind to fail");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
    CHECK(std::string(e.what()).find("port busy") != std::string::npos);
  }
  CHECK_THROWS_AS(second.start("127.0.0.1", 70000), Error);
}
