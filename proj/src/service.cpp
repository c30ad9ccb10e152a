#include "carimorph/service.hpp"

#include <sys/socket.h>

#include <httplib.h>
#include <json.hpp>

#include "carimorph/bytes.hpp"
#include "carimorph/log.hpp"
#include "carimorph/obj_io.hpp"

namespace carimorph {
namespace {

using nlohmann::json;

ServiceResponse json_response(int status, const json& body) { return {status, "application/json", body.dump()}; }

ServiceResponse error_response(int status, const std::string& message) {
  return json_response(status, json{{"error", message}});
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io:
    case ErrorKind::Solver:
      return 500;
    default:
      return 400;
  }
}

ServiceResponse mesh_response(const HeadMesh& mesh, MeshFormat format) {
  if (format == MeshFormat::Json) return {200, "application/json", encode_mesh_json(mesh)};
  const auto bytes = encode_mesh_binary(mesh);
  return {200, "application/octet-stream", std::string(bytes.begin(), bytes.end())};
}

double number_field(const json& body, const char* key, double fallback) {
  if (!body.contains(key)) return fallback;
  const auto& v = body.at(key);
  require(v.is_number(), ErrorKind::InvalidArgument, std::string("'") + key + "' must be a number");
  return v.get<double>();
}

}  // namespace

void SessionState::validate() const {
  require(model != nullptr && mean != nullptr, ErrorKind::InvalidArgument, "session has no model or mean head");
  require(model->mean.size() == mean->size(), ErrorKind::ShapeMismatch,
          "model has " + std::to_string(model->num_vertices()) + " vertices, mean head has " +
              std::to_string(mean->mesh.num_vertices()));
  for (const auto& [id, slot] : heads) {
    require_same_connectivity(slot.reconstruction, mean->mesh, "head '" + id + "' reconstruction");
    require_same_connectivity(slot.caricature, mean->mesh, "head '" + id + "' caricature");
  }
}

SessionStore::SessionStore(SessionState initial) {
  initial.validate();
  state_ = std::make_shared<const SessionState>(std::move(initial));
}

std::shared_ptr<const SessionState> SessionStore::snapshot() const {
  std::shared_lock lock(mutex_);
  return state_;
}

void SessionStore::put_head(const std::string& id, HeadSlot slot) {
  std::unique_lock lock(mutex_);
  auto next = std::make_shared<SessionState>(*state_);
  next->heads[id] = std::move(slot);
  next->validate();
  state_ = std::move(next);
}

HeadSource parse_head_source(const std::string& text) {
  const auto eq = text.find('=');
  require(eq != std::string::npos && eq > 0 && eq + 1 < text.size(), ErrorKind::InvalidArgument,
          "head source must look like id=head.obj[:caricature.obj], got '" + text + "'");
  HeadSource source;
  source.id = text.substr(0, eq);
  const std::string paths = text.substr(eq + 1);
  const auto colon = paths.find(':');
  if (colon == std::string::npos) {
    source.reconstruction = paths;
  } else {
    source.reconstruction = paths.substr(0, colon);
    source.caricature = paths.substr(colon + 1);
  }
  return source;
}

SessionState load_session(const std::filesystem::path& model_path, const std::filesystem::path& mean_path,
                          const std::vector<HeadSource>& heads) {
  SessionState state;
  auto model = std::make_shared<CariPcaModel>(load_model(model_path));
  auto mean = std::make_shared<MeanHead>(MeanHead{load_mesh(mean_path)});
  state.model = model;
  state.mean = mean;
  for (const auto& h : heads) {
    require(!state.heads.contains(h.id), ErrorKind::InvalidArgument, "duplicate head id '" + h.id + "'");
    HeadSlot slot;
    slot.reconstruction = load_mesh(h.reconstruction);
    slot.caricature = h.caricature ? load_mesh(*h.caricature) : decode(*model, encode(*model, slot.reconstruction));
    state.heads.emplace(h.id, std::move(slot));
  }
  state.validate();
  return state;
}

std::vector<std::uint8_t> encode_mesh_binary(const HeadMesh& mesh) {
  ByteWriter w;
  w.reserve(8 + static_cast<std::size_t>(mesh.vertices.size() + mesh.faces.size()) * 4);
  w.u32(static_cast<std::uint32_t>(mesh.num_vertices()));
  w.u32(static_cast<std::uint32_t>(mesh.num_faces()));
  for (Eigen::Index i = 0; i < mesh.vertices.size(); ++i) w.f32(static_cast<float>(mesh.vertices.data()[i]));
  for (Eigen::Index i = 0; i < mesh.faces.size(); ++i) w.u32(static_cast<std::uint32_t>(mesh.faces.data()[i]));
  return w.take();
}

HeadMesh decode_mesh_binary(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  HeadMesh mesh;
  const auto n_v = r.u32();
  const auto n_f = r.u32();
  require(r.remaining() == (static_cast<std::size_t>(n_v) + n_f) * 12, ErrorKind::Corruption,
          "mesh payload size does not match its header");
  mesh.vertices.resize(n_v, 3);
  mesh.faces.resize(n_f, 3);
  for (Eigen::Index i = 0; i < mesh.vertices.size(); ++i) mesh.vertices.data()[i] = r.f32();
  for (Eigen::Index i = 0; i < mesh.faces.size(); ++i) mesh.faces.data()[i] = static_cast<int>(r.u32());
  return mesh;
}

std::string encode_mesh_json(const HeadMesh& mesh) {
  json j;
  j["n_v"] = mesh.num_vertices();
  j["n_f"] = mesh.num_faces();
  j["vertices"] = std::vector<double>(mesh.vertices.data(), mesh.vertices.data() + mesh.vertices.size());
  j["faces"] = std::vector<int>(mesh.faces.data(), mesh.faces.data() + mesh.faces.size());
  return j.dump();
}

ServiceResponse handle_model(const SessionState& state) {
  const auto& m = *state.model;
  const auto count = std::min<Eigen::Index>(10, m.variance_ratios.size());
  std::vector<double> ratios(m.variance_ratios.data(), m.variance_ratios.data() + count);
  return json_response(200, json{{"n_v", m.num_vertices()}, {"d", m.dims()}, {"variance_ratios", ratios}});
}

ServiceResponse handle_heads(const SessionState& state) {
  json list = json::array();
  for (const auto& [id, slot] : state.heads) list.push_back(json{{"id", id}, {"n_v", slot.reconstruction.num_vertices()}});
  return json_response(200, json{{"heads", list}});
}

ServiceResponse handle_mesh(const SessionState& state, const std::string& id, const std::string& which,
                            MeshFormat format) {
  const auto it = state.heads.find(id);
  if (it == state.heads.end()) return error_response(404, "unknown head '" + id + "'");
  if (which == "H" || which.empty()) return mesh_response(it->second.reconstruction, format);
  if (which == "G") return mesh_response(it->second.caricature, format);
  return error_response(400, "'which' must be H or G");
}

ServiceResponse handle_exaggerate(const SessionState& state, const std::string& body, MeshFormat format) {
  json request;
  try {
    request = json::parse(body);
  } catch (const json::exception& e) {
    return error_response(400, std::string("malformed JSON: ") + e.what());
  }
  if (!request.is_object()) return error_response(400, "request body must be a JSON object");
  try {
    const double u1 = number_field(request, "u1", 1.0);
    const double u2 = number_field(request, "u2", 0.0);
    const bool by_id = request.contains("head_id");
    const bool by_coeffs = request.contains("coeffs");
    require(by_id != by_coeffs, ErrorKind::InvalidArgument, "give exactly one of 'head_id' or 'coeffs'");
    if (by_id) {
      require(request.at("head_id").is_string(), ErrorKind::InvalidArgument, "'head_id' must be a string");
      const auto id = request.at("head_id").get<std::string>();
      const auto it = state.heads.find(id);
      if (it == state.heads.end()) return error_response(404, "unknown head '" + id + "'");
      return mesh_response(blend_heads(*state.mean, it->second.caricature, it->second.reconstruction, u1, u2), format);
    }
    const auto& raw = request.at("coeffs");
    require(raw.is_array(), ErrorKind::InvalidArgument, "'coeffs' must be an array");
    require(static_cast<Eigen::Index>(raw.size()) == state.model->dims(), ErrorKind::Dimension,
            "expected " + std::to_string(state.model->dims()) + " coefficients, got " + std::to_string(raw.size()));
    PcaCoeffs coeffs{VectorXd(state.model->dims())};
    for (std::size_t i = 0; i < raw.size(); ++i) {
      require(raw[i].is_number(), ErrorKind::InvalidArgument, "coefficients must be numbers");
      coeffs.values(static_cast<Eigen::Index>(i)) = raw[i].get<double>();
    }
    // Without a reconstructed head, dP = 0 and only u1 has an effect.
    const HeadMesh caricature = decode(*state.model, coeffs);
    return mesh_response(blend_heads(*state.mean, caricature, state.mean->mesh, u1, 0.0), format);
  } catch (const Error& e) {
    return error_response(status_for(e.kind()), e.what());
  }
}

Service::Service(SessionState state) : store_(std::move(state)), server_(std::make_unique<httplib::Server>()) {
  auto& svr = *server_;
  // SO_REUSEPORT would let a second server silently share a busy port.
  svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  auto send = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  auto format_of = [](const httplib::Request& req) {
    return req.get_param_value("format") == "json" ? MeshFormat::Json : MeshFormat::Binary;
  };
  svr.Get("/model", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, handle_model(*store_.snapshot()));
  });
  svr.Get("/heads", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, handle_heads(*store_.snapshot()));
  });
  svr.Get(R"(/mesh/([^/]+))", [this, send, format_of](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_mesh(*store_.snapshot(), req.matches[1], req.get_param_value("which"), format_of(req)));
  });
  svr.Post("/exaggerate", [this, send, format_of](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_exaggerate(*store_.snapshot(), req.body, format_of(req)));
  });
  svr.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    send(res, error_response(500, message));
  });
  svr.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    log::info(req.method + " " + req.path + " -> " + std::to_string(res.status));
  });
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  require(port >= 0 && port <= 65535, ErrorKind::InvalidArgument, "port out of range");
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    require(bound > 0, ErrorKind::Io, "could not bind any port on " + host);
    return bound;
  }
  require(server_->bind_to_port(host, port), ErrorKind::Io,
          "cannot listen on " + host + ":" + std::to_string(port) + " (port busy or not permitted)");
  return port;
}

int Service::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  log::info("serving on " + host + ":" + std::to_string(bound));
  return bound;
}

void Service::run(const std::string& host, int port) {
  const int bound = bind(host, port);
  log::info("serving on " + host + ":" + std::to_string(bound));
  server_->listen_after_bind();
}

void Service::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace carimorph
