#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "carimorph/exaggerate.hpp"
#include "carimorph/pca.hpp"

namespace httplib {
class Server;
}

namespace carimorph {

/// A reconstructed head H(p) and its generated caricature G(p).
struct HeadSlot {
  HeadMesh reconstruction;
  HeadMesh caricature;
};

struct SessionState {
  std::shared_ptr<const CariPcaModel> model;
  std::shared_ptr<const MeanHead> mean;
  std::map<std::string, HeadSlot> heads;

  void validate() const;
};

/// Readers take immutable snapshots; writers replace the whole state.
class SessionStore {
 public:
  explicit SessionStore(SessionState initial);

  std::shared_ptr<const SessionState> snapshot() const;
  void put_head(const std::string& id, HeadSlot slot);

 private:
  mutable std::shared_mutex mutex_;
  std::shared_ptr<const SessionState> state_;
};

struct HeadSource {
  std::string id;
  std::filesystem::path reconstruction;
  std::optional<std::filesystem::path> caricature;  // default: decode(encode(reconstruction))
};

SessionState load_session(const std::filesystem::path& model_path, const std::filesystem::path& mean_path,
                          const std::vector<HeadSource>& heads);

/// "id=h.obj" or "id=h.obj:g.obj"
HeadSource parse_head_source(const std::string& text);

/// u32 n_v, u32 n_f, f32 xyz per vertex, u32 per index; little-endian.
std::vector<std::uint8_t> encode_mesh_binary(const HeadMesh& mesh);
HeadMesh decode_mesh_binary(std::span<const std::uint8_t> bytes);
std::string encode_mesh_json(const HeadMesh& mesh);

struct ServiceResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

enum class MeshFormat { Binary, Json };

ServiceResponse handle_model(const SessionState& state);
ServiceResponse handle_heads(const SessionState& state);
ServiceResponse handle_mesh(const SessionState& state, const std::string& id, const std::string& which,
                            MeshFormat format);
/// Body: {"head_id": "...", "u1": x, "u2": y} or {"coeffs": [...], "u1": x, "u2": y}.
ServiceResponse handle_exaggerate(const SessionState& state, const std::string& body, MeshFormat format);

class Service {
 public:
  explicit Service(SessionState state);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and starts serving on a background thread. port 0 picks a free
  /// port. Returns the bound port; throws Io if the port is unavailable.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

  SessionStore& store() { return store_; }

 private:
  int bind(const std::string& host, int port);

  SessionStore store_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace carimorph
