#include "carimorph/obj_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

namespace carimorph {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) tokens.push_back(s.substr(start, i - start));
  }
  return tokens;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  fail(ErrorKind::Format, "line " + std::to_string(line) + ": " + what);
}

double parse_real(std::string_view token, std::size_t line) {
  double value = 0.0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) parse_fail(line, "invalid number '" + std::string(token) + "'");
  return value;
}

long parse_int(std::string_view token, std::size_t line) {
  long value = 0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) parse_fail(line, "invalid index '" + std::string(token) + "'");
  return value;
}

// Resolves a 1-based (or negative, relative) OBJ index against the count seen so far.
int resolve_index(long raw, std::size_t count, std::size_t line) {
  if (raw > 0) return static_cast<int>(raw - 1);
  if (raw < 0) return static_cast<int>(static_cast<long>(count) + raw);
  parse_fail(line, "index 0 is not valid in OBJ");
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

HeadMesh parse_obj(std::istream& in) {
  std::vector<std::array<double, 3>> vertices;
  std::vector<std::array<double, 2>> uvs;
  std::vector<std::array<int, 3>> faces;
  std::vector<std::array<int, 3>> face_uvs;
  bool faces_have_uv = true;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    const auto tokens = split_ws(line);
    const auto tag = tokens.front();
    if (tag == "v") {
      if (tokens.size() != 4 && tokens.size() != 5 && tokens.size() != 7) {
        parse_fail(line_no, "vertex needs 3 coordinates (optionally w or rgb)");
      }
      vertices.push_back({parse_real(tokens[1], line_no), parse_real(tokens[2], line_no),
                          parse_real(tokens[3], line_no)});
    } else if (tag == "vt") {
      if (tokens.size() < 3) parse_fail(line_no, "texture coordinate needs u and v");
      uvs.push_back({parse_real(tokens[1], line_no), parse_real(tokens[2], line_no)});
    } else if (tag == "f") {
      if (tokens.size() != 4) {
        parse_fail(line_no, "only triangle faces are supported (got " + std::to_string(tokens.size() - 1) +
                                " vertices)");
      }
      std::array<int, 3> face{};
      std::array<int, 3> face_uv{-1, -1, -1};
      for (int k = 0; k < 3; ++k) {
        const auto token = tokens[static_cast<std::size_t>(k) + 1];
        const auto slash = token.find('/');
        face[k] = resolve_index(parse_int(token.substr(0, slash), line_no), vertices.size(), line_no);
        if (slash != std::string_view::npos) {
          const auto rest = token.substr(slash + 1);
          const auto uv_part = rest.substr(0, rest.find('/'));
          if (!uv_part.empty()) face_uv[k] = resolve_index(parse_int(uv_part, line_no), uvs.size(), line_no);
        }
        if (face_uv[k] < 0) faces_have_uv = false;
      }
      faces.push_back(face);
      face_uvs.push_back(face_uv);
    }
    // Other statements (vn, g, o, s, usemtl, mtllib, ...) carry nothing this model uses.
  }

  HeadMesh mesh;
  mesh.vertices.resize(static_cast<Eigen::Index>(vertices.size()), 3);
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    for (int k = 0; k < 3; ++k) mesh.vertices(static_cast<Eigen::Index>(i), k) = vertices[i][k];
  }
  mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) mesh.faces(static_cast<Eigen::Index>(f), k) = faces[f][k];
  }

  // Per-vertex uvs: either one vt per vertex in order, or a face-uv table that
  // assigns every vertex a single consistent coordinate.
  if (!uvs.empty()) {
    Points2<double> per_vertex = Points2<double>::Constant(mesh.num_vertices(), 2, std::nan(""));
    bool consistent = true;
    if (faces_have_uv && !faces.empty()) {
      for (std::size_t f = 0; f < faces.size() && consistent; ++f) {
        for (int k = 0; k < 3; ++k) {
          const auto v = faces[f][k];
          const auto t = face_uvs[f][k];
          if (v < 0 || v >= mesh.num_vertices() || t < 0 || t >= static_cast<int>(uvs.size())) {
            consistent = false;
            break;
          }
          const Eigen::RowVector2d uv(uvs[t][0], uvs[t][1]);
          if (std::isnan(per_vertex(v, 0))) {
            per_vertex.row(v) = uv;
          } else if (per_vertex.row(v) != uv) {
            consistent = false;
          }
        }
      }
      if (consistent && per_vertex.allFinite()) mesh.uvs = per_vertex;
    } else if (uvs.size() == vertices.size()) {
      mesh.uvs.resize(static_cast<Eigen::Index>(uvs.size()), 2);
      for (std::size_t i = 0; i < uvs.size(); ++i) {
        mesh.uvs(static_cast<Eigen::Index>(i), 0) = uvs[i][0];
        mesh.uvs(static_cast<Eigen::Index>(i), 1) = uvs[i][1];
      }
    }
  }

  validate(mesh);
  return mesh;
}

HeadMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path.string() + "'");
  try {
    return parse_obj(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.message());
  }
}

void write_obj(const HeadMesh& mesh, std::ostream& out) {
  for (Eigen::Index i = 0; i < mesh.num_vertices(); ++i) {
    out << "v " << format_double(mesh.vertices(i, 0)) << ' ' << format_double(mesh.vertices(i, 1)) << ' '
        << format_double(mesh.vertices(i, 2)) << '\n';
  }
  const bool uv = mesh.has_uvs();
  if (uv) {
    for (Eigen::Index i = 0; i < mesh.num_vertices(); ++i) {
      out << "vt " << format_double(mesh.uvs(i, 0)) << ' ' << format_double(mesh.uvs(i, 1)) << '\n';
    }
  }
  for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
    out << 'f';
    for (int k = 0; k < 3; ++k) {
      const int idx = mesh.faces(f, k) + 1;
      out << ' ' << idx;
      if (uv) out << '/' << idx;
    }
    out << '\n';
  }
}

void save_mesh(const HeadMesh& mesh, const std::filesystem::path& path) {
  validate(mesh);
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write '" + path.string() + "'");
  write_obj(mesh, out);
  out.flush();
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for '" + path.string() + "'");
}

LandmarkIndexSet parse_landmarks(std::istream& in) {
  LandmarkIndexSet set;
  std::string raw;
  std::size_t line_no = 0;
  bool any_label = false;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    std::string label;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      label = std::string(trim(line.substr(hash + 1)));
      line = trim(line.substr(0, hash));
    }
    if (line.empty()) continue;
    const auto tokens = split_ws(line);
    if (tokens.size() != 1) parse_fail(line_no, "expected a single vertex index");
    const long idx = parse_int(tokens[0], line_no);
    if (idx < 0) parse_fail(line_no, "landmark index must be non-negative");
    set.indices.push_back(static_cast<int>(idx));
    any_label = any_label || !label.empty();
    set.labels.push_back(std::move(label));
  }
  if (!any_label) set.labels.clear();
  return set;
}

LandmarkIndexSet load_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path.string() + "'");
  return parse_landmarks(in);
}

void save_landmarks(const LandmarkIndexSet& landmarks, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write '" + path.string() + "'");
  for (std::size_t i = 0; i < landmarks.indices.size(); ++i) {
    out << landmarks.indices[i];
    if (i < landmarks.labels.size() && !landmarks.labels[i].empty()) out << "  # " << landmarks.labels[i];
    out << '\n';
  }
}

}  // namespace carimorph
