#include "carimorph/color_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "carimorph/obj_io.hpp"

namespace carimorph {
namespace {

struct PlyProperty {
  std::string name;
  std::string type;
  bool is_list = false;
};

bool is_integer_type(const std::string& t) {
  return t == "char" || t == "uchar" || t == "short" || t == "ushort" || t == "int" || t == "uint" ||
         t == "int8" || t == "uint8" || t == "int16" || t == "uint16" || t == "int32" || t == "uint32";
}

std::string lowercase_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

ColoredMesh parse_colored_ply(std::istream& in) {
  std::string line;
  require(std::getline(in, line) && line.rfind("ply", 0) == 0, ErrorKind::Format, "missing 'ply' magic");
  Eigen::Index num_vertices = 0, num_faces = 0;
  std::vector<PlyProperty> vertex_props;
  std::string current;
  std::size_t line_no = 1;
  bool ascii = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string keyword;
    ss >> keyword;
    if (keyword == "format") {
      std::string fmt;
      ss >> fmt;
      ascii = fmt == "ascii";
    } else if (keyword == "element") {
      std::string name;
      Eigen::Index count = 0;
      ss >> name >> count;
      current = name;
      if (name == "vertex") num_vertices = count;
      if (name == "face") num_faces = count;
    } else if (keyword == "property" && current == "vertex") {
      PlyProperty p;
      ss >> p.type;
      if (p.type == "list") {
        std::string count_type, item_type;
        ss >> count_type >> item_type;
        p.is_list = true;
      }
      ss >> p.name;
      vertex_props.push_back(p);
    } else if (keyword == "end_header") {
      break;
    }
  }
  require(ascii, ErrorKind::Format, "only ASCII PLY is supported");

  auto find = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < vertex_props.size(); ++i) {
      if (vertex_props[i].name == name) return static_cast<int>(i);
    }
    return -1;
  };
  const int px = find("x"), py = find("y"), pz = find("z");
  const int pr = find("red"), pg = find("green"), pb = find("blue"), pk = find("known");
  require(px >= 0 && py >= 0 && pz >= 0, ErrorKind::Format, "PLY vertex element lacks x/y/z");
  const bool has_color = pr >= 0 && pg >= 0 && pb >= 0;
  const double color_scale = has_color && is_integer_type(vertex_props[static_cast<std::size_t>(pr)].type) ? 1.0 / 255.0 : 1.0;

  ColoredMesh out;
  out.mesh.vertices.resize(num_vertices, 3);
  out.colors.colors = Points<double>::Zero(num_vertices, 3);
  out.colors.known.assign(static_cast<std::size_t>(num_vertices), has_color);
  for (Eigen::Index i = 0; i < num_vertices; ++i) {
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Format, "PLY truncated in vertex list");
    ++line_no;
    std::istringstream ss(line);
    std::vector<double> values(vertex_props.size());
    for (auto& v : values) {
      require(static_cast<bool>(ss >> v), ErrorKind::Format, "line " + std::to_string(line_no) + ": bad vertex row");
    }
    out.mesh.vertices.row(i) << values[static_cast<std::size_t>(px)], values[static_cast<std::size_t>(py)],
        values[static_cast<std::size_t>(pz)];
    if (has_color) {
      out.colors.colors.row(i) << values[static_cast<std::size_t>(pr)] * color_scale,
          values[static_cast<std::size_t>(pg)] * color_scale, values[static_cast<std::size_t>(pb)] * color_scale;
    }
    if (pk >= 0) out.colors.known[static_cast<std::size_t>(i)] = values[static_cast<std::size_t>(pk)] != 0.0;
  }
  out.mesh.faces.resize(num_faces, 3);
  for (Eigen::Index f = 0; f < num_faces; ++f) {
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Format, "PLY truncated in face list");
    ++line_no;
    std::istringstream ss(line);
    int count = 0;
    ss >> count;
    require(count == 3, ErrorKind::Format, "line " + std::to_string(line_no) + ": only triangle faces are supported");
    for (int k = 0; k < 3; ++k) {
      require(static_cast<bool>(ss >> out.mesh.faces(f, k)), ErrorKind::Format,
              "line " + std::to_string(line_no) + ": bad face row");
    }
  }
  validate(out.mesh);
  return out;
}

void write_colored_ply(const HeadMesh& mesh, const VertexColorMap& colors, std::ostream& out) {
  require(colors.size() == mesh.num_vertices(), ErrorKind::ShapeMismatch, "color map does not match the mesh");
  out << "ply\nformat ascii 1.0\n"
      << "element vertex " << mesh.num_vertices() << '\n'
      << "property double x\nproperty double y\nproperty double z\n"
      << "property double red\nproperty double green\nproperty double blue\n"
      << "property uchar known\n"
      << "element face " << mesh.num_faces() << '\n'
      << "property list uchar int vertex_indices\nend_header\n";
  for (Eigen::Index i = 0; i < mesh.num_vertices(); ++i) {
    out << format_double(mesh.vertices(i, 0)) << ' ' << format_double(mesh.vertices(i, 1)) << ' '
        << format_double(mesh.vertices(i, 2)) << ' ' << format_double(colors.colors(i, 0)) << ' '
        << format_double(colors.colors(i, 1)) << ' ' << format_double(colors.colors(i, 2)) << ' '
        << (colors.known[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
  }
  for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
    out << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' ' << mesh.faces(f, 2) << '\n';
  }
}

ColoredMesh parse_colored_obj(std::istream& in) {
  std::stringstream copy;
  copy << in.rdbuf();
  const std::string text = copy.str();
  std::istringstream mesh_in(text);
  ColoredMesh out;
  out.mesh = parse_obj(mesh_in);
  out.colors.colors = Points<double>::Zero(out.mesh.num_vertices(), 3);
  out.colors.known.assign(static_cast<std::size_t>(out.mesh.num_vertices()), false);

  std::istringstream lines(text);
  std::string line;
  Eigen::Index v = 0;
  while (std::getline(lines, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag != "v") continue;
    double x, y, z, r, g, b;
    ss >> x >> y >> z;
    if (ss >> r >> g >> b) {
      out.colors.colors.row(v) << r, g, b;
      out.colors.known[static_cast<std::size_t>(v)] = true;
    }
    ++v;
  }
  return out;
}

void write_colored_obj(const HeadMesh& mesh, const VertexColorMap& colors, std::ostream& out) {
  require(colors.size() == mesh.num_vertices(), ErrorKind::ShapeMismatch, "color map does not match the mesh");
  for (Eigen::Index i = 0; i < mesh.num_vertices(); ++i) {
    out << "v " << format_double(mesh.vertices(i, 0)) << ' ' << format_double(mesh.vertices(i, 1)) << ' '
        << format_double(mesh.vertices(i, 2));
    if (colors.known[static_cast<std::size_t>(i)]) {
      out << ' ' << format_double(colors.colors(i, 0)) << ' ' << format_double(colors.colors(i, 1)) << ' '
          << format_double(colors.colors(i, 2));
    }
    out << '\n';
  }
  for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
    out << "f " << mesh.faces(f, 0) + 1 << ' ' << mesh.faces(f, 1) + 1 << ' ' << mesh.faces(f, 2) + 1 << '\n';
  }
}

ColoredMesh load_colored_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path.string() + "'");
  const auto ext = lowercase_extension(path);
  try {
    if (ext == ".ply") return parse_colored_ply(in);
    if (ext == ".obj") return parse_colored_obj(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.message());
  }
  fail(ErrorKind::Format, "unsupported color mesh extension '" + ext + "'");
}

void save_colored_mesh(const HeadMesh& mesh, const VertexColorMap& colors, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write '" + path.string() + "'");
  const auto ext = lowercase_extension(path);
  if (ext == ".obj") {
    write_colored_obj(mesh, colors, out);
  } else {
    write_colored_ply(mesh, colors, out);
  }
  out.flush();
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for '" + path.string() + "'");
}

}  // namespace carimorph
