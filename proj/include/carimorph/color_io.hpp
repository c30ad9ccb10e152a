#pragma once

#include <filesystem>
#include <iosfwd>

#include "carimorph/mesh.hpp"
#include "carimorph/texture.hpp"

namespace carimorph {

struct ColoredMesh {
  HeadMesh mesh;
  VertexColorMap colors;
};

/// ASCII PLY with x/y/z, red/green/blue (uchar 0-255 or float/double in [0, 1])
/// and an optional uchar "known" flag. Without "known" every vertex counts as known.
ColoredMesh parse_colored_ply(std::istream& in);
void write_colored_ply(const HeadMesh& mesh, const VertexColorMap& colors, std::ostream& out);

/// OBJ with the "v x y z r g b" extension. Vertices without rgb are unknown.
ColoredMesh parse_colored_obj(std::istream& in);
void write_colored_obj(const HeadMesh& mesh, const VertexColorMap& colors, std::ostream& out);

/// Dispatch on extension (.ply / .obj).
ColoredMesh load_colored_mesh(const std::filesystem::path& path);
void save_colored_mesh(const HeadMesh& mesh, const VertexColorMap& colors, const std::filesystem::path& path);

}  // namespace carimorph
