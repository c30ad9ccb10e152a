#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "carimorph/mesh.hpp"

namespace carimorph {

/// Reads a Wavefront OBJ triangle mesh. Vertex order is preserved; "vt" lines
/// are kept when there is exactly one per vertex. Extra per-vertex fields
/// ("v x y z r g b") are accepted and ignored here (see color_io.hpp).
HeadMesh load_mesh(const std::filesystem::path& path);
HeadMesh parse_obj(std::istream& in);

/// Writes shortest round-trip decimal coordinates, 1-indexed faces, and
/// "f a/a b/b c/c" when the mesh carries uvs.
void save_mesh(const HeadMesh& mesh, const std::filesystem::path& path);
void write_obj(const HeadMesh& mesh, std::ostream& out);

/// Plain text, one 0-based vertex index per line, "#" starts a comment.
LandmarkIndexSet load_landmarks(const std::filesystem::path& path);
LandmarkIndexSet parse_landmarks(std::istream& in);
void save_landmarks(const LandmarkIndexSet& landmarks, const std::filesystem::path& path);

/// Shortest decimal that parses back to the same double.
std::string format_double(double value);

}  // namespace carimorph
