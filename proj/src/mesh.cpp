#include "carimorph/mesh.hpp"

#include <algorithm>
#include <unordered_set>

namespace carimorph {

std::vector<std::pair<int, int>> unique_edges(const Faces& faces) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(faces.rows()) * 3);
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int a = faces(f, k);
      const int b = faces(f, (k + 1) % 3);
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

LandmarkIndexSet LandmarkIndexSet::key_five(std::vector<int> indices) {
  require(indices.size() == 5, ErrorKind::InvalidArgument,
          "key landmark set needs exactly 5 indices, got " + std::to_string(indices.size()));
  LandmarkIndexSet set;
  set.indices = std::move(indices);
  for (const char* label : default_key_labels()) set.labels.emplace_back(label);
  return set;
}

void LandmarkIndexSet::validate(Eigen::Index num_vertices) const {
  require(labels.empty() || labels.size() == indices.size(), ErrorKind::InvalidArgument,
          "landmark labels do not match index count");
  std::unordered_set<int> seen;
  for (int idx : indices) {
    require(idx >= 0 && idx < num_vertices, ErrorKind::InvalidArgument,
            "landmark index " + std::to_string(idx) + " out of range");
    require(seen.insert(idx).second, ErrorKind::InvalidArgument,
            "duplicate landmark index " + std::to_string(idx));
  }
}

}  // namespace carimorph
