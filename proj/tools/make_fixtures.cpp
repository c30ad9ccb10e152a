// Writes the deterministic end-to-end fixture corpus into a directory.
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "carimorph/alignment.hpp"
#include "carimorph/color_io.hpp"
#include "carimorph/nicp.hpp"
#include "carimorph/obj_io.hpp"
#include "carimorph/synthetic.hpp"

using namespace carimorph;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <out_dir>\n";
    return 2;
  }
  const fs::path dir = argv[1];
  fs::create_directories(dir / "corpus");

  const HeadMesh base = center_and_scale(synthetic::head_template(10, 14)).first;
  save_mesh(base, dir / "mean.obj");

  // Caricature corpus: exaggerated draws from a 5-mode smooth model.
  const MatrixXd modes = synthetic::smooth_modes(base, 5, 11);
  VectorXd sigmas(5);
  sigmas << 0.9, 0.7, 0.5, 0.35, 0.25;
  auto corpus = synthetic::linear_corpus(base, modes, sigmas, 12, 12);
  for (auto& m : corpus) m = center_and_scale(m).first;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "cari_%02zu.obj", i);
    save_mesh(corpus[i], dir / "corpus" / name);
  }

  // A normal head and its partially observed colors (front-facing half known).
  const HeadMesh head = center_and_scale(synthetic::linear_corpus(base, modes, sigmas * 0.4, 1, 13).front()).first;
  save_mesh(head, dir / "head.obj");
  VertexColorMap colors;
  colors.colors.resize(head.num_vertices(), 3);
  colors.known.resize(static_cast<std::size_t>(head.num_vertices()));
  for (Eigen::Index i = 0; i < head.num_vertices(); ++i) {
    const Eigen::RowVector3d p = head.vertices.row(i);
    colors.colors.row(i) << 0.6 + 0.2 * std::sin(3 * p.x()), 0.45 + 0.15 * p.y(), 0.35 + 0.1 * std::cos(2 * p.z());
    colors.known[static_cast<std::size_t>(i)] = p.z() > 0.0;
  }
  for (Eigen::Index i = 0; i < head.num_vertices(); ++i) {
    if (!colors.known[static_cast<std::size_t>(i)]) colors.colors.row(i).setZero();
  }
  save_colored_mesh(head, colors, dir / "partial_colors.ply");

  // Registration pair: template vs bent copy with five landmark targets.
  const HeadMesh bent = synthetic::bend(base, 0.05);
  save_mesh(bent, dir / "bent.obj");
  const auto lm = synthetic::key_landmarks(base);
  save_landmarks(lm, dir / "landmarks.txt");
  std::vector<LandmarkPair> pairs;
  for (int i : lm.indices) pairs.push_back({i, bent.vertices.row(i).transpose()});
  {
    std::ofstream out(dir / "landmark_pairs.txt");
    write_landmark_pairs(pairs, out);
  }

  // Votes: 3 photos, 5 candidates, 40 votes each.
  {
    std::ofstream out(dir / "votes.csv");
    out << "photo_id,candidate_id,votes\n";
    const int tallies[3][5] = {{14, 9, 8, 5, 4}, {20, 6, 6, 4, 4}, {10, 10, 8, 7, 5}};
    const char* names[5] = {"ours", "baseline_a", "baseline_b", "baseline_c", "baseline_d"};
    for (int p = 0; p < 3; ++p) {
      for (int c = 0; c < 5; ++c) out << "photo" << p + 1 << ',' << names[c] << ',' << tallies[p][c] << '\n';
    }
  }

  {
    std::ofstream out(dir / "toy.cfg");
    out << "# toy trainer settings\nidentities = 200\nsteps = 500\nlearning_rate = 0.005\nseed = 1\n"
           "lambda_cha = 2\nlambda_cari = 20\n";
  }
  std::cout << "fixtures written to " << dir << '\n';
  return 0;
}
