#pragma once

#include <cstdint>
#include <vector>

#include "carimorph/exaggerate.hpp"
#include "carimorph/mesh.hpp"

namespace carimorph::synthetic {

/// Closed ellipsoidal head with a nose bump facing +z. n_v = rings * segments + 2.
HeadMesh head_template(int rings = 24, int segments = 32);

/// Default normal-space mean head used by tests and demos.
MeanHead default_mean_head(int rings = 24, int segments = 32);

/// Eyes, nose tip, mouth corners on the +z side of a head_template mesh.
LandmarkIndexSet key_landmarks(const HeadMesh& head);

/// Smooth vector field over the vertices: a sum of `terms` low-frequency
/// sinusoids along random directions, scaled so the largest displacement is
/// `amplitude`. Deterministic for a seed.
Points<double> smooth_field(const Points<double>& points, std::uint64_t seed, int terms = 4, double max_frequency = 2.0,
                            double amplitude = 1.0);

/// Low-frequency sinusoidal bend with peak displacement `fraction` of the bbox diagonal.
HeadMesh bend(const HeadMesh& mesh, double fraction = 0.05);

/// `count` orthonormal smooth deformation modes as columns of a 3*n_v matrix.
MatrixXd smooth_modes(const HeadMesh& mesh, int count, std::uint64_t seed);

/// Meshes mean + modes * z with z ~ N(0, diag(sigmas^2)).
std::vector<HeadMesh> linear_corpus(const HeadMesh& mean, const MatrixXd& modes, const VectorXd& sigmas, int count,
                                    std::uint64_t seed);

}  // namespace carimorph::synthetic
