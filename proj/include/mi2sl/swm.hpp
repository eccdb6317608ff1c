#ifndef MI2SL_SWM_HPP
#define MI2SL_SWM_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mi2sl/errors.hpp"

namespace mi2sl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Normalization { raw, max_row_sum };

enum class ProvenanceKind { small_world, distance_cutoff, user_supplied };

struct Provenance {
  ProvenanceKind kind = ProvenanceKind::user_supplied;
  // small_world parameters
  int k_neighbors = 0;
  double rewire_prob = 0.0;
  std::uint64_t seed = 0;
  // distance_cutoff parameter
  double cutoff_km = 0.0;
};

/// Symmetric nonnegative weights matrix with zero diagonal.
struct SpatialWeights {
  Matrix weights;
  Normalization normalization = Normalization::raw;
  Provenance provenance;

  int n() const { return static_cast<int>(weights.rows()); }
};

/// Orthonormal eigenvectors and eigenvalues of a SpatialWeights matrix,
/// eigenvalues sorted descending, column j paired with eigenvalue j.
struct EigenBasis {
  Vector eigenvalues;
  Matrix eigenvectors;
  std::uint64_t source_checksum = 0;
};

struct Coordinate {
  double lat_deg;
  double lon_deg;
};

/// Undirected Watts-Strogatz graph: ring lattice with k_neighbors per node
/// (k_neighbors/2 on each side), each lattice edge rewired with probability
/// rewire_prob to a uniformly chosen non-neighbor. Binary symmetric weights.
SpatialWeights generate_small_world(int n, int k_neighbors, double rewire_prob,
                                    std::uint64_t seed);

/// Binary SWM from geographic coordinates: w_ij = 1 iff the great-circle
/// distance between units i and j is below cutoff_km. Throws if any unit
/// ends up without a neighbour.
SpatialWeights build_distance_cutoff(const std::vector<Coordinate>& coords,
                                     double cutoff_km);

/// Divide all entries by the largest row sum.
SpatialWeights normalize_max_row_sum(const SpatialWeights& w);

/// Full symmetric eigendecomposition with a deterministic sign convention:
/// the first nonzero component of each eigenvector is positive.
EigenBasis spectral_decompose(const SpatialWeights& w);

/// Great-circle distance in kilometres (haversine, Earth radius 6371.0 km).
double haversine_km(const Coordinate& a, const Coordinate& b);

/// 64-bit FNV-1a over the row-major byte representation of the matrix.
std::uint64_t fnv1a_checksum(const Matrix& m);

}  // namespace mi2sl

#endif
