#include "mi2sl/swm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mi2sl {

SpatialWeights generate_small_world(int n, int k_neighbors, double rewire_prob,
                                    std::uint64_t seed) {
  if (k_neighbors < 2 || k_neighbors % 2 != 0)
    throw InvalidParameterError("k_neighbors must be an even integer >= 2");
  if (k_neighbors >= n)
    throw InvalidParameterError("k_neighbors must be smaller than n");
  if (rewire_prob < 0.0 || rewire_prob > 1.0)
    throw InvalidParameterError("rewire_prob must be in [0,1]");

  Matrix w = Matrix::Zero(n, n);
  const int half = k_neighbors / 2;
  for (int i = 0; i < n; ++i) {
    for (int j = 1; j <= half; ++j) {
      const int t = (i + j) % n;
      w(i, t) = 1.0;
      w(t, i) = 1.0;
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // Rewire undirected lattice edges in a fixed order: ring distance first,
  // then source node.
  for (int j = 1; j <= half; ++j) {
    for (int i = 0; i < n; ++i) {
      const int t = (i + j) % n;
      if (w(i, t) == 0.0) continue;  // already rewired away
      if (unif(rng) >= rewire_prob) continue;
      // candidate new endpoints: not i, not currently adjacent to i
      std::vector<int> candidates;
      candidates.reserve(n);
      for (int c = 0; c < n; ++c) {
        if (c != i && w(i, c) == 0.0) candidates.push_back(c);
      }
      if (candidates.empty()) continue;  // i saturated, keep the edge
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      const int c = candidates[pick(rng)];
      w(i, t) = 0.0;
      w(t, i) = 0.0;
      w(i, c) = 1.0;
      w(c, i) = 1.0;
    }
  }

  SpatialWeights out;
  out.weights = std::move(w);
  out.normalization = Normalization::raw;
  out.provenance = {ProvenanceKind::small_world, k_neighbors, rewire_prob, seed, 0.0};
  return out;
}

double haversine_km(const Coordinate& a, const Coordinate& b) {
  constexpr double kEarthRadiusKm = 6371.0;
  const double deg = std::numbers::pi / 180.0;
  const double lat1 = a.lat_deg * deg, lat2 = b.lat_deg * deg;
  const double dlat = (b.lat_deg - a.lat_deg) * deg;
  const double dlon = (b.lon_deg - a.lon_deg) * deg;
  const double s = std::sin(dlat / 2.0), t = std::sin(dlon / 2.0);
  const double h = s * s + std::cos(lat1) * std::cos(lat2) * t * t;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

SpatialWeights build_distance_cutoff(const std::vector<Coordinate>& coords,
                                     double cutoff_km) {
  const int n = static_cast<int>(coords.size());
  if (n < 2) throw InvalidParameterError("need at least 2 coordinate pairs");
  if (cutoff_km <= 0.0) throw InvalidParameterError("cutoff_km must be positive");
  for (const auto& c : coords) {
    if (c.lat_deg < -90.0 || c.lat_deg > 90.0 || c.lon_deg < -180.0 ||
        c.lon_deg > 180.0)
      throw InvalidParameterError("coordinate out of range");
  }

  Matrix w = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (haversine_km(coords[i], coords[j]) < cutoff_km) {
        w(i, j) = 1.0;
        w(j, i) = 1.0;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (w.row(i).sum() == 0.0)
      throw InvalidParameterError("isolated unit at row " + std::to_string(i) +
                                  ": no neighbour within cutoff");
  }

  SpatialWeights out;
  out.weights = std::move(w);
  out.normalization = Normalization::raw;
  out.provenance.kind = ProvenanceKind::distance_cutoff;
  out.provenance.cutoff_km = cutoff_km;
  return out;
}

SpatialWeights normalize_max_row_sum(const SpatialWeights& w) {
  const double max_row = w.weights.rowwise().sum().maxCoeff();
  if (max_row <= 0.0) throw NumericalError("cannot normalize an all-zero SWM");
  SpatialWeights out = w;
  out.weights /= max_row;
  out.normalization = Normalization::max_row_sum;
  return out;
}

EigenBasis spectral_decompose(const SpatialWeights& w) {
  const int n = w.n();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(w.weights);
  if (solver.info() != Eigen::Success)
    throw NumericalError("eigen-solver failed to converge");

  // SelfAdjointEigenSolver sorts ascending; flip to descending.
  EigenBasis basis;
  basis.eigenvalues = solver.eigenvalues().reverse();
  basis.eigenvectors = solver.eigenvectors().rowwise().reverse();
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double v = basis.eigenvectors(i, j);
      if (v != 0.0) {
        if (v < 0.0) basis.eigenvectors.col(j) = -basis.eigenvectors.col(j);
        break;
      }
    }
  }
  basis.source_checksum = fnv1a_checksum(w.weights);
  return basis;
}

std::uint64_t fnv1a_checksum(const Matrix& m) {
  std::uint64_t h = 14695981039346656037ULL;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      const unsigned char* bytes = reinterpret_cast<const unsigned char*>(&v);
      for (std::size_t b = 0; b < sizeof(double); ++b) {
        h ^= bytes[b];
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

}  // namespace mi2sl
