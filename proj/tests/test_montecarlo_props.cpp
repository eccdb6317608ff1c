#include <doctest.h>

#include <cmath>
#include <random>

#include "mi2sl/simulate.hpp"

using namespace mi2sl;

TEST_CASE("Moran z is calibrated under the null") {
  const int n = 200;
  const SpatialWeights w =
      normalize_max_row_sum(generate_small_world(n, 10, 0.4, 321));
  std::mt19937_64 rng(654);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int draws = 5000;
  double sum = 0.0, sumsq = 0.0;
  for (int d = 0; d < draws; ++d) {
    Vector h(n);
    for (int i = 0; i < n; ++i) h[i] = gauss(rng);
    const double z = standardized_moran(h, Matrix(n, 0), w).z;
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / draws;
  const double var = sumsq / draws - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.1);
}

TEST_CASE("SimpIV is consistent in the non-spatial case") {
  DGPConfig cfg;
  cfg.n = 500;
  const auto rows =
      run_experiment(cfg, {EstimatorKind::simp_iv}, 1000, 42);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].failures == 0);
  CHECK(std::abs(rows[0].bias) < 0.02);
}

TEST_CASE("2SLS-SAR spatial coefficient centers at zero when rho = 0") {
  DGPConfig cfg;
  cfg.n = 500;
  const SpatialWeights w = make_experiment_swm(cfg);
  double sum_wy = 0.0;
  const int reps = 1000;
  for (int r = 0; r < reps; ++r) {
    const SimDraw d = gen_draw(cfg, w, 5000 + r);
    const FitResult fit = tsls_sar(d.data.y, d.data.X1.col(0), d.data.x2,
                                   d.data.Z2.col(0), w);
    sum_wy += fit.coefs[1];
  }
  CHECK(std::abs(sum_wy / reps) < 0.05);
}

TEST_CASE("Mi-2SL collapses to SimpIV without a spatial process") {
  DGPConfig cfg;
  cfg.n = 500;
  const SpatialWeights w = make_experiment_swm(cfg);
  const EigenBasis basis = spectral_decompose(w);

  double sum_absdiff = 0.0;
  double sum_sel = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const SimDraw d = gen_draw(cfg, w, 7000 + r);
    const Mi2SLFit fit = fit_mi2sl(d.data, basis, w);

    Matrix X(cfg.n, 3), Z(cfg.n, 3);
    X << Vector::Ones(cfg.n), d.data.X1.col(0), d.data.x2;
    Z << Vector::Ones(cfg.n), d.data.X1.col(0), d.data.Z2.col(0);
    const FitResult iv = tsls(d.data.y, X, Z);
    sum_absdiff += std::abs(fit.final.coefs[2] - iv.coefs[2]);
    sum_sel += static_cast<double>(fit.selected_union.size());
  }
  CHECK(sum_absdiff / reps < 0.01);
  // selection should stay sparse when there is nothing spatial to absorb
  CHECK(sum_sel / reps < 25.0);
}

TEST_CASE("partial F is small when the instrument is irrelevant") {
  const int n = 100;
  std::mt19937_64 rng(888);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> fstats;
  for (int r = 0; r < 200; ++r) {
    Vector x1(n), z2(n), x2(n);
    for (int i = 0; i < n; ++i) {
      x1[i] = gauss(rng);
      z2[i] = gauss(rng);
      x2[i] = 0.5 * x1[i] + gauss(rng);  // z2 plays no role
    }
    Matrix included(n, 2);
    included << Vector::Ones(n), x1;
    Matrix excluded(n, 1);
    excluded.col(0) = z2;
    fstats.push_back(first_stage_f(x2, included, excluded).f_partial);
  }
  std::nth_element(fstats.begin(), fstats.begin() + 100, fstats.end());
  CHECK(fstats[100] < 3.0);
}
