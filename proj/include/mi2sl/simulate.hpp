#ifndef MI2SL_SIMULATE_HPP
#define MI2SL_SIMULATE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mi2sl/mi2sl.hpp"

namespace mi2sl {

/// Parameters of the simulated system: a SAR(1) structural equation with
/// spatial lags of the covariates, and a SAR(2) endogenous regressor with
/// spatial lags of the exogenous variable and instrument.
struct DGPConfig {
  int n = 100;
  double rho = 0.0;
  double zeta31 = 0.0;
  double zeta32 = 0.0;
  double omega = 0.0;
  double beta1 = 1.0, beta2 = 1.0, zeta1 = 1.0, zeta2 = 1.0;
  double sigma_vu = 0.9;  // covariance of the unit-variance error pair
  int k_neighbors = 10;
  double rewire_prob = 0.4;
  std::uint64_t swm_seed = 12345;
  bool redraw_swm = false;  // regenerate the SWM each replication
};

struct SimDraw {
  RegressionData data;
  Vector u, v;  // retained for audit
};

enum class EstimatorKind { simp_ols, simp_iv, tsls_sar, mi2sl_lasso, mi2sl_post_lasso };

std::string estimator_name(EstimatorKind kind);

struct MonteCarloRow {
  std::string estimator_name;
  double bias = 0.0;
  double mse = 0.0;
  double aase = 0.0;  // mean classical SE of the beta2 estimate
  double mean_selected_first = 0.0;
  double mean_selected_second = 0.0;
  double mean_selected_union = 0.0;
  double coverage95 = 0.0;  // share of reps whose 95% classical CI covers beta2
  int reps = 0;
  int failures = 0;
};

enum class TableFormat { csv, aligned_text };

/// Normalized small-world SWM for an experiment configuration.
SpatialWeights make_experiment_swm(const DGPConfig& cfg);

/// One draw from the DGP: x1, z2 iid standard normal, correlated (u, v),
/// then dense solves of the two spatial systems. Deterministic in
/// (cfg, rep_seed). Throws NumericalError if a spatial system is singular.
SimDraw gen_draw(const DGPConfig& cfg, const SpatialWeights& w,
                 std::uint64_t rep_seed);

/// Run `reps` replications (rep seed = base_seed XOR rep index), fit every
/// requested estimator on the same draw, and aggregate bias/MSE/AASE and
/// selection counts in fixed replication order. threads <= 0 uses all cores.
std::vector<MonteCarloRow> run_experiment(const DGPConfig& cfg,
                                          const std::vector<EstimatorKind>& estimators,
                                          int reps, std::uint64_t base_seed,
                                          int threads = 0);

std::string emit_table(const std::vector<MonteCarloRow>& rows, TableFormat format);

}  // namespace mi2sl

#endif
