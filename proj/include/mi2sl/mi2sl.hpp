#ifndef MI2SL_MI2SL_HPP
#define MI2SL_MI2SL_HPP

#include "mi2sl/estim.hpp"
#include "mi2sl/lasso.hpp"
#include "mi2sl/moran.hpp"

namespace mi2sl {

struct RegressionData {
  Vector y;
  Matrix X1;  // exogenous block, n x k1 (no intercept column)
  Vector x2;  // endogenous regressor
  Matrix Z2;  // excluded instruments, n x q
};

enum class FittedVariant { lasso, post_lasso };

struct Mi2SLConfig {
  FittedVariant variant = FittedVariant::lasso;
  bool include_intercept = true;
  double lasso_tol = 1e-8;
  int lasso_max_iter = 100000;
  // Rescale the Moran-calibrated tuning parameter by 2*sqrt(n) (equivalent to
  // penalizing unit-sample-variance eigenvector columns under a 1/(2n)
  // objective) and keep it above a per-stage floor proportional to n, which
  // caps how aggressively a large Moran z can expand the selected set. Off
  // means the raw z^-2 penalty on the unscaled objective.
  bool scaled_penalty = true;
  // Diagnostic: force lambda above lambda_max in both stages, so that no
  // eigenvector is selected and the fit reduces to plain 2SLS.
  bool force_full_shrinkage = false;
};

struct Mi2SLFit {
  FitResult final;  // 2SLS with selected eigenvectors as controls
  double z_first = 0.0;
  double z_second = 0.0;
  std::vector<int> selected_first;   // eigenvector indices, first stage
  std::vector<int> selected_second;  // eigenvector indices, second stage
  std::vector<int> selected_union;   // sorted union
  FirstStageDiagnostics first_stage;
  Mi2SLConfig config;
};

/// Two Moran's-I-calibrated Lasso selections (first and second stage)
/// followed by 2SLS of y on [1, X1, x2, E_sel] with instruments
/// [1, X1, Z2, E_sel].
Mi2SLFit fit_mi2sl(const RegressionData& data, const EigenBasis& basis,
                   const SpatialWeights& w, const Mi2SLConfig& cfg = {});

}  // namespace mi2sl

#endif
