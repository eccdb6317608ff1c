#ifndef MI2SL_LASSO_HPP
#define MI2SL_LASSO_HPP

#include <vector>

#include "mi2sl/swm.hpp"

namespace mi2sl {

/// Partially-penalized Lasso: unpenalized structural block, L1-penalized
/// candidate eigenvector block. Objective (no 1/n or 1/2 factor):
///   || y - D b - E g ||_2^2 + lambda ||g||_1
struct LassoProblem {
  Vector response;     // y
  Matrix unpenalized;  // D, n x d, incl. intercept
  Matrix penalized;    // E, n x n_E
  double lambda;
};

struct LassoFit {
  Vector unpenalized_coefs;
  Vector penalized_coefs;
  std::vector<int> active_set;  // penalized columns with nonzero coefficient
  double lambda;
  int iterations;  // full coordinate sweeps
  bool converged;
  Vector fitted;
  double objective_value;
  std::vector<int> dropped_columns;  // post_lasso only: collinear columns dropped
};

// Below this |z| the tuning rule switches to full shrinkage.
inline constexpr double kZFloor = 1e-4;

/// Smallest lambda at which every penalized coefficient is zero:
/// max_j 2 |e_j' M_D y|.
double lambda_max(const Vector& response, const Matrix& unpenalized,
                  const Matrix& penalized);

/// Moran-calibrated tuning parameter: 1/z^2 for |z| >= kZFloor, otherwise
/// the full-shrinkage sentinel lambda_max_value * 1.01 so that near-zero
/// spatial correlation yields an empty selection.
double tuning_from_z(double z, double lambda_max_value);

/// Block coordinate descent: exact least-squares update of the unpenalized
/// block, then cyclic soft-threshold updates of each penalized coefficient.
/// Converged when the largest absolute coefficient change in a sweep < tol.
LassoFit fit_partial_lasso(const LassoProblem& problem, double tol = 1e-8,
                           int max_iter = 100000);

/// OLS refit of the response on the unpenalized block plus the active-set
/// penalized columns; coefficients outside the active set are zero. Collinear
/// later-indexed penalized columns are dropped and recorded.
LassoFit post_lasso(const LassoProblem& problem, const std::vector<int>& active_set);

}  // namespace mi2sl

#endif
