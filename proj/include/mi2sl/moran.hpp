#ifndef MI2SL_MORAN_HPP
#define MI2SL_MORAN_HPP

#include <utility>

#include "mi2sl/swm.hpp"

namespace mi2sl {

/// Standardized Moran's I of a regression residual vector together with its
/// exact small-sample moments under the regression null.
struct MoranResult {
  double m;           // raw Moran ratio h'Wh / h'h
  double expected_m;  // tr(M W M) / (n - k)
  double variance_m;
  double z;           // (m - expected_m) / sqrt(variance_m)
  int k;              // number of projected-out regressor columns
  int n;
};

/// Least-squares residuals of target on regressors, plus an orthonormal basis
/// of the regressor column space. Throws RankError if regressors are not of
/// full column rank (relative tolerance 1e-10).
std::pair<Vector, Matrix> annihilator_residuals(const Vector& target,
                                                const Matrix& regressors);

/// Standardized Moran's I of the residuals, with moments computed for the
/// annihilator of the given regressor matrix. Pass a 0-column matrix for k=0.
MoranResult standardized_moran(const Vector& residuals, const Matrix& regressors,
                               const SpatialWeights& w);

}  // namespace mi2sl

#endif
