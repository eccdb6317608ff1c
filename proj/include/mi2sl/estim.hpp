#ifndef MI2SL_ESTIM_HPP
#define MI2SL_ESTIM_HPP

#include <string>
#include <vector>

#include "mi2sl/swm.hpp"

namespace mi2sl {

struct FitResult {
  Vector coefs;
  Matrix vcov_classical;
  Matrix vcov_robust;  // HC1
  Vector residuals;    // structural residuals y - X b
  double sigma2;
  int n = 0;
  int p = 0;
  std::vector<std::string> coef_names;
};

struct FirstStageDiagnostics {
  double f_full = 0.0;     // all slope coefficients (intercept untested)
  double f_partial = 0.0;  // excluded-instrument block only
  std::vector<std::string> excluded_instrument_names;
  bool perfect_fit = false;
};

// Cap applied to F statistics when the first stage fits perfectly.
inline constexpr double kFStatCap = 1e12;

FitResult ols(const Vector& y, const Matrix& X,
              std::vector<std::string> coef_names = {});

/// 2SLS: coefs = (X' P_Z X)^-1 X' P_Z y. Residuals are structural
/// (y - X b at the actual regressors, not the first-stage fitted ones).
FitResult tsls(const Vector& y, const Matrix& X, const Matrix& Z,
               std::vector<std::string> coef_names = {});

/// First-stage full and partial F statistics from the regression of x2 on
/// [included, excluded]. Wald form with HC1 covariance by default (classical
/// when robust=false), divided by the number of tested restrictions. When
/// intercept_in_included is true the first column of `included` is the
/// intercept and is left untested by f_full.
FirstStageDiagnostics first_stage_f(const Vector& x2, const Matrix& included,
                                    const Matrix& excluded,
                                    bool intercept_in_included = true,
                                    bool robust = true,
                                    std::vector<std::string> excluded_names = {});

/// SAR(1) comparator: 2SLS of y on [1, Wy, x1, x2] with instruments
/// [1, x1, Wx1, W^2 x1, z2].
FitResult tsls_sar(const Vector& y, const Vector& x1, const Vector& x2,
                   const Vector& z2, const SpatialWeights& w);

}  // namespace mi2sl

#endif
