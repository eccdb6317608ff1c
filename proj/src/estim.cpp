#include "mi2sl/estim.hpp"

#include <cmath>

namespace mi2sl {

namespace {

void require_full_rank(const Matrix& m, const char* what) {
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(1e-10);
  if (qr.rank() < m.cols()) throw RankError(std::string(what) + " is rank deficient");
}

Matrix symmetrize(const Matrix& v) { return 0.5 * (v + v.transpose()); }

// Sandwich pieces shared by ols and tsls: bread = (M'M)^-1 for the relevant
// design M, meat = M' diag(res^2) M, HC1 scale n/(n-p).
Matrix hc1(const Matrix& bread, const Matrix& design, const Vector& residuals,
           int n, int p) {
  const Matrix weighted = design.array().colwise() * residuals.array().square();
  const Matrix meat = design.transpose() * weighted.matrix();
  const double scale = static_cast<double>(n) / static_cast<double>(n - p);
  return symmetrize(scale * bread * meat * bread);
}

}  // namespace

FitResult ols(const Vector& y, const Matrix& X, std::vector<std::string> coef_names) {
  const int n = static_cast<int>(y.size());
  const int p = static_cast<int>(X.cols());
  if (X.rows() != n) throw InvalidParameterError("ols dimension mismatch");
  if (n <= p) throw InvalidParameterError("ols needs n > p");
  require_full_rank(X, "regressor matrix");

  Eigen::HouseholderQR<Matrix> qr(X);
  FitResult fit;
  fit.coefs = qr.solve(y);
  fit.residuals = y - X * fit.coefs;
  fit.sigma2 = fit.residuals.squaredNorm() / static_cast<double>(n - p);
  const Matrix xtx_inv = (X.transpose() * X).ldlt().solve(Matrix::Identity(p, p));
  fit.vcov_classical = symmetrize(fit.sigma2 * xtx_inv);
  fit.vcov_robust = hc1(xtx_inv, X, fit.residuals, n, p);
  fit.n = n;
  fit.p = p;
  fit.coef_names = std::move(coef_names);
  return fit;
}

FitResult tsls(const Vector& y, const Matrix& X, const Matrix& Z,
               std::vector<std::string> coef_names) {
  const int n = static_cast<int>(y.size());
  const int p = static_cast<int>(X.cols());
  const int q = static_cast<int>(Z.cols());
  if (X.rows() != n || Z.rows() != n) throw InvalidParameterError("tsls dimension mismatch");
  if (q < p) throw RankError("under-identified: fewer instruments than regressors");
  if (n <= p) throw InvalidParameterError("tsls needs n > p");
  require_full_rank(Z, "instrument matrix");

  Eigen::HouseholderQR<Matrix> zqr(Z);
  const Matrix qz = zqr.householderQ() * Matrix::Identity(n, q);
  const Matrix xhat = qz * (qz.transpose() * X);  // P_Z X
  require_full_rank(xhat, "projected regressor matrix (Z'X rank failure)");

  const Matrix bread =
      (xhat.transpose() * xhat).ldlt().solve(Matrix::Identity(p, p));
  FitResult fit;
  fit.coefs = bread * (xhat.transpose() * y);
  fit.residuals = y - X * fit.coefs;  // structural residuals
  fit.sigma2 = fit.residuals.squaredNorm() / static_cast<double>(n - p);
  fit.vcov_classical = symmetrize(fit.sigma2 * bread);
  fit.vcov_robust = hc1(bread, xhat, fit.residuals, n, p);
  fit.n = n;
  fit.p = p;
  fit.coef_names = std::move(coef_names);
  return fit;
}

FirstStageDiagnostics first_stage_f(const Vector& x2, const Matrix& included,
                                    const Matrix& excluded, bool intercept_in_included,
                                    bool robust, std::vector<std::string> excluded_names) {
  const int n = static_cast<int>(x2.size());
  const int ki = static_cast<int>(included.cols());
  const int m = static_cast<int>(excluded.cols());
  if (m < 1) throw InvalidParameterError("need at least one excluded instrument");
  if (included.rows() != n || excluded.rows() != n)
    throw InvalidParameterError("first_stage_f dimension mismatch");

  Matrix design(n, ki + m);
  if (ki > 0) design << included, excluded; else design = excluded;
  FitResult fs = ols(x2, design);

  FirstStageDiagnostics diag;
  diag.excluded_instrument_names = std::move(excluded_names);

  const double scale = x2.squaredNorm() / static_cast<double>(n);
  if (fs.sigma2 <= 1e-12 * (scale + 1e-300)) {
    diag.perfect_fit = true;
    diag.f_full = kFStatCap;
    diag.f_partial = kFStatCap;
    return diag;
  }

  const Matrix& vcov = robust ? fs.vcov_robust : fs.vcov_classical;
  auto wald = [&](int first, int count) {
    const Vector b = fs.coefs.segment(first, count);
    const Matrix v = vcov.block(first, first, count, count);
    const double stat = b.dot(v.ldlt().solve(b)) / static_cast<double>(count);
    return std::min(stat, kFStatCap);
  };

  const int first_tested = (intercept_in_included && ki > 0) ? 1 : 0;
  diag.f_full = wald(first_tested, ki + m - first_tested);
  diag.f_partial = wald(ki, m);
  return diag;
}

FitResult tsls_sar(const Vector& y, const Vector& x1, const Vector& x2,
                   const Vector& z2, const SpatialWeights& w) {
  const int n = w.n();
  if (y.size() != n || x1.size() != n || x2.size() != n || z2.size() != n)
    throw InvalidParameterError("tsls_sar dimension mismatch");

  const Vector wy = w.weights * y;
  const Vector wx1 = w.weights * x1;
  const Vector w2x1 = w.weights * wx1;

  Matrix X(n, 4);
  X << Vector::Ones(n), wy, x1, x2;
  Matrix Z(n, 5);
  Z << Vector::Ones(n), x1, wx1, w2x1, z2;
  return tsls(y, X, Z, {"intercept", "Wy", "x1", "x2"});
}

}  // namespace mi2sl
