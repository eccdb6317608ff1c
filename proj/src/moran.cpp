#include "mi2sl/moran.hpp"

#include <cmath>

namespace mi2sl {

std::pair<Vector, Matrix> annihilator_residuals(const Vector& target,
                                                const Matrix& regressors) {
  const Eigen::Index n = target.size();
  if (regressors.rows() != n)
    throw InvalidParameterError("regressor rows must match target length");
  const Eigen::Index k = regressors.cols();
  if (k == 0) return {target, Matrix(n, 0)};

  Eigen::ColPivHouseholderQR<Matrix> qr(regressors);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) throw RankError("rank-deficient regressor matrix");

  const Vector coefs = qr.solve(target);
  const Vector residuals = target - regressors * coefs;

  Eigen::HouseholderQR<Matrix> hqr(regressors);
  Matrix q = hqr.householderQ() * Matrix::Identity(n, k);
  return {residuals, std::move(q)};
}

MoranResult standardized_moran(const Vector& residuals, const Matrix& regressors,
                               const SpatialWeights& w) {
  const int n = w.n();
  if (residuals.size() != n || regressors.rows() != n)
    throw InvalidParameterError("dimension mismatch between residuals, regressors and SWM");
  const int k = static_cast<int>(regressors.cols());
  if (n - k - 2 <= 0)
    throw InvalidParameterError("need n - k - 2 > 0 for the Moran variance");

  const double hth = residuals.squaredNorm();
  if (hth < 1e-300) throw NumericalError("degenerate residuals (zero sum of squares)");

  const Matrix& W = w.weights;
  const double m = residuals.dot(W * residuals) / hth;

  // Moments of m under the regression null: with M the annihilator of the
  // regressors and Q an orthonormal basis of their column space,
  //   tr(M W M)     = tr(W) - tr(Q'WQ)
  //   tr((M W M)^2) = tr(W^2) - 2 ||WQ||_F^2 + ||Q'WQ||_F^2.
  double tr_a, tr_a2;
  if (k == 0) {
    tr_a = W.trace();
    tr_a2 = W.squaredNorm();
  } else {
    Eigen::HouseholderQR<Matrix> hqr(regressors);
    const Matrix q = hqr.householderQ() * Matrix::Identity(n, k);
    const Matrix b = W * q;
    const Matrix c = q.transpose() * b;
    tr_a = W.trace() - c.trace();
    tr_a2 = W.squaredNorm() - 2.0 * b.squaredNorm() + c.squaredNorm();
  }

  const double nk = static_cast<double>(n - k);
  const double expected_m = tr_a / nk;
  const double variance_m =
      2.0 * (nk * tr_a2 - tr_a * tr_a) / (nk * nk * (nk - 2.0));
  if (!(variance_m > 0.0))
    throw NumericalError("nonpositive Moran variance (degenerate SWM)");

  MoranResult out;
  out.m = m;
  out.expected_m = expected_m;
  out.variance_m = variance_m;
  out.z = (m - expected_m) / std::sqrt(variance_m);
  out.k = k;
  out.n = n;
  return out;
}

}  // namespace mi2sl
