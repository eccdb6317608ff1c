#include <doctest.h>

#include <cmath>
#include <random>

#include "mi2sl/estim.hpp"
#include "mi2sl/swm.hpp"

using namespace mi2sl;

namespace {

Matrix random_design(std::mt19937_64& rng, int n, int p, bool intercept) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = (intercept && j == 0) ? 1.0 : gauss(rng);
  return x;
}

Vector random_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector y(n);
  for (int i = 0; i < n; ++i) y[i] = gauss(rng);
  return y;
}

}  // namespace

TEST_CASE("ols hand oracle: simple regression through 4 points") {
  // y on [1, x] with x = (0,1,2,3), y = (1,2,2,4):
  // slope = cov/var = 0.9, intercept = mean(y) - 0.9*mean(x) = 0.9.
  Matrix x(4, 2);
  x << 1, 0, 1, 1, 1, 2, 1, 3;
  Vector y(4);
  y << 1, 2, 2, 4;
  const FitResult fit = ols(y, x, {"intercept", "x"});
  CHECK(fit.coefs[0] == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(fit.coefs[1] == doctest::Approx(0.9).epsilon(1e-14));
  // residuals: (0.1, 0.2, -0.7, 0.4), RSS = 0.7, sigma2 = 0.35
  CHECK(fit.sigma2 == doctest::Approx(0.35).epsilon(1e-12));
  // var(slope) = sigma2 / sum((x - xbar)^2) = 0.35 / 5 = 0.07
  CHECK(fit.vcov_classical(1, 1) == doctest::Approx(0.07).epsilon(1e-12));
  CHECK(fit.n == 4);
  CHECK(fit.p == 2);
  CHECK(fit.coef_names[1] == "x");
}

TEST_CASE("ols normal equations and HC1 sandwich oracle") {
  std::mt19937_64 rng(101);
  const int n = 40, p = 4;
  const Matrix x = random_design(rng, n, p, true);
  const Vector y = random_vector(rng, n);
  const FitResult fit = ols(y, x);

  const Vector normal = x.transpose() * fit.residuals;
  CHECK(normal.cwiseAbs().maxCoeff() < 1e-9);

  const Matrix xtx_inv = (x.transpose() * x).inverse();
  Matrix meat = Matrix::Zero(p, p);
  for (int i = 0; i < n; ++i)
    meat += fit.residuals[i] * fit.residuals[i] * x.row(i).transpose() * x.row(i);
  const Matrix hc1 = (static_cast<double>(n) / (n - p)) * xtx_inv * meat * xtx_inv;
  CHECK((fit.vcov_robust - hc1).cwiseAbs().maxCoeff() < 1e-10);
  const Matrix classical = fit.sigma2 * xtx_inv;
  CHECK((fit.vcov_classical - classical).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("tsls with Z = X collapses to ols") {
  std::mt19937_64 rng(103);
  const int n = 50, p = 3;
  const Matrix x = random_design(rng, n, p, true);
  const Vector y = random_vector(rng, n);
  const FitResult a = ols(y, x);
  const FitResult b = tsls(y, x, x);
  CHECK((a.coefs - b.coefs).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.vcov_classical - b.vcov_classical).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.vcov_robust - b.vcov_robust).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.residuals - b.residuals).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("exactly identified tsls equals the direct IV formula") {
  std::mt19937_64 rng(107);
  const int n = 60, p = 3;
  const Matrix z = random_design(rng, n, p, true);
  Matrix x = z;
  // make x endogenous-looking but correlated with z
  x.col(2) = 0.8 * z.col(2) + 0.3 * random_vector(rng, n);
  const Vector y = random_vector(rng, n);

  const FitResult fit = tsls(y, x, z);
  const Vector iv = (z.transpose() * x).lu().solve(z.transpose() * y);
  CHECK((fit.coefs - iv).cwiseAbs().maxCoeff() < 1e-10);
  // structural residuals, not first-stage ones
  CHECK((fit.residuals - (y - x * fit.coefs)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tsls recovers the truth on noiseless overidentified data") {
  std::mt19937_64 rng(109);
  const int n = 45;
  const Matrix z = random_design(rng, n, 4, true);
  Matrix x(n, 3);
  x.col(0) = Vector::Ones(n);
  x.col(1) = z.col(1);
  x.col(2) = z.col(2) + 0.5 * z.col(3);
  Vector beta(3);
  beta << 1.5, -2.0, 0.75;
  const Vector y = x * beta;
  const FitResult fit = tsls(y, x, z);
  CHECK((fit.coefs - beta).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("estimator input validation") {
  std::mt19937_64 rng(113);
  const Matrix x = random_design(rng, 20, 3, true);
  const Vector y = random_vector(rng, 20);
  SUBCASE("under-identified") {
    CHECK_THROWS_AS(tsls(y, x, x.leftCols(2)), RankError);
  }
  SUBCASE("collinear regressors") {
    Matrix bad = x;
    bad.col(2) = 2.0 * bad.col(1);
    CHECK_THROWS_AS(ols(y, bad), RankError);
  }
  SUBCASE("collinear instruments") {
    Matrix bad = x;
    bad.col(2) = bad.col(0) - bad.col(1);
    CHECK_THROWS_AS(tsls(y, x, bad), RankError);
  }
  SUBCASE("instrument orthogonal to a regressor") {
    // x2 is the residual of a regression on Z, so P_Z x2 = 0 and the
    // projected design loses rank.
    Matrix endo = x;
    Eigen::HouseholderQR<Matrix> qr(x);
    const Vector extra = random_vector(rng, 20);
    endo.col(2) = extra - x * qr.solve(extra);
    CHECK_THROWS_AS(tsls(y, endo, x), RankError);
  }
  SUBCASE("too few observations") {
    CHECK_THROWS_AS(ols(random_vector(rng, 2), Matrix::Ones(2, 2)),
                    InvalidParameterError);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(ols(random_vector(rng, 21), x), InvalidParameterError);
    CHECK_THROWS_AS(tsls(y, x, random_design(rng, 21, 3, true)),
                    InvalidParameterError);
  }
}

TEST_CASE("classical first-stage F matches the sum-of-squares form") {
  std::mt19937_64 rng(127);
  const int n = 80;
  const Vector z2 = random_vector(rng, n);
  const Vector x1 = random_vector(rng, n);
  const Vector x2 = 0.6 * z2 + 0.4 * x1 + random_vector(rng, n);

  Matrix included(n, 2);
  included << Vector::Ones(n), x1;
  Matrix excluded(n, 1);
  excluded.col(0) = z2;

  const FirstStageDiagnostics diag =
      first_stage_f(x2, included, excluded, true, false, {"z2"});

  Matrix full(n, 3);
  full << included, excluded;
  const double rss_full = ols(x2, full).residuals.squaredNorm();
  const double s2 = rss_full / (n - 3);

  // partial F: restricted model drops z2
  const double rss_partial = ols(x2, included).residuals.squaredNorm();
  CHECK(diag.f_partial ==
        doctest::Approx((rss_partial - rss_full) / 1.0 / s2).epsilon(1e-9));

  // full F: restricted model is intercept only
  const double rss_mean =
      (x2.array() - x2.mean()).matrix().squaredNorm();
  CHECK(diag.f_full ==
        doctest::Approx((rss_mean - rss_full) / 2.0 / s2).epsilon(1e-9));
  CHECK(!diag.perfect_fit);
  CHECK(diag.excluded_instrument_names == std::vector<std::string>{"z2"});
}

TEST_CASE("robust first-stage F is the HC1 Wald statistic") {
  std::mt19937_64 rng(131);
  const int n = 60;
  const Vector z2 = random_vector(rng, n);
  const Vector x1 = random_vector(rng, n);
  const Vector x2 = 0.5 * z2 + random_vector(rng, n);

  Matrix included(n, 2);
  included << Vector::Ones(n), x1;
  Matrix excluded(n, 1);
  excluded.col(0) = z2;

  const FirstStageDiagnostics diag = first_stage_f(x2, included, excluded);

  Matrix full(n, 3);
  full << included, excluded;
  const FitResult fs = ols(x2, full);
  const double want = fs.coefs[2] * fs.coefs[2] / fs.vcov_robust(2, 2);
  CHECK(diag.f_partial == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("perfect first-stage fit is capped and flagged") {
  std::mt19937_64 rng(137);
  const int n = 30;
  const Vector z2 = random_vector(rng, n);
  const Vector x1 = random_vector(rng, n);
  const Vector x2 = 2.0 * z2 - x1;  // exact linear combination

  Matrix included(n, 2);
  included << Vector::Ones(n), x1;
  Matrix excluded(n, 1);
  excluded.col(0) = z2;

  const FirstStageDiagnostics diag = first_stage_f(x2, included, excluded);
  CHECK(diag.perfect_fit);
  CHECK(diag.f_full == kFStatCap);
  CHECK(diag.f_partial == kFStatCap);
}

TEST_CASE("tsls_sar design and instruments") {
  std::mt19937_64 rng(139);
  const int n = 40;
  const SpatialWeights w =
      normalize_max_row_sum(generate_small_world(n, 4, 0.3, 17));
  const Vector x1 = random_vector(rng, n);
  const Vector z2 = random_vector(rng, n);
  const Vector x2 = 0.7 * z2 + 0.5 * x1 + 0.3 * random_vector(rng, n);
  const Vector y = x1 + x2 + 0.1 * random_vector(rng, n);

  const FitResult fit = tsls_sar(y, x1, x2, z2, w);
  CHECK(fit.p == 4);
  CHECK(fit.coef_names ==
        std::vector<std::string>{"intercept", "Wy", "x1", "x2"});

  // Replicate by hand with the documented design.
  const Vector wy = w.weights * y;
  const Vector wx1 = w.weights * x1;
  Matrix X(n, 4);
  X << Vector::Ones(n), wy, x1, x2;
  Matrix Z(n, 5);
  Z << Vector::Ones(n), x1, wx1, w.weights * wx1, z2;
  const FitResult manual = tsls(y, X, Z);
  CHECK((fit.coefs - manual.coefs).cwiseAbs().maxCoeff() < 1e-12);
}
