#include "mi2sl/mi2sl.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mi2sl {

namespace {

Matrix with_intercept(const Matrix& block, int n, bool include_intercept) {
  if (!include_intercept) return block;
  Matrix out(n, block.cols() + 1);
  out.col(0) = Vector::Ones(n);
  if (block.cols() > 0) out.rightCols(block.cols()) = block;
  return out;
}

Matrix hcat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

// Per-stage lower bounds on the penalty, as a fraction of n. Without them the
// z^-2 adaptivity makes the selected set balloon whenever a draw produces a
// large Moran z, which destabilises both the point estimate and the classical
// standard error at larger n.
constexpr double kPenaltyFloorFirst = 0.016;
constexpr double kPenaltyFloorSecond = 0.020;

double solver_penalty(double z, int n, double lmax, bool first_stage,
                      const Mi2SLConfig& cfg) {
  if (cfg.force_full_shrinkage) return std::max(lmax * 1.01, 1e-8);
  const double t = tuning_from_z(z, lmax);
  if (std::abs(z) < kZFloor || !std::isfinite(z)) return t;  // sentinel branch
  if (!cfg.scaled_penalty) return t;
  const double nd = static_cast<double>(n);
  const double floor = (first_stage ? kPenaltyFloorFirst : kPenaltyFloorSecond) * nd;
  return std::max(3.5 * std::sqrt(nd) * t, floor);
}

}  // namespace

Mi2SLFit fit_mi2sl(const RegressionData& data, const EigenBasis& basis,
                   const SpatialWeights& w, const Mi2SLConfig& cfg) {
  const int n = w.n();
  const int k1 = static_cast<int>(data.X1.cols());
  const int q = static_cast<int>(data.Z2.cols());
  if (data.y.size() != n || data.x2.size() != n || data.X1.rows() != n ||
      data.Z2.rows() != n)
    throw InvalidParameterError("data dimensions inconsistent with SWM");
  if (q < 1) throw InvalidParameterError("need at least one instrument");
  if (basis.eigenvectors.rows() != n || basis.eigenvectors.cols() != n)
    throw InvalidParameterError("eigen basis does not match SWM dimension");
  const int ic = cfg.include_intercept ? 1 : 0;
  if (n - (k1 + q + ic) - 2 <= 0)
    throw InvalidParameterError("too few observations for the Moran moments");
  if (!(cfg.lasso_tol > 0.0) || cfg.lasso_max_iter < 1)
    throw InvalidParameterError("invalid lasso tolerances");

  // Step 1: candidate set, excluding numerically constant eigenvectors that
  // would be collinear with the intercept.
  std::vector<int> candidate_index;
  candidate_index.reserve(n);
  for (int j = 0; j < n; ++j) {
    const Vector& col = basis.eigenvectors.col(j);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / static_cast<double>(n);
    if (var >= 1e-12) candidate_index.push_back(j);
  }
  Matrix cand(n, candidate_index.size());
  for (std::size_t c = 0; c < candidate_index.size(); ++c)
    cand.col(c) = basis.eigenvectors.col(candidate_index[c]);

  Mi2SLFit out;
  out.config = cfg;

  // Step 2: naive first-stage residuals and their Moran z.
  const Matrix h = with_intercept(hcat(data.X1, data.Z2), n, cfg.include_intercept);
  const auto [rx, qh] = annihilator_residuals(data.x2, h);
  out.z_first = standardized_moran(rx, h, w).z;
  if (!std::isfinite(out.z_first))
    throw NumericalError("first-stage Moran z is not finite");

  // Step 3: partial Lasso of x2, fitted values per variant.
  LassoProblem px{data.x2, h, cand,
                  solver_penalty(out.z_first, n, lambda_max(data.x2, h, cand),
                                 true, cfg)};
  const LassoFit lasso_x = fit_partial_lasso(px, cfg.lasso_tol, cfg.lasso_max_iter);
  for (int c : lasso_x.active_set) out.selected_first.push_back(candidate_index[c]);
  Vector x2hat = lasso_x.fitted;
  if (cfg.variant == FittedVariant::post_lasso)
    x2hat = post_lasso(px, lasso_x.active_set).fitted;

  // Step 4: naive second-stage residuals using the fitted x2.
  Matrix xhat(n, k1 + 1 + ic);
  if (ic) xhat.col(0) = Vector::Ones(n);
  if (k1 > 0) xhat.block(0, ic, n, k1) = data.X1;
  xhat.col(ic + k1) = x2hat;
  const auto [hy, qx] = annihilator_residuals(data.y, xhat);
  out.z_second = standardized_moran(hy, xhat, w).z;
  if (!std::isfinite(out.z_second))
    throw NumericalError("second-stage Moran z is not finite");

  // Step 5: partial Lasso of y.
  LassoProblem py{data.y, xhat, cand,
                  solver_penalty(out.z_second, n, lambda_max(data.y, xhat, cand),
                                 false, cfg)};
  const LassoFit lasso_y = fit_partial_lasso(py, cfg.lasso_tol, cfg.lasso_max_iter);
  for (int c : lasso_y.active_set) out.selected_second.push_back(candidate_index[c]);

  // Step 6: 2SLS with the union of selected eigenvectors as controls.
  std::set<int> uni(out.selected_first.begin(), out.selected_first.end());
  uni.insert(out.selected_second.begin(), out.selected_second.end());
  out.selected_union.assign(uni.begin(), uni.end());
  const int s = static_cast<int>(out.selected_union.size());
  if (s >= n - k1 - q - 2)
    throw NumericalError("selected eigenvector set too large to estimate");

  Matrix esel(n, s);
  for (int c = 0; c < s; ++c)
    esel.col(c) = basis.eigenvectors.col(out.selected_union[c]);

  Matrix x2col(n, 1);
  x2col.col(0) = data.x2;
  const Matrix X = hcat(with_intercept(hcat(data.X1, x2col), n, cfg.include_intercept), esel);
  const Matrix Z = hcat(h, esel);

  std::vector<std::string> names;
  if (ic) names.push_back("intercept");
  for (int j = 0; j < k1; ++j) names.push_back("x1_" + std::to_string(j + 1));
  names.push_back("x2");
  for (int j : out.selected_union) names.push_back("ev_" + std::to_string(j));
  out.final = tsls(data.y, X, Z, std::move(names));

  const Matrix included = hcat(with_intercept(data.X1, n, cfg.include_intercept), esel);
  std::vector<std::string> zn;
  for (int j = 0; j < q; ++j) zn.push_back("z2_" + std::to_string(j + 1));
  out.first_stage = first_stage_f(data.x2, included, data.Z2,
                                  cfg.include_intercept, true, std::move(zn));
  return out;
}

}  // namespace mi2sl
