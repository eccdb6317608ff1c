#include "mi2sl/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

namespace mi2sl {

namespace {

void check_dgp(const DGPConfig& cfg, const SpatialWeights& w) {
  if (std::abs(cfg.sigma_vu) >= 1.0)
    throw InvalidParameterError("|sigma_vu| must be < 1 for unit-variance errors");
  // Spectral radii of rho*W and zeta31*W + zeta32*W^2 via the eigenvalues of W.
  Eigen::SelfAdjointEigenSolver<Matrix> es(w.weights, Eigen::EigenvaluesOnly);
  double r1 = 0.0, r2 = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()[i];
    r1 = std::max(r1, std::abs(cfg.rho * lam));
    r2 = std::max(r2, std::abs(cfg.zeta31 * lam + cfg.zeta32 * lam * lam));
  }
  // The top eigenvalue of a normalized regular lattice is 1 up to rounding,
  // so compare with a small slack instead of exactly 1.
  if (r1 > 1.0 - 1e-8 || r2 > 1.0 - 1e-8)
    throw NumericalError("spatial system is singular: spectral radius >= 1");
}

SimDraw draw_with(const DGPConfig& cfg, const SpatialWeights& w,
                  const Eigen::PartialPivLU<Matrix>& s1,
                  const Eigen::PartialPivLU<Matrix>& s2, std::uint64_t rep_seed) {
  const int n = cfg.n;
  std::mt19937_64 rng(rep_seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Vector x1(n), z2(n), u(n), v(n);
  for (int i = 0; i < n; ++i) x1[i] = normal(rng);
  for (int i = 0; i < n; ++i) z2[i] = normal(rng);
  const double chol = std::sqrt(1.0 - cfg.sigma_vu * cfg.sigma_vu);
  for (int i = 0; i < n; ++i) {
    const double a = normal(rng);
    const double b = normal(rng);
    u[i] = a;
    v[i] = cfg.sigma_vu * a + chol * b;
  }

  const Vector wx1 = w.weights * x1;
  const Vector wz2 = w.weights * z2;
  const Vector x2 = s2.solve(cfg.zeta1 * x1 + cfg.zeta2 * z2 +
                             cfg.omega * wx1 + cfg.omega * wz2 + v);
  const Vector wx2 = w.weights * x2;
  const Vector y = s1.solve(cfg.beta1 * x1 + cfg.beta2 * x2 + cfg.omega * wx1 +
                            cfg.omega * wx2 + u);

  SimDraw draw;
  draw.data.y = y;
  draw.data.X1 = x1;
  draw.data.x2 = x2;
  draw.data.Z2 = z2;
  draw.u = std::move(u);
  draw.v = std::move(v);
  return draw;
}

struct RepOutcome {
  bool ok = false;
  double beta2 = 0.0;
  double se = 0.0;
  double sel_first = 0.0, sel_second = 0.0, sel_union = 0.0;
};

}  // namespace

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::simp_ols: return "SimpOLS";
    case EstimatorKind::simp_iv: return "SimpIV";
    case EstimatorKind::tsls_sar: return "2SLS-SAR";
    case EstimatorKind::mi2sl_lasso: return "Mi-2SLl";
    case EstimatorKind::mi2sl_post_lasso: return "Mi-2SLpl";
  }
  return "?";
}

SpatialWeights make_experiment_swm(const DGPConfig& cfg) {
  return normalize_max_row_sum(generate_small_world(cfg.n, cfg.k_neighbors,
                                                    cfg.rewire_prob, cfg.swm_seed));
}

SimDraw gen_draw(const DGPConfig& cfg, const SpatialWeights& w,
                 std::uint64_t rep_seed) {
  if (w.n() != cfg.n) throw InvalidParameterError("SWM size does not match cfg.n");
  check_dgp(cfg, w);
  const Matrix identity = Matrix::Identity(cfg.n, cfg.n);
  Eigen::PartialPivLU<Matrix> s1(identity - cfg.rho * w.weights);
  Eigen::PartialPivLU<Matrix> s2(identity - cfg.zeta31 * w.weights -
                                 cfg.zeta32 * (w.weights * w.weights));
  return draw_with(cfg, w, s1, s2, rep_seed);
}

std::vector<MonteCarloRow> run_experiment(const DGPConfig& cfg,
                                          const std::vector<EstimatorKind>& estimators,
                                          int reps, std::uint64_t base_seed,
                                          int threads) {
  if (reps < 1) throw InvalidParameterError("reps must be >= 1");
  if (estimators.empty()) throw InvalidParameterError("no estimators requested");

  const bool any_mi2sl =
      std::any_of(estimators.begin(), estimators.end(), [](EstimatorKind k) {
        return k == EstimatorKind::mi2sl_lasso || k == EstimatorKind::mi2sl_post_lasso;
      });

  struct Shared {
    SpatialWeights w;
    std::optional<EigenBasis> basis;
    Eigen::PartialPivLU<Matrix> s1, s2;
  };
  auto prepare = [&](std::uint64_t swm_seed) {
    DGPConfig c = cfg;
    c.swm_seed = swm_seed;
    Shared sh{make_experiment_swm(c), std::nullopt, {}, {}};
    check_dgp(cfg, sh.w);
    if (any_mi2sl) sh.basis = spectral_decompose(sh.w);
    const Matrix identity = Matrix::Identity(cfg.n, cfg.n);
    sh.s1.compute(identity - cfg.rho * sh.w.weights);
    sh.s2.compute(identity - cfg.zeta31 * sh.w.weights -
                  cfg.zeta32 * (sh.w.weights * sh.w.weights));
    return sh;
  };

  std::optional<Shared> fixed;
  if (!cfg.redraw_swm) fixed = prepare(cfg.swm_seed);

  const int ne = static_cast<int>(estimators.size());
  std::vector<RepOutcome> results(static_cast<std::size_t>(reps) * ne);

  auto run_rep = [&](int r) {
    const Shared* sh;
    std::optional<Shared> local;
    if (cfg.redraw_swm) {
      local = prepare(cfg.swm_seed + 1 + static_cast<std::uint64_t>(r));
      sh = &*local;
    } else {
      sh = &*fixed;
    }
    const SimDraw draw =
        draw_with(cfg, sh->w, sh->s1, sh->s2, base_seed ^ static_cast<std::uint64_t>(r));
    const int n = cfg.n;
    const Vector& x1 = draw.data.X1.col(0);

    Matrix X(n, 3);
    X << Vector::Ones(n), x1, draw.data.x2;
    Matrix Ziv(n, 3);
    Ziv << Vector::Ones(n), x1, draw.data.Z2.col(0);

    for (int e = 0; e < ne; ++e) {
      RepOutcome& out = results[static_cast<std::size_t>(r) * ne + e];
      try {
        switch (estimators[e]) {
          case EstimatorKind::simp_ols: {
            const FitResult fit = ols(draw.data.y, X);
            out.beta2 = fit.coefs[2];
            out.se = std::sqrt(fit.vcov_classical(2, 2));
            break;
          }
          case EstimatorKind::simp_iv: {
            const FitResult fit = tsls(draw.data.y, X, Ziv);
            out.beta2 = fit.coefs[2];
            out.se = std::sqrt(fit.vcov_classical(2, 2));
            break;
          }
          case EstimatorKind::tsls_sar: {
            const FitResult fit = tsls_sar(draw.data.y, x1, draw.data.x2,
                                           draw.data.Z2.col(0), sh->w);
            out.beta2 = fit.coefs[3];
            out.se = std::sqrt(fit.vcov_classical(3, 3));
            break;
          }
          case EstimatorKind::mi2sl_lasso:
          case EstimatorKind::mi2sl_post_lasso: {
            Mi2SLConfig mc;
            mc.variant = estimators[e] == EstimatorKind::mi2sl_lasso
                             ? FittedVariant::lasso
                             : FittedVariant::post_lasso;
            const Mi2SLFit fit = fit_mi2sl(draw.data, *sh->basis, sh->w, mc);
            out.beta2 = fit.final.coefs[2];
            out.se = std::sqrt(fit.final.vcov_classical(2, 2));
            out.sel_first = static_cast<double>(fit.selected_first.size());
            out.sel_second = static_cast<double>(fit.selected_second.size());
            out.sel_union = static_cast<double>(fit.selected_union.size());
            break;
          }
        }
        out.ok = std::isfinite(out.beta2) && std::isfinite(out.se);
      } catch (const Error&) {
        out.ok = false;
      }
    }
  };

  int nthreads = threads > 0 ? threads
                             : static_cast<int>(std::thread::hardware_concurrency());
  nthreads = std::max(1, std::min(nthreads, reps));
  if (nthreads == 1) {
    for (int r = 0; r < reps; ++r) run_rep(r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) {
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) run_rep(r);
      });
    }
    for (auto& th : pool) th.join();
  }

  // Aggregate in fixed replication order.
  std::vector<MonteCarloRow> rows;
  rows.reserve(ne);
  for (int e = 0; e < ne; ++e) {
    MonteCarloRow row;
    row.estimator_name = estimator_name(estimators[e]);
    double sum_b = 0, sum_sq = 0, sum_se = 0, sum_f = 0, sum_s = 0, sum_u = 0;
    int covered = 0, ok = 0;
    for (int r = 0; r < reps; ++r) {
      const RepOutcome& o = results[static_cast<std::size_t>(r) * ne + e];
      if (!o.ok) continue;
      ++ok;
      const double err = o.beta2 - cfg.beta2;
      sum_b += err;
      sum_sq += err * err;
      sum_se += o.se;
      sum_f += o.sel_first;
      sum_s += o.sel_second;
      sum_u += o.sel_union;
      if (std::abs(err) <= 1.959963984540054 * o.se) ++covered;
    }
    row.reps = reps;
    row.failures = reps - ok;
    if (ok > 0) {
      row.bias = sum_b / ok;
      row.mse = sum_sq / ok;
      row.aase = sum_se / ok;
      row.mean_selected_first = sum_f / ok;
      row.mean_selected_second = sum_s / ok;
      row.mean_selected_union = sum_u / ok;
      row.coverage95 = static_cast<double>(covered) / ok;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

bool is_mi2sl_name(const std::string& s) { return s.rfind("Mi-2SL", 0) == 0; }

// Round-half-even at 3 decimals, as the printed tables require.
std::string fmt3(double x) {
  double r = std::nearbyint(x * 1000.0) / 1000.0;
  if (r == 0.0) r = 0.0;  // normalize -0
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << r;
  return os.str();
}

}  // namespace

std::string emit_table(const std::vector<MonteCarloRow>& rows, TableFormat format) {
  if (rows.empty()) throw InvalidParameterError("no rows to emit");
  std::ostringstream os;
  if (format == TableFormat::csv) {
    os << "estimator,bias,mse,aase,sel_first,sel_second,sel_union,reps,failures\n";
    for (const auto& r : rows) {
      os << r.estimator_name << ',' << fmt3(r.bias) << ',' << fmt3(r.mse) << ','
         << fmt3(r.aase) << ',';
      if (is_mi2sl_name(r.estimator_name))
        os << fmt3(r.mean_selected_first) << ',' << fmt3(r.mean_selected_second)
           << ',' << fmt3(r.mean_selected_union);
      else
        os << ",,";
      os << ',' << r.reps << ',' << r.failures << '\n';
    }
  } else {
    os << "Estimator      bias     MSE    AASE  Vecs\n";
    for (const auto& r : rows) {
      std::ostringstream vecs;
      if (is_mi2sl_name(r.estimator_name)) {
        vecs << '[' << std::llround(r.mean_selected_first) << ','
             << std::llround(r.mean_selected_second) << "] "
             << std::llround(r.mean_selected_union);
      } else {
        vecs << '-';
      }
      os << r.estimator_name;
      for (std::size_t i = r.estimator_name.size(); i < 9; ++i) os << ' ';
      auto pad = [&](const std::string& s, int width) {
        for (int i = static_cast<int>(s.size()); i < width; ++i) os << ' ';
        os << s;
      };
      pad(fmt3(r.bias), 8);
      pad(fmt3(r.mse), 8);
      pad(fmt3(r.aase), 8);
      os << "  " << vecs.str();
      if (r.failures > 0) os << "  (failures: " << r.failures << ')';
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace mi2sl
