#include "mi2sl/lasso.hpp"

#include <cassert>
#include <cmath>

namespace mi2sl {

namespace {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

void check_dimensions(const LassoProblem& p) {
  const Eigen::Index n = p.response.size();
  if (p.unpenalized.rows() != n || p.penalized.rows() != n)
    throw InvalidParameterError("lasso problem dimension mismatch");
}

}  // namespace

double lambda_max(const Vector& response, const Matrix& unpenalized,
                  const Matrix& penalized) {
  Vector partialled = response;
  if (unpenalized.cols() > 0) {
    Eigen::HouseholderQR<Matrix> qr(unpenalized);
    partialled -= unpenalized * qr.solve(response);
  }
  if (penalized.cols() == 0) return 0.0;
  return 2.0 * (penalized.transpose() * partialled).cwiseAbs().maxCoeff();
}

double tuning_from_z(double z, double lambda_max_value) {
  if (std::abs(z) >= kZFloor && std::isfinite(z)) return 1.0 / (z * z);
  return lambda_max_value * 1.01;
}

LassoFit fit_partial_lasso(const LassoProblem& problem, double tol, int max_iter) {
  check_dimensions(problem);
  if (!(problem.lambda > 0.0))
    throw InvalidParameterError("lasso tuning parameter must be positive");

  const Matrix& d = problem.unpenalized;
  const Matrix& e = problem.penalized;
  const Vector& y = problem.response;
  const Eigen::Index nd = d.cols();
  const Eigen::Index ne = e.cols();
  const double lam = problem.lambda;

  if (nd > 0) {
    Eigen::ColPivHouseholderQR<Matrix> rank_check(d);
    rank_check.setThreshold(1e-10);
    if (rank_check.rank() < nd)
      throw RankError("unpenalized block is rank deficient");
  }
  Eigen::HouseholderQR<Matrix> dqr;
  if (nd > 0) dqr.compute(d);

  const Vector colsq = e.colwise().squaredNorm();
  Vector b = Vector::Zero(nd);
  Vector g = Vector::Zero(ne);
  Vector r = y;  // residual y - D b - E g, maintained incrementally
  if (nd > 0) {
    b = dqr.solve(y);
    r -= d * b;
  }

#ifndef NDEBUG
  double prev_obj = r.squaredNorm() + lam * g.lpNorm<1>();
#endif

  int it = 0;
  bool converged = false;
  for (; it < max_iter; ++it) {
    double max_change = 0.0;
    if (nd > 0) {
      const Vector bn = dqr.solve(r + d * b);
      max_change = (bn - b).cwiseAbs().maxCoeff();
      r += d * (b - bn);
      b = bn;
    }
    for (Eigen::Index j = 0; j < ne; ++j) {
      if (colsq[j] <= 0.0) continue;
      const double gj = g[j];
      const double rho = e.col(j).dot(r) + colsq[j] * gj;
      const double gn = soft_threshold(rho, lam / 2.0) / colsq[j];
      if (gn != gj) {
        r += e.col(j) * (gj - gn);
        max_change = std::max(max_change, std::abs(gn - gj));
        g[j] = gn;
      }
    }
#ifndef NDEBUG
    const double obj = r.squaredNorm() + lam * g.lpNorm<1>();
    assert(obj <= prev_obj + 1e-9 * (1.0 + std::abs(prev_obj)));
    prev_obj = obj;
#endif
    if (max_change < tol) {
      converged = true;
      ++it;
      break;
    }
  }

  LassoFit fit;
  fit.unpenalized_coefs = std::move(b);
  fit.penalized_coefs = std::move(g);
  for (Eigen::Index j = 0; j < ne; ++j)
    if (fit.penalized_coefs[j] != 0.0) fit.active_set.push_back(static_cast<int>(j));
  fit.lambda = lam;
  fit.iterations = it;
  fit.converged = converged;
  fit.fitted = y - r;
  fit.objective_value = r.squaredNorm() + lam * fit.penalized_coefs.lpNorm<1>();
  return fit;
}

LassoFit post_lasso(const LassoProblem& problem, const std::vector<int>& active_set) {
  check_dimensions(problem);
  const Matrix& d = problem.unpenalized;
  const Matrix& e = problem.penalized;
  const Vector& y = problem.response;
  const Eigen::Index n = y.size();
  const Eigen::Index nd = d.cols();

  // Add active columns in index order, dropping any that are collinear with
  // what is already in the design.
  std::vector<int> kept;
  std::vector<int> dropped;
  Matrix design = d;
  Eigen::Index rank = 0;
  if (nd > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    qr.setThreshold(1e-10);
    rank = qr.rank();
    if (rank < nd) throw RankError("unpenalized block is rank deficient");
  }
  for (int j : active_set) {
    if (j < 0 || j >= e.cols())
      throw InvalidParameterError("active set index out of range");
    Matrix trial(n, design.cols() + 1);
    trial << design, e.col(j);
    Eigen::ColPivHouseholderQR<Matrix> qr(trial);
    qr.setThreshold(1e-10);
    if (qr.rank() > rank) {
      design = std::move(trial);
      ++rank;
      kept.push_back(j);
    } else {
      dropped.push_back(j);
    }
  }

  Eigen::HouseholderQR<Matrix> qr(design);
  const Vector coefs = qr.solve(y);

  LassoFit fit;
  fit.unpenalized_coefs = coefs.head(nd);
  fit.penalized_coefs = Vector::Zero(e.cols());
  for (std::size_t i = 0; i < kept.size(); ++i)
    fit.penalized_coefs[kept[i]] = coefs[nd + static_cast<Eigen::Index>(i)];
  fit.active_set = kept;
  fit.lambda = problem.lambda;
  fit.iterations = 0;
  fit.converged = true;
  fit.fitted = design * coefs;
  fit.objective_value = (y - fit.fitted).squaredNorm() +
                        problem.lambda * fit.penalized_coefs.lpNorm<1>();
  fit.dropped_columns = std::move(dropped);
  return fit;
}

}  // namespace mi2sl
