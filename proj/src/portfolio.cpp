#include "pbs/portfolio.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace pbs {

void PortfolioProblem::validate() const {
  const Eigen::Index n = mu.size();
  if (n == 0) throw std::invalid_argument("portfolio: empty problem");
  if (covariance.rows() != n || covariance.cols() != n)
    throw std::invalid_argument("portfolio: covariance dimension mismatch");
  if (!mu.allFinite() || !covariance.allFinite())
    throw std::invalid_argument("portfolio: non-finite inputs");
  if (!covariance.isApprox(covariance.transpose(), 1e-9))
    throw std::invalid_argument("portfolio: covariance not symmetric");
  if (!(delta >= 0.0) || !std::isfinite(delta) || !(alpha >= 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("portfolio: delta and alpha must be finite and >= 0");
}

double portfolio_objective(const PortfolioProblem& p, const Eigen::VectorXd& w) {
  const double rho = p.reg_sign == RegSign::kSpread ? -1.0 : 1.0;
  return w.dot(p.mu) - p.delta * w.dot(p.covariance * w) + rho * p.alpha * w.squaredNorm();
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  if (!v.allFinite()) throw std::invalid_argument("project_to_simplex: non-finite input");
  const Eigen::Index n = v.size();
  // Michelot's algorithm: shrink the active set until the threshold is
  // consistent.
  std::vector<bool> active(n, true);
  Eigen::Index n_active = n;
  double tau = (v.sum() - 1.0) / n;
  bool changed = true;
  while (changed) {
    changed = false;
    double sum = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (active[i] && v[i] - tau <= 0.0) {
        active[i] = false;
        changed = true;
      }
      if (active[i]) {
        sum += v[i];
        ++count;
      }
    }
    n_active = count;
    if (n_active == 0) break;
    tau = (sum - 1.0) / n_active;
  }
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = active[i] ? std::max(v[i] - tau, 0.0) : 0.0;
  return w;
}

namespace {

Eigen::VectorXd vertex(Eigen::Index n, Eigen::Index i) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  w[i] = 1.0;
  return w;
}

void clamp_and_renormalize(Eigen::VectorXd& w) {
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w[i] < 1e-9) w[i] = 0.0;
  const double s = w.sum();
  if (s > 0.0) w /= s;
}

}  // namespace

PortfolioSolution solve_portfolio(const PortfolioProblem& p, double tol, int max_iters) {
  p.validate();
  const Eigen::Index n = p.mu.size();
  const double rho = p.reg_sign == RegSign::kSpread ? -1.0 : 1.0;

  PortfolioSolution sol;
  if (p.delta == 0.0 && p.alpha == 0.0) {
    // Linear objective attains a vertex at argmax mu; ties go to the
    // lowest index.
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (p.mu[i] > p.mu[best]) best = i;
    sol.w = vertex(n, best);
    sol.objective = portfolio_objective(p, sol.w);
    return sol;
  }

  if (rho > 0.0 && p.alpha > 0.0) {
    // Concave iff delta * Sigma - alpha * I is PSD.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.delta * p.covariance);
    if (es.eigenvalues().minCoeff() < p.alpha - 1e-12) sol.nonconcave = true;
  }

  auto gradient = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
    return p.mu - 2.0 * p.delta * (p.covariance * w) + 2.0 * rho * p.alpha * w;
  };

  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / n);
  double f = portfolio_objective(p, w);
  double eta = 1.0;
  sol.converged = false;
  int it = 0;
  for (; it < max_iters; ++it) {
    const Eigen::VectorXd g = gradient(w);
    const double pg_norm = (project_to_simplex(w + g) - w).lpNorm<Eigen::Infinity>();
    if (pg_norm <= tol) {
      sol.converged = true;
      break;
    }
    // Backtracking line search; the objective sequence is nondecreasing.
    eta = std::min(eta * 2.0, 1e6);
    bool stepped = false;
    double accepted_move = 0.0;
    while (eta > 1e-16) {
      Eigen::VectorXd cand = project_to_simplex(w + eta * g);
      const double move = (cand - w).squaredNorm();
      if (move == 0.0) break;  // projection fixed point, no ascent at this step size
      const double fc = portfolio_objective(p, cand);
      if (fc >= f + 1e-4 / eta * move) {
        w = std::move(cand);
        f = fc;
        stepped = true;
        accepted_move = move;
        break;
      }
      eta *= 0.5;
    }
    if (!stepped || accepted_move <= tol * tol) {
      // either no ascent direction remains at machine precision or the
      // iterates have stopped moving beyond the tolerance
      sol.converged = true;
      break;
    }
  }
  sol.iterations = it;
  clamp_and_renormalize(w);
  sol.w = std::move(w);
  sol.objective = portfolio_objective(p, sol.w);
  return sol;
}

PortfolioSolution grid_oracle(const PortfolioProblem& p, double step) {
  p.validate();
  const Eigen::Index n = p.mu.size();
  if (n > 4) throw std::invalid_argument("grid_oracle: N must be <= 4");
  if (!(step > 0.0 && step <= 0.1)) throw std::invalid_argument("grid_oracle: step out of range");
  const long divisions = std::lround(1.0 / step);

  PortfolioSolution best;
  best.objective = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd w(n);
  // Enumerate all lattice points with coordinates i/divisions summing to 1.
  std::vector<long> counts(n, 0);
  auto recurse = [&](auto&& self, Eigen::Index dim, long remaining) -> void {
    if (dim == n - 1) {
      counts[dim] = remaining;
      for (Eigen::Index i = 0; i < n; ++i) w[i] = static_cast<double>(counts[i]) / divisions;
      const double f = portfolio_objective(p, w);
      if (f > best.objective) {
        best.objective = f;
        best.w = w;
      }
      return;
    }
    for (long c = 0; c <= remaining; ++c) {
      counts[dim] = c;
      self(self, dim + 1, remaining - c);
    }
  };
  recurse(recurse, 0, divisions);
  return best;
}

}  // namespace pbs
