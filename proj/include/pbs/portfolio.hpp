#pragma once

#include <Eigen/Dense>

namespace pbs {

// Sign of the w^T w regularizer: `kSpread` subtracts it (diversifying,
// concave), `kConcentrate` adds it as the objective is written.
enum class RegSign { kSpread, kConcentrate };

// Maximize w^T mu - delta w^T Sigma w + rho * alpha * w^T w over the
// probability simplex.
struct PortfolioProblem {
  Eigen::VectorXd mu;
  Eigen::MatrixXd covariance;
  double delta = 1.0;
  double alpha = 0.1;
  RegSign reg_sign = RegSign::kSpread;

  void validate() const;
};

struct PortfolioSolution {
  Eigen::VectorXd w;
  double objective = 0.0;
  int iterations = 0;
  bool converged = true;
  bool nonconcave = false;
};

double portfolio_objective(const PortfolioProblem& problem, const Eigen::VectorXd& w);

// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

// Projected gradient ascent with backtracking line search. Weights below
// 1e-9 are clamped to zero and the vector renormalized.
PortfolioSolution solve_portfolio(const PortfolioProblem& problem, double tol = 1e-10,
                                  int max_iters = 20000);

// Exhaustive simplex-lattice search at resolution `step`; validation
// oracle for small N.
PortfolioSolution grid_oracle(const PortfolioProblem& problem, double step);

}  // namespace pbs
