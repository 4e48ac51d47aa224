#include "pbs/moments.hpp"

#include <cmath>
#include <stdexcept>

namespace pbs {

Moments dist_moments(const CategoricalOverBins& dist) {
  Moments m;
  for (int i = 0; i < dist.size(); ++i) m.mean += dist.probs[i] * dist.bin_values[i];
  for (int i = 0; i < dist.size(); ++i) {
    const double d = dist.bin_values[i] - m.mean;
    m.var += dist.probs[i] * d * d;
  }
  return m;
}

double trajectory_mean(const MomentLedger& ledger, double gamma) {
  const int d = ledger.depth();
  if (d < 1) throw std::invalid_argument("trajectory_mean: empty ledger");
  double mu = 0.0;
  for (int t = 1; t <= d - 1; ++t) mu += std::pow(gamma, t) * ledger.reward[t - 1].mean;
  mu += std::pow(gamma, d) * ledger.rtg.mean;
  return mu;
}

double trajectory_variance(const MomentLedger& ledger, double gamma) {
  const int d = ledger.depth();
  if (d < 1) throw std::invalid_argument("trajectory_variance: empty ledger");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("trajectory_variance: gamma must be in (0, 1]");
  double var = 0.0;
  for (int t = 1; t <= d - 1; ++t) var += std::pow(gamma, -2 * t) * ledger.reward[t - 1].var;
  var += std::pow(gamma, -2 * d) * ledger.rtg.var;
  return var;
}

double smc_similarity(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("smc_similarity: unequal lengths");
  if (a.empty()) throw std::invalid_argument("smc_similarity: empty trajectories");
  size_t lcp = 0;
  while (lcp < a.size() && a[lcp] == b[lcp]) ++lcp;
  const size_t edges = a.size() - 1;
  if (edges == 0) return lcp == 1 ? 1.0 : 0.0;
  const size_t shared = lcp > 0 ? lcp - 1 : 0;
  return static_cast<double>(shared) / static_cast<double>(edges);
}

double smc_similarity(const Trajectory& a, const Trajectory& b) {
  const std::vector<int> ta = a.flat_tokens();
  const std::vector<int> tb = b.flat_tokens();
  return smc_similarity(std::span<const int>(ta), std::span<const int>(tb));
}

Eigen::MatrixXd assemble_covariance(const Eigen::VectorXd& sigma_diag,
                                    const Eigen::MatrixXd& similarity) {
  const Eigen::Index n = sigma_diag.size();
  if (similarity.rows() != n || similarity.cols() != n)
    throw std::invalid_argument("assemble_covariance: dimension mismatch");
  if (!similarity.isApprox(similarity.transpose(), 1e-12))
    throw std::invalid_argument("assemble_covariance: similarity matrix not symmetric");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(sigma_diag[i] >= 0.0))
      throw std::invalid_argument("assemble_covariance: negative standard deviation");
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) cov(i, j) = sigma_diag[i] * similarity(i, j) * sigma_diag[j];
  return cov;
}

PortfolioInputs build_portfolio_inputs(const std::vector<MomentLedger>& ledgers,
                                       const std::vector<std::vector<int>>& token_views,
                                       double gamma) {
  const size_t n = ledgers.size();
  if (n == 0) throw std::invalid_argument("build_portfolio_inputs: empty candidate set");
  if (token_views.size() != n)
    throw std::invalid_argument("build_portfolio_inputs: ledger/token view size mismatch");
  const int depth = ledgers.front().depth();
  for (const auto& l : ledgers)
    if (l.depth() != depth)
      throw std::invalid_argument("build_portfolio_inputs: candidates differ in depth");

  PortfolioInputs in;
  in.mu.resize(n);
  in.sigma.resize(n);
  in.similarity.resize(n, n);
  for (size_t i = 0; i < n; ++i) {
    in.mu[i] = trajectory_mean(ledgers[i], gamma);
    in.sigma[i] = std::sqrt(trajectory_variance(ledgers[i], gamma));
  }
  for (size_t i = 0; i < n; ++i) {
    in.similarity(i, i) = 1.0;
    for (size_t j = i + 1; j < n; ++j) {
      const double s = smc_similarity(std::span<const int>(token_views[i]),
                                      std::span<const int>(token_views[j]));
      in.similarity(i, j) = s;
      in.similarity(j, i) = s;
    }
  }
  in.covariance = assemble_covariance(in.sigma, in.similarity);
  return in;
}

}  // namespace pbs
