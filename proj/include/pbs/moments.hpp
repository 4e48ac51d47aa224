#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "pbs/model.hpp"
#include "pbs/trajectory.hpp"

namespace pbs {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

// mean = sum p_i v_i; variance = sum p_i (v_i - mean)^2.
Moments dist_moments(const CategoricalOverBins& dist);

// Per-step reward moments plus the final-step reward-to-go moments of a
// candidate trajectory.
struct MomentLedger {
  std::vector<Moments> reward;  // one entry per transition
  Moments rtg;                  // moments of R-hat at the current depth

  int depth() const { return static_cast<int>(reward.size()); }

  void push_step(Moments reward_moments, Moments rtg_moments) {
    reward.push_back(reward_moments);
    rtg = rtg_moments;
  }
};

// mu = sum_{t=1}^{d-1} gamma^t E[r_t] + gamma^d E[R-hat_d].
double trajectory_mean(const MomentLedger& ledger, double gamma);

// sigma^2 = sum_{t=1}^{d-1} gamma^{-2t} Var[r_t] + gamma^{-2d} Var[R-hat_d].
double trajectory_variance(const MomentLedger& ledger, double gamma);

// Shared beam-tree edges over total edges for two equal-length token
// sequences; consecutive tokens form the edges, so L tokens give L-1 edges
// rooted at the shared start token.
double smc_similarity(std::span<const int> a, std::span<const int> b);
double smc_similarity(const Trajectory& a, const Trajectory& b);

// Sigma_ij = sigma_i * s_ij * sigma_j.
Eigen::MatrixXd assemble_covariance(const Eigen::VectorXd& sigma_diag,
                                    const Eigen::MatrixXd& similarity);

struct PortfolioInputs {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;  // per-trajectory standard deviations
  Eigen::MatrixXd similarity;
  Eigen::MatrixXd covariance;
};

PortfolioInputs build_portfolio_inputs(const std::vector<MomentLedger>& ledgers,
                                       const std::vector<std::vector<int>>& token_views,
                                       double gamma);

}  // namespace pbs
