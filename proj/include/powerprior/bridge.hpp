#pragma once

#include <functional>
#include <vector>

#include <powerprior/mcmc.hpp>

// Bridge-sampling estimates of l(a0) = log c(a0) from power-posterior draws,
// with a multivariate normal proposal matched to the draws.
namespace powerprior::bridge {

struct ProposalFit {
    VectorXd mean;
    MatrixXd covariance;
    MatrixXd chol; // lower factor of covariance
    double log_det = 0.0;

    double log_density(const VectorXd& u) const;
    VectorXd draw(Rng& rng) const;
};

// Mean and covariance of the rows of draws, covariance jittered by 1e-8 * trace / q.
ProposalFit fit_proposal(const MatrixXd& unconstrained_draws);
ProposalFit fit_proposal(const mcmc::ChainOutput& draws, const ModelSpec& model);

struct BridgeConfig {
    double tol = 1e-10;
    int max_iter = 1000;
    Index proposal_draws = 0; // 0: same as the number of posterior draws
};

struct BridgeEstimate {
    double log_c = 0.0;
    double rel_mcse = 0.0; // approximate relative error of c, i.e. absolute error of log c
    int iterations = 0;
};

using LogDensityFn = std::function<double(const VectorXd&)>;

// log of the integral of exp(log_f) given draws (rows, per chain) from the
// normalised density proportional to exp(log_f).
BridgeEstimate bridge_estimate(const LogDensityFn& log_f, const std::vector<MatrixXd>& chains, const BridgeConfig& cfg,
                               Rng& rng);

// log c(a0) for a power prior target without current data, working on the
// unconstrained space with the transform Jacobian folded into the density.
BridgeEstimate bridge_log_c(const PowerPriorTarget& target, const mcmc::ChainOutput& draws, const BridgeConfig& cfg,
                            Rng& rng);

} // namespace powerprior::bridge
