#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <powerprior/model.hpp>
#include <powerprior/rng.hpp>

// Sampling of power posteriors at fixed a0, convergence diagnostics, and the
// derivative estimates l'(a0) = E[log L(D0|theta)], l''(a0) = Var[log L(D0|theta)].
namespace powerprior::mcmc {

struct ChainConfig {
    int n_chains = 4;
    int n_iter = 2000;
    int n_warmup = 1000;
    std::uint64_t seed = 1;
    double target_acceptance = 0.234;

    int n_kept() const { return n_iter - n_warmup; }
    void validate() const;
};

struct ChainOutput {
    std::vector<MatrixXd> draws;          // per chain: kept iterations x q, constrained space
    std::vector<VectorXd> log_likelihood; // per chain: log L(D0|theta) at each kept draw
    std::vector<double> acceptance_rate;  // per chain; 1 for exact draws
    bool exact = false;
    bool gate_passed = true;
    int attempts = 1;

    Index n_chains() const { return static_cast<Index>(draws.size()); }
    Index n_kept() const { return draws.empty() ? 0 : draws.front().rows(); }
    Index dim() const { return draws.empty() ? 0 : draws.front().cols(); }
    MatrixXd pooled() const;
    VectorXd pooled_log_likelihood() const;
};

struct Diagnostics {
    VectorXd rhat;
    VectorXd ess;
    VectorXd mcse;
    VectorXd mean;
    VectorXd sd;
    std::vector<bool> constant;

    // R-hat below rhat_max and MCSE below mcse_fraction of the posterior sd for every parameter.
    bool passes_gate(double rhat_max = 1.01, double mcse_fraction = 0.05) const;
};

// Per-column diagnostics for chains given as (iterations x parameters) matrices.
Diagnostics compute_diagnostics(const std::vector<MatrixXd>& chains);
Diagnostics compute_diagnostics(const ChainOutput& out);

// Split R-hat and effective sample size of a scalar quantity across chains.
double split_rhat(const std::vector<VectorXd>& chains);
double effective_sample_size(const std::vector<VectorXd>& chains);

struct Estimate {
    double value = 0.0;
    double mcse = 0.0;
};

Estimate estimate_l_prime(const ChainOutput& out);
Estimate estimate_l_second(const ChainOutput& out);

// --- random-walk Metropolis --------------------------------------------------

using LogDensity = std::function<double(const VectorXd&)>;

struct RwmChain {
    MatrixXd draws; // kept iterations x q
    double acceptance_rate = 0.0;
};

// Random-walk Metropolis with covariance and step-size adaptation during
// warmup only. proposal_cov is the starting proposal shape. Once the last
// covariance window closes, each iteration adds a multivariate-t independence
// step built from the warmup draws.
RwmChain adaptive_rwm(const LogDensity& log_density, const VectorXd& init, const MatrixXd& proposal_cov, int n_iter,
                      int n_warmup, double target_acceptance, Rng& rng);

// Value, gradient and Hessian by central differences.
struct Expansion {
    double value = 0.0;
    VectorXd gradient;
    MatrixXd hessian;
};
Expansion finite_difference_expansion(const LogDensity& f, const VectorXd& x, double h = 1e-4);

struct LaplaceFit {
    VectorXd mode;
    MatrixXd covariance;
};

// Newton iterations with finite-difference derivatives.
LaplaceFit laplace_approximation(const LogDensity& log_density, const VectorXd& start);

// Draws from L(D0|theta)^a0 [L(D|theta)] pi(theta). Conjugate families use exact
// i.i.d. draws, logistic regression uses adaptive random-walk Metropolis on the
// unconstrained space. Runs that fail the diagnostics gate are retried once with
// four times the iterations; gate_passed records the final outcome.
ChainOutput sample_power_posterior(const PowerPriorTarget& target, const ChainConfig& cfg);

} // namespace powerprior::mcmc
