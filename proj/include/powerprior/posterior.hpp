#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <powerprior/a0_prior.hpp>
#include <powerprior/curvefit.hpp>
#include <powerprior/mcmc.hpp>
#include <powerprior/quadrature.hpp>

// Joint posterior of (theta, a0) under the normalised power prior, with c(a0)
// ignored, known exactly, or looked up in a dictionary.
namespace powerprior::posterior {

enum class Normalisation { None, Exact, Dictionary };
std::string_view normalisation_name(Normalisation n);
Normalisation parse_normalisation(std::string_view s);

struct JointConfig {
    mcmc::ChainConfig chains;
    double a0_target_acceptance = 0.44;
};

struct JointDraws {
    std::vector<std::string> names;   // parameter names followed by "a0"
    std::vector<MatrixXd> draws;      // per chain: kept iterations x (q + 1), constrained theta then a0
    mcmc::Diagnostics diagnostics;
    Normalisation normalisation = Normalisation::None;
    std::string dictionary_id;
    bool gate_passed = true;
    int attempts = 1;
    std::vector<double> a0_acceptance;

    MatrixXd pooled() const;
    VectorXd pooled_a0() const;
};

// Components of a joint sampling problem on the unconstrained theta space.
struct JointProblem {
    Index dim = 0;
    std::vector<std::string> names;
    std::function<double(const VectorXd& u)> log_hist; // log L(D0 | theta(u))
    std::function<double(const VectorXd& u)> log_base; // log L(D | theta(u)) + log pi(theta(u)) + log Jacobian
    std::function<VectorXd(double a0, Rng& rng)> exact_theta; // optional: draw u from the conditional given a0
    std::function<VectorXd(const VectorXd& u)> to_output;     // u -> constrained theta
    std::function<double(double a0)> log_c;                   // subtracted from the a0 target
    A0Prior a0_prior;
    VectorXd init_mean;
    MatrixXd init_cov;
};

// Metropolis-within-Gibbs: theta | a0 exactly when available, otherwise by
// adaptive random walk plus an independence step; a0 | theta by random walk on
// logit(a0 / M). A joint move proposes a new a0 and shifts theta along a
// Gaussian approximation of theta | a0 built by finite differences.
JointDraws sample_joint_problem(const JointProblem& problem, const JointConfig& cfg);

JointDraws sample_joint(const ModelSpec& model, const Dataset& D0, const Dataset& D, const A0Prior& a0_prior,
                        Normalisation normalisation, const curvefit::Dictionary* dictionary, const JointConfig& cfg);

// log p(a0 | D0, D) of a conjugate model on a K_quad-point grid over [0, M], normalised.
quad::NormalisedDensity exact_marginal_a0(const ModelSpec& model, const Dataset& D0, const Dataset& D,
                                          const A0Prior& a0_prior, int K_quad);

struct ParamSummary {
    std::string name;
    double mean = 0.0;
    double lower = 0.0; // 2.5%
    double upper = 0.0; // 97.5%
    double sd = 0.0;
    double rhat = 0.0;
    double ess = 0.0;
};

std::vector<ParamSummary> summarise(const JointDraws& draws);
// Mean and central 95% interval of each column of pooled draws.
std::vector<ParamSummary> summarise_columns(const std::vector<MatrixXd>& chains, const std::vector<std::string>& names);
double quantile(std::vector<double> x, double p);

// Kolmogorov-Smirnov distance between draws and a tabulated CDF.
double ks_distance(std::vector<double> draws, const quad::NormalisedDensity& reference);

struct SensitivityRow {
    double a0 = 0.0;
    std::vector<ParamSummary> prior;     // power prior, historical data only
    std::vector<ParamSummary> posterior; // with current data
    bool gate_passed = true;
};

struct SensitivityResult {
    std::vector<SensitivityRow> rows;
};

SensitivityResult sensitivity_analysis(const ModelSpec& model, const Dataset& D0, const Dataset& D,
                                       const std::vector<double>& a0_list, const mcmc::ChainConfig& cfg);

} // namespace powerprior::posterior
