#pragma once

#include <functional>
#include <optional>

#include <powerprior/a0_prior.hpp>
#include <powerprior/model.hpp>
#include <powerprior/rng.hpp>

// Closed-form normalising constants l(a0) = log c(a0) and their a0-derivatives
// for the conjugate families, plus exact samplers of the power posterior.
namespace powerprior::conjugate {

// --- log marginal likelihood of weighted sufficient statistics -------------
// log of the integral of L_w(theta) pi(theta), where L_w is the likelihood
// implied by (possibly fractionally) weighted statistics.

double log_evidence(const BetaBernoulliPrior& prior, const BinomialStats& s);
double log_evidence(const GammaPoissonPrior& prior, const PoissonStats& s);
double log_evidence(const NormalGammaPrior& prior, const GaussianStats& s);
double log_evidence(const NIGPrior& prior, const RegressionStats& s);

// --- per-family constants ---------------------------------------------------

double bern_log_c(double a0, double y0, double N0, double c, double d);
double bern_log_c_prime(double a0, double y0, double N0, double c, double d);
// log p(a0 | D0, D) up to an a0-free constant: log pi_A(a0) + log B(z + y, w + N - y) - log B(z, w)
// with z = a0*y0 + c and w = a0*(N0 - y0) + d.
double bern_log_marginal_a0(double a0, double y0, double N0, double y, double N, double c, double d,
                            const A0Prior& prior_a0);

double pois_log_c(double a0, const PoissonStats& s0, double alpha0, double beta0);
double pois_log_c_prime(double a0, const PoissonStats& s0, double alpha0, double beta0);

double ng_log_c(double a0, const GaussianStats& s0, const NormalGammaPrior& prior);
double ng_log_c_prime(double a0, const GaussianStats& s0, const NormalGammaPrior& prior);

// c = g h w z; each member is the logarithmic derivative of that factor.
struct NormalGammaDerivativeTerms {
    double g = 0.0; // Gamma(alpha_n) / Gamma(alpha0)
    double h = 0.0; // beta0^alpha0 / beta_n^alpha_n
    double w = 0.0; // (kappa0 / kappa_n)^(1/2)
    double z = 0.0; // (2 pi)^(-N0 a0 / 2)
    double total() const { return g + h + w + z; }
};
NormalGammaDerivativeTerms ng_log_c_prime_terms(double a0, const GaussianStats& s0,
                                                const NormalGammaPrior& prior);

double nig_log_c(double a0, const RegressionStats& s0, const NIGPrior& prior);
double nig_log_c_prime(double a0, const RegressionStats& s0, const NIGPrior& prior);

// --- generic conjugate exponential family ----------------------------------

struct ExpFamConjugateSpec {
    // log H(tau, n0): log normaliser of the conjugate prior.
    std::function<double(const VectorXd& tau, double n0)> log_H;
    VectorXd tau;
    double n0 = 0.0;
    VectorXd S;         // sufficient statistic of D0
    double log_h = 0.0; // sum_i log h(d0i)
};

ExpFamConjugateSpec bernoulli_expfam(double c, double d, const Dataset& D0);
ExpFamConjugateSpec poisson_expfam(double alpha0, double beta0, const Dataset& D0);

double expfam_log_c_conjugate(const ExpFamConjugateSpec& spec, double a0, double N0);
// log p(a0 | D0, D) up to an a0-free constant. The base measure of D0 cancels
// between c(a0) and the joint integral; log_h_D is kept so that values are
// comparable across datasets.
double expfam_log_marginal_a0(const ExpFamConjugateSpec& spec, double a0, double N0, double N,
                              const VectorXd& S_D, double log_h_D, const A0Prior& prior_a0);

// --- model-level dispatch --------------------------------------------------

double log_c(const ModelSpec& model, const Dataset& D0, double a0);
double log_c_prime(const ModelSpec& model, const Dataset& D0, double a0);
// log of the integral of L(D0|theta)^a0 L(D|theta) pi(theta).
double log_joint_evidence(const ModelSpec& model, const Dataset& D0, double a0, const Dataset& D);
// log p(a0 | D0, D) up to a constant (log pi_A - l(a0) + log joint evidence).
double log_marginal_a0(const ModelSpec& model, const Dataset& D0, const Dataset& D, double a0,
                       const A0Prior& prior_a0);

// n i.i.d. draws (rows, constrained space) from L(D0|theta)^a0 [L(D|theta)] pi(theta).
MatrixXd exact_conditional_sample(const ModelSpec& model, const Dataset& D0, double a0,
                                  const std::optional<Dataset>& D, Rng& rng, Index n);

} // namespace powerprior::conjugate
