#include <powerprior/conjugate.hpp>

#include <cmath>

#include <boost/math/special_functions/digamma.hpp>

#include <powerprior/errors.hpp>

namespace powerprior::conjugate {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

using boost::math::digamma;

void require_a0(double a0)
{
    if (!(a0 >= 0.0) || !std::isfinite(a0))
        throw DomainError("a0 must be a finite non-negative number");
}

void require_beta_args(double a, double b)
{
    if (!(a > 0.0) || !(b > 0.0))
        throw DomainError("Beta function arguments must be positive");
}

struct NigPosterior {
    Eigen::LLT<MatrixXd> llt; // of Lambda_n
    VectorXd mu_n;
    double alpha_n = 0.0;
    double gamma_n = 0.0;
    double log_det_Lambda_n = 0.0;
};

NigPosterior nig_update(const NIGPrior& prior, const RegressionStats& s)
{
    NigPosterior post;
    const Index P = prior.mu0.size();
    MatrixXd Lambda_n = prior.Lambda0_inv;
    VectorXd b = prior.Lambda0_inv * prior.mu0;
    if (s.xtx.size() != 0) {
        if (s.xtx.rows() != P)
            throw DomainError("regression statistics do not match the prior dimension");
        Lambda_n += s.xtx;
        b += s.xty;
    }
    post.llt.compute(Lambda_n);
    if (post.llt.info() != Eigen::Success)
        throw NumericalError("posterior precision Lambda_n is not positive definite");
    post.mu_n = post.llt.solve(b);
    post.alpha_n = prior.alpha0 + 0.5 * s.n;
    post.gamma_n = prior.gamma0 + 0.5 * (s.yty + prior.mu0_quad - b.dot(post.mu_n));
    if (!(post.gamma_n > 0.0))
        throw NumericalError("posterior scale gamma_n is not positive");
    post.log_det_Lambda_n = 2.0 * post.llt.matrixLLT().diagonal().array().log().sum();
    return post;
}

struct NgPosterior {
    double mu_n, kappa_n, alpha_n, beta_n;
};

NgPosterior ng_update(const NormalGammaPrior& p, const GaussianStats& s)
{
    const double kappa_n = p.kappa0 + s.n;
    const double dev = s.mean - p.mu0;
    const double mu_n = s.n > 0.0 ? (p.kappa0 * p.mu0 + s.n * s.mean) / kappa_n : p.mu0;
    const double beta_n = p.beta0 + 0.5 * (s.ss + p.kappa0 * s.n * dev * dev / kappa_n);
    return {mu_n, kappa_n, p.alpha0 + 0.5 * s.n, beta_n};
}

} // namespace

// ---------------------------------------------------------------------------

double log_evidence(const BetaBernoulliPrior& p, const BinomialStats& s)
{
    const double z = s.successes + p.c;
    const double w = s.trials - s.successes + p.d;
    require_beta_args(z, w);
    return log_beta_fn(z, w) - log_beta_fn(p.c, p.d);
}

double log_evidence(const GammaPoissonPrior& p, const PoissonStats& s)
{
    const double shape = s.sum + p.alpha0;
    return p.alpha0 * std::log(p.beta0) - std::lgamma(p.alpha0) - s.sum_log_factorial + std::lgamma(shape)
           - shape * std::log(s.n + p.beta0);
}

double log_evidence(const NormalGammaPrior& p, const GaussianStats& s)
{
    const auto post = ng_update(p, s);
    return std::lgamma(post.alpha_n) - std::lgamma(p.alpha0) + p.alpha0 * std::log(p.beta0)
           - post.alpha_n * std::log(post.beta_n) + 0.5 * std::log(p.kappa0 / post.kappa_n) - 0.5 * s.n * kLog2Pi;
}

double log_evidence(const NIGPrior& p, const RegressionStats& s)
{
    const auto post = nig_update(p, s);
    return 0.5 * (p.log_det_Lambda0_inv - post.log_det_Lambda_n) + p.alpha0 * std::log(p.gamma0)
           - post.alpha_n * std::log(post.gamma_n) + std::lgamma(post.alpha_n) - std::lgamma(p.alpha0)
           - 0.5 * s.n * kLog2Pi;
}

// ---------------------------------------------------------------------------

double bern_log_c(double a0, double y0, double N0, double c, double d)
{
    require_a0(a0);
    if (!(y0 >= 0.0 && y0 <= N0))
        throw DomainError("need 0 <= y0 <= N0");
    require_beta_args(c, d);
    return log_evidence(BetaBernoulliPrior{c, d}, BinomialStats{a0 * y0, a0 * N0});
}

double bern_log_c_prime(double a0, double y0, double N0, double c, double d)
{
    require_a0(a0);
    require_beta_args(c, d);
    const double z0 = a0 * y0 + c;
    const double w0 = a0 * (N0 - y0) + d;
    require_beta_args(z0, w0);
    const double psi_sum = digamma(z0 + w0);
    return y0 * (digamma(z0) - psi_sum) + (N0 - y0) * (digamma(w0) - psi_sum);
}

double bern_log_marginal_a0(double a0, double y0, double N0, double y, double N, double c, double d,
                            const A0Prior& prior_a0)
{
    require_a0(a0);
    const double z0 = a0 * y0 + c;
    const double w0 = a0 * (N0 - y0) + d;
    require_beta_args(z0, w0);
    require_beta_args(z0 + y, w0 + N - y);
    return prior_a0.log_density(a0) + log_beta_fn(z0 + y, w0 + N - y) - log_beta_fn(z0, w0);
}

double pois_log_c(double a0, const PoissonStats& s0, double alpha0, double beta0)
{
    require_a0(a0);
    if (a0 == 0.0)
        return 0.0;
    return log_evidence(GammaPoissonPrior{alpha0, beta0}, s0.scaled(a0));
}

double pois_log_c_prime(double a0, const PoissonStats& s0, double alpha0, double beta0)
{
    require_a0(a0);
    const double rate = beta0 + s0.n * a0;
    const double shape = alpha0 + s0.sum * a0;
    return -s0.sum_log_factorial - s0.n * shape / rate - s0.sum * std::log(rate) + s0.sum * digamma(shape);
}

double ng_log_c(double a0, const GaussianStats& s0, const NormalGammaPrior& prior)
{
    require_a0(a0);
    if (a0 == 0.0)
        return 0.0;
    return log_evidence(prior, s0.scaled(a0));
}

NormalGammaDerivativeTerms ng_log_c_prime_terms(double a0, const GaussianStats& s0,
                                                const NormalGammaPrior& prior)
{
    require_a0(a0);
    const auto post = ng_update(prior, s0.scaled(a0));
    const double N0 = s0.n;
    const double dev = s0.mean - prior.mu0;
    const double beta_n_prime =
        0.5 * (s0.ss + prior.kappa0 * prior.kappa0 * N0 * dev * dev / (post.kappa_n * post.kappa_n));
    NormalGammaDerivativeTerms t;
    t.g = 0.5 * N0 * digamma(post.alpha_n);
    t.h = -0.5 * N0 * std::log(post.beta_n) - post.alpha_n * beta_n_prime / post.beta_n;
    t.w = -0.5 * N0 / post.kappa_n;
    t.z = -0.5 * N0 * kLog2Pi;
    return t;
}

double ng_log_c_prime(double a0, const GaussianStats& s0, const NormalGammaPrior& prior)
{
    return ng_log_c_prime_terms(a0, s0, prior).total();
}

double nig_log_c(double a0, const RegressionStats& s0, const NIGPrior& prior)
{
    require_a0(a0);
    if (a0 == 0.0)
        return 0.0;
    return log_evidence(prior, s0.scaled(a0));
}

double nig_log_c_prime(double a0, const RegressionStats& s0, const NIGPrior& prior)
{
    require_a0(a0);
    const auto post = nig_update(prior, s0.scaled(a0));
    const double N0 = s0.n;
    const MatrixXd solved = post.llt.solve(s0.xtx);
    const double gamma_prime =
        0.5 * (s0.yty - 2.0 * post.mu_n.dot(s0.xty) + post.mu_n.dot(s0.xtx * post.mu_n));
    return -0.5 * solved.trace() - 0.5 * N0 * std::log(post.gamma_n) - post.alpha_n * gamma_prime / post.gamma_n
           + 0.5 * N0 * digamma(post.alpha_n) - 0.5 * N0 * kLog2Pi;
}

// ---------------------------------------------------------------------------

ExpFamConjugateSpec bernoulli_expfam(double c, double d, const Dataset& D0)
{
    require_beta_args(c, d);
    ExpFamConjugateSpec spec;
    // pi(theta) = H exp(tau*logit(theta) + n0*log(1-theta)) is Beta(tau+1, n0-tau+1).
    spec.log_H = [](const VectorXd& tau, double n0) { return -log_beta_fn(tau(0) + 1.0, n0 - tau(0) + 1.0); };
    spec.tau = VectorXd::Constant(1, c - 1.0);
    spec.n0 = c + d - 2.0;
    spec.S = VectorXd::Constant(1, D0.binomial_stats().successes);
    spec.log_h = 0.0;
    return spec;
}

ExpFamConjugateSpec poisson_expfam(double alpha0, double beta0, const Dataset& D0)
{
    ExpFamConjugateSpec spec;
    // pi(lambda) = H exp(tau*log(lambda) - n0*lambda) is Gamma(tau+1, n0).
    spec.log_H = [](const VectorXd& tau, double n0) { return (tau(0) + 1.0) * std::log(n0) - std::lgamma(tau(0) + 1.0); };
    spec.tau = VectorXd::Constant(1, alpha0 - 1.0);
    spec.n0 = beta0;
    const auto s = D0.poisson_stats();
    spec.S = VectorXd::Constant(1, s.sum);
    spec.log_h = -s.sum_log_factorial;
    return spec;
}

double expfam_log_c_conjugate(const ExpFamConjugateSpec& spec, double a0, double N0)
{
    require_a0(a0);
    const double shifted = spec.log_H(spec.tau + a0 * spec.S, spec.n0 + a0 * N0);
    if (!std::isfinite(shifted))
        throw DomainError("log H is undefined at the shifted hyperparameters");
    return a0 * spec.log_h + spec.log_H(spec.tau, spec.n0) - shifted;
}

double expfam_log_marginal_a0(const ExpFamConjugateSpec& spec, double a0, double N0, double N,
                              const VectorXd& S_D, double log_h_D, const A0Prior& prior_a0)
{
    require_a0(a0);
    const VectorXd tau_a = spec.tau + a0 * spec.S;
    const double n_a = spec.n0 + a0 * N0;
    const double num = spec.log_H(tau_a, n_a);
    const double den = spec.log_H(tau_a + S_D, n_a + N);
    if (!std::isfinite(num) || !std::isfinite(den))
        throw DomainError("log H is undefined at the shifted hyperparameters");
    return num - den + log_h_D + prior_a0.log_density(a0);
}

// ---------------------------------------------------------------------------

double log_c(const ModelSpec& model, const Dataset& D0, double a0)
{
    require_a0(a0);
    check_compatible(model, D0);
    if (a0 == 0.0 && model.is_conjugate())
        return 0.0;
    switch (model.family()) {
    case Family::BetaBernoulli:
        return log_evidence(model.as<BetaBernoulliPrior>(), D0.binomial_stats().scaled(a0));
    case Family::GammaPoisson:
        return log_evidence(model.as<GammaPoissonPrior>(), D0.poisson_stats().scaled(a0));
    case Family::NormalGamma:
        return log_evidence(model.as<NormalGammaPrior>(), D0.gaussian_stats().scaled(a0));
    case Family::NIGRegression:
        return log_evidence(model.as<NIGPrior>(), D0.regression_stats().scaled(a0));
    case Family::LogisticRegression:
        break;
    }
    throw ConfigError("no closed-form normalising constant for logistic regression");
}

double log_c_prime(const ModelSpec& model, const Dataset& D0, double a0)
{
    check_compatible(model, D0);
    switch (model.family()) {
    case Family::BetaBernoulli: {
        const auto& p = model.as<BetaBernoulliPrior>();
        const auto s = D0.binomial_stats();
        return bern_log_c_prime(a0, s.successes, s.trials, p.c, p.d);
    }
    case Family::GammaPoisson: {
        const auto& p = model.as<GammaPoissonPrior>();
        return pois_log_c_prime(a0, D0.poisson_stats(), p.alpha0, p.beta0);
    }
    case Family::NormalGamma:
        return ng_log_c_prime(a0, D0.gaussian_stats(), model.as<NormalGammaPrior>());
    case Family::NIGRegression:
        return nig_log_c_prime(a0, D0.regression_stats(), model.as<NIGPrior>());
    case Family::LogisticRegression:
        break;
    }
    throw ConfigError("no closed-form derivative for logistic regression");
}

double log_joint_evidence(const ModelSpec& model, const Dataset& D0, double a0, const Dataset& D)
{
    require_a0(a0);
    check_compatible(model, D0);
    check_compatible(model, D);
    switch (model.family()) {
    case Family::BetaBernoulli:
        return log_evidence(model.as<BetaBernoulliPrior>(), D0.binomial_stats().scaled(a0) + D.binomial_stats());
    case Family::GammaPoisson:
        return log_evidence(model.as<GammaPoissonPrior>(), D0.poisson_stats().scaled(a0) + D.poisson_stats());
    case Family::NormalGamma:
        return log_evidence(model.as<NormalGammaPrior>(), D0.gaussian_stats().scaled(a0) + D.gaussian_stats());
    case Family::NIGRegression:
        return log_evidence(model.as<NIGPrior>(), D0.regression_stats().scaled(a0) + D.regression_stats());
    case Family::LogisticRegression:
        break;
    }
    throw ConfigError("no closed-form evidence for logistic regression");
}

double log_marginal_a0(const ModelSpec& model, const Dataset& D0, const Dataset& D, double a0,
                       const A0Prior& prior_a0)
{
    return prior_a0.log_density(a0) - log_c(model, D0, a0) + log_joint_evidence(model, D0, a0, D);
}

MatrixXd exact_conditional_sample(const ModelSpec& model, const Dataset& D0, double a0,
                                  const std::optional<Dataset>& D, Rng& rng, Index n)
{
    require_a0(a0);
    check_compatible(model, D0);
    if (D)
        check_compatible(model, *D);
    MatrixXd draws(n, model.dim());
    switch (model.family()) {
    case Family::BetaBernoulli: {
        const auto& p = model.as<BetaBernoulliPrior>();
        auto s = D0.binomial_stats().scaled(a0);
        if (D)
            s = s + D->binomial_stats();
        const double a = p.c + s.successes, b = p.d + s.trials - s.successes;
        for (Index i = 0; i < n; ++i) {
            double x = beta_draw(rng, a, b);
            // keep draws strictly inside (0, 1)
            while (!(x > 0.0 && x < 1.0))
                x = beta_draw(rng, a, b);
            draws(i, 0) = x;
        }
        return draws;
    }
    case Family::GammaPoisson: {
        const auto& p = model.as<GammaPoissonPrior>();
        auto s = D0.poisson_stats().scaled(a0);
        if (D)
            s = s + D->poisson_stats();
        for (Index i = 0; i < n; ++i)
            draws(i, 0) = gamma_rate(rng, p.alpha0 + s.sum, p.beta0 + s.n);
        return draws;
    }
    case Family::NormalGamma: {
        const auto& p = model.as<NormalGammaPrior>();
        auto s = D0.gaussian_stats().scaled(a0);
        if (D)
            s = s + D->gaussian_stats();
        const auto post = ng_update(p, s);
        for (Index i = 0; i < n; ++i) {
            const double tau = gamma_rate(rng, post.alpha_n, post.beta_n);
            draws(i, 1) = tau;
            draws(i, 0) = post.mu_n + std_normal(rng) / std::sqrt(post.kappa_n * tau);
        }
        return draws;
    }
    case Family::NIGRegression: {
        const auto& p = model.as<NIGPrior>();
        auto s = D0.regression_stats().scaled(a0);
        if (D)
            s = s + D->regression_stats();
        const auto post = nig_update(p, s);
        const Index P = p.mu0.size();
        const auto U = post.llt.matrixU(); // Lambda_n = U' U
        VectorXd z(P);
        for (Index i = 0; i < n; ++i) {
            const double sigma2 = 1.0 / gamma_rate(rng, post.alpha_n, post.gamma_n);
            for (Index j = 0; j < P; ++j)
                z(j) = std_normal(rng);
            const VectorXd dev = U.solve(z); // covariance (U'U)^-1
            draws.row(i).head(P) = (post.mu_n + std::sqrt(sigma2) * dev).transpose();
            draws(i, P) = sigma2;
        }
        return draws;
    }
    case Family::LogisticRegression:
        break;
    }
    throw ConfigError("exact sampling is not available for logistic regression; use the MCMC sampler");
}

} // namespace powerprior::conjugate
