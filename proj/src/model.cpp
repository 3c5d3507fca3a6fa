#include <powerprior/model.hpp>

#include <cmath>
#include <limits>

#include <powerprior/errors.hpp>

namespace powerprior {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_sigmoid(double x)
{
    return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

// log(1 + exp(x))
double softplus(double x)
{
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void require(bool ok, const std::string& msg)
{
    if (!ok)
        throw ConfigError(msg);
}

} // namespace

double log_beta_fn(double a, double b)
{
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

std::string_view family_name(Family family)
{
    switch (family) {
    case Family::BetaBernoulli:
        return "bernoulli";
    case Family::GammaPoisson:
        return "poisson";
    case Family::NormalGamma:
        return "gaussian";
    case Family::NIGRegression:
        return "linear_regression";
    case Family::LogisticRegression:
        return "logistic_regression";
    }
    return "unknown";
}

Family parse_family(std::string_view name)
{
    for (Family f : {Family::BetaBernoulli, Family::GammaPoisson, Family::NormalGamma,
                     Family::NIGRegression, Family::LogisticRegression})
        if (family_name(f) == name)
            return f;
    throw ConfigError("unknown model family '" + std::string(name) + "'");
}

GaussianStats GaussianStats::operator+(const GaussianStats& o) const
{
    const double total = n + o.n;
    if (total <= 0.0)
        return {};
    const double m = (n * mean + o.n * o.mean) / total;
    const double delta = mean - o.mean;
    return {total, m, ss + o.ss + n * o.n / total * delta * delta};
}

RegressionStats RegressionStats::operator+(const RegressionStats& o) const
{
    if (xtx.size() == 0)
        return o;
    if (o.xtx.size() == 0)
        return *this;
    return {n + o.n, xtx + o.xtx, xty + o.xty, yty + o.yty};
}

// ---------------------------------------------------------------------------
// Dataset

Dataset Dataset::build(ObservationKind kind, VectorXd y, std::optional<MatrixXd> X)
{
    for (Index i = 0; i < y.size(); ++i)
        require(std::isfinite(y(i)), "dataset contains a non-finite observation");
    if (kind == ObservationKind::Binary)
        for (Index i = 0; i < y.size(); ++i)
            require(y(i) == 0.0 || y(i) == 1.0, "binary observations must be 0 or 1");
    if (kind == ObservationKind::Count)
        for (Index i = 0; i < y.size(); ++i)
            require(y(i) >= 0.0 && y(i) == std::floor(y(i)),
                    "count observations must be non-negative integers");

    auto impl = std::make_shared<Impl>();
    impl->kind = kind;
    const double n = static_cast<double>(y.size());
    impl->sum = y.sum();
    impl->mean = n > 0 ? impl->sum / n : 0.0;
    impl->ss = (y.array() - impl->mean).square().sum();
    if (kind == ObservationKind::Count)
        for (Index i = 0; i < y.size(); ++i)
            impl->sum_log_factorial += std::lgamma(y(i) + 1.0);

    if (X) {
        require(X->rows() == y.size(), "covariate matrix rows must match the number of observations");
        require(X->cols() >= 1, "covariate matrix must have at least one column");
        require(X->allFinite(), "covariate matrix contains non-finite values");
        if (X->rows() > 0) {
            Eigen::ColPivHouseholderQR<MatrixXd> qr(*X);
            require(qr.rank() == X->cols(), "covariate matrix is not of full column rank");
        }
        impl->reg.n = n;
        impl->reg.xtx = X->transpose() * *X;
        impl->reg.xty = X->transpose() * y;
        impl->reg.yty = y.squaredNorm();
    }
    impl->y = std::move(y);
    impl->X = std::move(X);
    return Dataset(std::move(impl));
}

Dataset Dataset::binary(VectorXd y, std::optional<MatrixXd> covariates)
{
    return build(ObservationKind::Binary, std::move(y), std::move(covariates));
}

Dataset Dataset::counts(VectorXd y)
{
    return build(ObservationKind::Count, std::move(y), std::nullopt);
}

Dataset Dataset::real(VectorXd y, std::optional<MatrixXd> covariates)
{
    return build(ObservationKind::Real, std::move(y), std::move(covariates));
}

Dataset Dataset::bernoulli_counts(long successes, long trials)
{
    require(trials >= 0 && successes >= 0 && successes <= trials, "need 0 <= successes <= trials");
    VectorXd y = VectorXd::Zero(trials);
    y.head(successes).setOnes();
    return binary(std::move(y));
}

const MatrixXd& Dataset::X() const
{
    if (!impl_->X)
        throw ConfigError("dataset has no covariates");
    return *impl_->X;
}

BinomialStats Dataset::binomial_stats() const
{
    return {impl_->sum, static_cast<double>(n())};
}

PoissonStats Dataset::poisson_stats() const
{
    return {static_cast<double>(n()), impl_->sum, impl_->sum_log_factorial};
}

GaussianStats Dataset::gaussian_stats() const
{
    return {static_cast<double>(n()), impl_->mean, impl_->ss};
}

const RegressionStats& Dataset::regression_stats() const
{
    if (!impl_->X)
        throw ConfigError("dataset has no covariates");
    return impl_->reg;
}

// ---------------------------------------------------------------------------
// ModelSpec

ModelSpec ModelSpec::beta_bernoulli(double c, double d)
{
    require(c > 0 && d > 0, "Beta prior parameters c, d must be positive");
    return ModelSpec(BetaBernoulliPrior{c, d});
}

ModelSpec ModelSpec::gamma_poisson(double alpha0, double beta0)
{
    require(alpha0 > 0 && beta0 > 0, "Gamma prior parameters must be positive");
    return ModelSpec(GammaPoissonPrior{alpha0, beta0});
}

ModelSpec ModelSpec::normal_gamma(double mu0, double kappa0, double alpha0, double beta0)
{
    require(std::isfinite(mu0), "mu0 must be finite");
    require(kappa0 > 0 && alpha0 > 0 && beta0 > 0, "normal-Gamma kappa0, alpha0, beta0 must be positive");
    return ModelSpec(NormalGammaPrior{mu0, kappa0, alpha0, beta0});
}

ModelSpec ModelSpec::nig_regression(VectorXd mu0, MatrixXd Lambda0, double alpha0, double gamma0)
{
    require(alpha0 > 0 && gamma0 > 0, "inverse-Gamma alpha0, gamma0 must be positive");
    require(mu0.size() >= 1 && Lambda0.rows() == mu0.size() && Lambda0.cols() == mu0.size(),
            "Lambda0 must be P x P with P = size of mu0");
    require((Lambda0 - Lambda0.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + Lambda0.cwiseAbs().maxCoeff()),
            "Lambda0 must be symmetric");
    Eigen::LLT<MatrixXd> llt(Lambda0);
    require(llt.info() == Eigen::Success, "Lambda0 must be positive definite");
    NIGPrior p;
    p.mu0 = std::move(mu0);
    p.Lambda0 = std::move(Lambda0);
    p.alpha0 = alpha0;
    p.gamma0 = gamma0;
    p.Lambda0_inv = llt.solve(MatrixXd::Identity(p.mu0.size(), p.mu0.size()));
    p.log_det_Lambda0_inv = -2.0 * llt.matrixLLT().diagonal().array().log().sum();
    p.mu0_quad = p.mu0.dot(p.Lambda0_inv * p.mu0);
    return ModelSpec(std::move(p));
}

ModelSpec ModelSpec::logistic_regression(Index n_coefficients)
{
    require(n_coefficients >= 1, "logistic regression needs at least one covariate");
    return ModelSpec(LogisticPrior{n_coefficients});
}

Family ModelSpec::family() const
{
    return std::visit(
        [](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, BetaBernoulliPrior>)
                return Family::BetaBernoulli;
            else if constexpr (std::is_same_v<T, GammaPoissonPrior>)
                return Family::GammaPoisson;
            else if constexpr (std::is_same_v<T, NormalGammaPrior>)
                return Family::NormalGamma;
            else if constexpr (std::is_same_v<T, NIGPrior>)
                return Family::NIGRegression;
            else
                return Family::LogisticRegression;
        },
        prior_);
}

Index ModelSpec::dim() const
{
    switch (family()) {
    case Family::BetaBernoulli:
    case Family::GammaPoisson:
        return 1;
    case Family::NormalGamma:
        return 2;
    case Family::NIGRegression:
        return as<NIGPrior>().mu0.size() + 1;
    case Family::LogisticRegression:
        return as<LogisticPrior>().n_coefficients + 1;
    }
    return 0;
}

std::vector<std::string> ModelSpec::parameter_names() const
{
    switch (family()) {
    case Family::BetaBernoulli:
        return {"theta"};
    case Family::GammaPoisson:
        return {"lambda"};
    case Family::NormalGamma:
        return {"mu", "tau"};
    case Family::NIGRegression: {
        std::vector<std::string> names;
        for (Index j = 0; j < as<NIGPrior>().mu0.size(); ++j)
            names.push_back("beta" + std::to_string(j));
        names.push_back("sigma2");
        return names;
    }
    case Family::LogisticRegression: {
        std::vector<std::string> names{"alpha"};
        for (Index j = 0; j < as<LogisticPrior>().n_coefficients; ++j)
            names.push_back("beta" + std::to_string(j + 1));
        return names;
    }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Densities

void check_compatible(const ModelSpec& model, const Dataset& data)
{
    switch (model.family()) {
    case Family::BetaBernoulli:
        if (data.kind() != ObservationKind::Binary)
            throw DomainError("Bernoulli model needs binary observations");
        break;
    case Family::GammaPoisson:
        if (data.kind() != ObservationKind::Count)
            throw DomainError("Poisson model needs count observations");
        break;
    case Family::NormalGamma:
        if (data.kind() != ObservationKind::Real)
            throw DomainError("Gaussian model needs real observations");
        break;
    case Family::NIGRegression:
        if (data.kind() != ObservationKind::Real || !data.has_covariates()
            || data.n_covariates() != model.as<NIGPrior>().mu0.size())
            throw DomainError("linear regression needs real observations and P covariates");
        break;
    case Family::LogisticRegression:
        if (data.kind() != ObservationKind::Binary || !data.has_covariates()
            || data.n_covariates() != model.as<LogisticPrior>().n_coefficients)
            throw DomainError("logistic regression needs binary observations and P covariates");
        break;
    }
}

void check_support(const ModelSpec& model, const VectorXd& theta)
{
    if (theta.size() != model.dim())
        throw DomainError("parameter dimension " + std::to_string(theta.size()) + " does not match model dimension "
                          + std::to_string(model.dim()));
    if (!theta.allFinite())
        throw DomainError("parameter contains non-finite values");
    switch (model.family()) {
    case Family::BetaBernoulli:
        if (!(theta(0) > 0.0 && theta(0) < 1.0))
            throw DomainError("probability must lie in (0, 1)");
        break;
    case Family::GammaPoisson:
        if (!(theta(0) > 0.0))
            throw DomainError("Poisson rate must be positive");
        break;
    case Family::NormalGamma:
        if (!(theta(1) > 0.0))
            throw DomainError("precision must be positive");
        break;
    case Family::NIGRegression:
        if (!(theta(theta.size() - 1) > 0.0))
            throw DomainError("variance must be positive");
        break;
    case Family::LogisticRegression:
        break;
    }
}

double log_likelihood_unchecked(const ModelSpec& model, const Dataset& data, const VectorXd& theta)
{
    switch (model.family()) {
    case Family::BetaBernoulli: {
        const auto s = data.binomial_stats();
        const double p = theta(0);
        return s.successes * std::log(p) + (s.trials - s.successes) * std::log1p(-p);
    }
    case Family::GammaPoisson: {
        const auto s = data.poisson_stats();
        const double lambda = theta(0);
        return s.sum * std::log(lambda) - s.n * lambda - s.sum_log_factorial;
    }
    case Family::NormalGamma: {
        const auto s = data.gaussian_stats();
        const double mu = theta(0), tau = theta(1);
        const double dev = s.mean - mu;
        return 0.5 * s.n * (std::log(tau) - kLog2Pi) - 0.5 * tau * (s.ss + s.n * dev * dev);
    }
    case Family::NIGRegression: {
        const auto& s = data.regression_stats();
        const Index P = theta.size() - 1;
        const auto beta = theta.head(P);
        const double sigma2 = theta(P);
        const double rss = s.yty - 2.0 * beta.dot(s.xty) + beta.dot(s.xtx * beta);
        return -0.5 * s.n * (kLog2Pi + std::log(sigma2)) - 0.5 * rss / sigma2;
    }
    case Family::LogisticRegression: {
        const Index P = theta.size() - 1;
        const VectorXd eta = (data.X() * theta.tail(P)).array() + theta(0);
        const VectorXd& y = data.y();
        double ll = 0.0;
        for (Index i = 0; i < eta.size(); ++i)
            ll += y(i) * eta(i) - softplus(eta(i));
        return ll;
    }
    }
    return 0.0;
}

double log_prior_unchecked(const ModelSpec& model, const VectorXd& theta)
{
    switch (model.family()) {
    case Family::BetaBernoulli: {
        const auto& p = model.as<BetaBernoulliPrior>();
        return (p.c - 1.0) * std::log(theta(0)) + (p.d - 1.0) * std::log1p(-theta(0)) - log_beta_fn(p.c, p.d);
    }
    case Family::GammaPoisson: {
        const auto& p = model.as<GammaPoissonPrior>();
        const double l = theta(0);
        return p.alpha0 * std::log(p.beta0) - std::lgamma(p.alpha0) + (p.alpha0 - 1.0) * std::log(l) - p.beta0 * l;
    }
    case Family::NormalGamma: {
        const auto& p = model.as<NormalGammaPrior>();
        const double mu = theta(0), tau = theta(1);
        const double dev = mu - p.mu0;
        return p.alpha0 * std::log(p.beta0) - std::lgamma(p.alpha0) + (p.alpha0 - 1.0) * std::log(tau)
               - p.beta0 * tau + 0.5 * (std::log(p.kappa0 * tau) - kLog2Pi) - 0.5 * p.kappa0 * tau * dev * dev;
    }
    case Family::NIGRegression: {
        const auto& p = model.as<NIGPrior>();
        const Index P = p.mu0.size();
        const double sigma2 = theta(P);
        const VectorXd dev = theta.head(P) - p.mu0;
        return p.alpha0 * std::log(p.gamma0) - std::lgamma(p.alpha0) - (p.alpha0 + 1.0) * std::log(sigma2)
               - p.gamma0 / sigma2 - 0.5 * P * (kLog2Pi + std::log(sigma2)) + 0.5 * p.log_det_Lambda0_inv
               - 0.5 * dev.dot(p.Lambda0_inv * dev) / sigma2;
    }
    case Family::LogisticRegression:
        return -0.5 * theta.size() * kLog2Pi - 0.5 * theta.squaredNorm();
    }
    return 0.0;
}

double log_likelihood(const ModelSpec& model, const Dataset& data, const ThetaPoint& theta)
{
    if (theta.space != Space::Constrained)
        throw DomainError("log_likelihood expects a constrained parameter");
    check_compatible(model, data);
    check_support(model, theta.values);
    return log_likelihood_unchecked(model, data, theta.values);
}

double log_initial_prior(const ModelSpec& model, const ThetaPoint& theta)
{
    if (theta.space != Space::Constrained)
        throw DomainError("log_initial_prior expects a constrained parameter");
    check_support(model, theta.values);
    return log_prior_unchecked(model, theta.values);
}

double log_power_density(const PowerPriorTarget& target, const ThetaPoint& theta)
{
    if (!(target.a0 >= 0.0) || !std::isfinite(target.a0))
        throw DomainError("a0 must be a finite non-negative number");
    double lp = log_initial_prior(target.model, theta);
    if (target.a0 > 0.0)
        lp += target.a0 * log_likelihood(target.model, target.historical, theta);
    else
        check_compatible(target.model, target.historical);
    if (target.current)
        lp += log_likelihood(target.model, *target.current, theta);
    return lp;
}

// ---------------------------------------------------------------------------
// Transforms

ThetaPoint to_unconstrained(const ModelSpec& model, const ThetaPoint& theta)
{
    if (theta.space != Space::Constrained)
        throw DomainError("to_unconstrained expects a constrained parameter");
    check_support(model, theta.values);
    VectorXd u = theta.values;
    switch (model.family()) {
    case Family::BetaBernoulli:
        u(0) = std::log(theta.values(0)) - std::log1p(-theta.values(0));
        break;
    case Family::GammaPoisson:
        u(0) = std::log(theta.values(0));
        break;
    case Family::NormalGamma:
        u(1) = std::log(theta.values(1));
        break;
    case Family::NIGRegression:
        u(u.size() - 1) = std::log(theta.values(u.size() - 1));
        break;
    case Family::LogisticRegression:
        break;
    }
    return {std::move(u), Space::Unconstrained};
}

ConstrainedPoint to_constrained(const ModelSpec& model, const ThetaPoint& u)
{
    if (u.space != Space::Unconstrained)
        throw DomainError("to_constrained expects an unconstrained parameter");
    if (u.values.size() != model.dim())
        throw DomainError("parameter dimension does not match model dimension");
    VectorXd theta = u.values;
    double log_jac = 0.0;
    auto exp_slot = [&](Index i) {
        theta(i) = std::exp(u.values(i));
        log_jac += u.values(i);
    };
    switch (model.family()) {
    case Family::BetaBernoulli: {
        const double x = u.values(0);
        theta(0) = 1.0 / (1.0 + std::exp(-x));
        log_jac = log_sigmoid(x) + log_sigmoid(-x);
        break;
    }
    case Family::GammaPoisson:
        exp_slot(0);
        break;
    case Family::NormalGamma:
        exp_slot(1);
        break;
    case Family::NIGRegression:
        exp_slot(theta.size() - 1);
        break;
    case Family::LogisticRegression:
        break;
    }
    return {{std::move(theta), Space::Constrained}, log_jac};
}

double log_power_density_unconstrained(const PowerPriorTarget& target, const VectorXd& u)
{
    const auto cp = to_constrained(target.model, {u, Space::Unconstrained});
    const VectorXd& theta = cp.theta.values;
    // Saturated transforms (probability rounding to 0 or 1) have zero density.
    if (target.model.family() == Family::BetaBernoulli && !(theta(0) > 0.0 && theta(0) < 1.0))
        return -std::numeric_limits<double>::infinity();
    if (!theta.allFinite())
        return -std::numeric_limits<double>::infinity();
    double lp = log_prior_unchecked(target.model, theta) + cp.log_jacobian;
    if (target.a0 > 0.0)
        lp += target.a0 * log_likelihood_unchecked(target.model, target.historical, theta);
    if (target.current)
        lp += log_likelihood_unchecked(target.model, *target.current, theta);
    return std::isnan(lp) ? -std::numeric_limits<double>::infinity() : lp;
}

} // namespace powerprior
