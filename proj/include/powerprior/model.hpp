#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace powerprior {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Family { BetaBernoulli, GammaPoisson, NormalGamma, NIGRegression, LogisticRegression };

std::string_view family_name(Family family);
Family parse_family(std::string_view name);

enum class ObservationKind { Binary, Count, Real };

// Sufficient statistics. Each supports scaling by a non-negative weight and
// addition, so that L(D0)^a0 * L(D) is represented by a0*S(D0) + S(D).

struct BinomialStats {
    double successes = 0.0;
    double trials = 0.0;

    BinomialStats scaled(double w) const { return {w * successes, w * trials}; }
    BinomialStats operator+(const BinomialStats& o) const
    {
        return {successes + o.successes, trials + o.trials};
    }
};

struct PoissonStats {
    double n = 0.0;
    double sum = 0.0;
    double sum_log_factorial = 0.0;

    PoissonStats scaled(double w) const { return {w * n, w * sum, w * sum_log_factorial}; }
    PoissonStats operator+(const PoissonStats& o) const
    {
        return {n + o.n, sum + o.sum, sum_log_factorial + o.sum_log_factorial};
    }
};

// Weighted count, mean and centred sum of squares.
struct GaussianStats {
    double n = 0.0;
    double mean = 0.0;
    double ss = 0.0;

    GaussianStats scaled(double w) const { return {w * n, mean, w * ss}; }
    GaussianStats operator+(const GaussianStats& o) const;
};

struct RegressionStats {
    double n = 0.0;
    MatrixXd xtx;
    VectorXd xty;
    double yty = 0.0;

    RegressionStats scaled(double w) const { return {w * n, w * xtx, w * xty, w * yty}; }
    RegressionStats operator+(const RegressionStats& o) const;
};

// Observations plus optional covariates. Immutable; copies share storage.
class Dataset {
public:
    static Dataset binary(VectorXd y, std::optional<MatrixXd> covariates = std::nullopt);
    static Dataset counts(VectorXd y);
    static Dataset real(VectorXd y, std::optional<MatrixXd> covariates = std::nullopt);
    // Expands y successes out of n trials into a binary vector (ones first).
    static Dataset bernoulli_counts(long successes, long trials);

    ObservationKind kind() const { return impl_->kind; }
    Index n() const { return impl_->y.size(); }
    const VectorXd& y() const { return impl_->y; }
    bool has_covariates() const { return impl_->X.has_value(); }
    const MatrixXd& X() const;
    Index n_covariates() const { return has_covariates() ? impl_->X->cols() : 0; }

    BinomialStats binomial_stats() const;
    PoissonStats poisson_stats() const;
    GaussianStats gaussian_stats() const;
    const RegressionStats& regression_stats() const;

private:
    struct Impl {
        ObservationKind kind = ObservationKind::Real;
        VectorXd y;
        std::optional<MatrixXd> X;
        double sum = 0.0;
        double sum_log_factorial = 0.0;
        double mean = 0.0;
        double ss = 0.0;
        RegressionStats reg;
    };
    explicit Dataset(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    static Dataset build(ObservationKind kind, VectorXd y, std::optional<MatrixXd> X);

    std::shared_ptr<const Impl> impl_;
};

// Initial priors, one per family.

struct BetaBernoulliPrior {
    double c = 1.0;
    double d = 1.0;
};

struct GammaPoissonPrior {
    double alpha0 = 1.0;
    double beta0 = 1.0; // rate
};

// tau ~ Gamma(alpha0, beta0), mu | tau ~ Normal(mu0, precision kappa0*tau).
struct NormalGammaPrior {
    double mu0 = 0.0;
    double kappa0 = 1.0;
    double alpha0 = 1.0;
    double beta0 = 1.0;
};

// sigma2 ~ InvGamma(alpha0, gamma0), beta | sigma2 ~ Normal(mu0, sigma2 * Lambda0).
// Lambda0 is the prior covariance scale, so the prior precision is Lambda0^-1.
struct NIGPrior {
    VectorXd mu0;
    MatrixXd Lambda0;
    double alpha0 = 1.0;
    double gamma0 = 1.0;

    // Derived at construction.
    MatrixXd Lambda0_inv;
    double log_det_Lambda0_inv = 0.0;
    double mu0_quad = 0.0; // mu0' Lambda0^-1 mu0
};

// Intercept and P coefficients, all with standard normal priors.
struct LogisticPrior {
    Index n_coefficients = 0;
};

class ModelSpec {
public:
    using Prior = std::variant<BetaBernoulliPrior, GammaPoissonPrior, NormalGammaPrior, NIGPrior,
                               LogisticPrior>;

    static ModelSpec beta_bernoulli(double c, double d);
    static ModelSpec gamma_poisson(double alpha0, double beta0);
    static ModelSpec normal_gamma(double mu0, double kappa0, double alpha0, double beta0);
    static ModelSpec nig_regression(VectorXd mu0, MatrixXd Lambda0, double alpha0, double gamma0);
    static ModelSpec logistic_regression(Index n_coefficients);

    Family family() const;
    // Parameter dimension q.
    Index dim() const;
    bool is_conjugate() const { return family() != Family::LogisticRegression; }
    std::vector<std::string> parameter_names() const;

    const Prior& prior() const { return prior_; }
    template <typename T> const T& as() const { return std::get<T>(prior_); }

private:
    explicit ModelSpec(Prior p) : prior_(std::move(p)) {}
    Prior prior_;
};

enum class Space { Constrained, Unconstrained };

struct ThetaPoint {
    VectorXd values;
    Space space = Space::Constrained;
};

struct PowerPriorTarget {
    ModelSpec model;
    Dataset historical;
    double a0 = 1.0;
    std::optional<Dataset> current;
};

// Checks that the dataset shape matches what the family consumes.
void check_compatible(const ModelSpec& model, const Dataset& data);
// Checks that a constrained point has the right dimension and lies in the support.
void check_support(const ModelSpec& model, const VectorXd& theta);

double log_likelihood(const ModelSpec& model, const Dataset& data, const ThetaPoint& theta);
double log_initial_prior(const ModelSpec& model, const ThetaPoint& theta);
// a0 * log L(D0|theta) + log pi(theta) [+ log L(D|theta)], unnormalised.
double log_power_density(const PowerPriorTarget& target, const ThetaPoint& theta);

struct ConstrainedPoint {
    ThetaPoint theta;
    double log_jacobian = 0.0; // log |d theta / d u|
};

// logit for probabilities, log for precisions and variances, identity otherwise.
ThetaPoint to_unconstrained(const ModelSpec& model, const ThetaPoint& theta);
ConstrainedPoint to_constrained(const ModelSpec& model, const ThetaPoint& u);

// Power density of the unconstrained parameter, Jacobian included.
double log_power_density_unconstrained(const PowerPriorTarget& target, const VectorXd& u);

// Unchecked fast paths for samplers: constrained vector in, log-likelihood out.
double log_likelihood_unchecked(const ModelSpec& model, const Dataset& data, const VectorXd& theta);
double log_prior_unchecked(const ModelSpec& model, const VectorXd& theta);

double log_beta_fn(double a, double b);

} // namespace powerprior
