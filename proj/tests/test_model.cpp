#include <doctest.h>

#include <cmath>

#include <powerprior/errors.hpp>
#include <powerprior/model.hpp>
#include <powerprior/rng.hpp>

#include "oracles.hpp"

using namespace powerprior;

namespace {

ThetaPoint pt(std::initializer_list<double> v)
{
    VectorXd x(static_cast<Index>(v.size()));
    Index i = 0;
    for (double d : v)
        x(i++) = d;
    return {x, Space::Constrained};
}

} // namespace

TEST_CASE("log likelihood examples")
{
    const auto bern = ModelSpec::beta_bernoulli(1, 1);
    const auto D0 = oracle::bern(20, 100);
    CHECK(log_likelihood(bern, D0, pt({0.2})) == doctest::Approx(20 * std::log(0.2) + 80 * std::log(0.8)).epsilon(1e-14));

    const auto pois = ModelSpec::gamma_poisson(2, 2);
    CHECK(log_likelihood(pois, Dataset::counts(VectorXd::Zero(7)), pt({1.0})) == doctest::Approx(-7.0));

    const auto logit = ModelSpec::logistic_regression(2);
    VectorXd y(4);
    y << 0, 1, 1, 0;
    const auto Dl = Dataset::binary(y, MatrixXd::Identity(4, 2));
    // Identity covariates are full rank; with all coefficients zero every probability is 1/2.
    CHECK(log_likelihood(logit, Dl, pt({0, 0, 0})) == doctest::Approx(4 * std::log(0.5)));

    CHECK_THROWS_AS(log_likelihood(bern, D0, pt({1.2})), DomainError);
    CHECK_THROWS_AS(log_likelihood(bern, D0, pt({0.2, 0.3})), DomainError);
    CHECK_THROWS_AS(log_likelihood(pois, D0, pt({1.0})), DomainError);
}

TEST_CASE("initial prior examples")
{
    CHECK(log_initial_prior(ModelSpec::beta_bernoulli(1, 1), pt({0.3})) == doctest::Approx(0.0));
    const double ng = log_initial_prior(ModelSpec::normal_gamma(0, 5, 1, 1), pt({0.0, 1.0}));
    // Gamma(1,1) at tau=1 times Normal(0, 1/(5*1)) at 0.
    const double expected = -1.0 + 0.5 * std::log(5.0 / (2 * M_PI));
    CHECK(ng == doctest::Approx(expected).epsilon(1e-14));
    const double lg = log_initial_prior(ModelSpec::logistic_regression(4), pt({0, 0, 0, 0, 0}));
    CHECK(lg == doctest::Approx(5 * std::log(1 / std::sqrt(2 * M_PI))));
}

TEST_CASE("dataset validation")
{
    VectorXd y(3);
    y << 0, 1, 2;
    CHECK_THROWS_AS(Dataset::binary(y), ConfigError);
    y << 0, -1, 2;
    CHECK_THROWS_AS(Dataset::counts(y), ConfigError);
    y << 0.5, 1, 2;
    CHECK_THROWS_AS(Dataset::counts(y), ConfigError);
    MatrixXd X(3, 2);
    X << 1, 2, 2, 4, 3, 6;
    CHECK_THROWS_AS(Dataset::real(y, X), ConfigError);
    CHECK(Dataset::real(VectorXd(0)).n() == 0);
    CHECK_THROWS_AS(Dataset::real(y, MatrixXd::Ones(2, 1)), ConfigError);
}

TEST_CASE("power density is linear in a0")
{
    Rng rng = make_stream(5, 0);
    VectorXd y(30);
    MatrixXd X(30, 2);
    for (Index i = 0; i < 30; ++i) {
        X(i, 0) = std_normal(rng);
        X(i, 1) = std_normal(rng);
        y(i) = 1.0 + X(i, 0) - X(i, 1) + std_normal(rng);
    }
    const auto D = Dataset::real(y, X);
    const auto model = ModelSpec::nig_regression(VectorXd::Zero(2), 1.5 * MatrixXd::Identity(2, 2), 0.5, 2.0);
    const auto th = pt({0.3, -0.2, 1.7});
    auto f = [&](double a0) { return log_power_density(PowerPriorTarget{model, D, a0, std::nullopt}, th); };
    CHECK(f(0.0) == doctest::Approx(log_initial_prior(model, th)).epsilon(1e-14));
    CHECK(f(1.0) == doctest::Approx(log_initial_prior(model, th) + log_likelihood(model, D, th)).epsilon(1e-13));
    CHECK(f(0.5) == doctest::Approx(0.5 * (f(0.0) + f(1.0))).epsilon(1e-13));

    const auto bern = ModelSpec::beta_bernoulli(1, 1);
    const double v = log_power_density(PowerPriorTarget{bern, oracle::bern(20, 100), 0.5, std::nullopt}, pt({0.2}));
    CHECK(v == doctest::Approx(0.5 * (20 * std::log(0.2) + 80 * std::log(0.8))));
}

TEST_CASE("transform round trip and log Jacobian")
{
    const auto bern = ModelSpec::beta_bernoulli(1, 1);
    CHECK(to_unconstrained(bern, pt({0.5})).values(0) == doctest::Approx(0.0));
    CHECK(to_unconstrained(ModelSpec::gamma_poisson(1, 1), pt({1.0})).values(0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(to_unconstrained(bern, pt({1.0})), DomainError);
    CHECK_THROWS_AS(to_unconstrained(bern, pt({0.0})), DomainError);

    const auto ng = ModelSpec::normal_gamma(0, 5, 1, 1);
    const auto nig = ModelSpec::nig_regression(VectorXd::Zero(2), MatrixXd::Identity(2, 2), 1, 1);
    Rng rng = make_stream(11, 0);
    for (int rep = 0; rep < 50; ++rep) {
        const auto th = pt({std_normal(rng), std::exp(std_normal(rng))});
        const auto u = to_unconstrained(ng, th);
        const auto back = to_constrained(ng, u);
        CHECK((back.theta.values - th.values).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, th.values.norm()));

        const auto p = pt({uniform01(rng) * 0.98 + 0.01});
        const auto bu = to_unconstrained(bern, p);
        CHECK(std::abs(to_constrained(bern, bu).theta.values(0) - p.values(0)) <= 1e-12);

        // log |d theta / d u| against a finite difference of the inverse map.
        const double h = 1e-6;
        auto shifted = [&](double du) {
            ThetaPoint v = bu;
            v.values(0) += du;
            return to_constrained(bern, v).theta.values(0);
        };
        const double fd = (shifted(h) - shifted(-h)) / (2 * h);
        CHECK(std::abs(std::exp(to_constrained(bern, bu).log_jacobian) - fd) <= 1e-6 * fd);

        const auto th3 = pt({std_normal(rng), std_normal(rng), std::exp(std_normal(rng))});
        const auto u3 = to_unconstrained(nig, th3);
        auto shifted3 = [&](double du) {
            ThetaPoint v = u3;
            v.values(2) += du;
            return to_constrained(nig, v).theta.values(2);
        };
        const double fd3 = (shifted3(h) - shifted3(-h)) / (2 * h);
        CHECK(std::abs(std::exp(to_constrained(nig, u3).log_jacobian) - fd3) <= 1e-6 * fd3);
    }
}

TEST_CASE("a0 = 0 reduces to the initial prior for every family")
{
    Rng rng = make_stream(3, 0);
    VectorXd yr(10), yc(10), yb(10);
    MatrixXd X(10, 1);
    for (Index i = 0; i < 10; ++i) {
        yr(i) = std_normal(rng);
        yc(i) = std::floor(3 * uniform01(rng));
        yb(i) = i % 2;
        X(i, 0) = i - 4.5;
    }
    struct Case {
        ModelSpec m;
        Dataset d;
        ThetaPoint t;
    };
    const Case cases[] = {
        {ModelSpec::beta_bernoulli(2, 3), Dataset::binary(yb), pt({0.4})},
        {ModelSpec::gamma_poisson(2, 2), Dataset::counts(yc), pt({1.3})},
        {ModelSpec::normal_gamma(0, 5, 1, 1), Dataset::real(yr), pt({0.1, 2.0})},
        {ModelSpec::nig_regression(VectorXd::Zero(1), MatrixXd::Identity(1, 1), 1, 1), Dataset::real(yr, X), pt({0.1, 2.0})},
        {ModelSpec::logistic_regression(1), Dataset::binary(yb, X), pt({0.1, -0.3})},
    };
    for (const auto& c : cases)
        CHECK(log_power_density(PowerPriorTarget{c.m, c.d, 0.0, std::nullopt}, c.t) == log_initial_prior(c.m, c.t));
}
