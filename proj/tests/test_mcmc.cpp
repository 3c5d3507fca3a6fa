#include <doctest.h>

#include <cmath>

#include <powerprior/conjugate.hpp>
#include <powerprior/errors.hpp>
#include <powerprior/mcmc.hpp>

#include "oracles.hpp"

using namespace powerprior;
namespace cj = powerprior::conjugate;

namespace {

std::vector<MatrixXd> iid_normal_chains(int m, int n, std::uint64_t seed)
{
    std::vector<MatrixXd> out;
    for (int c = 0; c < m; ++c) {
        Rng rng = make_stream(seed, c);
        MatrixXd x(n, 1);
        for (int i = 0; i < n; ++i)
            x(i, 0) = std_normal(rng);
        out.push_back(x);
    }
    return out;
}

} // namespace

TEST_CASE("diagnostics on reference chains")
{
    const auto iid = iid_normal_chains(4, 1000, 1);
    const auto d = mcmc::compute_diagnostics(iid);
    CHECK(d.rhat(0) >= 0.999);
    CHECK(d.rhat(0) <= 1.01);
    CHECK(d.ess(0) >= 0.8 * 4000);
    CHECK(d.ess(0) <= 4000);

    auto offset = iid;
    offset[1] = offset[0].array() + 3.0;
    offset[2] = offset[0];
    offset[3] = offset[0].array() + 3.0;
    CHECK(mcmc::compute_diagnostics(offset).rhat(0) > 1.5);

    // AR(1) with phi = 0.9: ESS is about n (1 - phi) / (1 + phi).
    std::vector<MatrixXd> ar;
    for (int c = 0; c < 4; ++c) {
        Rng rng = make_stream(2, c);
        MatrixXd x(20000, 1);
        double v = std_normal(rng) / std::sqrt(1 - 0.81);
        for (int i = 0; i < 20000; ++i) {
            v = 0.9 * v + std_normal(rng);
            x(i, 0) = v;
        }
        ar.push_back(x);
    }
    const double expected = 80000 * 0.1 / 1.9;
    const double ess = mcmc::compute_diagnostics(ar).ess(0);
    CHECK(ess > 0.7 * expected);
    CHECK(ess < 1.3 * expected);

    std::vector<MatrixXd> flat(2, MatrixXd::Constant(100, 1, 2.0));
    const auto df = mcmc::compute_diagnostics(flat);
    CHECK(df.constant[0]);
    CHECK_FALSE(df.passes_gate());
}

TEST_CASE("exact sampler paths")
{
    const auto bern = ModelSpec::beta_bernoulli(1, 1);
    const auto D0 = oracle::bern(20, 100);
    mcmc::ChainConfig cfg;
    cfg.seed = 9;
    const auto out = mcmc::sample_power_posterior({bern, D0, 1.0, std::nullopt}, cfg);
    CHECK(out.exact);
    CHECK(out.n_chains() == 4);
    CHECK(out.n_kept() == 1000);
    const auto d = mcmc::compute_diagnostics(out);
    CHECK(std::abs(d.mean(0) - 21.0 / 102.0) <= 3 * d.mcse(0));

    const auto prior_draws = mcmc::sample_power_posterior({bern, D0, 0.0, std::nullopt}, cfg);
    const auto dp = mcmc::compute_diagnostics(prior_draws);
    CHECK(std::abs(dp.mean(0) - 0.5) <= 3 * dp.mcse(0));

    const auto lp = mcmc::estimate_l_prime(out);
    CHECK(std::abs(lp.value - cj::bern_log_c_prime(1.0, 20, 100, 1, 1)) <= 3 * lp.mcse);
    const auto lp0 = mcmc::estimate_l_prime(prior_draws);
    CHECK(std::abs(lp0.value - cj::bern_log_c_prime(0.0, 20, 100, 1, 1)) <= 3 * lp0.mcse);

    const auto l2 = mcmc::estimate_l_second(out);
    const double fd = oracle::derivative([](double a) { return cj::bern_log_c_prime(a, 20, 100, 1, 1); }, 1.0);
    CHECK(l2.value > 0);
    CHECK(std::abs(l2.value - fd) <= 3 * l2.mcse);

    // reproducibility
    const auto again = mcmc::sample_power_posterior({bern, D0, 1.0, std::nullopt}, cfg);
    CHECK(again.draws[2] == out.draws[2]);

    cfg.n_warmup = 2000;
    CHECK_THROWS_AS(mcmc::sample_power_posterior({bern, D0, 1.0, std::nullopt}, cfg), ConfigError);
}

TEST_CASE("degenerate likelihood gives zero derivative estimates")
{
    mcmc::ChainOutput out;
    for (int c = 0; c < 4; ++c) {
        out.draws.push_back(MatrixXd::Random(50, 1));
        out.log_likelihood.push_back(VectorXd::Zero(50));
    }
    CHECK(mcmc::estimate_l_prime(out).value == 0.0);
    CHECK(mcmc::estimate_l_second(out).value == 0.0);
}

TEST_CASE("random-walk sampler for logistic regression")
{
    Rng rng = make_stream(4, 0);
    const int n = 50;
    MatrixXd X(n, 1);
    VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = std_normal(rng);
        y(i) = uniform01(rng) < 0.5 ? 1.0 : 0.0;
    }
    const auto D0 = Dataset::binary(y, X);
    const auto model = ModelSpec::logistic_regression(1);
    mcmc::ChainConfig cfg;
    cfg.seed = 3;
    const auto out = mcmc::sample_power_posterior({model, D0, 1.0, std::nullopt}, cfg);
    CHECK_FALSE(out.exact);
    CHECK(out.gate_passed);
    const auto d = mcmc::compute_diagnostics(out);
    CHECK(d.rhat.maxCoeff() < 1.01);
    // the slope is centred near 0 (sd about 0.3 at this sample size)
    CHECK(std::abs(d.mean(1)) < 3 * d.mcse(1) + 0.9);
    for (double a : out.acceptance_rate) {
        CHECK(a > 0.1);
        CHECK(a < 0.5);
    }
    const auto again = mcmc::sample_power_posterior({model, D0, 1.0, std::nullopt}, cfg);
    CHECK(again.draws[0] == out.draws[0]);

    // Laplace fit of a Gaussian is exact up to finite-difference error.
    auto f = [](const VectorXd& x) { return -0.5 * (x(0) - 1) * (x(0) - 1) / 4.0 - 0.5 * (x(1) + 2) * (x(1) + 2); };
    const auto fit = mcmc::laplace_approximation(f, VectorXd::Zero(2));
    CHECK(fit.mode(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(fit.mode(1) == doctest::Approx(-2.0).epsilon(1e-6));
    CHECK(fit.covariance(0, 0) == doctest::Approx(4.0).epsilon(1e-4));
}
