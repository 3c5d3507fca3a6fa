#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/beta.hpp>

#include <powerprior/conjugate.hpp>
#include <powerprior/errors.hpp>
#include <powerprior/posterior.hpp>

#include "oracles.hpp"

using namespace powerprior;
namespace pp = powerprior::posterior;

namespace {
pp::JointConfig small_config(std::uint64_t seed)
{
    pp::JointConfig cfg;
    cfg.chains.n_iter = 2000;
    cfg.chains.n_warmup = 1000;
    cfg.chains.seed = seed;
    return cfg;
}
} // namespace

TEST_CASE("normalisation names")
{
    for (auto n : {pp::Normalisation::None, pp::Normalisation::Exact, pp::Normalisation::Dictionary})
        CHECK(pp::parse_normalisation(pp::normalisation_name(n)) == n);
    CHECK_THROWS_AS(pp::parse_normalisation("approx"), ConfigError);
}

TEST_CASE("quantiles and summaries")
{
    CHECK(pp::quantile({1, 2, 3, 4, 5}, 0.5) == 3);
    CHECK(pp::quantile({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
    MatrixXd c(8, 1);
    c << -2.5, -1, 0, 0.5, 1, 2, -0.3, 3;
    const auto s = pp::summarise_columns({c, -c}, {"x"});
    CHECK(s[0].mean == doctest::Approx(0).epsilon(1e-15));
    CHECK(s[0].lower == doctest::Approx(-s[0].upper));
    CHECK(s[0].lower < s[0].upper);
}

TEST_CASE("exact a0 marginal with no current data is the prior")
{
    const auto model = ModelSpec::beta_bernoulli(1, 1);
    const auto D0 = oracle::bern(20, 100);
    const auto D = oracle::bern(0, 0);
    const auto prior = A0Prior::make(2, 3);
    const auto dens = pp::exact_marginal_a0(model, D0, D, prior, 2001);
    boost::math::beta_distribution<> b(2, 3);
    double sup = 0;
    for (std::size_t i = 0; i < dens.grid.size(); ++i)
        sup = std::max(sup, std::abs(dens.density[i] - boost::math::pdf(b, dens.grid[i])));
    CHECK(sup < 1e-6);
}

TEST_CASE("Bernoulli scenario 1 exact marginal summary")
{
    const auto model = ModelSpec::beta_bernoulli(1, 1);
    const auto dens = pp::exact_marginal_a0(model, oracle::bern(20, 100), oracle::bern(20, 100), A0Prior::make(1, 1), 20001);
    CHECK(dens.mean() == doctest::Approx(0.57).epsilon(0.02));
    CHECK(dens.quantile(0.025) == doctest::Approx(0.07).epsilon(0.2));
    CHECK(dens.quantile(0.975) == doctest::Approx(0.98).epsilon(0.02));
}

TEST_CASE("exact-normalised joint sampler matches the exact marginal")
{
    const auto model = ModelSpec::beta_bernoulli(1, 1);
    const auto D0 = oracle::bern(20, 100);
    const auto D = oracle::bern(20, 100);
    const auto prior = A0Prior::make(1, 1);
    const auto out = pp::sample_joint(model, D0, D, prior, pp::Normalisation::Exact, nullptr, small_config(3));
    CHECK(out.gate_passed);
    CHECK(out.names.back() == "a0");
    const VectorXd a0 = out.pooled_a0();
    CHECK(a0.minCoeff() > 0);
    CHECK(a0.maxCoeff() < 1);
    const auto dens = pp::exact_marginal_a0(model, D0, D, prior, 20001);
    CHECK(pp::ks_distance({a0.data(), a0.data() + a0.size()}, dens) < 0.05);
    // bit reproducible
    const auto again = pp::sample_joint(model, D0, D, prior, pp::Normalisation::Exact, nullptr, small_config(3));
    CHECK(again.pooled() == out.pooled());
}

TEST_CASE("unnormalised sampler collapses a0 under conflict")
{
    const auto model = ModelSpec::beta_bernoulli(1, 1);
    const auto out = pp::sample_joint(model, oracle::bern(200, 1000), oracle::bern(200, 1000), A0Prior::make(1, 1),
                                      pp::Normalisation::None, nullptr, small_config(5));
    CHECK(out.pooled_a0().mean() <= 0.05);
}

TEST_CASE("constant historical likelihood leaves the a0 prior unchanged")
{
    pp::JointProblem pb;
    pb.dim = 1;
    pb.names = {"x"};
    pb.log_hist = [](const VectorXd&) { return 0.0; };
    pb.log_base = [](const VectorXd& u) { return -0.5 * u.squaredNorm(); };
    pb.to_output = [](const VectorXd& u) { return u; };
    pb.log_c = [](double) { return 0.0; };
    pb.a0_prior = A0Prior::make(2, 2);
    pb.init_mean = VectorXd::Zero(1);
    pb.init_cov = MatrixXd::Identity(1, 1);
    auto cfg = small_config(9);
    cfg.chains.n_iter = 20000;
    cfg.chains.n_warmup = 10000;
    const auto out = pp::sample_joint_problem(pb, cfg);
    const VectorXd a0 = out.pooled_a0();
    std::vector<double> v(a0.data(), a0.data() + a0.size());
    std::sort(v.begin(), v.end());
    boost::math::beta_distribution<> b(2, 2);
    double ks = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double F = boost::math::cdf(b, v[i]);
        ks = std::max({ks, std::abs(F - double(i) / v.size()), std::abs(F - double(i + 1) / v.size())});
    }
    CHECK(ks < 0.03);
}

TEST_CASE("dictionary coverage and exact-path restrictions")
{
    const auto logit = ModelSpec::logistic_regression(1);
    MatrixXd X(4, 1);
    X << 0, 1, 2, 3;
    VectorXd y(4);
    y << 0, 1, 0, 1;
    const auto D = Dataset::binary(y, X);
    CHECK_THROWS_AS(pp::sample_joint(logit, D, D, A0Prior::make(1, 1), pp::Normalisation::Exact, nullptr, {}), ConfigError);
    const auto partial = curvefit::tabulate([](double) { return 0.0; }, 10, 0, 0.5);
    const auto bern = ModelSpec::beta_bernoulli(1, 1);
    CHECK_THROWS_AS(pp::sample_joint(bern, oracle::bern(1, 2), oracle::bern(1, 2), A0Prior::make(1, 1),
                                     pp::Normalisation::Dictionary, &partial, {}),
                    OutOfRangeError);
}

TEST_CASE("sensitivity analysis")
{
    const auto model = ModelSpec::beta_bernoulli(1, 1);
    mcmc::ChainConfig cc;
    cc.seed = 4;
    const auto res = pp::sensitivity_analysis(model, oracle::bern(10, 100), oracle::bern(200, 1000), {0.0, 0.5, 1.0}, cc);
    REQUIRE(res.rows.size() == 3);
    // a0 = 0: uniform prior quantiles
    CHECK(res.rows[0].prior[0].lower == doctest::Approx(0.025).epsilon(0.2));
    CHECK(res.rows[0].prior[0].upper == doctest::Approx(0.975).epsilon(0.02));
    for (const auto& r : res.rows)
        CHECK(r.prior[0].lower < r.prior[0].upper);
    // posterior pulled from the historical rate 0.1 towards the current 0.2
    CHECK(res.rows[2].posterior[0].mean > res.rows[2].prior[0].mean);
    CHECK(res.rows[0].posterior[0].mean == doctest::Approx(201.0 / 1002).epsilon(0.01));
    CHECK_THROWS_AS(pp::sensitivity_analysis(model, oracle::bern(1, 2), oracle::bern(1, 2), {0.5, 0.5}, cc), ConfigError);
}
