#include <doctest.h>

#include <cmath>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include <powerprior/conjugate.hpp>
#include <powerprior/errors.hpp>

#include "oracles.hpp"

using namespace powerprior;
namespace cj = powerprior::conjugate;

namespace {

Dataset poisson_data(int n, double lambda, std::uint64_t seed)
{
    Rng rng = make_stream(seed, 0);
    VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        // inversion of the Poisson CDF
        double u = uniform01(rng), p = std::exp(-lambda), c = p;
        int k = 0;
        while (u > c) {
            ++k;
            p *= lambda / k;
            c += p;
        }
        y(i) = k;
    }
    return Dataset::counts(y);
}

Dataset gaussian_data(int n, double mu, double tau, std::uint64_t seed)
{
    Rng rng = make_stream(seed, 0);
    VectorXd y(n);
    for (int i = 0; i < n; ++i)
        y(i) = mu + std_normal(rng) / std::sqrt(tau);
    return Dataset::real(y);
}

Dataset regression_data(int n, int P, std::uint64_t seed)
{
    Rng rng = make_stream(seed, 0);
    MatrixXd X(n, P);
    VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        double m = 0.0;
        for (int j = 0; j < P; ++j) {
            X(i, j) = std_normal(rng);
            m += (j % 2 ? 1.0 : -1.0) * X(i, j);
        }
        y(i) = m + 2.0 * std_normal(rng);
    }
    return Dataset::real(y, X);
}

std::vector<double> a0_grid()
{
    std::vector<double> g;
    for (int i = 1; i <= 20; ++i)
        g.push_back(0.05 * i);
    return g;
}

void check_derivative(const std::function<double(double)>& l, const std::function<double(double)>& lp)
{
    for (double a0 : a0_grid()) {
        const double fd = oracle::derivative(l, a0);
        const double cf = lp(a0);
        INFO("a0 = " << a0 << " closed form " << cf << " finite difference " << fd);
        CHECK(std::abs(cf - fd) <= 1e-6 * std::abs(fd) + 1e-9);
    }
}

} // namespace

TEST_CASE("Bernoulli constants")
{
    CHECK(cj::bern_log_c(0, 20, 100, 1, 1) == 0.0);
    CHECK(cj::bern_log_c(1, 20, 100, 1, 1) == doctest::Approx(std::lgamma(21) + std::lgamma(81) - std::lgamma(102)).epsilon(1e-13));
    CHECK_THROWS_AS(cj::bern_log_c(1, 120, 100, 1, 1), DomainError);
    CHECK_THROWS_AS(cj::bern_log_c(1, 20, 100, 0, 1), DomainError);
    for (double a0 : a0_grid())
        CHECK(cj::bern_log_c_prime(a0, 20, 100, 1, 1) < 0.0);
    check_derivative([](double a) { return cj::bern_log_c(a, 20, 100, 1, 1); },
                     [](double a) { return cj::bern_log_c_prime(a, 20, 100, 1, 1); });
    check_derivative([](double a) { return cj::bern_log_c(a, 37, 50, 2.5, 0.7); },
                     [](double a) { return cj::bern_log_c_prime(a, 37, 50, 2.5, 0.7); });
    // Swapping successes with failures and c with d leaves the constant unchanged.
    for (double a0 : {0.1, 0.5, 0.9})
        CHECK(cj::bern_log_c_prime(a0, 20, 100, 2, 3) == doctest::Approx(cj::bern_log_c_prime(a0, 80, 100, 3, 2)).epsilon(1e-13));
}

TEST_CASE("Poisson constants")
{
    const auto D0 = poisson_data(200, 2.0, 1);
    const auto s = D0.poisson_stats();
    CHECK(cj::pois_log_c(0, s, 2, 2) == 0.0);
    double prev = 0.0;
    for (double a0 : a0_grid()) {
        const double v = cj::pois_log_c(a0, s, 2, 2);
        CHECK(v < prev);
        prev = v;
        CHECK(cj::pois_log_c_prime(a0, s, 2, 2) < 0.0);
    }
    check_derivative([&](double a) { return cj::pois_log_c(a, s, 2, 2); },
                     [&](double a) { return cj::pois_log_c_prime(a, s, 2, 2); });
    // c' = [bracket] c, with the bracket written out term by term.
    const double a0 = 0.5, sum = s.sum, N0 = s.n;
    const double bracket = -s.sum_log_factorial + sum * boost::math::digamma(a0 * sum + 2)
                           - sum * std::log(a0 * N0 + 2) - N0 * (a0 * sum + 2) / (a0 * N0 + 2);
    CHECK(cj::pois_log_c_prime(a0, s, 2, 2) == doctest::Approx(bracket).epsilon(1e-13));
}

TEST_CASE("normal-Gamma constants")
{
    const auto D0 = gaussian_data(50, -0.1, 1e6, 2);
    const auto s = D0.gaussian_stats();
    const NormalGammaPrior prior{0.0, 5.0, 1.0, 1.0};
    CHECK(cj::ng_log_c(0, s, prior) == 0.0);
    check_derivative([&](double a) { return cj::ng_log_c(a, s, prior); },
                     [&](double a) { return cj::ng_log_c_prime(a, s, prior); });
    CHECK(cj::ng_log_c_prime(0.05, s, prior)
          == doctest::Approx(oracle::derivative([&](double a) { return cj::ng_log_c(a, s, prior); }, 0.05, 1e-5)).epsilon(1e-6));

    const auto t = cj::ng_log_c_prime_terms(0.3, s, prior);
    CHECK(t.g == doctest::Approx(25.0 * boost::math::digamma(1.0 + 25.0 * 0.3)).epsilon(1e-14));
    CHECK(t.total() == doctest::Approx(cj::ng_log_c_prime(0.3, s, prior)).epsilon(1e-14));

    // Exactly one sign change of l' on [0, 10].
    int changes = 0;
    double prev = cj::ng_log_c_prime(0.0, s, prior), root = -1.0;
    for (int i = 1; i <= 2000; ++i) {
        const double a = 0.005 * i;
        const double v = cj::ng_log_c_prime(a, s, prior);
        if ((v > 0) != (prev > 0)) {
            ++changes;
            root = a;
        }
        prev = v;
    }
    CHECK(changes == 1);
    CHECK(root > 0.05);
    CHECK(root < 1.0);
}

TEST_CASE("NIG regression constants")
{
    const auto D0 = regression_data(50, 5, 3);
    const auto& s = D0.regression_stats();
    NIGPrior prior = ModelSpec::nig_regression(VectorXd::Zero(5), 1.5 * MatrixXd::Identity(5, 5), 0.5, 2.0).as<NIGPrior>();
    CHECK(cj::nig_log_c(0, s, prior) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
    check_derivative([&](double a) { return cj::nig_log_c(a, s, prior); },
                     [&](double a) { return cj::nig_log_c_prime(a, s, prior); });
    // convexity of l on a grid
    std::vector<double> l;
    for (int i = 0; i <= 100; ++i)
        l.push_back(cj::nig_log_c(0.01 * i, s, prior));
    for (int i = 1; i < 100; ++i)
        CHECK(l[i - 1] - 2 * l[i] + l[i + 1] >= -1e-10);
}

TEST_CASE("generic exponential family specialisations")
{
    const auto Db = oracle::bern(20, 100);
    const auto spec_b = cj::bernoulli_expfam(1.5, 2.5, Db);
    const auto Dp = poisson_data(200, 2.0, 1);
    const auto spec_p = cj::poisson_expfam(2.0, 2.0, Dp);
    for (double a0 : {0.0, 0.05, 0.3, 1.0, 2.5}) {
        CHECK(std::abs(cj::expfam_log_c_conjugate(spec_b, a0, 100) - cj::bern_log_c(a0, 20, 100, 1.5, 2.5)) <= 1e-12);
        CHECK(std::abs(cj::expfam_log_c_conjugate(spec_p, a0, 200) - cj::pois_log_c(a0, Dp.poisson_stats(), 2, 2)) <= 1e-12 * 200);
    }
    CHECK(cj::expfam_log_c_conjugate(spec_b, 0.0, 100) == 0.0);

    // marginal of a0 agrees with the Bernoulli form up to a constant
    const A0Prior pa = A0Prior::make(1, 1);
    const VectorXd S_D = VectorXd::Constant(1, 20.0);
    const auto spec_11 = cj::bernoulli_expfam(1, 1, Db);
    const double off = cj::expfam_log_marginal_a0(spec_11, 0.5, 100, 100, S_D, 0.0, pa) - cj::bern_log_marginal_a0(0.5, 20, 100, 20, 100, 1, 1, pa);
    for (double a0 : {0.05, 0.2, 0.7, 1.0})
        CHECK(cj::expfam_log_marginal_a0(spec_11, a0, 100, 100, S_D, 0.0, pa) - cj::bern_log_marginal_a0(a0, 20, 100, 20, 100, 1, 1, pa)
              == doctest::Approx(off).epsilon(1e-10));

    // N = 0: reduces to the prior
    const A0Prior pb = A0Prior::make(2, 3);
    const double base = cj::expfam_log_marginal_a0(spec_11, 0.5, 100, 0, VectorXd::Zero(1), 0.0, pb) - pb.log_density(0.5);
    for (double a0 : {0.1, 0.4, 0.9})
        CHECK(cj::expfam_log_marginal_a0(spec_11, a0, 100, 0, VectorXd::Zero(1), 0.0, pb) - pb.log_density(a0) == doctest::Approx(base).epsilon(1e-12));
    for (double a0 : {0.1, 0.4, 0.9})
        CHECK(cj::bern_log_marginal_a0(a0, 20, 100, 0, 0, 1, 1, pb) == doctest::Approx(pb.log_density(a0)).epsilon(1e-12));
}

TEST_CASE("model-level dispatch and propriety")
{
    const auto Dp = poisson_data(200, 2.0, 1);
    const auto Dg = gaussian_data(50, -0.1, 1e6, 2);
    const auto Dr = regression_data(50, 3, 4);
    const ModelSpec models[] = {ModelSpec::beta_bernoulli(1, 1), ModelSpec::gamma_poisson(2, 2), ModelSpec::normal_gamma(0, 5, 1, 1),
                                ModelSpec::nig_regression(VectorXd::Zero(3), 1.5 * MatrixXd::Identity(3, 3), 0.5, 2)};
    const Dataset data[] = {oracle::bern(20, 100), Dp, Dg, Dr};
    for (int k = 0; k < 4; ++k) {
        CHECK(cj::log_c(models[k], data[k], 0.0) == 0.0);
        std::vector<double> c;
        for (int i = 0; i <= 100; ++i)
            c.push_back(std::exp(cj::log_c(models[k], data[k], 0.01 * i)));
        for (int i = 1; i < 100; ++i)
            CHECK(c[i - 1] - 2 * c[i] + c[i + 1] >= -1e-10);
    }
    CHECK_THROWS_AS(cj::log_c(ModelSpec::logistic_regression(3), Dr, 0.5), Error);
}

TEST_CASE("exact conditional samplers")
{
    Rng rng = make_stream(7, 0);
    const int n = 100000;
    const auto bern = ModelSpec::beta_bernoulli(1, 1);
    auto draws = cj::exact_conditional_sample(bern, oracle::bern(20, 100), 1.0, std::nullopt, rng, n);
    const double m = draws.col(0).mean();
    const double sd = std::sqrt((draws.col(0).array() - m).square().sum() / (n - 1));
    CHECK(std::abs(m - 21.0 / 102.0) <= 3 * sd / std::sqrt(n));

    draws = cj::exact_conditional_sample(bern, oracle::bern(20, 100), 0.0, std::nullopt, rng, n);
    CHECK(std::abs(draws.col(0).mean() - 0.5) <= 3 * std::sqrt(1.0 / 12.0 / n));

    const auto Dg = gaussian_data(50, -0.1, 1e6, 2);
    const NormalGammaPrior prior{0.0, 5.0, 1.0, 1.0};
    const auto ng = ModelSpec::normal_gamma(0, 5, 1, 1);
    draws = cj::exact_conditional_sample(ng, Dg, 0.5, std::nullopt, rng, n);
    const auto s = Dg.gaussian_stats();
    const double alpha_n = 1.0 + 0.25 * s.n;
    const double kappa_n = 5.0 + 0.5 * s.n;
    const double beta_n = 1.0 + 0.5 * (0.5 * s.ss + 5.0 * 0.5 * s.n * s.mean * s.mean / kappa_n);
    const double et = alpha_n / beta_n, sdt = std::sqrt(alpha_n) / beta_n;
    CHECK(std::abs(draws.col(1).mean() - et) <= 3 * sdt / std::sqrt(n));

    const auto Dr = regression_data(200, 2, 8);
    const auto nig = ModelSpec::nig_regression(VectorXd::Zero(2), MatrixXd::Identity(2, 2), 3, 2);
    draws = cj::exact_conditional_sample(nig, Dr, 1.0, std::nullopt, rng, n);
    const auto& rs = Dr.regression_stats();
    const MatrixXd Ln = rs.xtx + MatrixXd::Identity(2, 2);
    const VectorXd mun = Ln.ldlt().solve(rs.xty);
    for (int j = 0; j < 2; ++j) {
        const double mj = draws.col(j).mean();
        const double sj = std::sqrt((draws.col(j).array() - mj).square().sum() / (n - 1));
        CHECK(std::abs(mj - mun(j)) <= 3 * sj / std::sqrt(n));
    }
    CHECK_THROWS_AS(cj::exact_conditional_sample(ModelSpec::logistic_regression(2), Dataset::binary(Dr.y().unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; }), Dr.X()), 1.0, std::nullopt, rng, 5), ConfigError);
}
