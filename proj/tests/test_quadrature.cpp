#include <doctest.h>

#include <cmath>

#include <powerprior/conjugate.hpp>
#include <powerprior/quadrature.hpp>

#include "oracles.hpp"

using namespace powerprior;
namespace cj = powerprior::conjugate;

TEST_CASE("quadrature oracle agrees with the closed forms")
{
    const auto bern = ModelSpec::beta_bernoulli(1, 1);
    const auto D0 = oracle::bern(20, 100);
    CHECK(std::abs(quad::quad_log_c_1d(bern, D0, 0.0).value) <= 1e-10);
    CHECK(std::abs(quad::quad_log_c_1d(bern, D0, 0.5).value - cj::bern_log_c(0.5, 20, 100, 1, 1)) <= 1e-6);

    Rng rng = make_stream(1, 1);
    VectorXd y(60);
    MatrixXd X(60, 1);
    for (Index i = 0; i < 60; ++i) {
        X(i, 0) = std_normal(rng);
        y(i) = 0.7 * X(i, 0) + 1.5 * std_normal(rng);
    }
    const auto Dr = Dataset::real(y, X);
    const auto nig = ModelSpec::nig_regression(VectorXd::Constant(1, 0.2), MatrixXd::Constant(1, 1, 1.5), 0.5, 2.0);
    for (double a0 : {0.0, 0.3, 1.0}) {
        const auto q = quad::quad_log_c_2d(nig, Dr, a0);
        CHECK(std::abs(q.value - cj::log_c(nig, Dr, a0)) <= 1e-6);
    }
}

TEST_CASE("normal-Gamma with a small data set: convexity of the quadrature constant")
{
    VectorXd y(5);
    y << 0.3, -0.4, 1.1, 0.2, 0.0;
    const auto D = Dataset::real(y);
    const auto ng = ModelSpec::normal_gamma(0, 5, 1, 1);
    const double l0 = quad::quad_log_c_2d(ng, D, 0.0).value;
    const double l1 = quad::quad_log_c_2d(ng, D, 0.25).value;
    const double l2 = quad::quad_log_c_2d(ng, D, 0.5).value;
    const double l3 = quad::quad_log_c_2d(ng, D, 0.75).value;
    CHECK(std::abs(l0) <= 1e-8);
    CHECK(l0 - 2 * l1 + l2 >= 0.0);
    CHECK(l1 - 2 * l2 + l3 >= 0.0);
}

TEST_CASE("normalising densities on an interval")
{
    const auto u = quad::normalise_density_on_interval([](double) { return 0.0; }, 0.0, 2.5, 101);
    CHECK(u.log_normaliser == doctest::Approx(std::log(2.5)).epsilon(1e-13));
    CHECK(u.cdf_at(1.25) == doctest::Approx(0.5));
    CHECK(u.quantile(0.2) == doctest::Approx(0.5));

    const auto b = quad::normalise_density_on_interval(
        [](double x) { return std::log(6.0) + std::log(x) + std::log1p(-x); }, 0.0, 1.0, 10000);
    CHECK(std::abs(b.log_normaliser) <= 1e-6);
    CHECK(b.mean() == doctest::Approx(0.5));
    for (std::size_t i = 1; i < b.cdf.size(); ++i)
        CHECK(b.cdf[i] >= b.cdf[i - 1]);
    CHECK(b.cdf.back() == 1.0);
}
