#include <doctest.h>

#include <cmath>

#include <powerprior/conjugate.hpp>
#include <powerprior/curvefit.hpp>
#include <powerprior/errors.hpp>

#include "oracles.hpp"

using namespace powerprior;

TEST_CASE("spline interpolates and reproduces lines")
{
    std::vector<double> x{0, 0.5, 1.3, 2, 3};
    std::vector<double> y;
    for (double v : x)
        y.push_back(2 * v - 1);
    curvefit::NaturalCubicSpline s(x, y);
    for (double t : {-1.0, 0.2, 0.9, 2.5, 4.0}) {
        CHECK(s(t) == doctest::Approx(2 * t - 1).epsilon(1e-12));
        CHECK(s.derivative(t) == doctest::Approx(2).epsilon(1e-12));
    }
    std::vector<double> y2{1, -2, 0.5, 3, 1};
    curvefit::NaturalCubicSpline s2(x, y2);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(s2(x[i]) == doctest::Approx(y2[i]).epsilon(1e-13));
    CHECK(s2.second_derivatives().front() == 0.0);
    CHECK(s2.second_derivatives().back() == 0.0);
    CHECK_THROWS_AS(curvefit::NaturalCubicSpline({0, 1, 1}, {0, 1, 2}), DomainError);
}

TEST_CASE("spline approximates smooth functions")
{
    std::vector<double> x, y;
    for (int i = 0; i <= 40; ++i) {
        x.push_back(i / 40.0);
        y.push_back(std::sin(3 * x.back()));
    }
    curvefit::NaturalCubicSpline s(x, y);
    for (double t = 0.1; t < 0.9; t += 0.013)
        CHECK(std::abs(s(t) - std::sin(3 * t)) < 1e-5);
}

TEST_CASE("dictionary lookup")
{
    const auto d = curvefit::tabulate([](double a) { return a * a; }, 101, 0, 1);
    CHECK(d.size() == 101);
    CHECK(curvefit::lookup_l(d, 0.5) == doctest::Approx(0.25));
    CHECK(curvefit::lookup_l(d, 0.505) == doctest::Approx(0.5 * (0.25 + 0.2601)));
    CHECK(curvefit::lookup_l(d, 1.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(curvefit::lookup_l(d, 1.0001), OutOfRangeError);
    CHECK_THROWS_AS(curvefit::lookup_l(d, -0.1), OutOfRangeError);
}

TEST_CASE("direct and derivative dictionaries from an exact Bernoulli grid")
{
    const auto model = ModelSpec::beta_bernoulli(1, 1);
    const auto D0 = oracle::bern(20, 100);
    auto eval = grid::closed_form_evaluator(model, D0);
    const auto g = grid::build_uniform_grid(eval, {});
    const auto fit = curvefit::fit_l_curve(g);
    CHECK(fit.max_residual < 1e-10);
    const auto truth = [&](double a) { return conjugate::log_c(model, D0, a); };
    const auto direct = curvefit::predict_dictionary(fit, 2000, 0, 1);
    const auto deriv = curvefit::fit_l_from_derivative(g, 2000);
    CHECK(direct.l.front() == 0.0);
    CHECK(deriv.l.front() == 0.0);
    CHECK(deriv.provenance == curvefit::Provenance::DerivativeMidpoint);
    const auto md = curvefit::curve_metrics(direct, truth, 0, 1);
    const auto mv = curvefit::curve_metrics(deriv, truth, 0, 1);
    CHECK(md.rmse < 0.2);
    CHECK(mv.rmse < 0.5);
    CHECK(md.mad <= md.rmse + 1e-15);
    const auto exact = curvefit::curve_metrics(curvefit::tabulate(truth, 2000, 0, 1), truth, 0, 1);
    CHECK(exact.rmse == 0.0);
    CHECK(exact.n == 2000);
}
