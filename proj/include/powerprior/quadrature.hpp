#pragma once

#include <functional>
#include <vector>

#include <powerprior/model.hpp>

// Brute-force quadrature for normalising constants and for normalising
// univariate densities on a bounded interval.
namespace powerprior::quad {

enum class Domain { Interval, HalfLine, RealLine };

struct QuadratureConfig {
    double abs_tol = 1e-9;  // on the log scale
    double rel_tol = 1e-10; // passed to the Gauss-Kronrod rule
    int max_subdivisions = 15;
    int scan_points = 401;
};

struct LogIntegral {
    double value = 0.0; // log of the integral
    double error = 0.0; // absolute error estimate of value
};

using LogFn = std::function<double(double)>;

// log of the integral of exp(log_f) over (lo, hi) (Interval), (0, inf) (HalfLine)
// or the real line. lo, hi are ignored for the unbounded domains.
LogIntegral log_integrate(const LogFn& log_f, Domain domain, const QuadratureConfig& cfg = {},
                          double lo = 0.0, double hi = 1.0);

// Scalar-parameter families: Bernoulli and Poisson.
LogIntegral quad_log_c_1d(const ModelSpec& model, const Dataset& D0, double a0, const QuadratureConfig& cfg = {});
// Two-parameter families: normal-Gamma, and NIG regression with a single coefficient.
LogIntegral quad_log_c_2d(const ModelSpec& model, const Dataset& D0, double a0, const QuadratureConfig& cfg = {});

// A density tabulated on an evenly spaced grid, normalised by the trapezoid rule.
struct NormalisedDensity {
    std::vector<double> grid;
    std::vector<double> density;
    std::vector<double> cdf;
    double log_normaliser = 0.0;

    double mean() const;
    double cdf_at(double x) const;
    double quantile(double p) const;
};

NormalisedDensity normalise_density_on_interval(const LogFn& log_density, double lo, double hi, int K_quad);

} // namespace powerprior::quad
