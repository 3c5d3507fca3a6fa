#pragma once

#include <cmath>
#include <functional>

#include <powerprior/model.hpp>

namespace oracle {

// Bernoulli test data sets used across the suite.
inline powerprior::Dataset bern(long y, long n) { return powerprior::Dataset::bernoulli_counts(y, n); }

// Five-point central difference.
inline double derivative(const std::function<double(double)>& f, double x, double h = 1e-4)
{
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

} // namespace oracle
