#pragma once

#include <functional>
#include <string>
#include <vector>

#include <powerprior/grid.hpp>

// Smooth approximation of l(a0) from grid estimates and the K-point lookup
// dictionary used to normalise joint posteriors.
namespace powerprior::curvefit {

// Natural cubic spline through (x, y); linear beyond the end knots.
class NaturalCubicSpline {
public:
    NaturalCubicSpline() = default;
    NaturalCubicSpline(std::vector<double> x, std::vector<double> y);

    double operator()(double t) const;
    double derivative(double t) const;
    const std::vector<double>& knots() const { return x_; }
    const std::vector<double>& values() const { return y_; }
    const std::vector<double>& second_derivatives() const { return m_; }

private:
    std::size_t interval(double t) const;
    std::vector<double> x_, y_, m_;
};

// With one basis function per training point the least-squares fit of a
// natural cubic spline interpolates the data.
struct SplineFit {
    NaturalCubicSpline spline;
    int n_basis = 0;
    double max_residual = 0.0;
};

SplineFit fit_l_curve(const grid::GridResult& grid);
SplineFit fit_curve(const std::vector<double>& x, const std::vector<double>& y);

enum class Provenance { Direct, DerivativeMidpoint, Exact };
std::string_view provenance_name(Provenance p);

struct Dictionary {
    std::vector<double> a0; // strictly increasing
    std::vector<double> l;
    Provenance provenance = Provenance::Direct;
    std::string id;

    std::size_t size() const { return a0.size(); }
    double min() const { return a0.front(); }
    double max() const { return a0.back(); }
};

// K evenly spaced points on [lo, hi].
Dictionary predict_dictionary(const SplineFit& fit, int K, double lo, double hi);
// Linear interpolation; OutOfRangeError outside the tabulated range.
double lookup_l(const Dictionary& dict, double a0);
// Spline through (z, l'), cumulative midpoint integration from l(0) = 0 on a
// K-point grid over [0, M].
Dictionary fit_l_from_derivative(const grid::GridResult& grid, int K);
// Tabulates a known l on K evenly spaced points.
Dictionary tabulate(const std::function<double(double)>& l, int K, double lo, double hi);

struct CurveMetrics {
    double mad = 0.0;
    double rmse = 0.0;
    double mrae = 0.0;
    std::size_t n = 0;
};

// Errors of the dictionary against truth over dictionary points in [lo, hi].
// MRAE skips points where |l| < 1e-8.
CurveMetrics curve_metrics(const Dictionary& dict, const std::function<double(double)>& truth, double lo, double hi);

} // namespace powerprior::curvefit
