#include <powerprior/curvefit.hpp>

#include <algorithm>
#include <cmath>

#include <powerprior/errors.hpp>

namespace powerprior::curvefit {

NaturalCubicSpline::NaturalCubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y))
{
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n)
        throw DomainError("spline needs at least two points and matching sizes");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x_[i]) || !std::isfinite(y_[i]))
            throw NumericalError("spline data must be finite");
        if (i > 0 && !(x_[i] > x_[i - 1]))
            throw DomainError("spline knots must be strictly increasing");
    }
    // Tridiagonal system for the second derivatives, zero at both ends.
    m_.assign(n, 0.0);
    if (n == 2)
        return;
    const std::size_t k = n - 2;
    std::vector<double> diag(k), upper(k), rhs(k);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
        diag[i - 1] = (h0 + h1) / 3.0;
        upper[i - 1] = h1 / 6.0;
        rhs[i - 1] = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
    }
    for (std::size_t i = 1; i < k; ++i) {
        const double lower = x_[i + 1] - x_[i]; // h_{i}, sub-diagonal of row i
        const double w = lower / 6.0 / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    m_[k] = rhs[k - 1] / diag[k - 1];
    for (std::size_t i = k - 1; i >= 1; --i)
        m_[i] = (rhs[i - 1] - upper[i - 1] * m_[i + 1]) / diag[i - 1];
}

std::size_t NaturalCubicSpline::interval(double t) const
{
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = static_cast<std::size_t>(it - x_.begin());
    i = std::clamp<std::size_t>(i, 1, x_.size() - 1);
    return i - 1;
}

double NaturalCubicSpline::operator()(double t) const
{
    if (t < x_.front())
        return y_.front() + derivative(x_.front()) * (t - x_.front());
    if (t > x_.back())
        return y_.back() + derivative(x_.back()) * (t - x_.back());
    const std::size_t i = interval(t);
    const double h = x_[i + 1] - x_[i];
    const double B = (t - x_[i]) / h, A = 1.0 - B;
    return A * y_[i] + B * y_[i + 1] + ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
}

double NaturalCubicSpline::derivative(double t) const
{
    t = std::clamp(t, x_.front(), x_.back());
    const std::size_t i = interval(t);
    const double h = x_[i + 1] - x_[i];
    const double B = (t - x_[i]) / h, A = 1.0 - B;
    return (y_[i + 1] - y_[i]) / h + ((1.0 - 3.0 * A * A) * m_[i] + (3.0 * B * B - 1.0) * m_[i + 1]) * h / 6.0;
}

SplineFit fit_curve(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() < 4)
        throw DomainError("curve fit needs at least four points");
    SplineFit fit;
    fit.spline = NaturalCubicSpline(x, y);
    fit.n_basis = static_cast<int>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        fit.max_residual = std::max(fit.max_residual, std::abs(fit.spline(x[i]) - y[i]));
    return fit;
}

SplineFit fit_l_curve(const grid::GridResult& grid)
{
    return fit_curve(grid.z, grid.l);
}

std::string_view provenance_name(Provenance p)
{
    switch (p) {
    case Provenance::Direct:
        return "direct";
    case Provenance::DerivativeMidpoint:
        return "derivative_midpoint";
    case Provenance::Exact:
        return "exact";
    }
    return "direct";
}

namespace {

std::vector<double> even_grid(int K, double lo, double hi)
{
    if (K < 2 || !(lo < hi))
        throw DomainError("dictionary needs K >= 2 and lo < hi");
    std::vector<double> g(static_cast<std::size_t>(K));
    const double h = (hi - lo) / (K - 1);
    for (int i = 0; i < K; ++i)
        g[static_cast<std::size_t>(i)] = lo + i * h;
    g.back() = hi;
    return g;
}

} // namespace

Dictionary predict_dictionary(const SplineFit& fit, int K, double lo, double hi)
{
    Dictionary d;
    d.a0 = even_grid(K, lo, hi);
    d.l.resize(d.a0.size());
    for (std::size_t i = 0; i < d.a0.size(); ++i)
        d.l[i] = fit.spline(d.a0[i]);
    d.provenance = Provenance::Direct;
    return d;
}

Dictionary tabulate(const std::function<double(double)>& l, int K, double lo, double hi)
{
    Dictionary d;
    d.a0 = even_grid(K, lo, hi);
    d.l.resize(d.a0.size());
    for (std::size_t i = 0; i < d.a0.size(); ++i)
        d.l[i] = l(d.a0[i]);
    d.provenance = Provenance::Exact;
    return d;
}

double lookup_l(const Dictionary& dict, double a0)
{
    if (dict.a0.size() < 2)
        throw DomainError("dictionary has fewer than two points");
    if (!(a0 >= dict.min() && a0 <= dict.max()))
        throw OutOfRangeError("a0 = " + std::to_string(a0) + " lies outside the dictionary range");
    const auto it = std::upper_bound(dict.a0.begin(), dict.a0.end(), a0);
    if (it == dict.a0.end())
        return dict.l.back();
    const std::size_t i = static_cast<std::size_t>(it - dict.a0.begin());
    const double x0 = dict.a0[i - 1], x1 = dict.a0[i];
    if (a0 == x0)
        return dict.l[i - 1];
    const double w = (a0 - x0) / (x1 - x0);
    return dict.l[i - 1] + w * (dict.l[i] - dict.l[i - 1]);
}

Dictionary fit_l_from_derivative(const grid::GridResult& grid, int K)
{
    std::vector<double> x, y;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.z[i] == 0.0)
            continue;
        if (!std::isfinite(grid.l_prime[i]))
            throw DomainError("derivative variant needs l' at every positive grid point");
        x.push_back(grid.z[i]);
        y.push_back(grid.l_prime[i]);
    }
    const auto fit = fit_curve(x, y);
    Dictionary d;
    d.a0 = even_grid(K, 0.0, grid.M);
    d.l.assign(d.a0.size(), 0.0);
    for (std::size_t k = 1; k < d.a0.size(); ++k) {
        const double h = d.a0[k] - d.a0[k - 1];
        d.l[k] = d.l[k - 1] + h * fit.spline(0.5 * (d.a0[k] + d.a0[k - 1]));
    }
    d.provenance = Provenance::DerivativeMidpoint;
    return d;
}

CurveMetrics curve_metrics(const Dictionary& dict, const std::function<double(double)>& truth, double lo, double hi)
{
    CurveMetrics cm;
    double sa = 0.0, ss = 0.0, sr = 0.0;
    std::size_t nr = 0;
    for (std::size_t i = 0; i < dict.size(); ++i) {
        const double a = dict.a0[i];
        if (a < lo || a > hi)
            continue;
        const double t = truth(a);
        const double e = dict.l[i] - t;
        sa += std::abs(e);
        ss += e * e;
        ++cm.n;
        if (std::abs(t) >= 1e-8) {
            sr += std::abs(e) / std::abs(t);
            ++nr;
        }
    }
    if (cm.n > 0) {
        cm.mad = sa / cm.n;
        cm.rmse = std::sqrt(ss / cm.n);
    }
    cm.mrae = nr > 0 ? sr / nr : 0.0;
    return cm;
}

} // namespace powerprior::curvefit
