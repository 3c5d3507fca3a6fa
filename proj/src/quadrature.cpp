#include <powerprior/quadrature.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <powerprior/errors.hpp>

namespace powerprior::quad {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Integrand values this far below the maximum are treated as zero.
constexpr double kSupportDrop = 60.0;

double safe(double v)
{
    return std::isfinite(v) ? v : (v > 0.0 ? std::numeric_limits<double>::quiet_NaN() : kNegInf);
}

// Working variable t. On the interval, x = t. Otherwise u = centre + scale * t / (1 - t^2)
// with x = u (real line) or x = exp(u) (half-line).
struct Map {
    Domain domain;
    double centre = 0.0;
    double scale = 1.0;

    double u(double t) const { return centre + scale * t / (1.0 - t * t); }

    double log_integrand(const LogFn& log_f, double t) const
    {
        if (domain == Domain::Interval)
            return safe(log_f(t));
        const double s = 1.0 - t * t;
        if (!(s > 0.0))
            return kNegInf;
        const double uu = centre + scale * t / s;
        const double log_jac = std::log(scale) + std::log1p(t * t) - 2.0 * std::log(s);
        if (domain == Domain::RealLine)
            return safe(log_f(uu) + log_jac);
        const double x = std::exp(uu);
        if (!(x > 0.0) || !std::isfinite(x))
            return kNegInf;
        return safe(log_f(x) + uu + log_jac);
    }
};

struct Scan {
    double a, b, lmax;
    bool resolved;
    int first, last;
};

// Scans n interior points of (a, b) and returns the sub-interval where the
// integrand is within kSupportDrop of its maximum, padded by one step.
Scan scan(const LogFn& log_f, const Map& map, double a, double b, int n, std::vector<double>& vals)
{
    const double step = (b - a) / (n + 1);
    int imax = -1;
    for (int i = 0; i < n; ++i) {
        vals[i] = map.log_integrand(log_f, a + (i + 1) * step);
        if (std::isnan(vals[i]))
            throw NumericalError("integrand is NaN inside the domain");
        if (imax < 0 || vals[i] > vals[imax])
            imax = i;
    }
    const double lmax = vals[imax];
    if (lmax == kNegInf)
        return {a, b, lmax, false, 0, n - 1};
    int first = imax, last = imax;
    for (int i = 0; i < n; ++i)
        if (vals[i] > lmax - kSupportDrop) {
            first = std::min(first, i);
            last = std::max(last, i);
        }
    return {a + first * step, a + (last + 2) * step, lmax, last - first >= n / 8, first, last};
}

// Error estimates are returned, not checked. A mass narrower than the
// floating-point resolution of the working variable gives a crude value with
// an infinite error estimate.
LogIntegral log_integrate_impl(const LogFn& log_f, Domain domain, const QuadratureConfig& cfg, double lo, double hi)
{
    if (!(cfg.abs_tol > 0.0) || !(cfg.rel_tol > 0.0) || cfg.max_subdivisions < 1 || cfg.scan_points < 8)
        throw ConfigError("invalid quadrature configuration");
    if (domain != Domain::Interval) {
        lo = -1.0;
        hi = 1.0;
    } else if (!(lo < hi)) {
        throw DomainError("integration interval must satisfy lo < hi");
    }

    // Locate the region carrying the mass. On the interval the scan window
    // shrinks; on unbounded domains the map is re-centred and re-scaled so the
    // working variable keeps full precision.
    const int n = cfg.scan_points;
    std::vector<double> vals(n);
    Map map{domain};
    Scan sc{};
    double a = lo, b = hi;
    for (int pass = 0; pass < 60; ++pass) {
        sc = scan(log_f, map, a, b, n, vals);
        if (sc.lmax == kNegInf)
            return {kNegInf, 0.0};
        const bool at_edge = sc.first == 0 || sc.last == n - 1;
        if (sc.resolved && (domain == Domain::Interval || !at_edge))
            break;
        if (domain == Domain::Interval) {
            if (sc.b - sc.a < 1e-13 * std::max(1.0, std::abs(sc.a)))
                break;
            a = sc.a;
            b = sc.b;
            continue;
        }
        if (sc.first == 0 || sc.last == n - 1) {
            // mass reaches the ends of the working interval: widen
            if (map.scale > 1e250)
                break;
            map.scale *= 1e3;
            continue;
        }
        const double u_lo = map.u(sc.a), u_hi = map.u(sc.b);
        map.centre = 0.5 * (u_lo + u_hi);
        map.scale = 0.5 * (u_hi - u_lo);
        if (!(map.scale > 1e-14 * std::max(1.0, std::abs(map.centre))))
            return {sc.lmax + std::log(u_hi - u_lo), std::numeric_limits<double>::infinity()};
    }

    double err = 0.0;
    const double lmax = sc.lmax;
    auto f = [&](double t) {
        const double v = map.log_integrand(log_f, t);
        return v == kNegInf ? 0.0 : std::exp(v - lmax);
    };
    const double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, sc.a, sc.b, static_cast<unsigned>(cfg.max_subdivisions), cfg.rel_tol, &err);
    if (!(I > 0.0) || !std::isfinite(I))
        throw NumericalError("quadrature produced a non-positive integral");
    return {lmax + std::log(I), err / I};
}

void check_error(const LogIntegral& r, const QuadratureConfig& cfg)
{
    if (r.value == kNegInf)
        throw NumericalError("integrand vanishes on the scanned domain");
    if (!(r.error <= cfg.abs_tol))
        throw NumericalError("quadrature did not converge within the subdivision limit");
}

} // namespace

LogIntegral log_integrate(const LogFn& log_f, Domain domain, const QuadratureConfig& cfg, double lo, double hi)
{
    const auto r = log_integrate_impl(log_f, domain, cfg, lo, hi);
    check_error(r, cfg);
    return r;
}

LogIntegral quad_log_c_1d(const ModelSpec& model, const Dataset& D0, double a0, const QuadratureConfig& cfg)
{
    if (!(a0 >= 0.0))
        throw DomainError("a0 must be non-negative");
    check_compatible(model, D0);
    VectorXd theta(1);
    auto log_f = [&](double x) {
        theta(0) = x;
        const double lp = log_prior_unchecked(model, theta);
        return a0 == 0.0 ? lp : a0 * log_likelihood_unchecked(model, D0, theta) + lp;
    };
    switch (model.family()) {
    case Family::BetaBernoulli:
        return log_integrate(log_f, Domain::Interval, cfg, 0.0, 1.0);
    case Family::GammaPoisson:
        return log_integrate(log_f, Domain::HalfLine, cfg);
    default:
        throw ConfigError("one-dimensional quadrature needs a scalar-parameter family");
    }
}

LogIntegral quad_log_c_2d(const ModelSpec& model, const Dataset& D0, double a0, const QuadratureConfig& cfg)
{
    if (!(a0 >= 0.0))
        throw DomainError("a0 must be non-negative");
    check_compatible(model, D0);
    if (model.family() != Family::NormalGamma
        && !(model.family() == Family::NIGRegression && model.dim() == 2))
        throw ConfigError("two-dimensional quadrature needs the normal-Gamma family or a one-coefficient regression");

    // Outer variable: precision tau or variance sigma2. Inner: location or slope.
    std::vector<LogIntegral> inner_results;
    auto outer = [&](double scale) {
        VectorXd theta(2);
        theta(1) = scale;
        auto inner = [&](double loc) {
            theta(0) = loc;
            const double lp = log_prior_unchecked(model, theta);
            return a0 == 0.0 ? lp : a0 * log_likelihood_unchecked(model, D0, theta) + lp;
        };
        const auto r = log_integrate_impl(inner, Domain::RealLine, cfg, 0.0, 1.0);
        inner_results.push_back(r);
        return r.value;
    };
    auto r = log_integrate_impl(outer, Domain::HalfLine, cfg, 0.0, 1.0);
    // Only inner integrals that can contribute to the total count towards the error.
    double vmax = -std::numeric_limits<double>::infinity();
    for (const auto& ir : inner_results)
        vmax = std::max(vmax, ir.value);
    double inner_err = 0.0;
    for (const auto& ir : inner_results)
        if (ir.value > vmax - kSupportDrop)
            inner_err = std::max(inner_err, ir.error);
    r.error += inner_err;
    check_error(r, cfg);
    return r;
}

// ---------------------------------------------------------------------------

NormalisedDensity normalise_density_on_interval(const LogFn& log_density, double lo, double hi, int K_quad)
{
    if (K_quad < 2 || !(lo < hi))
        throw DomainError("normalisation grid needs K_quad >= 2 and lo < hi");
    NormalisedDensity out;
    out.grid.resize(K_quad);
    std::vector<double> v(K_quad);
    const double h = (hi - lo) / (K_quad - 1);
    for (int i = 0; i < K_quad; ++i) {
        out.grid[i] = i + 1 == K_quad ? hi : lo + i * h;
        v[i] = log_density(out.grid[i]);
    }
    // Endpoint singularities are replaced by the neighbouring value; zeros stay.
    if (std::isnan(v.front()) || v.front() == std::numeric_limits<double>::infinity())
        v.front() = v[1];
    if (std::isnan(v.back()) || v.back() == std::numeric_limits<double>::infinity())
        v.back() = v[K_quad - 2];
    for (int i = 0; i < K_quad; ++i)
        if (std::isnan(v[i]) || v[i] == std::numeric_limits<double>::infinity())
            throw NumericalError("density is not finite at an interior grid point");
    const double vmax = *std::max_element(v.begin(), v.end());
    if (vmax == kNegInf)
        throw NumericalError("density vanishes on the whole grid");

    std::vector<double> w(K_quad);
    for (int i = 0; i < K_quad; ++i)
        w[i] = std::exp(v[i] - vmax);
    out.cdf.assign(K_quad, 0.0);
    for (int i = 1; i < K_quad; ++i)
        out.cdf[i] = out.cdf[i - 1] + 0.5 * h * (w[i - 1] + w[i]);
    const double total = out.cdf.back();
    out.log_normaliser = vmax + std::log(total);
    out.density.resize(K_quad);
    for (int i = 0; i < K_quad; ++i) {
        out.density[i] = w[i] / total;
        out.cdf[i] /= total;
    }
    out.cdf.back() = 1.0;
    return out;
}

double NormalisedDensity::mean() const
{
    double m = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double h = grid[i] - grid[i - 1];
        m += 0.5 * h * (grid[i - 1] * density[i - 1] + grid[i] * density[i]);
    }
    return m;
}

double NormalisedDensity::cdf_at(double x) const
{
    if (x <= grid.front())
        return 0.0;
    if (x >= grid.back())
        return 1.0;
    const auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - grid.begin());
    const double frac = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
    return cdf[i - 1] + frac * (cdf[i] - cdf[i - 1]);
}

double NormalisedDensity::quantile(double p) const
{
    if (!(p >= 0.0 && p <= 1.0))
        throw DomainError("quantile level must lie in [0, 1]");
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), p);
    if (it == cdf.begin())
        return grid.front();
    const std::size_t i = static_cast<std::size_t>(it - cdf.begin());
    const double span = cdf[i] - cdf[i - 1];
    const double frac = span > 0.0 ? (p - cdf[i - 1]) / span : 0.0;
    return grid[i - 1] + frac * (grid[i] - grid[i - 1]);
}

} // namespace powerprior::quad
