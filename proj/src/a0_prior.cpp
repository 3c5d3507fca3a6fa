#include <powerprior/a0_prior.hpp>

#include <cmath>
#include <limits>

#include <boost/math/special_functions/beta.hpp>

#include <powerprior/errors.hpp>
#include <powerprior/model.hpp>

namespace powerprior {

A0Prior A0Prior::make(double eta, double nu, double M)
{
    if (!(eta > 0.0) || !(nu > 0.0) || !std::isfinite(eta) || !std::isfinite(nu))
        throw ConfigError("a0 prior parameters eta and nu must be positive");
    if (!(M > 0.0) || !std::isfinite(M))
        throw ConfigError("a0 prior support bound M must be positive");
    return A0Prior{eta, nu, M};
}

double A0Prior::log_density(double a0) const
{
    if (!(a0 >= 0.0 && a0 <= M))
        return -std::numeric_limits<double>::infinity();
    const double x = a0 / M;
    double v = -log_beta_fn(eta, nu) - std::log(M);
    if (eta != 1.0)
        v += (eta - 1.0) * std::log(x);
    if (nu != 1.0)
        v += (nu - 1.0) * std::log1p(-x);
    return v;
}

double A0Prior::cdf(double a0) const
{
    if (a0 <= 0.0)
        return 0.0;
    if (a0 >= M)
        return 1.0;
    return boost::math::ibeta(eta, nu, a0 / M);
}

double A0Prior::quantile(double p) const
{
    if (!(p >= 0.0 && p <= 1.0))
        throw DomainError("quantile level must lie in [0, 1]");
    return M * boost::math::ibeta_inv(eta, nu, p);
}

} // namespace powerprior
