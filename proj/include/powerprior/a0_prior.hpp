#pragma once

namespace powerprior {

// Beta(eta, nu) prior on a0, rescaled to the support [0, M].
struct A0Prior {
    double eta = 1.0;
    double nu = 1.0;
    double M = 1.0;

    static A0Prior make(double eta, double nu, double M = 1.0);

    double log_density(double a0) const;
    double cdf(double a0) const;
    double quantile(double p) const;
    double mean() const { return M * eta / (eta + nu); }
};

} // namespace powerprior
