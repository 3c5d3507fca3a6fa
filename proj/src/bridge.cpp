#include <powerprior/bridge.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <powerprior/errors.hpp>

namespace powerprior::bridge {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_add_exp(double a, double b)
{
    const double m = std::max(a, b);
    if (m == -std::numeric_limits<double>::infinity())
        return m;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double log_sum_exp(const std::vector<double>& v)
{
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v)
        m = std::max(m, x);
    if (!std::isfinite(m))
        return m;
    double s = 0.0;
    for (double x : v)
        s += std::exp(x - m);
    return m + std::log(s);
}

double median(std::vector<double> v)
{
    const std::size_t k = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    double hi = v[k];
    if (v.size() % 2 == 1)
        return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k));
    return 0.5 * (lo + hi);
}

double mean_of(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v)
{
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v)
        s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

} // namespace

double ProposalFit::log_density(const VectorXd& u) const
{
    const VectorXd z = chol.triangularView<Eigen::Lower>().solve(u - mean);
    return -0.5 * (static_cast<double>(mean.size()) * kLog2Pi + log_det + z.squaredNorm());
}

VectorXd ProposalFit::draw(Rng& rng) const
{
    VectorXd z(mean.size());
    for (Index k = 0; k < z.size(); ++k)
        z(k) = std_normal(rng);
    return mean + chol * z;
}

ProposalFit fit_proposal(const MatrixXd& draws)
{
    const Index n = draws.rows(), q = draws.cols();
    if (n < q + 2)
        throw DomainError("proposal fit needs at least q + 2 draws");
    if (!draws.allFinite())
        throw NumericalError("proposal fit received non-finite draws");
    ProposalFit fit;
    fit.mean = draws.colwise().mean().transpose();
    const MatrixXd centred = draws.rowwise() - fit.mean.transpose();
    fit.covariance = centred.transpose() * centred / static_cast<double>(n - 1);
    fit.covariance.diagonal().array() += 1e-8 * fit.covariance.trace() / static_cast<double>(q);
    Eigen::LLT<MatrixXd> llt(fit.covariance);
    if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0))
        throw NumericalError("proposal covariance is singular");
    fit.chol = llt.matrixL();
    fit.log_det = 2.0 * fit.chol.diagonal().array().log().sum();
    return fit;
}

namespace {

std::vector<MatrixXd> unconstrained_chains(const mcmc::ChainOutput& draws, const ModelSpec& model)
{
    std::vector<MatrixXd> out;
    for (const auto& c : draws.draws) {
        MatrixXd u(c.rows(), c.cols());
        for (Index i = 0; i < c.rows(); ++i)
            u.row(i) = to_unconstrained(model, {c.row(i).transpose(), Space::Constrained}).values.transpose();
        out.push_back(std::move(u));
    }
    return out;
}

MatrixXd stack(const std::vector<MatrixXd>& chains)
{
    Index rows = 0;
    for (const auto& c : chains)
        rows += c.rows();
    MatrixXd all(rows, chains.front().cols());
    Index at = 0;
    for (const auto& c : chains) {
        all.middleRows(at, c.rows()) = c;
        at += c.rows();
    }
    return all;
}

} // namespace

ProposalFit fit_proposal(const mcmc::ChainOutput& draws, const ModelSpec& model)
{
    if (draws.draws.empty())
        throw DomainError("no draws to fit a proposal to");
    return fit_proposal(stack(unconstrained_chains(draws, model)));
}

BridgeEstimate bridge_estimate(const LogDensityFn& log_f, const std::vector<MatrixXd>& chains, const BridgeConfig& cfg,
                               Rng& rng)
{
    if (!(cfg.tol > 0.0) || cfg.max_iter < 1)
        throw ConfigError("bridge sampling needs tol > 0 and max_iter >= 1");
    if (chains.empty())
        throw DomainError("no posterior draws");
    const MatrixXd post = stack(chains);
    const ProposalFit g = fit_proposal(post);
    const Index n2 = post.rows();
    const Index n1 = cfg.proposal_draws > 0 ? cfg.proposal_draws : n2;

    // log f - log g at posterior draws, per chain
    std::vector<double> l2(static_cast<std::size_t>(n2));
    std::vector<VectorXd> l2_chains;
    Index bad = 0, at = 0;
    for (const auto& c : chains) {
        VectorXd v(c.rows());
        for (Index i = 0; i < c.rows(); ++i) {
            const VectorXd u = c.row(i).transpose();
            v(i) = log_f(u) - g.log_density(u);
            if (!std::isfinite(v(i)))
                ++bad;
            l2[static_cast<std::size_t>(at++)] = v(i);
        }
        l2_chains.push_back(std::move(v));
    }
    if (bad > 0)
        throw NumericalError("non-finite bridge weights at " + std::to_string(bad) + " posterior draws");

    std::vector<double> l1(static_cast<std::size_t>(n1));
    for (Index i = 0; i < n1; ++i) {
        const VectorXd u = g.draw(rng);
        const double lf = log_f(u);
        l1[static_cast<std::size_t>(i)] = std::isnan(lf) ? -std::numeric_limits<double>::infinity() : lf - g.log_density(u);
    }

    // effective size of the posterior sample
    double n2_eff = static_cast<double>(n2);
    if (chains.size() >= 2 && chains.front().rows() >= 4) {
        const double ess = mcmc::effective_sample_size(l2_chains);
        if (std::isfinite(ess))
            n2_eff = std::min(ess, n2_eff);
    }
    const double log_s1 = std::log(n2_eff / (n2_eff + n1));
    const double log_s2 = std::log(n1 / (n2_eff + n1));

    const double lstar = median(l2);
    std::vector<double> a1(l1.size()), a2(l2.size());
    for (std::size_t i = 0; i < l1.size(); ++i)
        a1[i] = l1[i] - lstar;
    for (std::size_t j = 0; j < l2.size(); ++j)
        a2[j] = l2[j] - lstar;

    // start from the importance-sampling estimate
    double log_r = log_sum_exp(a1) - std::log(static_cast<double>(n1));
    if (!std::isfinite(log_r))
        throw NumericalError("importance weights of all proposal draws vanish");
    std::vector<double> num(a1.size()), den(a2.size());
    BridgeEstimate est;
    bool converged = false;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        for (std::size_t i = 0; i < a1.size(); ++i)
            num[i] = a1[i] - log_add_exp(log_s1 + a1[i], log_s2 + log_r);
        for (std::size_t j = 0; j < a2.size(); ++j)
            den[j] = -log_add_exp(log_s1 + a2[j], log_s2 + log_r);
        const double next = (log_sum_exp(num) - std::log(static_cast<double>(n1)))
                            - (log_sum_exp(den) - std::log(static_cast<double>(n2)));
        if (!std::isfinite(next))
            throw NumericalError("bridge iteration produced a non-finite value");
        const double change = std::abs(std::expm1(next - log_r));
        log_r = next;
        est.iterations = it;
        if (change < cfg.tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw NumericalError("bridge iteration did not converge in " + std::to_string(cfg.max_iter) + " iterations");
    est.log_c = log_r + lstar;

    // relative mean squared error of the estimate
    std::vector<double> f1(a1.size()), f2(a2.size());
    for (std::size_t i = 0; i < a1.size(); ++i)
        f1[i] = std::exp(a1[i] - log_r - log_add_exp(log_s1 + a1[i] - log_r, log_s2));
    std::vector<VectorXd> f2_chains;
    std::size_t k = 0;
    for (const auto& c : l2_chains) {
        VectorXd v(c.size());
        for (Index i = 0; i < c.size(); ++i, ++k) {
            f2[k] = std::exp(-log_add_exp(log_s1 + a2[k] - log_r, log_s2));
            v(i) = f2[k];
        }
        f2_chains.push_back(std::move(v));
    }
    const double m1 = mean_of(f1), m2 = mean_of(f2);
    double ess_f2 = static_cast<double>(n2);
    if (f2_chains.size() >= 2 && var_of(f2) > 0.0) {
        const double ess = mcmc::effective_sample_size(f2_chains);
        if (std::isfinite(ess))
            ess_f2 = ess;
    }
    const double re2 = var_of(f1) / (static_cast<double>(n1) * m1 * m1) + var_of(f2) / (ess_f2 * m2 * m2);
    est.rel_mcse = std::sqrt(re2);
    return est;
}

BridgeEstimate bridge_log_c(const PowerPriorTarget& target, const mcmc::ChainOutput& draws, const BridgeConfig& cfg,
                            Rng& rng)
{
    if (target.current)
        throw ConfigError("bridge estimate of c(a0) needs a target without current data");
    auto log_f = [&](const VectorXd& u) { return log_power_density_unconstrained(target, u); };
    return bridge_estimate(log_f, unconstrained_chains(draws, target.model), cfg, rng);
}

} // namespace powerprior::bridge
