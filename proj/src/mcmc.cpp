#include <powerprior/mcmc.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include <powerprior/conjugate.hpp>
#include <powerprior/errors.hpp>
#include <powerprior/parallel.hpp>

namespace powerprior::mcmc {

void ChainConfig::validate() const
{
    if (n_chains < 2)
        throw ConfigError("need at least two chains for split diagnostics");
    if (n_warmup < 0 || n_iter <= n_warmup)
        throw ConfigError("need 0 <= n_warmup < n_iter");
    if (n_kept() < 4)
        throw ConfigError("need at least four kept iterations per chain");
    if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
        throw ConfigError("target acceptance must lie in (0, 1)");
}

MatrixXd ChainOutput::pooled() const
{
    MatrixXd all(n_chains() * n_kept(), dim());
    for (Index c = 0; c < n_chains(); ++c)
        all.middleRows(c * n_kept(), n_kept()) = draws[c];
    return all;
}

VectorXd ChainOutput::pooled_log_likelihood() const
{
    VectorXd all(n_chains() * n_kept());
    for (Index c = 0; c < n_chains(); ++c)
        all.segment(c * n_kept(), n_kept()) = log_likelihood[c];
    return all;
}

// ---------------------------------------------------------------------------
// Diagnostics

namespace {

double sample_var(const VectorXd& x)
{
    if (x.size() < 2)
        return 0.0;
    return (x.array() - x.mean()).square().sum() / static_cast<double>(x.size() - 1);
}

std::vector<VectorXd> split_chains(const std::vector<VectorXd>& chains)
{
    std::vector<VectorXd> out;
    for (const auto& c : chains) {
        const Index half = c.size() / 2;
        out.push_back(c.head(half));
        out.push_back(c.tail(half));
    }
    return out;
}

void require_equal_lengths(const std::vector<VectorXd>& chains)
{
    if (chains.empty() || chains.front().size() < 4)
        throw DomainError("diagnostics need at least one chain with four draws");
    for (const auto& c : chains)
        if (c.size() != chains.front().size())
            throw DomainError("chains must have equal length");
}

} // namespace

double split_rhat(const std::vector<VectorXd>& chains)
{
    require_equal_lengths(chains);
    const auto split = split_chains(chains);
    const double n = static_cast<double>(split.front().size());
    VectorXd means(static_cast<Index>(split.size()));
    double W = 0.0;
    for (std::size_t j = 0; j < split.size(); ++j) {
        means(static_cast<Index>(j)) = split[j].mean();
        W += sample_var(split[j]);
    }
    W /= static_cast<double>(split.size());
    if (!(W > 0.0))
        return std::numeric_limits<double>::quiet_NaN();
    const double var_plus = (n - 1.0) / n * W + sample_var(means);
    return std::sqrt(var_plus / W);
}

// Autocorrelation-based ESS with Geyer's initial monotone sequence, following
// the multi-chain formulation of Stan.
double effective_sample_size(const std::vector<VectorXd>& chains)
{
    require_equal_lengths(chains);
    const Index m = static_cast<Index>(chains.size());
    const Index n = chains.front().size();
    const double total = static_cast<double>(m * n);

    VectorXd means(m);
    for (Index j = 0; j < m; ++j)
        means(j) = chains[j].mean();
    auto acov_mean = [&](Index t) {
        double s = 0.0;
        for (Index j = 0; j < m; ++j) {
            const VectorXd& x = chains[j];
            const double mu = means(j);
            double acc = 0.0;
            for (Index i = 0; i + t < n; ++i)
                acc += (x(i) - mu) * (x(i + t) - mu);
            s += acc / static_cast<double>(n);
        }
        return s / static_cast<double>(m);
    };
    const double mean_var = acov_mean(0) * n / (n - 1.0);
    double var_plus = mean_var * (n - 1.0) / n;
    if (m > 1)
        var_plus += sample_var(means);
    if (!(var_plus > 0.0))
        return std::numeric_limits<double>::quiet_NaN();
    auto rho = [&](Index t) { return 1.0 - (mean_var - acov_mean(t)) / var_plus; };

    std::vector<double> r(static_cast<std::size_t>(n) + 1, 0.0);
    r[0] = 1.0;
    double even = 1.0, odd = rho(1);
    r[1] = odd;
    Index s = 1;
    while (s < n - 4 && even + odd > 0.0) {
        even = rho(s + 1);
        odd = rho(s + 2);
        if (even + odd >= 0.0) {
            r[s + 1] = even;
            r[s + 2] = odd;
        }
        s += 2;
    }
    const Index max_s = s;
    if (even > 0.0)
        r[max_s + 1] = even;
    for (Index k = 1; k <= max_s - 3; k += 2) {
        if (r[k + 1] + r[k + 2] > r[k - 1] + r[k]) {
            r[k + 1] = 0.5 * (r[k - 1] + r[k]);
            r[k + 2] = r[k + 1];
        }
    }
    double sum = 0.0;
    for (Index k = 0; k < max_s; ++k)
        sum += r[k];
    const double tau = -1.0 + 2.0 * sum + r[max_s + 1];
    const double ess = total / std::max(tau, 1e-12);
    return std::min(ess, total);
}

bool Diagnostics::passes_gate(double rhat_max, double mcse_fraction) const
{
    for (Index k = 0; k < rhat.size(); ++k) {
        if (constant[static_cast<std::size_t>(k)])
            return false;
        if (!(rhat(k) < rhat_max) || !(mcse(k) < mcse_fraction * sd(k)))
            return false;
    }
    return true;
}

Diagnostics compute_diagnostics(const std::vector<MatrixXd>& chains)
{
    if (chains.size() < 2)
        throw DomainError("diagnostics need at least two chains");
    const Index q = chains.front().cols();
    Diagnostics d;
    d.rhat.resize(q);
    d.ess.resize(q);
    d.mcse.resize(q);
    d.mean.resize(q);
    d.sd.resize(q);
    d.constant.assign(static_cast<std::size_t>(q), false);
    for (Index k = 0; k < q; ++k) {
        std::vector<VectorXd> cols;
        double total = 0.0, sum = 0.0;
        for (const auto& c : chains) {
            if (c.cols() != q)
                throw DomainError("chains must have equal dimension");
            cols.push_back(c.col(k));
            sum += c.col(k).sum();
            total += static_cast<double>(c.rows());
        }
        const double mean = sum / total;
        double ss = 0.0;
        for (const auto& c : cols)
            ss += (c.array() - mean).square().sum();
        d.mean(k) = mean;
        d.sd(k) = std::sqrt(ss / (total - 1.0));
        if (!(d.sd(k) > 0.0)) {
            d.constant[static_cast<std::size_t>(k)] = true;
            d.rhat(k) = std::numeric_limits<double>::quiet_NaN();
            d.ess(k) = std::numeric_limits<double>::quiet_NaN();
            d.mcse(k) = 0.0;
            continue;
        }
        d.rhat(k) = split_rhat(cols);
        d.ess(k) = effective_sample_size(split_chains(cols));
        d.mcse(k) = d.sd(k) / std::sqrt(d.ess(k));
        if (!std::isfinite(d.rhat(k)))
            d.constant[static_cast<std::size_t>(k)] = true;
    }
    return d;
}

Diagnostics compute_diagnostics(const ChainOutput& out)
{
    return compute_diagnostics(out.draws);
}

namespace {

Estimate mean_estimate(const std::vector<VectorXd>& chains)
{
    double sum = 0.0, total = 0.0;
    for (const auto& c : chains) {
        sum += c.sum();
        total += static_cast<double>(c.size());
    }
    const double mean = sum / total;
    double ss = 0.0;
    for (const auto& c : chains)
        ss += (c.array() - mean).square().sum();
    const double var = ss / (total - 1.0);
    if (!(var > 0.0))
        return {mean, 0.0};
    const double ess = effective_sample_size(split_chains(chains));
    return {mean, std::sqrt(var / ess)};
}

} // namespace

Estimate estimate_l_prime(const ChainOutput& out)
{
    if (out.log_likelihood.empty())
        throw DomainError("chain output has no log-likelihood trace");
    return mean_estimate(out.log_likelihood);
}

Estimate estimate_l_second(const ChainOutput& out)
{
    if (out.log_likelihood.empty())
        throw DomainError("chain output has no log-likelihood trace");
    const double mean = mean_estimate(out.log_likelihood).value;
    std::vector<VectorXd> sq;
    double total = 0.0;
    for (const auto& c : out.log_likelihood) {
        sq.push_back((c.array() - mean).square().matrix());
        total += static_cast<double>(c.size());
    }
    auto e = mean_estimate(sq);
    // unbiased variance
    e.value *= total / (total - 1.0);
    e.mcse *= total / (total - 1.0);
    return e;
}

// ---------------------------------------------------------------------------
// Random-walk Metropolis

namespace {

MatrixXd regularised_cov(const MatrixXd& samples)
{
    const Index n = samples.rows();
    const VectorXd mean = samples.colwise().mean();
    const MatrixXd centred = samples.rowwise() - mean.transpose();
    MatrixXd cov = centred.transpose() * centred / static_cast<double>(n - 1);
    const double scale = std::max(cov.diagonal().mean(), 1e-300);
    const double w = static_cast<double>(n) / (n + 5.0);
    cov = w * cov;
    cov.diagonal().array() += (1.0 - w) * 1e-3 * scale;
    return cov;
}

Eigen::LLT<MatrixXd> chol_or_throw(const MatrixXd& cov)
{
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw NumericalError("proposal covariance is not positive definite");
    return llt;
}

} // namespace

RwmChain adaptive_rwm(const LogDensity& log_density, const VectorXd& init, const MatrixXd& proposal_cov, int n_iter,
                      int n_warmup, double target_acceptance, Rng& rng)
{
    const Index q = init.size();
    MatrixXd L = chol_or_throw(proposal_cov).matrixL();
    const double base_log_scale = std::log(2.38 / std::sqrt(static_cast<double>(q)));
    double log_scale = base_log_scale;

    VectorXd x = init;
    double lp = log_density(x);
    if (!std::isfinite(lp))
        throw NumericalError("log density is not finite at the initial point");

    const int n_kept = n_iter - n_warmup;
    RwmChain out;
    out.draws.resize(n_kept, q);
    const int adapt_start = n_warmup / 4;
    const int window_ends[] = {n_warmup / 2, (3 * n_warmup) / 4};
    MatrixXd warm(std::max(n_warmup - adapt_start, 0), q);
    long accepted = 0;

    // multivariate t independence proposal, frozen at the last adaptation window
    constexpr double nu = 7.0;
    bool have_indep = false;
    VectorXd t_mean;
    MatrixXd t_chol;
    auto t_log_q = [&](const VectorXd& v) {
        const VectorXd d = t_chol.triangularView<Eigen::Lower>().solve(v - t_mean);
        return -0.5 * (nu + static_cast<double>(q)) * std::log1p(d.squaredNorm() / nu);
    };

    VectorXd z(q), prop(q);
    for (int it = 0; it < n_iter; ++it) {
        for (Index k = 0; k < q; ++k)
            z(k) = std_normal(rng);
        prop = x + std::exp(log_scale) * (L * z);
        const double lp_prop = log_density(prop);
        const double log_ratio = lp_prop - lp;
        const double acc_prob = std::isfinite(lp_prop) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
        const bool accept = std::isfinite(lp_prop) && std::log(uniform01(rng)) < log_ratio;
        if (accept) {
            x = prop;
            lp = lp_prop;
        }
        if (have_indep) {
            for (Index k = 0; k < q; ++k)
                z(k) = std_normal(rng);
            const double w = gamma_rate(rng, 0.5 * nu, 0.5) / nu;
            prop = t_mean + t_chol * z / std::sqrt(w);
            const double lp_ind = log_density(prop);
            if (std::isfinite(lp_ind)
                && std::log(uniform01(rng)) < lp_ind - lp + t_log_q(x) - t_log_q(prop)) {
                x = prop;
                lp = lp_ind;
            }
        }
        if (it < n_warmup) {
            log_scale += (acc_prob - target_acceptance) / std::pow(it + 1.0, 0.6);
            if (it >= adapt_start)
                warm.row(it - adapt_start) = x.transpose();
            for (int w_end : window_ends) {
                const int rows = w_end - adapt_start;
                if (it + 1 == w_end && rows > 2 * q + 2) {
                    const MatrixXd cov = regularised_cov(warm.topRows(rows));
                    Eigen::LLT<MatrixXd> llt(cov);
                    if (llt.info() == Eigen::Success) {
                        L = llt.matrixL();
                        log_scale = base_log_scale;
                        if (w_end == window_ends[1]) {
                            t_mean = warm.topRows(rows).colwise().mean().transpose();
                            t_chol = 1.2 * L;
                            have_indep = true;
                        }
                    }
                }
            }
        } else {
            out.draws.row(it - n_warmup) = x.transpose();
            accepted += accept ? 1 : 0;
        }
    }
    out.acceptance_rate = n_kept > 0 ? static_cast<double>(accepted) / n_kept : 0.0;
    if (n_kept > 0 && accepted == 0)
        throw NumericalError("random-walk sampler accepted no proposals after warmup");
    return out;
}

Expansion finite_difference_expansion(const LogDensity& f, const VectorXd& p, double h)
{
    const Index q = p.size();
    Expansion e{f(p), VectorXd(q), MatrixXd(q, q)};
    VectorXd y = p;
    for (Index i = 0; i < q; ++i) {
        y(i) = p(i) + h;
        const double fpi = f(y);
        y(i) = p(i) - h;
        const double fmi = f(y);
        y(i) = p(i);
        e.gradient(i) = (fpi - fmi) / (2 * h);
        e.hessian(i, i) = (fpi - 2 * e.value + fmi) / (h * h);
        for (Index j = 0; j < i; ++j) {
            y(i) += h;
            y(j) += h;
            const double fpp = f(y);
            y(j) -= 2 * h;
            const double fpm = f(y);
            y(i) -= 2 * h;
            const double fmm = f(y);
            y(j) += 2 * h;
            const double fmp = f(y);
            y(i) = p(i);
            y(j) = p(j);
            e.hessian(i, j) = e.hessian(j, i) = (fpp - fpm - fmp + fmm) / (4 * h * h);
        }
    }
    return e;
}

LaplaceFit laplace_approximation(const LogDensity& f, const VectorXd& start)
{
    const Index q = start.size();
    VectorXd x = start;
    double fx = f(x);
    if (!std::isfinite(fx))
        throw NumericalError("log density is not finite at the optimiser start");
    auto grad_hess = [&](const VectorXd& p, double, VectorXd& g, MatrixXd& H) {
        auto e = finite_difference_expansion(f, p);
        g = std::move(e.gradient);
        H = std::move(e.hessian);
    };
    VectorXd g;
    MatrixXd H;
    for (int iter = 0; iter < 100; ++iter) {
        grad_hess(x, fx, g, H);
        Eigen::LLT<MatrixXd> llt(-H);
        VectorXd step = llt.info() == Eigen::Success ? VectorXd(llt.solve(g)) : VectorXd(g * 1e-2);
        double t = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
            const VectorXd cand = x + t * step;
            const double fc = f(cand);
            if (std::isfinite(fc) && fc >= fx) {
                moved = fc > fx;
                x = cand;
                fx = fc;
                break;
            }
        }
        if (!moved || (t * step).norm() < 1e-8 * (1.0 + x.norm()))
            break;
    }
    grad_hess(x, fx, g, H);
    Eigen::LLT<MatrixXd> llt(-H);
    LaplaceFit fit;
    fit.mode = x;
    if (llt.info() == Eigen::Success)
        fit.covariance = llt.solve(MatrixXd::Identity(q, q));
    else
        fit.covariance = MatrixXd::Identity(q, q);
    return fit;
}

// ---------------------------------------------------------------------------

namespace {

ChainOutput run_once(const PowerPriorTarget& target, const ChainConfig& cfg, int attempt)
{
    const auto& model = target.model;
    ChainOutput out;
    const int m = cfg.n_chains;
    out.draws.resize(m);
    out.log_likelihood.resize(m);
    out.acceptance_rate.assign(m, 1.0);
    out.attempts = attempt + 1;

    if (model.is_conjugate()) {
        out.exact = true;
        parallel_for(static_cast<std::size_t>(m), [&](std::size_t c) {
            Rng rng = make_stream(cfg.seed, c, attempt);
            out.draws[c] = conjugate::exact_conditional_sample(model, target.historical, target.a0, target.current,
                                                               rng, cfg.n_kept());
        });
    } else {
        auto log_density = [&](const VectorXd& u) { return log_power_density_unconstrained(target, u); };
        const auto fit = laplace_approximation(log_density, VectorXd::Zero(model.dim()));
        const MatrixXd L = chol_or_throw(fit.covariance).matrixL();
        parallel_for(static_cast<std::size_t>(m), [&](std::size_t c) {
            Rng rng = make_stream(cfg.seed, c, attempt);
            VectorXd z(model.dim());
            for (Index k = 0; k < z.size(); ++k)
                z(k) = std_normal(rng);
            const VectorXd init = fit.mode + L * z;
            const auto chain =
                adaptive_rwm(log_density, init, fit.covariance, cfg.n_iter, cfg.n_warmup, cfg.target_acceptance, rng);
            MatrixXd draws(chain.draws.rows(), chain.draws.cols());
            for (Index i = 0; i < draws.rows(); ++i)
                draws.row(i) =
                    to_constrained(model, {chain.draws.row(i).transpose(), Space::Unconstrained}).theta.values.transpose();
            out.draws[c] = std::move(draws);
            out.acceptance_rate[c] = chain.acceptance_rate;
        });
    }
    for (int c = 0; c < m; ++c) {
        VectorXd ll(out.draws[c].rows());
        for (Index i = 0; i < ll.size(); ++i)
            ll(i) = log_likelihood_unchecked(model, target.historical, out.draws[c].row(i).transpose());
        out.log_likelihood[c] = std::move(ll);
    }
    out.gate_passed = compute_diagnostics(out).passes_gate();
    return out;
}

} // namespace

ChainOutput sample_power_posterior(const PowerPriorTarget& target, const ChainConfig& cfg)
{
    cfg.validate();
    if (!(target.a0 >= 0.0) || !std::isfinite(target.a0))
        throw DomainError("a0 must be a finite non-negative number");
    check_compatible(target.model, target.historical);
    if (target.current)
        check_compatible(target.model, *target.current);
    auto out = run_once(target, cfg, 0);
    if (out.gate_passed)
        return out;
    ChainConfig longer = cfg;
    longer.n_iter *= 4;
    longer.n_warmup *= 4;
    return run_once(target, longer, 1);
}

} // namespace powerprior::mcmc
