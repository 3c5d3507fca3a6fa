#include <powerprior/posterior.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include <powerprior/conjugate.hpp>
#include <powerprior/errors.hpp>
#include <powerprior/parallel.hpp>

namespace powerprior::posterior {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double finite_or_neginf(double v) { return std::isnan(v) ? kNegInf : v; }
} // namespace

std::string_view normalisation_name(Normalisation n)
{
    switch (n) {
    case Normalisation::None:
        return "none";
    case Normalisation::Exact:
        return "exact";
    case Normalisation::Dictionary:
        return "dictionary";
    }
    return "none";
}

Normalisation parse_normalisation(std::string_view s)
{
    if (s == "none")
        return Normalisation::None;
    if (s == "exact")
        return Normalisation::Exact;
    if (s == "dictionary")
        return Normalisation::Dictionary;
    throw ConfigError("unknown normalisation '" + std::string(s) + "' (expected none, exact or dictionary)");
}

MatrixXd JointDraws::pooled() const
{
    const Index n = draws.front().rows();
    MatrixXd all(n * static_cast<Index>(draws.size()), draws.front().cols());
    for (std::size_t c = 0; c < draws.size(); ++c)
        all.middleRows(static_cast<Index>(c) * n, n) = draws[c];
    return all;
}

VectorXd JointDraws::pooled_a0() const
{
    return pooled().rightCols(1);
}

// ---------------------------------------------------------------------------

namespace {

struct ChainResult {
    MatrixXd draws;
    double a0_acceptance = 0.0;
};

// Gaussian approximation of theta | a0 built from second-order expansions of
// the historical log-likelihood and of the remaining terms at one point.
struct ConditionalApprox {
    VectorXd ref, g_hist, g_base;
    MatrixXd H_hist, H_base; // negative Hessians, clipped to be positive semi-definite
    bool ok = false;

    struct At {
        VectorXd mean;
        MatrixXd R; // precision = R R'
        double log_det_R = 0.0;
        bool ok = false;
    };

    At at(double a0) const
    {
        At r;
        if (!ok)
            return r;
        Eigen::LLT<MatrixXd> llt(a0 * H_hist + H_base);
        if (llt.info() != Eigen::Success)
            return r;
        r.R = llt.matrixL();
        r.mean = ref + llt.solve(a0 * g_hist + g_base);
        r.log_det_R = r.R.diagonal().array().log().sum();
        r.ok = r.mean.allFinite() && std::isfinite(r.log_det_R);
        return r;
    }
    // theta with standardised coordinates xi under the approximation at a0
    static VectorXd from_std(const At& at, const VectorXd& xi)
    {
        return at.mean + at.R.transpose().triangularView<Eigen::Upper>().solve(xi);
    }
    static VectorXd to_std(const At& at, const VectorXd& u) { return at.R.transpose() * (u - at.mean); }
};

MatrixXd clip_psd(const MatrixXd& H, double floor)
{
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (H + H.transpose()));
    const VectorXd ev = es.eigenvalues().cwiseMax(floor);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

ConditionalApprox build_approx(const JointProblem& pb, const VectorXd& ref)
{
    ConditionalApprox ap;
    if (!pb.log_base || ref.size() != pb.dim || !ref.allFinite())
        return ap;
    const auto eh = mcmc::finite_difference_expansion(pb.log_hist, ref);
    const auto eb = mcmc::finite_difference_expansion(pb.log_base, ref);
    if (!std::isfinite(eh.value) || !std::isfinite(eb.value) || !eh.hessian.allFinite() || !eb.hessian.allFinite()
        || !eh.gradient.allFinite() || !eb.gradient.allFinite())
        return ap;
    ap.ref = ref;
    ap.g_hist = eh.gradient;
    ap.g_base = eb.gradient;
    ap.H_hist = clip_psd(-eh.hessian, 0.0);
    const double scale = std::max(1.0, (-eb.hessian).diagonal().cwiseAbs().maxCoeff());
    ap.H_base = clip_psd(-eb.hessian, 1e-8 * scale);
    ap.ok = true;
    return ap;
}

ChainResult run_chain(const JointProblem& pb, const ConditionalApprox& approx, const JointConfig& cfg, int n_iter,
                      int n_warmup, Rng& rng)
{
    const Index q = pb.dim;
    const double M = pb.a0_prior.M;
    const bool exact = static_cast<bool>(pb.exact_theta);
    const bool use_approx = approx.ok;

    // log target of a0 given theta, on the logit scale (Jacobian of a0 = M * logistic(eta))
    auto log_a0_part = [&](double a0, double hist) {
        if (!(a0 > 0.0 && a0 < M))
            return kNegInf;
        return finite_or_neginf(a0 * hist - pb.log_c(a0) + pb.a0_prior.log_density(a0) + std::log(a0)
                                + std::log1p(-a0 / M));
    };
    auto eta_of = [M](double a0) { return std::log(a0 / M) - std::log1p(-a0 / M); };
    auto a0_of = [M](double eta) { return M / (1.0 + std::exp(-eta)); };
    auto normals = [&](VectorXd& z) {
        for (Index k = 0; k < z.size(); ++k)
            z(k) = std_normal(rng);
    };

    double a0 = pb.a0_prior.quantile(0.05 + 0.9 * uniform01(rng));
    a0 = std::clamp(a0, 1e-6 * M, (1.0 - 1e-6) * M);
    VectorXd u;
    MatrixXd L;
    VectorXd z(q);
    if (exact) {
        u = pb.exact_theta(a0, rng);
    } else {
        Eigen::LLT<MatrixXd> llt(pb.init_cov);
        if (llt.info() != Eigen::Success)
            throw NumericalError("initial theta covariance is not positive definite");
        L = llt.matrixL();
        normals(z);
        u = pb.init_mean + L * z;
    }
    double hist = finite_or_neginf(pb.log_hist(u));
    double base = pb.log_base ? finite_or_neginf(pb.log_base(u)) : 0.0;
    if (!std::isfinite(hist) || !std::isfinite(base))
        throw NumericalError("joint target is not finite at the initial state");

    const double base_log_scale = std::log(2.38 / std::sqrt(static_cast<double>(q)));
    double theta_log_scale = base_log_scale;
    double a0_log_scale = 0.0;
    double move_log_scale = 0.0;
    const int adapt_start = n_warmup / 4;
    const int window_ends[] = {n_warmup / 2, (3 * n_warmup) / 4};
    MatrixXd warm(std::max(n_warmup - adapt_start, 0), q);
    constexpr double nu = 7.0;

    ChainResult out;
    out.draws.resize(n_iter - n_warmup, q + 1);
    long a0_acc = 0;
    for (int it = 0; it < n_iter; ++it) {
        const bool warmup = it < n_warmup;
        const double rate = 1.0 / std::pow(it + 1.0, 0.6);

        // theta | a0
        if (exact) {
            u = pb.exact_theta(a0, rng);
            hist = finite_or_neginf(pb.log_hist(u));
            if (pb.log_base)
                base = finite_or_neginf(pb.log_base(u));
        } else {
            const auto at = use_approx ? approx.at(a0) : ConditionalApprox::At{};
            normals(z);
            const VectorXd step = at.ok ? VectorXd(at.R.transpose().triangularView<Eigen::Upper>().solve(z))
                                        : VectorXd(L * z);
            const VectorXd prop = u + std::exp(theta_log_scale) * step;
            const double hist_p = finite_or_neginf(pb.log_hist(prop));
            const double base_p = finite_or_neginf(pb.log_base(prop));
            const double log_ratio = a0 * (hist_p - hist) + (base_p - base);
            const bool finite = std::isfinite(hist_p) && std::isfinite(base_p);
            const double acc_prob = finite ? std::min(1.0, std::exp(log_ratio)) : 0.0;
            if (finite && std::log(uniform01(rng)) < log_ratio) {
                u = prop;
                hist = hist_p;
                base = base_p;
            }
            if (at.ok) {
                // multivariate-t independence step around the conditional approximation
                auto log_q = [&](const VectorXd& v) {
                    return -0.5 * (nu + q) * std::log1p(ConditionalApprox::to_std(at, v).squaredNorm() / (1.44 * nu));
                };
                normals(z);
                const double w = gamma_rate(rng, 0.5 * nu, 0.5) / nu;
                const VectorXd ind = ConditionalApprox::from_std(at, 1.2 * z / std::sqrt(w));
                const double hist_i = finite_or_neginf(pb.log_hist(ind));
                const double base_i = finite_or_neginf(pb.log_base(ind));
                if (std::isfinite(hist_i) && std::isfinite(base_i)
                    && std::log(uniform01(rng)) < a0 * (hist_i - hist) + (base_i - base) + log_q(u) - log_q(ind)) {
                    u = ind;
                    hist = hist_i;
                    base = base_i;
                }
            }
            if (warmup) {
                theta_log_scale += (acc_prob - 0.234) * rate;
                if (it >= adapt_start)
                    warm.row(it - adapt_start) = u.transpose();
                for (int w_end : window_ends) {
                    const int rows = w_end - adapt_start;
                    if (!use_approx && it + 1 == w_end && rows > 2 * q + 2) {
                        const MatrixXd s = warm.topRows(rows);
                        const VectorXd mean = s.colwise().mean();
                        const MatrixXd c = s.rowwise() - mean.transpose();
                        MatrixXd cov = c.transpose() * c / static_cast<double>(rows - 1);
                        const double wgt = rows / (rows + 5.0);
                        cov = wgt * cov;
                        cov.diagonal().array() += (1.0 - wgt) * 1e-3 * std::max(cov.diagonal().mean(), 1e-300);
                        Eigen::LLT<MatrixXd> llt(cov);
                        if (llt.info() == Eigen::Success) {
                            L = llt.matrixL();
                            theta_log_scale = base_log_scale;
                        }
                    }
                }
            }
        }

        // a0 | theta
        {
            const double cur = log_a0_part(a0, hist);
            const double a0_p = a0_of(eta_of(a0) + std::exp(a0_log_scale) * std_normal(rng));
            const double prop = log_a0_part(a0_p, hist);
            const double acc_prob = std::isfinite(prop) ? std::min(1.0, std::exp(prop - cur)) : 0.0;
            const bool accept = std::isfinite(prop) && std::log(uniform01(rng)) < prop - cur;
            if (accept)
                a0 = a0_p;
            if (warmup)
                a0_log_scale += (acc_prob - cfg.a0_target_acceptance) * rate;
            else
                a0_acc += accept ? 1 : 0;
        }

        // joint move: new a0, theta carried along by the conditional approximation
        if (use_approx && pb.log_base) {
            const auto at = approx.at(a0);
            const double a0_p = a0_of(eta_of(a0) + std::exp(move_log_scale) * std_normal(rng));
            const auto at_p = approx.at(a0_p);
            double acc_prob = 0.0;
            if (at.ok && at_p.ok) {
                const VectorXd u_p = ConditionalApprox::from_std(at_p, ConditionalApprox::to_std(at, u));
                const double hist_p = finite_or_neginf(pb.log_hist(u_p));
                const double base_p = finite_or_neginf(pb.log_base(u_p));
                const double log_ratio = log_a0_part(a0_p, hist_p) + base_p - log_a0_part(a0, hist) - base
                                         + at.log_det_R - at_p.log_det_R;
                if (std::isfinite(log_ratio)) {
                    acc_prob = std::min(1.0, std::exp(log_ratio));
                    if (std::log(uniform01(rng)) < log_ratio) {
                        a0 = a0_p;
                        u = u_p;
                        hist = hist_p;
                        base = base_p;
                    }
                }
            }
            if (warmup)
                move_log_scale += (acc_prob - 0.3) * rate;
        }

        if (!warmup) {
            out.draws.row(it - n_warmup).head(q) = pb.to_output(u).transpose();
            out.draws(it - n_warmup, q) = a0;
        }
    }
    out.a0_acceptance = static_cast<double>(a0_acc) / std::max(1, n_iter - n_warmup);
    return out;
}

// Reference point of the conditional approximation.
VectorXd approx_reference(const JointProblem& pb, const JointConfig& cfg)
{
    if (!pb.exact_theta)
        return pb.init_mean;
    Rng rng = make_stream(cfg.chains.seed, 0x7e4e7e);
    const double a0 = pb.a0_prior.mean();
    VectorXd mean = VectorXd::Zero(pb.dim);
    constexpr int n = 256;
    for (int i = 0; i < n; ++i)
        mean += pb.exact_theta(a0, rng) / n;
    return mean;
}

JointDraws run_joint(const JointProblem& pb, const ConditionalApprox& approx, const JointConfig& cfg, int attempt)
{
    const auto& cc = cfg.chains;
    const int n_iter = attempt == 0 ? cc.n_iter : 4 * cc.n_iter;
    const int n_warmup = attempt == 0 ? cc.n_warmup : 4 * cc.n_warmup;
    JointDraws out;
    out.names = pb.names;
    out.names.push_back("a0");
    out.draws.resize(static_cast<std::size_t>(cc.n_chains));
    out.a0_acceptance.assign(static_cast<std::size_t>(cc.n_chains), 0.0);
    out.attempts = attempt + 1;
    parallel_for(static_cast<std::size_t>(cc.n_chains), [&](std::size_t c) {
        Rng rng = make_stream(cc.seed, c, 0x6a0000 + attempt);
        auto r = run_chain(pb, approx, cfg, n_iter, n_warmup, rng);
        out.draws[c] = std::move(r.draws);
        out.a0_acceptance[c] = r.a0_acceptance;
    });
    out.diagnostics = mcmc::compute_diagnostics(out.draws);
    out.gate_passed = out.diagnostics.passes_gate();
    return out;
}

} // namespace

JointDraws sample_joint_problem(const JointProblem& pb, const JointConfig& cfg)
{
    cfg.chains.validate();
    if (!(cfg.a0_target_acceptance > 0.0 && cfg.a0_target_acceptance < 1.0))
        throw ConfigError("a0 target acceptance must lie in (0, 1)");
    if (!pb.log_hist || !pb.to_output || !pb.log_c || (!pb.exact_theta && !pb.log_base))
        throw ConfigError("joint problem is missing components");
    const auto approx = build_approx(pb, approx_reference(pb, cfg));
    auto out = run_joint(pb, approx, cfg, 0);
    if (out.gate_passed)
        return out;
    return run_joint(pb, approx, cfg, 1);
}

JointDraws sample_joint(const ModelSpec& model, const Dataset& D0, const Dataset& D, const A0Prior& a0_prior,
                        Normalisation normalisation, const curvefit::Dictionary* dictionary, const JointConfig& cfg)
{
    check_compatible(model, D0);
    check_compatible(model, D);
    JointProblem pb;
    pb.dim = model.dim();
    pb.names = model.parameter_names();
    pb.a0_prior = a0_prior;

    auto theta_of = [model](const VectorXd& u) { return to_constrained(model, {u, Space::Unconstrained}); };
    pb.log_hist = [model, D0, theta_of](const VectorXd& u) {
        return log_likelihood_unchecked(model, D0, theta_of(u).theta.values);
    };
    pb.log_base = [model, D, theta_of](const VectorXd& u) {
        const auto cp = theta_of(u);
        return log_likelihood_unchecked(model, D, cp.theta.values) + log_prior_unchecked(model, cp.theta.values)
               + cp.log_jacobian;
    };
    pb.to_output = [theta_of](const VectorXd& u) { return theta_of(u).theta.values; };

    switch (normalisation) {
    case Normalisation::None:
        pb.log_c = [](double) { return 0.0; };
        break;
    case Normalisation::Exact:
        if (!model.is_conjugate())
            throw ConfigError("exact normalisation needs a conjugate family; use a dictionary instead");
        pb.log_c = [model, D0](double a0) { return conjugate::log_c(model, D0, a0); };
        break;
    case Normalisation::Dictionary:
        if (!dictionary)
            throw ConfigError("dictionary normalisation requested without a dictionary");
        if (dictionary->min() > 0.0 || dictionary->max() < a0_prior.M)
            throw OutOfRangeError("dictionary does not cover [0, M] of the a0 prior");
        pb.log_c = [dict = *dictionary](double a0) { return curvefit::lookup_l(dict, a0); };
        break;
    }

    if (model.is_conjugate()) {
        pb.exact_theta = [model, D0, D](double a0, Rng& rng) {
            const MatrixXd th = conjugate::exact_conditional_sample(model, D0, a0, D, rng, 1);
            return to_unconstrained(model, {th.row(0).transpose(), Space::Constrained}).values;
        };
    } else {
        // Laplace approximation of the power posterior at the prior mean of a0.
        const PowerPriorTarget target{model, D0, a0_prior.mean(), D};
        const auto fit = mcmc::laplace_approximation(
            [&](const VectorXd& u) { return log_power_density_unconstrained(target, u); }, VectorXd::Zero(model.dim()));
        pb.init_mean = fit.mode;
        pb.init_cov = fit.covariance;
    }
    auto out = sample_joint_problem(pb, cfg);
    out.normalisation = normalisation;
    if (dictionary && normalisation == Normalisation::Dictionary)
        out.dictionary_id = dictionary->id;
    return out;
}

quad::NormalisedDensity exact_marginal_a0(const ModelSpec& model, const Dataset& D0, const Dataset& D,
                                          const A0Prior& a0_prior, int K_quad)
{
    if (!model.is_conjugate())
        throw ConfigError("exact a0 marginal needs a conjugate family");
    return quad::normalise_density_on_interval(
        [&](double a0) { return conjugate::log_marginal_a0(model, D0, D, a0, a0_prior); }, 0.0, a0_prior.M, K_quad);
}

// ---------------------------------------------------------------------------

double quantile(std::vector<double> x, double p)
{
    if (x.empty())
        throw DomainError("quantile of an empty sample");
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

std::vector<ParamSummary> summarise_columns(const std::vector<MatrixXd>& chains, const std::vector<std::string>& names)
{
    const auto diag = mcmc::compute_diagnostics(chains);
    std::vector<ParamSummary> out;
    for (Index k = 0; k < chains.front().cols(); ++k) {
        std::vector<double> col;
        for (const auto& c : chains)
            for (Index i = 0; i < c.rows(); ++i)
                col.push_back(c(i, k));
        ParamSummary s;
        s.name = static_cast<std::size_t>(k) < names.size() ? names[static_cast<std::size_t>(k)] : "p" + std::to_string(k);
        s.mean = diag.mean(k);
        s.sd = diag.sd(k);
        s.lower = quantile(col, 0.025);
        s.upper = quantile(col, 0.975);
        s.rhat = diag.rhat(k);
        s.ess = diag.ess(k);
        out.push_back(s);
    }
    return out;
}

std::vector<ParamSummary> summarise(const JointDraws& draws)
{
    return summarise_columns(draws.draws, draws.names);
}

double ks_distance(std::vector<double> draws, const quad::NormalisedDensity& reference)
{
    if (draws.empty())
        throw DomainError("no draws for the KS distance");
    std::sort(draws.begin(), draws.end());
    const double n = static_cast<double>(draws.size());
    double d = 0.0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const double F = reference.cdf_at(draws[i]);
        d = std::max({d, std::abs(F - i / n), std::abs(F - (i + 1) / n)});
    }
    return d;
}

SensitivityResult sensitivity_analysis(const ModelSpec& model, const Dataset& D0, const Dataset& D,
                                       const std::vector<double>& a0_list, const mcmc::ChainConfig& cfg)
{
    if (a0_list.empty())
        throw ConfigError("sensitivity analysis needs at least one a0 value");
    for (std::size_t i = 0; i < a0_list.size(); ++i) {
        if (!(a0_list[i] >= 0.0) || !std::isfinite(a0_list[i]))
            throw ConfigError("a0 values must be finite and non-negative");
        if (i > 0 && !(a0_list[i] > a0_list[i - 1]))
            throw ConfigError("a0 values must be strictly increasing");
    }
    SensitivityResult res;
    const auto names = model.parameter_names();
    for (std::size_t i = 0; i < a0_list.size(); ++i) {
        mcmc::ChainConfig c = cfg;
        c.seed = cfg.seed + 7919 * (i + 1);
        const auto prior = mcmc::sample_power_posterior({model, D0, a0_list[i], std::nullopt}, c);
        const auto post = mcmc::sample_power_posterior({model, D0, a0_list[i], D}, c);
        SensitivityRow row;
        row.a0 = a0_list[i];
        row.prior = summarise_columns(prior.draws, names);
        row.posterior = summarise_columns(post.draws, names);
        row.gate_passed = prior.gate_passed && post.gate_passed;
        res.rows.push_back(std::move(row));
    }
    return res;
}

} // namespace powerprior::posterior
