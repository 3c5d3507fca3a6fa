#include <powerprior/grid.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include <powerprior/conjugate.hpp>
#include <powerprior/errors.hpp>
#include <powerprior/parallel.hpp>

namespace powerprior::grid {

void GridBudget::validate() const
{
    if (J < 3)
        throw ConfigError("grid budget J must be at least 3");
    if (!(m > 0.0) || !(m < M) || !std::isfinite(M))
        throw ConfigError("grid endpoints must satisfy 0 < m < M");
    if (!(v1 > 0.0) || !(v2 > 0.0))
        throw ConfigError("grid constants v1 and v2 must be positive");
}

std::string_view backend_name(Backend b)
{
    switch (b) {
    case Backend::ClosedForm:
        return "closed_form";
    case Backend::BridgeMcmc:
        return "bridge_mcmc";
    case Backend::Custom:
        return "custom";
    }
    return "custom";
}

std::string_view mode_name(GridMode m)
{
    return m == GridMode::Bisection ? "bisection" : "uniform";
}

std::string_view phase_name(Phase p)
{
    switch (p) {
    case Phase::Free:
        return "free";
    case Phase::Endpoint:
        return "endpoint";
    case Phase::Uniform:
        return "uniform";
    case Phase::Bisection:
        return "bisection";
    case Phase::GapFill:
        return "gap_fill";
    }
    return "free";
}

Evaluator::Evaluator(Fn fn, Backend backend)
    : fn_(std::move(fn)), backend_(backend), calls_(std::make_shared<std::atomic<int>>(0))
{
}

EvalPoint Evaluator::operator()(double a0) const
{
    ++*calls_;
    return fn_(a0);
}

Evaluator closed_form_evaluator(const ModelSpec& model, const Dataset& D0)
{
    if (!model.is_conjugate())
        throw ConfigError("closed-form constants are only available for conjugate families");
    return Evaluator(
        [model, D0](double a0) {
            EvalPoint p;
            p.l = conjugate::log_c(model, D0, a0);
            p.l_prime = conjugate::log_c_prime(model, D0, a0);
            return p;
        },
        Backend::ClosedForm);
}

namespace {

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t a0_seed(std::uint64_t seed, double a0)
{
    std::uint64_t bits = 0;
    std::memcpy(&bits, &a0, sizeof bits);
    return splitmix(seed ^ splitmix(bits));
}

} // namespace

Evaluator bridge_evaluator(const ModelSpec& model, const Dataset& D0, const mcmc::ChainConfig& chains,
                           const bridge::BridgeConfig& bridge_cfg)
{
    chains.validate();
    return Evaluator(
        [model, D0, chains, bridge_cfg](double a0) {
            mcmc::ChainConfig cfg = chains;
            cfg.seed = a0_seed(chains.seed, a0);
            const PowerPriorTarget target{model, D0, a0, std::nullopt};
            const auto draws = mcmc::sample_power_posterior(target, cfg);
            Rng rng = make_stream(cfg.seed, 0xb71d9e);
            const auto est = bridge::bridge_log_c(target, draws, bridge_cfg, rng);
            const auto lp = mcmc::estimate_l_prime(draws);
            EvalPoint p;
            p.l = est.log_c;
            p.l_se = est.rel_mcse;
            p.l_prime = lp.value;
            p.l_prime_se = lp.mcse;
            p.gate_passed = draws.gate_passed;
            return p;
        },
        Backend::BridgeMcmc);
}

double choose_M_from_prior(const A0Prior& prior, double p)
{
    if (!(p > 0.0 && p < 1.0))
        throw ConfigError("prior probability for the grid endpoint must lie in (0, 1)");
    return prior.quantile(p);
}

bool is_monotone_family(const ModelSpec& model)
{
    switch (model.family()) {
    case Family::BetaBernoulli:
    case Family::GammaPoisson:
    case Family::LogisticRegression:
        return true;
    default:
        return false;
    }
}

namespace {

struct Builder {
    const Evaluator& eval;
    int budget;
    std::vector<double> z{0.0};
    std::vector<EvalPoint> pts{EvalPoint{0.0, std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0, true}};
    std::vector<Phase> phase{Phase::Free};

    void add(double a0, const EvalPoint& p, Phase ph)
    {
        z.push_back(a0);
        pts.push_back(p);
        phase.push_back(ph);
        --budget;
    }

    EvalPoint eval_one(double a0, Phase ph)
    {
        const auto p = eval(a0);
        add(a0, p, ph);
        return p;
    }

    void eval_many(const std::vector<double>& a0s, Phase ph)
    {
        std::vector<EvalPoint> res(a0s.size());
        parallel_for(a0s.size(), [&](std::size_t i) { res[i] = eval(a0s[i]); });
        for (std::size_t i = 0; i < a0s.size(); ++i)
            add(a0s[i], res[i], ph);
    }

    GridResult finish(GridMode mode, double M) const
    {
        std::vector<std::size_t> idx(z.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
        GridResult r;
        r.mode = mode;
        r.M = M;
        for (std::size_t i : idx) {
            if (!r.z.empty() && !(z[i] > r.z.back()))
                throw NumericalError("grid produced a repeated a0 value");
            r.z.push_back(z[i]);
            r.l.push_back(pts[i].l);
            r.l_prime.push_back(i == 0 ? std::numeric_limits<double>::quiet_NaN() : pts[i].l_prime);
            r.l_se.push_back(pts[i].l_se);
            r.l_prime_se.push_back(pts[i].l_prime_se);
            r.phase.push_back(phase[i]);
            if (!pts[i].gate_passed)
                ++r.gate_failures;
        }
        r.evaluations = static_cast<int>(z.size()) - 1;
        return r;
    }
};

int determined_sign(const EvalPoint& p)
{
    if (!(std::abs(p.l_prime) > 3.0 * p.l_prime_se))
        return 0;
    return p.l_prime > 0.0 ? 1 : -1;
}

std::vector<double> interior_points(double m, double M, int J)
{
    std::vector<double> v;
    for (int i = 1; i <= J - 2; ++i)
        v.push_back(m + (M - m) * i / (J - 1));
    return v;
}

} // namespace

GridResult build_uniform_grid(const Evaluator& eval, const GridBudget& budget)
{
    budget.validate();
    Builder b{eval, budget.J};
    std::vector<double> a0s{budget.m};
    for (double x : interior_points(budget.m, budget.M, budget.J))
        a0s.push_back(x);
    a0s.push_back(budget.M);
    b.eval_many(a0s, Phase::Uniform);
    return b.finish(GridMode::Uniform, budget.M);
}

GridResult build_adaptive_grid(const Evaluator& eval, const GridBudget& budget, bool monotone_hint)
{
    budget.validate();
    const double m = budget.m, M = budget.M;
    Builder b{eval, budget.J};
    b.eval_many({m, M}, Phase::Endpoint);
    const int sm = determined_sign(b.pts[1]);
    const int sM = determined_sign(b.pts[2]);

    if (monotone_hint || sm == 0 || sM == 0 || sm == sM) {
        b.eval_many(interior_points(m, M, budget.J), Phase::Uniform);
        return b.finish(GridMode::Uniform, M);
    }

    // Bisection towards the sign change of l'.
    double lo = m, hi = M, z = m;
    while (b.budget > 0) {
        const double delta = 0.5 * (hi - lo);
        z = 0.5 * (lo + hi);
        const auto p = b.eval_one(z, Phase::Bisection);
        const int s = p.l_prime > 0.0 ? 1 : -1;
        if (s == sm)
            lo = z;
        else
            hi = z;
        if (delta < budget.v1 * m)
            break;
    }

    // Fill the widest gaps in a window around the last bisection point.
    const double A = std::max(0.0, z - budget.v2 * m);
    const double B = std::min(z + budget.v2 * m, M);
    while (b.budget > 0) {
        std::vector<double> sorted = b.z;
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> window;
        for (double x : sorted)
            if (x >= A && x <= B)
                window.push_back(x);
        if (window.size() < 2)
            window = sorted;
        double best = -1.0, mid = 0.0;
        for (std::size_t i = 0; i + 1 < window.size(); ++i) {
            const double gap = window[i + 1] - window[i];
            if (gap > best) {
                best = gap;
                mid = 0.5 * (window[i] + window[i + 1]);
            }
        }
        b.eval_one(mid, Phase::GapFill);
    }
    return b.finish(GridMode::Bisection, M);
}

} // namespace powerprior::grid
