#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <powerprior/a0_prior.hpp>
#include <powerprior/bridge.hpp>
#include <powerprior/mcmc.hpp>

// Budgeted construction of the a0 grid on which l(a0) is estimated.
namespace powerprior::grid {

struct GridBudget {
    int J = 20;
    double m = 0.05;
    double M = 1.0;
    double v1 = 10.0;
    double v2 = 10.0;

    void validate() const;
};

struct EvalPoint {
    double l = 0.0;
    double l_prime = 0.0;
    double l_se = 0.0;
    double l_prime_se = 0.0;
    bool gate_passed = true;
};

enum class Backend { ClosedForm, BridgeMcmc, Custom };
std::string_view backend_name(Backend b);

// Wraps a0 -> EvalPoint and counts calls (copies share the counter).
class Evaluator {
public:
    using Fn = std::function<EvalPoint(double)>;
    Evaluator(Fn fn, Backend backend);

    EvalPoint operator()(double a0) const;
    Backend backend() const { return backend_; }
    int calls() const { return calls_->load(); }

private:
    Fn fn_;
    Backend backend_;
    std::shared_ptr<std::atomic<int>> calls_;
};

Evaluator closed_form_evaluator(const ModelSpec& model, const Dataset& D0);
// Power-posterior sampling plus bridge sampling; l' is the mean historical
// log-likelihood. Each a0 gets its own random stream derived from the seed
// and the bits of a0, so results do not depend on evaluation order.
Evaluator bridge_evaluator(const ModelSpec& model, const Dataset& D0, const mcmc::ChainConfig& chains,
                           const bridge::BridgeConfig& bridge_cfg = {});

enum class GridMode { Bisection, Uniform };
enum class Phase { Free, Endpoint, Uniform, Bisection, GapFill };
std::string_view mode_name(GridMode m);
std::string_view phase_name(Phase p);

struct GridResult {
    std::vector<double> z; // strictly increasing, z[0] = 0
    std::vector<double> l;
    std::vector<double> l_prime; // NaN at a0 = 0
    std::vector<double> l_se;
    std::vector<double> l_prime_se;
    std::vector<Phase> phase;
    GridMode mode = GridMode::Uniform;
    int evaluations = 0;
    int gate_failures = 0;
    double M = 1.0;

    std::size_t size() const { return z.size(); }
};

// p-quantile of the a0 prior.
double choose_M_from_prior(const A0Prior& prior, double p);
// Discrete likelihoods give a decreasing c(a0).
bool is_monotone_family(const ModelSpec& model);

// Bisection towards the sign change of l', then gap filling near it, using
// exactly J evaluator calls. Falls back to an evenly spaced grid when l' has
// the same (or an undetermined) sign at both ends or monotone_hint is set.
GridResult build_adaptive_grid(const Evaluator& eval, const GridBudget& budget, bool monotone_hint);
// J evenly spaced evaluations on [m, M].
GridResult build_uniform_grid(const Evaluator& eval, const GridBudget& budget);

} // namespace powerprior::grid
