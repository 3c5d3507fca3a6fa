#include <powerprior/scenarios.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <boost/math/distributions/poisson.hpp>

#include <powerprior/conjugate.hpp>
#include <powerprior/errors.hpp>

namespace powerprior::scenarios {

namespace pp = powerprior::posterior;

io::FileHeader RunConfig::header(const std::string& command) const
{
    return {hash, seed, command};
}

// ---------------------------------------------------------------------------
// config parsing

namespace {

class Reader {
public:
    explicit Reader(const io::Document& doc) : doc_(doc) {}

    const Json* find(const std::string& ptr) const
    {
        const Json::json_pointer p(ptr);
        return doc_.root.contains(p) ? &doc_.root.at(p) : nullptr;
    }
    bool has(const std::string& ptr) const { return find(ptr) != nullptr; }
    const Json& at(const std::string& ptr) const
    {
        const Json* j = find(ptr);
        if (!j)
            doc_.fail(ptr, "required field is missing");
        return *j;
    }
    double number(const std::string& ptr) const
    {
        const Json& j = at(ptr);
        if (!j.is_number())
            doc_.fail(ptr, "expected a number");
        return j.get<double>();
    }
    double number(const std::string& ptr, double def) const { return has(ptr) ? number(ptr) : def; }
    long long integer(const std::string& ptr) const
    {
        const Json& j = at(ptr);
        if (!j.is_number_integer())
            doc_.fail(ptr, "expected an integer");
        return j.get<long long>();
    }
    long long integer(const std::string& ptr, long long def) const { return has(ptr) ? integer(ptr) : def; }
    std::uint64_t seed(const std::string& ptr) const
    {
        const Json& j = at(ptr);
        if (!j.is_number_unsigned())
            doc_.fail(ptr, "expected a non-negative integer");
        return j.get<std::uint64_t>();
    }
    std::string string(const std::string& ptr, const std::string& def) const
    {
        if (!has(ptr))
            return def;
        const Json& j = at(ptr);
        if (!j.is_string())
            doc_.fail(ptr, "expected a string");
        return j.get<std::string>();
    }
    std::vector<double> numbers(const std::string& ptr) const
    {
        const Json& j = at(ptr);
        if (!j.is_array())
            doc_.fail(ptr, "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < j.size(); ++i)
            out.push_back(number(ptr + "/" + std::to_string(i)));
        return out;
    }
    void object(const std::string& ptr, std::initializer_list<const char*> allowed) const
    {
        const Json& j = at(ptr);
        if (!j.is_object())
            doc_.fail(ptr, "expected an object");
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!ok.count(it.key()))
                doc_.fail(ptr + "/" + it.key(), "unknown field");
    }
    [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const { doc_.fail(ptr, msg); }

    // Runs f, re-raising library ConfigErrors with the line of ptr.
    template <typename F> auto checked(const std::string& ptr, F&& f) const
    {
        try {
            return f();
        } catch (const ConfigError& e) {
            doc_.fail(ptr, e.what());
        } catch (const DomainError& e) {
            doc_.fail(ptr, e.what());
        }
    }

private:
    const io::Document& doc_;
};

VectorXd to_vector(const std::vector<double>& v)
{
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

ModelSpec parse_model(const Reader& r)
{
    const std::string fam = r.string("/model/family", "");
    if (fam.empty())
        r.fail("/model/family", "required field is missing");
    const Family family = r.checked("/model/family", [&] { return parse_family(fam); });
    switch (family) {
    case Family::BetaBernoulli:
        r.object("/model", {"family", "c", "d"});
        return r.checked("/model", [&] { return ModelSpec::beta_bernoulli(r.number("/model/c", 1), r.number("/model/d", 1)); });
    case Family::GammaPoisson:
        r.object("/model", {"family", "alpha0", "beta0"});
        return r.checked("/model",
                         [&] { return ModelSpec::gamma_poisson(r.number("/model/alpha0"), r.number("/model/beta0")); });
    case Family::NormalGamma:
        r.object("/model", {"family", "mu0", "kappa0", "alpha0", "beta0"});
        return r.checked("/model", [&] {
            return ModelSpec::normal_gamma(r.number("/model/mu0"), r.number("/model/kappa0"), r.number("/model/alpha0"),
                                           r.number("/model/beta0"));
        });
    case Family::NIGRegression: {
        r.object("/model", {"family", "mu0", "Lambda0", "Lambda0_diagonal", "alpha0", "gamma0"});
        const VectorXd mu0 = to_vector(r.numbers("/model/mu0"));
        const Index P = mu0.size();
        MatrixXd L0;
        if (r.has("/model/Lambda0")) {
            const Json& rows = r.at("/model/Lambda0");
            if (!rows.is_array() || static_cast<Index>(rows.size()) != P)
                r.fail("/model/Lambda0", "expected a " + std::to_string(P) + " x " + std::to_string(P) + " matrix");
            L0.resize(P, P);
            for (Index i = 0; i < P; ++i) {
                const auto row = r.numbers("/model/Lambda0/" + std::to_string(i));
                if (static_cast<Index>(row.size()) != P)
                    r.fail("/model/Lambda0/" + std::to_string(i), "row has the wrong length");
                for (Index j = 0; j < P; ++j)
                    L0(i, j) = row[static_cast<std::size_t>(j)];
            }
        } else {
            L0 = r.number("/model/Lambda0_diagonal") * MatrixXd::Identity(P, P);
        }
        return r.checked("/model", [&] {
            return ModelSpec::nig_regression(mu0, L0, r.number("/model/alpha0"), r.number("/model/gamma0"));
        });
    }
    case Family::LogisticRegression:
        r.object("/model", {"family", "n_coefficients"});
        return r.checked("/model", [&] { return ModelSpec::logistic_regression(r.integer("/model/n_coefficients")); });
    }
    r.fail("/model/family", "unsupported family");
}

ObservationKind kind_for(Family f)
{
    switch (f) {
    case Family::BetaBernoulli:
    case Family::LogisticRegression:
        return ObservationKind::Binary;
    case Family::GammaPoisson:
        return ObservationKind::Count;
    default:
        return ObservationKind::Real;
    }
}

Dataset parse_dataset(const Reader& r, const std::string& ptr, const ModelSpec& model, std::uint64_t seed,
                      const std::filesystem::path& base_dir)
{
    const Json& j = r.at(ptr);
    if (!j.is_object())
        r.fail(ptr, "expected an object with 'generate', 'path' or inline 'y'");
    Dataset d = [&] {
        if (j.contains("generate"))
            return r.checked(ptr + "/generate", [&] { return generate_dataset(j.at("generate"), seed); });
        if (j.contains("path")) {
            const std::filesystem::path p = base_dir / r.string(ptr + "/path", "");
            return r.checked(ptr + "/path", [&] { return io::load_dataset_csv(p, kind_for(model.family())); });
        }
        const VectorXd y = to_vector(r.numbers(ptr + "/y"));
        std::optional<MatrixXd> X;
        if (j.contains("X")) {
            const Json& rows = r.at(ptr + "/X");
            if (!rows.is_array() || rows.size() != static_cast<std::size_t>(y.size()))
                r.fail(ptr + "/X", "expected one covariate row per observation");
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const auto row = r.numbers(ptr + "/X/" + std::to_string(i));
                if (!X)
                    X = MatrixXd(y.size(), static_cast<Index>(row.size()));
                if (static_cast<Index>(row.size()) != X->cols())
                    r.fail(ptr + "/X/" + std::to_string(i), "ragged covariate rows");
                for (std::size_t k = 0; k < row.size(); ++k)
                    X->operator()(static_cast<Index>(i), static_cast<Index>(k)) = row[k];
            }
        }
        return r.checked(ptr, [&] {
            switch (kind_for(model.family())) {
            case ObservationKind::Binary:
                return Dataset::binary(y, X);
            case ObservationKind::Count:
                return Dataset::counts(y);
            default:
                return Dataset::real(y, X);
            }
        });
    }();
    r.checked(ptr, [&] {
        check_compatible(model, d);
        return 0;
    });
    return d;
}

} // namespace

Dataset generate_dataset(const Json& spec, std::uint64_t default_seed)
{
    auto num = [&](const char* k) {
        if (!spec.contains(k) || !spec.at(k).is_number())
            throw ConfigError(std::string("generator needs numeric '") + k + "'");
        return spec.at(k).get<double>();
    };
    auto vec = [&](const char* k) {
        if (!spec.contains(k) || !spec.at(k).is_array())
            throw ConfigError(std::string("generator needs array '") + k + "'");
        std::vector<double> v;
        for (const auto& x : spec.at(k)) {
            if (!x.is_number())
                throw ConfigError(std::string("generator array '") + k + "' must hold numbers");
            v.push_back(x.get<double>());
        }
        return to_vector(v);
    };
    if (!spec.is_object() || !spec.contains("kind") || !spec.at("kind").is_string())
        throw ConfigError("generator needs a string 'kind'");
    const std::string kind = spec.at("kind");
    const std::uint64_t seed = spec.contains("seed") ? spec.at("seed").get<std::uint64_t>() : default_seed;
    const std::uint64_t stream = spec.contains("stream") ? spec.at("stream").get<std::uint64_t>() : 0;
    Rng rng = make_stream(seed, 0xda7a0000ULL + stream);

    auto count = [&](const char* k) {
        const double v = num(k);
        if (!(v >= 0) || v != std::floor(v))
            throw ConfigError(std::string("generator '") + k + "' must be a non-negative integer");
        return static_cast<Index>(v);
    };
    if (kind == "bernoulli_counts")
        return Dataset::bernoulli_counts(static_cast<long>(count("successes")), static_cast<long>(count("trials")));
    if (kind == "poisson") {
        const Index n = count("n");
        const double lambda = num("lambda");
        if (!(lambda > 0))
            throw ConfigError("poisson generator needs lambda > 0");
        boost::math::poisson_distribution<> pois(lambda);
        VectorXd y(n);
        // inverse-CDF sampling keeps the draws platform independent
        for (Index i = 0; i < n; ++i) {
            const double u = uniform01(rng);
            double k = 0;
            while (boost::math::cdf(pois, k) < u)
                k += 1;
            y(i) = k;
        }
        return Dataset::counts(y);
    }
    if (kind == "normal") {
        const Index n = count("n");
        const double mu = num("mu"), tau = num("tau");
        if (!(tau > 0))
            throw ConfigError("normal generator needs tau > 0");
        VectorXd y(n);
        for (Index i = 0; i < n; ++i)
            y(i) = mu + std_normal(rng) / std::sqrt(tau);
        return Dataset::real(y);
    }
    if (kind == "linear_regression" || kind == "logistic_regression") {
        const Index n = count("n");
        const VectorXd beta = vec("beta");
        MatrixXd X(n, beta.size());
        for (Index i = 0; i < n; ++i)
            for (Index k = 0; k < beta.size(); ++k)
                X(i, k) = std_normal(rng);
        VectorXd y(n);
        if (kind == "linear_regression") {
            const double sd = std::sqrt(num("sigma2"));
            for (Index i = 0; i < n; ++i)
                y(i) = X.row(i).dot(beta) + sd * std_normal(rng);
            return Dataset::real(y, X);
        }
        const double alpha = num("alpha");
        for (Index i = 0; i < n; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-(alpha + X.row(i).dot(beta))));
            y(i) = uniform01(rng) < p ? 1.0 : 0.0;
        }
        return Dataset::binary(y, X);
    }
    throw ConfigError("unknown generator kind '" + kind + "'");
}

RunConfig parse_config(const io::Document& doc_in, std::optional<std::uint64_t> seed_override,
                       const std::filesystem::path& base_dir)
{
    io::Document doc = doc_in;
    Reader r(doc);
    r.object("", {"schema_version", "seed", "model", "historical", "current", "a0_prior", "grid", "backend", "K",
                  "normalisation", "chains", "bridge", "a0_list", "truth", "dictionary_path", "K_sweep", "K_variants",
                  "compare_uniform", "description"});
    const long long version = r.integer("/schema_version");
    if (version != kSchemaVersion)
        r.fail("/schema_version", "unsupported schema version " + std::to_string(version) + " (expected "
                                      + std::to_string(kSchemaVersion) + ")");
    if (seed_override)
        doc.root["seed"] = *seed_override;
    const std::uint64_t seed = r.seed("/seed");

    const ModelSpec model = parse_model(r);
    const Dataset D0 = parse_dataset(r, "/historical", model, seed, base_dir);
    std::optional<Dataset> D;
    if (r.has("/current"))
        D = parse_dataset(r, "/current", model, seed, base_dir);

    grid::GridBudget budget;
    bool uniform = false;
    if (r.has("/grid")) {
        r.object("/grid", {"J", "m", "M", "v1", "v2", "mode"});
        budget.J = static_cast<int>(r.integer("/grid/J", budget.J));
        budget.m = r.number("/grid/m", budget.m);
        budget.M = r.number("/grid/M", budget.M);
        budget.v1 = r.number("/grid/v1", budget.v1);
        budget.v2 = r.number("/grid/v2", budget.v2);
        const std::string mode = r.string("/grid/mode", "adaptive");
        if (mode != "adaptive" && mode != "uniform")
            r.fail("/grid/mode", "expected 'adaptive' or 'uniform'");
        uniform = mode == "uniform";
        r.checked("/grid", [&] {
            budget.validate();
            return 0;
        });
    }

    A0Prior a0_prior = A0Prior::make(1, 1, budget.M);
    if (r.has("/a0_prior")) {
        r.object("/a0_prior", {"eta", "nu", "M"});
        a0_prior = r.checked("/a0_prior", [&] {
            return A0Prior::make(r.number("/a0_prior/eta", 1), r.number("/a0_prior/nu", 1),
                                 r.number("/a0_prior/M", budget.M));
        });
    }

    const std::string backend_s = r.string("/backend", "bridge");
    grid::Backend backend = grid::Backend::BridgeMcmc;
    if (backend_s == "closed_form") {
        if (!model.is_conjugate())
            r.fail("/backend", "closed_form backend needs a conjugate family");
        backend = grid::Backend::ClosedForm;
    } else if (backend_s != "bridge") {
        r.fail("/backend", "expected 'bridge' or 'closed_form'");
    }

    const long long K = r.integer("/K", 20000);
    if (K < 2)
        r.fail("/K", "K must be at least 2");

    const auto norm = r.checked("/normalisation", [&] { return pp::parse_normalisation(r.string("/normalisation", "dictionary")); });
    if (norm == pp::Normalisation::Exact && !model.is_conjugate())
        r.fail("/normalisation", "exact normalisation needs a conjugate family; use 'dictionary'");

    mcmc::ChainConfig chains;
    chains.seed = seed;
    if (r.has("/chains")) {
        r.object("/chains", {"n_chains", "n_iter", "n_warmup", "target_acceptance"});
        chains.n_chains = static_cast<int>(r.integer("/chains/n_chains", chains.n_chains));
        chains.n_iter = static_cast<int>(r.integer("/chains/n_iter", chains.n_iter));
        chains.n_warmup = static_cast<int>(r.integer("/chains/n_warmup", chains.n_warmup));
        chains.target_acceptance = r.number("/chains/target_acceptance", chains.target_acceptance);
        r.checked("/chains", [&] {
            chains.validate();
            return 0;
        });
    }
    bridge::BridgeConfig bcfg;
    if (r.has("/bridge")) {
        r.object("/bridge", {"tol", "max_iter"});
        bcfg.tol = r.number("/bridge/tol", bcfg.tol);
        bcfg.max_iter = static_cast<int>(r.integer("/bridge/max_iter", bcfg.max_iter));
    }

    std::vector<double> a0_list;
    if (r.has("/a0_list")) {
        a0_list = r.numbers("/a0_list");
        for (std::size_t i = 0; i < a0_list.size(); ++i) {
            const std::string p = "/a0_list/" + std::to_string(i);
            if (!(a0_list[i] >= 0.0 && a0_list[i] <= budget.M))
                r.fail(p, "a0 must lie in [0, M]");
            if (i > 0 && !(a0_list[i] > a0_list[i - 1]))
                r.fail(p, "a0 values must be strictly increasing");
        }
    }
    std::optional<VectorXd> truth;
    if (r.has("/truth")) {
        truth = to_vector(r.numbers("/truth"));
        if (truth->size() != model.dim())
            r.fail("/truth", "expected " + std::to_string(model.dim()) + " values");
    }
    std::optional<std::filesystem::path> dict_path;
    if (r.has("/dictionary_path"))
        dict_path = base_dir / r.string("/dictionary_path", "");

    Json extras = Json::object();
    for (const char* k : {"K_sweep", "K_variants"})
        if (r.has(std::string("/") + k)) {
            const auto v = r.numbers(std::string("/") + k);
            for (std::size_t i = 0; i < v.size(); ++i)
                if (v[i] < 2 || v[i] != std::floor(v[i]))
                    r.fail(std::string("/") + k + "/" + std::to_string(i), "grid sizes must be integers >= 2");
            extras[k] = v;
        }
    if (r.has("/compare_uniform")) {
        if (!r.at("/compare_uniform").is_boolean())
            r.fail("/compare_uniform", "expected true or false");
        extras["compare_uniform"] = r.at("/compare_uniform").get<bool>();
    }

    RunConfig cfg{doc.root, io::config_hash(doc.root), doc.source, seed, model, D0, D, a0_prior, budget, uniform,
                  backend,  static_cast<int>(K), norm, chains, bcfg, a0_list, truth, dict_path, extras};
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override)
{
    const auto doc = io::parse_document(io::read_file(path), path.string());
    return parse_config(doc, seed_override, path.parent_path());
}

// ---------------------------------------------------------------------------
// presets

namespace {

constexpr std::uint64_t kPresetSeed = 20240611;

std::vector<double> linspace(double lo, double hi, int n)
{
    std::vector<double> v;
    for (int i = 0; i < n; ++i)
        v.push_back(lo + (hi - lo) * i / (n - 1));
    return v;
}

Json base_preset()
{
    return Json{{"schema_version", kSchemaVersion},
                {"seed", kPresetSeed},
                {"a0_prior", {{"eta", 1}, {"nu", 1}, {"M", 1}}},
                {"grid", {{"J", 20}, {"m", 0.05}, {"M", 1}, {"v1", 10}, {"v2", 10}, {"mode", "adaptive"}}},
                {"backend", "bridge"},
                {"K", 20000},
                {"normalisation", "dictionary"},
                {"chains", {{"n_chains", 4}, {"n_iter", 2000}, {"n_warmup", 1000}}},
                {"a0_list", linspace(0.05, 1.0, 20)}};
}

Json bernoulli_preset(int y0, int n0, int y, int n)
{
    Json j = base_preset();
    j["model"] = {{"family", "bernoulli"}, {"c", 1}, {"d", 1}};
    j["historical"] = {{"generate", {{"kind", "bernoulli_counts"}, {"successes", y0}, {"trials", n0}}}};
    j["current"] = {{"generate", {{"kind", "bernoulli_counts"}, {"successes", y}, {"trials", n}}}};
    return j;
}

Json gaussian_preset(double M)
{
    Json j = base_preset();
    j["description"] = "Gaussian data with unknown mean and precision";
    j["model"] = {{"family", "gaussian"}, {"mu0", 0}, {"kappa0", 5}, {"alpha0", 1}, {"beta0", 1}};
    j["historical"] = {{"generate", {{"kind", "normal"}, {"n", 50}, {"mu", -0.1}, {"tau", 1e6}, {"seed", 101}}}};
    j["current"] = {{"generate", {{"kind", "normal"}, {"n", 200}, {"mu", -0.1}, {"tau", 1e6}, {"seed", 102}}}};
    j["a0_prior"]["M"] = M;
    j["grid"]["M"] = M;
    j["a0_list"] = linspace(0.05 * M, M, 20);
    if (M > 1)
        j["compare_uniform"] = true;
    return j;
}

std::vector<double> cyclic_beta(int P)
{
    const double base[] = {-1, 1, 0.5, -0.5};
    std::vector<double> b;
    for (int k = 0; k < P; ++k)
        b.push_back(base[k % 4]);
    return b;
}

Json linreg_preset(int n0, int P, int n)
{
    Json j = base_preset();
    const auto beta = cyclic_beta(P);
    j["model"] = {{"family", "linear_regression"},
                  {"mu0", std::vector<double>(static_cast<std::size_t>(P), 0.0)},
                  {"Lambda0_diagonal", 1.5},
                  {"alpha0", 0.5},
                  {"gamma0", 2}};
    j["historical"] = {{"generate", {{"kind", "linear_regression"}, {"n", n0}, {"beta", beta}, {"sigma2", 4}, {"seed", 201}}}};
    j["current"] = {{"generate", {{"kind", "linear_regression"}, {"n", n}, {"beta", beta}, {"sigma2", 4}, {"seed", 202}}}};
    auto truth = beta;
    truth.push_back(4);
    j["truth"] = truth;
    return j;
}

Json logistic_preset(double alpha, std::vector<double> beta)
{
    Json j = base_preset();
    const int P = static_cast<int>(beta.size());
    j["model"] = {{"family", "logistic_regression"}, {"n_coefficients", P}};
    j["historical"] = {{"generate", {{"kind", "logistic_regression"}, {"n", 1000}, {"alpha", alpha}, {"beta", beta}, {"seed", 301}}}};
    j["current"] = {{"generate", {{"kind", "logistic_regression"}, {"n", 100}, {"alpha", alpha}, {"beta", beta}, {"seed", 302}}}};
    std::vector<double> truth{alpha};
    truth.insert(truth.end(), beta.begin(), beta.end());
    j["truth"] = truth;
    return j;
}

} // namespace

std::vector<std::string> preset_names()
{
    return {"bernoulli-1", "bernoulli-2", "bernoulli-3", "bernoulli-4", "poisson",  "gaussian-M1",
            "gaussian-M10", "linreg",     "linreg-A",    "linreg-B",    "linreg-C", "linreg-D",
            "logistic",    "logistic-extreme"};
}

Json preset_config(const std::string& name)
{
    if (name == "bernoulli-1")
        return bernoulli_preset(20, 100, 20, 100);
    if (name == "bernoulli-2")
        return bernoulli_preset(10, 100, 200, 1000);
    if (name == "bernoulli-3")
        return bernoulli_preset(200, 1000, 200, 1000);
    if (name == "bernoulli-4")
        return bernoulli_preset(100, 1000, 200, 1000);
    if (name == "poisson") {
        Json j = base_preset();
        j["model"] = {{"family", "poisson"}, {"alpha0", 2}, {"beta0", 2}};
        j["historical"] = {{"generate", {{"kind", "poisson"}, {"n", 200}, {"lambda", 2}, {"seed", 11}}}};
        j["current"] = {{"generate", {{"kind", "poisson"}, {"n", 100}, {"lambda", 2}, {"seed", 12}}}};
        j["K_sweep"] = {50, 1000, 20000};
        return j;
    }
    if (name == "gaussian-M1")
        return gaussian_preset(1);
    if (name == "gaussian-M10")
        return gaussian_preset(10);
    if (name == "linreg") {
        Json j = linreg_preset(1000, 4, 100);
        j["K_variants"] = {50, 10000};
        return j;
    }
    if (name == "linreg-A")
        return linreg_preset(50, 5, 100);
    if (name == "linreg-B")
        return linreg_preset(100, 10, 100);
    if (name == "linreg-C")
        return linreg_preset(500, 50, 100);
    if (name == "linreg-D")
        return linreg_preset(1000, 100, 100);
    if (name == "logistic")
        return logistic_preset(1.2, {-1, 1, 0.5, -0.5});
    if (name == "logistic-extreme")
        return logistic_preset(0.2, {-10, 1, 5, -5});
    std::string known;
    for (const auto& n : preset_names())
        known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown scenario '" + name + "' (known: " + known + ")");
}

RunConfig preset_run(const std::string& name, std::optional<std::uint64_t> seed_override)
{
    const auto doc = io::parse_document(preset_config(name).dump(2), "preset:" + name);
    return parse_config(doc, seed_override);
}

// ---------------------------------------------------------------------------
// pipelines

namespace {

Json with_provenance(const RunConfig& cfg, const std::string& command, Json body)
{
    body["provenance"] = io::header_json(cfg.header(command));
    body["config"] = cfg.json;
    return body;
}

std::string json_text(const Json& j)
{
    return j.dump(2) + "\n";
}

pp::JointConfig joint_config(const RunConfig& cfg)
{
    pp::JointConfig jc;
    jc.chains = cfg.chains;
    return jc;
}

Json metrics_json(const curvefit::CurveMetrics& m)
{
    return {{"mad", m.mad}, {"rmse", m.rmse}, {"mrae", m.mrae}, {"n", m.n}};
}

std::string marginal_csv(const quad::NormalisedDensity& d, const io::FileHeader& h)
{
    std::ostringstream os;
    os << io::header_lines(h) << "a0,density,cdf\n";
    const std::size_t step = std::max<std::size_t>(1, d.grid.size() / 1000);
    for (std::size_t i = 0; i < d.grid.size(); i += step)
        os << io::format_double(d.grid[i]) << ',' << io::format_double(d.density[i]) << ','
           << io::format_double(d.cdf[i]) << "\n";
    return os.str();
}

} // namespace

Json summary_object(const std::vector<pp::ParamSummary>& s)
{
    Json out = Json::object();
    for (const auto& p : s)
        out[p.name] = {{"mean", p.mean}, {"lower", p.lower}, {"upper", p.upper}, {"sd", p.sd}, {"rhat", p.rhat}, {"ess", p.ess}};
    return out;
}

grid::Evaluator make_evaluator(const RunConfig& cfg)
{
    if (cfg.backend == grid::Backend::ClosedForm)
        return grid::closed_form_evaluator(cfg.model, cfg.historical);
    return grid::bridge_evaluator(cfg.model, cfg.historical, cfg.chains, cfg.bridge);
}

grid::GridResult run_grid(const RunConfig& cfg)
{
    auto eval = make_evaluator(cfg);
    if (cfg.uniform_grid)
        return grid::build_uniform_grid(eval, cfg.budget);
    return grid::build_adaptive_grid(eval, cfg.budget, grid::is_monotone_family(cfg.model));
}

std::optional<std::function<double(double)>> exact_l(const RunConfig& cfg)
{
    if (!cfg.model.is_conjugate())
        return std::nullopt;
    return std::function<double(double)>(
        [model = cfg.model, D0 = cfg.historical](double a0) { return conjugate::log_c(model, D0, a0); });
}

FitOutput run_fit(const RunConfig& cfg, const grid::GridResult& g, int K)
{
    FitOutput out{g, curvefit::fit_l_curve(g), {}, {}, Json::object()};
    out.direct = curvefit::predict_dictionary(out.fit, K, 0.0, g.M);
    out.derivative = curvefit::fit_l_from_derivative(g, K);
    out.direct.id = cfg.hash + "/direct/K" + std::to_string(K);
    out.derivative.id = cfg.hash + "/derivative/K" + std::to_string(K);
    if (auto truth = exact_l(cfg)) {
        Json m = Json::object();
        m["range"] = {0.0, g.M};
        m["direct"] = metrics_json(curvefit::curve_metrics(out.direct, *truth, 0.0, g.M));
        m["derivative"] = metrics_json(curvefit::curve_metrics(out.derivative, *truth, 0.0, g.M));
        if (g.M > 1.0) {
            m["direct_unit"] = metrics_json(curvefit::curve_metrics(out.direct, *truth, 0.0, 1.0));
            m["derivative_unit"] = metrics_json(curvefit::curve_metrics(out.derivative, *truth, 0.0, 1.0));
        }
        // relative error of the grid estimates themselves
        double mrae = 0.0;
        int n = 0;
        for (std::size_t i = 1; i < g.size(); ++i) {
            const double t = (*truth)(g.z[i]);
            if (std::abs(t) > 1e-8) {
                mrae += std::abs(g.l[i] - t) / std::abs(t);
                ++n;
            }
        }
        m["grid_mrae"] = n > 0 ? mrae / n : 0.0;
        out.metrics = m;
    }
    return out;
}

namespace {

Json grid_json(const RunConfig& cfg, const grid::GridResult& g)
{
    return with_provenance(cfg, "grid",
                           {{"mode", grid::mode_name(g.mode)},
                            {"evaluations", g.evaluations},
                            {"gate_failures", g.gate_failures},
                            {"J", cfg.budget.J},
                            {"m", cfg.budget.m},
                            {"M", cfg.budget.M},
                            {"v1", cfg.budget.v1},
                            {"v2", cfg.budget.v2},
                            {"backend", grid::backend_name(cfg.backend)}});
}

Json dictionary_json(const RunConfig& cfg, const FitOutput& f, int K)
{
    return with_provenance(cfg, "fit",
                           {{"J", cfg.budget.J},
                            {"K", K},
                            {"m", cfg.budget.m},
                            {"M", f.grid.M},
                            {"backend", grid::backend_name(cfg.backend)},
                            {"seed", cfg.seed},
                            {"grid_mode", grid::mode_name(f.grid.mode)},
                            {"spline_basis", f.fit.n_basis},
                            {"metrics", f.metrics}});
}

void add_fit_files(const RunConfig& cfg, const FitOutput& f, Artifacts& files, const std::string& suffix = "")
{
    files["grid" + suffix + ".csv"] = io::grid_csv(f.grid, cfg.header("grid"));
    files["grid" + suffix + ".json"] = json_text(grid_json(cfg, f.grid));
    files["dictionary" + suffix + ".csv"] = io::dictionary_csv(f.direct, cfg.header("fit"));
    files["dictionary" + suffix + "_derivative.csv"] = io::dictionary_csv(f.derivative, cfg.header("fit"));
    files["dictionary" + suffix + ".json"] = json_text(dictionary_json(cfg, f, static_cast<int>(f.direct.size())));
}

const Dataset& require_current(const RunConfig& cfg)
{
    if (!cfg.current)
        throw ConfigError(cfg.source + ": this command needs a 'current' dataset");
    return *cfg.current;
}

struct SampleRun {
    pp::JointDraws draws;
    Json summary;
};

SampleRun sample_with(const RunConfig& cfg, pp::Normalisation norm, const curvefit::Dictionary* dict,
                      const std::optional<quad::NormalisedDensity>& exact_marginal)
{
    SampleRun s{pp::sample_joint(cfg.model, cfg.historical, require_current(cfg), cfg.a0_prior, norm, dict,
                                 joint_config(cfg)),
                {}};
    const auto summ = pp::summarise(s.draws);
    s.summary = {{"normalisation", pp::normalisation_name(norm)},
                 {"gate_passed", s.draws.gate_passed},
                 {"attempts", s.draws.attempts},
                 {"a0_acceptance", s.draws.a0_acceptance},
                 {"parameters", summary_object(summ)}};
    if (dict)
        s.summary["dictionary"] = dict->id;
    if (exact_marginal) {
        const VectorXd a0 = s.draws.pooled_a0();
        s.summary["ks_a0"] = pp::ks_distance({a0.data(), a0.data() + a0.size()}, *exact_marginal);
    }
    if (cfg.truth) {
        const auto& t = *cfg.truth;
        const bool regression = cfg.model.family() == Family::NIGRegression;
        const Index nb = regression ? t.size() - 1 : t.size(); // coefficients only for regression
        int covered = 0, covered_all = 0;
        double width = 0.0, mse = 0.0;
        for (Index k = 0; k < t.size(); ++k) {
            const auto& p = summ[static_cast<std::size_t>(k)];
            const bool in = p.lower <= t(k) && t(k) <= p.upper;
            covered_all += in ? 1 : 0;
            if (k < nb) {
                covered += in ? 1 : 0;
                width += p.upper - p.lower;
                mse += (p.mean - t(k)) * (p.mean - t(k));
            }
        }
        s.summary["recovery"] = {{"coefficients", nb},
                                 {"covered", covered},
                                 {"covered_all", covered_all},
                                 {"inclusion", static_cast<double>(covered) / nb},
                                 {"mean_ci_width", width / nb},
                                 {"mse", mse / nb}};
    }
    return s;
}

std::optional<quad::NormalisedDensity> maybe_exact_marginal(const RunConfig& cfg)
{
    if (!cfg.model.is_conjugate() || !cfg.current)
        return std::nullopt;
    return pp::exact_marginal_a0(cfg.model, cfg.historical, *cfg.current, cfg.a0_prior, 20001);
}

Json marginal_summary(const quad::NormalisedDensity& d)
{
    return {{"mean", d.mean()}, {"lower", d.quantile(0.025)}, {"upper", d.quantile(0.975)}};
}

} // namespace

CommandResult cmd_constants(const RunConfig& cfg)
{
    if (cfg.a0_list.empty())
        throw ConfigError(cfg.source + ": 'a0_list' must contain at least one value for the constants command");
    CommandResult res;
    auto bridge_eval = grid::bridge_evaluator(cfg.model, cfg.historical, cfg.chains, cfg.bridge);
    const auto truth = exact_l(cfg);
    std::ostringstream os;
    os << io::header_lines(cfg.header("constants")) << "a0,l_exact,l_bridge,se\n";
    Json rows = Json::array();
    for (double a0 : cfg.a0_list) {
        const auto p = bridge_eval(a0);
        res.gate_passed = res.gate_passed && p.gate_passed;
        const double exact = truth ? (*truth)(a0) : std::numeric_limits<double>::quiet_NaN();
        os << io::format_double(a0) << ',' << (truth ? io::format_double(exact) : "") << ','
           << io::format_double(p.l) << ',' << io::format_double(p.l_se) << "\n";
        Json row = {{"a0", a0}, {"l_bridge", p.l}, {"se", p.l_se}, {"gate_passed", p.gate_passed}};
        if (truth)
            row["l_exact"] = exact;
        rows.push_back(row);
    }
    res.files["constants.csv"] = os.str();
    res.report = with_provenance(cfg, "constants", {{"rows", rows}});
    res.files["constants.json"] = json_text(res.report);
    return res;
}

CommandResult cmd_grid(const RunConfig& cfg)
{
    CommandResult res;
    const auto g = run_grid(cfg);
    res.gate_passed = g.gate_failures == 0;
    res.files["grid.csv"] = io::grid_csv(g, cfg.header("grid"));
    res.report = grid_json(cfg, g);
    res.files["grid.json"] = json_text(res.report);
    return res;
}

CommandResult cmd_fit(const RunConfig& cfg)
{
    CommandResult res;
    const auto f = run_fit(cfg, run_grid(cfg), cfg.K);
    res.gate_passed = f.grid.gate_failures == 0;
    add_fit_files(cfg, f, res.files);
    res.report = dictionary_json(cfg, f, cfg.K);
    return res;
}

CommandResult cmd_sample(const RunConfig& cfg)
{
    CommandResult res;
    std::optional<curvefit::Dictionary> dict;
    if (cfg.normalisation == pp::Normalisation::Dictionary) {
        if (cfg.dictionary_path) {
            dict = io::load_dictionary_csv(*cfg.dictionary_path);
        } else {
            const auto f = run_fit(cfg, run_grid(cfg), cfg.K);
            add_fit_files(cfg, f, res.files);
            dict = f.direct;
        }
    }
    const auto marginal = maybe_exact_marginal(cfg);
    const auto s = sample_with(cfg, cfg.normalisation, dict ? &*dict : nullptr, marginal);
    res.gate_passed = s.draws.gate_passed;
    res.files["draws.csv"] = io::draws_csv(s.draws, cfg.header("sample"));
    Json summary = s.summary;
    if (marginal)
        summary["exact_a0_marginal"] = marginal_summary(*marginal);
    res.report = with_provenance(cfg, "sample", summary);
    res.files["summary.json"] = json_text(res.report);
    return res;
}

CommandResult cmd_sensitivity(const RunConfig& cfg)
{
    if (cfg.a0_list.empty())
        throw ConfigError(cfg.source + ": 'a0_list' must contain at least one value for the sensitivity command");
    CommandResult res;
    const auto sr = pp::sensitivity_analysis(cfg.model, cfg.historical, require_current(cfg), cfg.a0_list, cfg.chains);
    std::ostringstream os;
    os << io::header_lines(cfg.header("sensitivity")) << "a0,stage,parameter,mean,lower,upper\n";
    Json rows = Json::array();
    for (const auto& row : sr.rows) {
        for (const auto* stage : {"prior", "posterior"}) {
            const auto& summ = std::string(stage) == "prior" ? row.prior : row.posterior;
            for (const auto& p : summ)
                os << io::format_double(row.a0) << ',' << stage << ',' << p.name << ',' << io::format_double(p.mean)
                   << ',' << io::format_double(p.lower) << ',' << io::format_double(p.upper) << "\n";
        }
        res.gate_passed = res.gate_passed && row.gate_passed;
        rows.push_back({{"a0", row.a0},
                        {"gate_passed", row.gate_passed},
                        {"prior", summary_object(row.prior)},
                        {"posterior", summary_object(row.posterior)}});
    }
    res.files["sensitivity.csv"] = os.str();
    res.report = with_provenance(cfg, "sensitivity", {{"rows", rows}});
    res.files["sensitivity.json"] = json_text(res.report);
    return res;
}

CommandResult cmd_scenario(const RunConfig& cfg, const std::string& name)
{
    CommandResult res;
    Json report = {{"scenario", name}, {"family", family_name(cfg.model.family())}};
    const auto f = run_fit(cfg, run_grid(cfg), cfg.K);
    add_fit_files(cfg, f, res.files);
    report["grid"] = {{"mode", grid::mode_name(f.grid.mode)},
                      {"evaluations", f.grid.evaluations},
                      {"gate_failures", f.grid.gate_failures}};
    report["fit"] = f.metrics;
    res.gate_passed = f.grid.gate_failures == 0;

    const auto marginal = maybe_exact_marginal(cfg);
    if (marginal) {
        report["exact_a0_marginal"] = marginal_summary(*marginal);
        res.files["marginal_a0.csv"] = marginal_csv(*marginal, cfg.header("scenario"));
    }

    if (cfg.current) {
        Json post = Json::object();
        auto run = [&](const std::string& key, pp::Normalisation norm, const curvefit::Dictionary* dict) {
            const auto s = sample_with(cfg, norm, dict, marginal);
            res.gate_passed = res.gate_passed && s.draws.gate_passed;
            res.files["draws_" + key + ".csv"] = io::draws_csv(s.draws, cfg.header("scenario"));
            post[key] = s.summary;
        };
        run("none", pp::Normalisation::None, nullptr);
        run("dictionary", pp::Normalisation::Dictionary, &f.direct);
        if (cfg.model.is_conjugate())
            run("exact", pp::Normalisation::Exact, nullptr);
        for (const char* key : {"K_sweep", "K_variants"}) {
            if (!cfg.extras.contains(key))
                continue;
            for (double Kd : cfg.extras.at(key).get<std::vector<double>>()) {
                const int K = static_cast<int>(Kd);
                auto d = curvefit::predict_dictionary(f.fit, K, 0.0, f.grid.M);
                d.id = cfg.hash + "/direct/K" + std::to_string(K);
                res.files["dictionary_K" + std::to_string(K) + ".csv"] = io::dictionary_csv(d, cfg.header("scenario"));
                run("dictionary_K" + std::to_string(K), pp::Normalisation::Dictionary, &d);
            }
        }
        report["posteriors"] = post;
    }

    if (cfg.extras.value("compare_uniform", false)) {
        RunConfig ucfg = cfg;
        ucfg.uniform_grid = true;
        const auto fu = run_fit(ucfg, run_grid(ucfg), cfg.K);
        add_fit_files(cfg, fu, res.files, "_uniform");
        report["fit_uniform"] = fu.metrics;
        if (auto truth = exact_l(cfg)) {
            std::ostringstream os;
            os << io::header_lines(cfg.header("scenario")) << "a0,l_exact,l_adaptive,l_uniform\n";
            for (double a : linspace(0.0, f.grid.M, 1001))
                os << io::format_double(a) << ',' << io::format_double((*truth)(a)) << ','
                   << io::format_double(f.fit.spline(a)) << ',' << io::format_double(fu.fit.spline(a)) << "\n";
            res.files["l_curves.csv"] = os.str();
        }
    }
    res.report = with_provenance(cfg, "scenario", report);
    res.files["report.json"] = json_text(res.report);
    return res;
}

void write_artifacts(const Artifacts& files, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : files)
        io::write_file(dir / name, content);
}

} // namespace powerprior::scenarios
