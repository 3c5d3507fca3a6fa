#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <powerprior/errors.hpp>
#include <powerprior/io.hpp>
#include <powerprior/scenarios.hpp>

using namespace powerprior;
namespace sc = powerprior::scenarios;

namespace {

const char* kConfig = R"({
  "schema_version": 1,
  "seed": 7,
  "model": {"family": "bernoulli", "c": 1, "d": 1},
  "historical": {"generate": {"kind": "bernoulli_counts", "successes": 20, "trials": 100}},
  "grid": {"J": 8, "M": 1, "m": 0.05},
  "backend": "closed_form",
  "a0_list": [0.25, 0.5, 1.0]
})";

sc::RunConfig parse(const std::string& text)
{
    return sc::parse_config(io::parse_document(text, "cfg.json"), std::nullopt);
}

std::string error_of(const std::string& text)
{
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::filesystem::path temp_dir(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / ("powerprior_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("number formatting and hashing")
{
    CHECK(io::format_double(0.1) == "0.10000000000000001");
    CHECK(io::format_double(2.0) == "2");
    CHECK(io::format_double(NAN) == "nan");
    CHECK(std::stod(io::format_double(1.0 / 3)) == 1.0 / 3);
    CHECK(io::fnv1a_hex("") == "cbf29ce484222325");
    CHECK(io::fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(io::config_hash(io::Json::parse(R"({"b":1,"a":2})")) == io::config_hash(io::Json::parse(R"({"a":2,"b":1})")));
}

TEST_CASE("document line numbers")
{
    const auto doc = io::parse_document(kConfig, "cfg.json");
    CHECK(doc.line_of("/seed") == 3);
    CHECK(doc.line_of("/grid/J") == 6);
    CHECK(doc.line_of("/a0_list/2") == 8);
    CHECK_THROWS_WITH_AS(io::parse_document("{\n\"a\": 1,\n}", "bad.json"), doctest::Contains("bad.json:3"), ConfigError);
}

TEST_CASE("config parsing")
{
    const auto cfg = parse(kConfig);
    CHECK(cfg.seed == 7);
    CHECK(cfg.model.family() == Family::BetaBernoulli);
    CHECK(cfg.historical.n() == 100);
    CHECK(cfg.budget.J == 8);
    CHECK(cfg.backend == grid::Backend::ClosedForm);
    CHECK(cfg.a0_list.size() == 3);
    CHECK(cfg.hash.size() == 16);

    const auto over = sc::parse_config(io::parse_document(kConfig, "cfg.json"), 99);
    CHECK(over.seed == 99);
    CHECK(over.hash != cfg.hash);
}

TEST_CASE("config errors carry source line and pointer")
{
    std::string t = kConfig;
    t.replace(t.find("\"seed\": 7"), 9, "\"sede\": 7");
    CHECK(error_of(t).find("cfg.json:3: /sede") != std::string::npos);

    t = kConfig;
    t.replace(t.find("[0.25, 0.5, 1.0]"), 16, "[0.5, 0.25]");
    CHECK(error_of(t).find("cfg.json:8: /a0_list/1") != std::string::npos);

    t = kConfig;
    t.replace(t.find("\"J\": 8"), 6, "\"J\": 2");
    CHECK(error_of(t).find("cfg.json:6: /grid") != std::string::npos);

    t = kConfig;
    t.replace(t.find("\"bernoulli\""), 11, "\"weibull\"");
    CHECK(error_of(t).find("cfg.json:4") != std::string::npos);

    t = kConfig;
    t.replace(t.find("\"schema_version\": 1"), 19, "\"schema_version\": 2");
    CHECK(error_of(t).find("schema version") != std::string::npos);
}

TEST_CASE("constants with an empty a0 list is a usage error")
{
    std::string t = kConfig;
    t.replace(t.find("[0.25, 0.5, 1.0]"), 16, "[]");
    const auto cfg = parse(t);
    CHECK_THROWS_AS(sc::cmd_constants(cfg), ConfigError);
}

TEST_CASE("constants output is deterministic and matches the closed form")
{
    const auto cfg = parse(kConfig);
    const auto a = sc::cmd_constants(cfg);
    const auto b = sc::cmd_constants(cfg);
    CHECK(a.files == b.files);
    REQUIRE(a.files.count("constants.csv") == 1);
    const auto& csv = a.files.at("constants.csv");
    CHECK(csv.rfind("# powerprior", 0) == 0);
    CHECK(csv.find("a0,l_exact,l_bridge,se") != std::string::npos);
}

TEST_CASE("dataset CSV loading")
{
    const auto dir = temp_dir("csv");
    {
        std::ofstream f(dir / "d.csv");
        f << "# comment\ny,x1,x2\n1.5,0.1,0.2\n\n-0.5,0.3,0.4\n";
    }
    const auto d = io::load_dataset_csv(dir / "d.csv", ObservationKind::Real);
    CHECK(d.n() == 2);
    CHECK(d.n_covariates() == 2);
    CHECK(d.X()(1, 1) == doctest::Approx(0.4));
    {
        std::ofstream f(dir / "bad.csv");
        f << "y,x1\n1,2\n3\n";
    }
    CHECK_THROWS_WITH_AS(io::load_dataset_csv(dir / "bad.csv", ObservationKind::Real), doctest::Contains("bad.csv:3"),
                         ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("dictionary CSV round trip")
{
    const auto cfg = parse(kConfig);
    const auto fit = sc::run_fit(cfg, sc::run_grid(cfg), 50);
    const auto dir = temp_dir("dict");
    io::write_file(dir / "dictionary.csv", io::dictionary_csv(fit.direct, cfg.header("fit")));
    const auto back = io::load_dictionary_csv(dir / "dictionary.csv");
    CHECK(curvefit::lookup_l(back, 0.37) == doctest::Approx(curvefit::lookup_l(fit.direct, 0.37)).epsilon(1e-14));
    std::filesystem::remove_all(dir);
}

TEST_CASE("presets parse")
{
    for (const auto& name : sc::preset_names()) {
        CAPTURE(name);
        CHECK_NOTHROW(sc::preset_run(name));
    }
    CHECK_THROWS_AS(sc::preset_config("no-such-scenario"), ConfigError);
}

TEST_CASE("exit codes")
{
    CHECK(exit_code_for(ConfigError("x")) == 2);
    CHECK(exit_code_for(DiagnosticsError("x")) == 3);
    CHECK(exit_code_for(NumericalError("x")) == 4);
}
