#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include <powerprior/curvefit.hpp>
#include <powerprior/grid.hpp>
#include <powerprior/model.hpp>
#include <powerprior/posterior.hpp>

// File formats: CSV tables with '#' provenance lines, JSON sidecars, dataset
// loading, and JSON documents that remember source line numbers.
namespace powerprior::io {

using Json = nlohmann::json;

constexpr const char* kVersion = POWERPRIOR_VERSION;

struct FileHeader {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string command;
};

// 64-bit FNV-1a, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);
// Hash of the canonical (sorted-key, compact) serialisation.
std::string config_hash(const Json& config);

// Shortest text that round-trips at 17 significant digits.
std::string format_double(double v);

std::string header_lines(const FileHeader& h);
Json header_json(const FileHeader& h);

std::string grid_csv(const grid::GridResult& g, const FileHeader& h);
std::string dictionary_csv(const curvefit::Dictionary& d, const FileHeader& h);
std::string draws_csv(const posterior::JointDraws& d, const FileHeader& h);
Json summary_json(const std::vector<posterior::ParamSummary>& s);

void write_file(const std::filesystem::path& path, const std::string& content);
void write_json(const std::filesystem::path& path, const Json& j);
std::string read_file(const std::filesystem::path& path);

// Column `y` plus optional `x1..xP`; lines starting with '#' are skipped.
Dataset load_dataset_csv(const std::filesystem::path& path, ObservationKind kind);

// Reads back a dictionary written by dictionary_csv.
curvefit::Dictionary load_dictionary_csv(const std::filesystem::path& path);

// Parsed JSON together with the line of every value, keyed by JSON pointer.
struct Document {
    Json root;
    std::string source;
    std::map<std::string, int> lines;

    int line_of(const std::string& pointer) const;
    // ConfigError prefixed with "source:line: pointer: ".
    [[noreturn]] void fail(const std::string& pointer, const std::string& message) const;
};

Document parse_document(const std::string& text, const std::string& source);

} // namespace powerprior::io
