#include <powerprior/io.hpp>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <powerprior/errors.hpp>

namespace powerprior::io {

std::string fnv1a_hex(const std::string& bytes)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string config_hash(const Json& config)
{
    return fnv1a_hex(config.dump());
}

std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string header_lines(const FileHeader& h)
{
    std::ostringstream os;
    os << "# powerprior " << kVersion << "\n";
    os << "# command: " << h.command << "\n";
    os << "# config_hash: " << h.config_hash << "\n";
    os << "# seed: " << h.seed << "\n";
    return os.str();
}

Json header_json(const FileHeader& h)
{
    return Json{{"version", kVersion}, {"command", h.command}, {"config_hash", h.config_hash}, {"seed", h.seed}};
}

std::string grid_csv(const grid::GridResult& g, const FileHeader& h)
{
    std::ostringstream os;
    os << header_lines(h) << "# mode: " << grid::mode_name(g.mode) << "\n";
    os << "a0,l_hat,l_prime_hat,l_se,l_prime_se,phase\n";
    for (std::size_t i = 0; i < g.size(); ++i)
        os << format_double(g.z[i]) << ',' << format_double(g.l[i]) << ',' << format_double(g.l_prime[i]) << ','
           << format_double(g.l_se[i]) << ',' << format_double(g.l_prime_se[i]) << ',' << grid::phase_name(g.phase[i])
           << "\n";
    return os.str();
}

std::string dictionary_csv(const curvefit::Dictionary& d, const FileHeader& h)
{
    std::ostringstream os;
    os << header_lines(h) << "# provenance: " << curvefit::provenance_name(d.provenance) << "\n";
    os << "a0,l_hat\n";
    for (std::size_t i = 0; i < d.size(); ++i)
        os << format_double(d.a0[i]) << ',' << format_double(d.l[i]) << "\n";
    return os.str();
}

std::string draws_csv(const posterior::JointDraws& d, const FileHeader& h)
{
    std::ostringstream os;
    os << header_lines(h) << "# normalisation: " << posterior::normalisation_name(d.normalisation) << "\n";
    if (!d.dictionary_id.empty())
        os << "# dictionary: " << d.dictionary_id << "\n";
    for (const auto& n : d.names)
        os << n << ',';
    os << "chain,iter\n";
    for (std::size_t c = 0; c < d.draws.size(); ++c)
        for (Index i = 0; i < d.draws[c].rows(); ++i) {
            for (Index k = 0; k < d.draws[c].cols(); ++k)
                os << format_double(d.draws[c](i, k)) << ',';
            os << c << ',' << i << "\n";
        }
    return os.str();
}

Json summary_json(const std::vector<posterior::ParamSummary>& s)
{
    Json out = Json::array();
    for (const auto& p : s)
        out.push_back({{"name", p.name},
                       {"mean", p.mean},
                       {"lower", p.lower},
                       {"upper", p.upper},
                       {"sd", p.sd},
                       {"rhat", p.rhat},
                       {"ess", p.ess}});
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw ConfigError("cannot write " + path.string());
    f << content;
    if (!f)
        throw ConfigError("error writing " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& j)
{
    write_file(path, j.dump(2) + "\n");
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw ConfigError("cannot read " + path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

namespace {

std::string trim(const std::string& s)
{
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
        ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
        --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

double parse_number(const std::string& cell, const std::string& where)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != cell.size())
        throw ConfigError(where + ": '" + cell + "' is not a number");
    return v;
}

// Data rows of a CSV file with the header split out; '#' and blank lines dropped.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::filesystem::path& path)
{
    std::ifstream f(path);
    if (!f)
        throw ConfigError("cannot read " + path.string());
    CsvTable t;
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        const std::string tl = trim(line);
        if (tl.empty() || tl[0] == '#')
            continue;
        auto cells = split(tl);
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (!have_header) {
            t.header = cells;
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size())
            throw ConfigError(where + ": expected " + std::to_string(t.header.size()) + " fields, found "
                              + std::to_string(cells.size()));
        std::vector<double> row;
        for (const auto& c : cells)
            row.push_back(parse_number(c, where));
        t.rows.push_back(std::move(row));
    }
    if (!have_header)
        throw ConfigError(path.string() + ": missing header");
    return t;
}

} // namespace

Dataset load_dataset_csv(const std::filesystem::path& path, ObservationKind kind)
{
    const auto t = read_csv(path);
    Index y_col = -1;
    std::vector<Index> x_cols;
    for (std::size_t j = 0; j < t.header.size(); ++j) {
        const auto& name = t.header[j];
        if (name == "y")
            y_col = static_cast<Index>(j);
    }
    if (y_col < 0)
        throw ConfigError(path.string() + ": no column named 'y'");
    for (int p = 1;; ++p) {
        const std::string want = "x" + std::to_string(p);
        auto it = std::find(t.header.begin(), t.header.end(), want);
        if (it == t.header.end())
            break;
        x_cols.push_back(it - t.header.begin());
    }
    if (x_cols.size() + 1 != t.header.size())
        throw ConfigError(path.string() + ": columns must be 'y' and x1..xP");
    const Index n = static_cast<Index>(t.rows.size());
    VectorXd y(n);
    MatrixXd X(n, static_cast<Index>(x_cols.size()));
    for (Index i = 0; i < n; ++i) {
        y(i) = t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(y_col)];
        for (std::size_t p = 0; p < x_cols.size(); ++p)
            X(i, static_cast<Index>(p)) = t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(x_cols[p])];
    }
    std::optional<MatrixXd> cov;
    if (!x_cols.empty())
        cov = std::move(X);
    try {
        switch (kind) {
        case ObservationKind::Binary:
            return Dataset::binary(std::move(y), std::move(cov));
        case ObservationKind::Count:
            if (cov)
                throw ConfigError("count data takes no covariates");
            return Dataset::counts(std::move(y));
        case ObservationKind::Real:
            return Dataset::real(std::move(y), std::move(cov));
        }
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    throw ConfigError("unknown observation kind");
}

curvefit::Dictionary load_dictionary_csv(const std::filesystem::path& path)
{
    const auto t = read_csv(path);
    if (t.header != std::vector<std::string>{"a0", "l_hat"})
        throw ConfigError(path.string() + ": dictionary header must be 'a0,l_hat'");
    if (t.rows.size() < 2)
        throw ConfigError(path.string() + ": dictionary needs at least two rows");
    curvefit::Dictionary d;
    for (const auto& r : t.rows) {
        if (!d.a0.empty() && !(r[0] > d.a0.back()))
            throw ConfigError(path.string() + ": dictionary a0 values must be strictly increasing");
        d.a0.push_back(r[0]);
        d.l.push_back(r[1]);
    }
    d.id = fnv1a_hex(read_file(path));
    return d;
}

// ---------------------------------------------------------------------------

namespace {

// Walks syntactically valid JSON and records the line where each value starts.
class LineScanner {
public:
    LineScanner(const std::string& text, std::map<std::string, int>& out) : s_(text), out_(out) {}
    void run() { value(""); }

private:
    void ws()
    {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) {
            if (s_[i_] == '\n')
                ++line_;
            ++i_;
        }
    }
    std::string string_token()
    {
        std::string out;
        ++i_; // opening quote
        while (i_ < s_.size() && s_[i_] != '"') {
            if (s_[i_] == '\\' && i_ + 1 < s_.size()) {
                out += s_[i_ + 1];
                i_ += 2;
                continue;
            }
            out += s_[i_++];
        }
        ++i_;
        return out;
    }
    static std::string escape(const std::string& key)
    {
        std::string out;
        for (char c : key) {
            if (c == '~')
                out += "~0";
            else if (c == '/')
                out += "~1";
            else
                out += c;
        }
        return out;
    }
    void value(const std::string& ptr)
    {
        ws();
        if (i_ >= s_.size())
            return;
        out_[ptr] = line_;
        const char c = s_[i_];
        if (c == '{') {
            ++i_;
            for (;;) {
                ws();
                if (i_ >= s_.size() || s_[i_] == '}') {
                    ++i_;
                    return;
                }
                if (s_[i_] == ',') {
                    ++i_;
                    continue;
                }
                const std::string key = string_token();
                ws();
                ++i_; // colon
                value(ptr + "/" + escape(key));
            }
        } else if (c == '[') {
            ++i_;
            int k = 0;
            for (;;) {
                ws();
                if (i_ >= s_.size() || s_[i_] == ']') {
                    ++i_;
                    return;
                }
                if (s_[i_] == ',') {
                    ++i_;
                    continue;
                }
                value(ptr + "/" + std::to_string(k++));
            }
        } else if (c == '"') {
            string_token();
        } else {
            while (i_ < s_.size() && s_[i_] != ',' && s_[i_] != '}' && s_[i_] != ']'
                   && !std::isspace(static_cast<unsigned char>(s_[i_])))
                ++i_;
        }
    }

    const std::string& s_;
    std::map<std::string, int>& out_;
    std::size_t i_ = 0;
    int line_ = 1;
};

} // namespace

int Document::line_of(const std::string& pointer) const
{
    std::string p = pointer;
    for (;;) {
        auto it = lines.find(p);
        if (it != lines.end())
            return it->second;
        const auto slash = p.rfind('/');
        if (slash == std::string::npos)
            return 1;
        p = p.substr(0, slash);
    }
}

void Document::fail(const std::string& pointer, const std::string& message) const
{
    throw ConfigError(source + ":" + std::to_string(line_of(pointer)) + ": " + (pointer.empty() ? "/" : pointer)
                      + ": " + message);
}

Document parse_document(const std::string& text, const std::string& source)
{
    Document doc;
    doc.source = source;
    try {
        doc.root = Json::parse(text);
    } catch (const Json::parse_error& e) {
        // byte offset -> line
        int line = 1;
        for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i)
            line += text[i] == '\n' ? 1 : 0;
        std::string what = e.what();
        const auto pos = what.find("syntax error");
        throw ConfigError(source + ":" + std::to_string(line) + ": invalid JSON: "
                          + (pos == std::string::npos ? what : what.substr(pos)));
    }
    LineScanner(text, doc.lines).run();
    return doc;
}

} // namespace powerprior::io
