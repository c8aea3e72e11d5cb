#pragma once

// Configuration loading, CSV/JSON emission and run manifests.

#include "rdrobin/error.hpp"
#include "rdrobin/nonlinearity.hpp"

#include <json.hpp>
#include <openssl/evp.h>
#include <toml.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace rdrobin::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// 17 significant digits: every double round-trips.
inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline void dump17(const json& j, int indent, int depth, std::string& out) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string end_pad(static_cast<std::size_t>(indent * depth), ' ');
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (const auto& [k, v] : j.items()) {
                if (!first) out += ",\n";
                first = false;
                out += pad + json(k).dump() + ": ";
                dump17(v, indent, depth + 1, out);
            }
            out += "\n" + end_pad + "}";
            return;
        }
        case json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ",\n";
                out += pad;
                dump17(j[i], indent, depth + 1, out);
            }
            out += "\n" + end_pad + "]";
            return;
        }
        case json::value_t::number_float: {
            const double v = j.get<double>();
            out += std::isfinite(v) ? fmt17(v) : "null";
            return;
        }
        default: out += j.dump();
    }
}

}  // namespace detail

/// Pretty JSON with every float printed at 17 significant digits.
inline std::string dump17(const json& j, int indent = 2) {
    std::string out;
    detail::dump17(j, indent, 0, out);
    out += '\n';
    return out;
}

// ---------------------------------------------------------------- files

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + p.string());
    out << content;
    if (!out) fail(ErrorCode::IoError, "write failed for " + p.string());
}

/// Lowercase hex SHA-256.
inline std::string sha256_hex(const std::string& data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) {
        fail(ErrorCode::IoError, "SHA-256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

// ---------------------------------------------------------------- CSV

/// Rows of doubles written under a header with %.17g cells.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::initializer_list<double> row) {
        require(row.size() == header_.size(), ErrorCode::InvalidArgument, "CSV row width mismatch");
        rows_.emplace_back(row);
    }
    void add(std::vector<double> row) {
        require(row.size() == header_.size(), ErrorCode::InvalidArgument, "CSV row width mismatch");
        rows_.push_back(std::move(row));
    }
    std::size_t size() const noexcept { return rows_.size(); }

    std::string str() const {
        std::string s;
        for (std::size_t j = 0; j < header_.size(); ++j) s += (j ? "," : "") + header_[j];
        s += '\n';
        for (const auto& r : rows_) {
            for (std::size_t j = 0; j < r.size(); ++j) {
                if (j) s += ',';
                s += fmt17(r[j]);
            }
            s += '\n';
        }
        return s;
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::vector<double> column(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (header[j] != name) continue;
            std::vector<double> c;
            c.reserve(rows.size());
            for (const auto& r : rows) c.push_back(r.at(j));
            return c;
        }
        fail(ErrorCode::ConfigParseError, "CSV has no column '" + name + "'");
    }
};

inline std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

/// Numeric CSV with a header line; blank lines and '#' lines are skipped.
inline CsvData parse_csv(const std::string& text, const std::string& origin = "CSV") {
    CsvData d;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(trim(cell));
        if (d.header.empty()) {
            d.header = std::move(cells);
            continue;
        }
        if (cells.size() != d.header.size()) {
            fail(ErrorCode::ConfigParseError, origin + ":" + std::to_string(lineno) + ": expected " +
                                                  std::to_string(d.header.size()) + " cells");
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            char* end = nullptr;
            const double v = std::strtod(c.c_str(), &end);
            if (c.empty() || *end != '\0') {
                fail(ErrorCode::ConfigParseError, origin + ":" + std::to_string(lineno) + ": not a number: " + c);
            }
            row.push_back(v);
        }
        d.rows.push_back(std::move(row));
    }
    if (d.header.empty()) fail(ErrorCode::ConfigParseError, origin + ": empty CSV");
    return d;
}

// ---------------------------------------------------------------- config

/// Parsed nonlinearity description together with its source text.
struct FConfig {
    std::string kind;       // "cubic" or "table"
    double alpha = 0.0;     // cubic
    fs::path table_path;    // table, resolved against the config directory
    int order = 3;          // table interpolation order
    std::string text;       // the config file verbatim
    std::string table_sha;  // hash of the table file, if any

    json to_json() const {
        json j{{"kind", kind}};
        if (kind == "cubic") j["alpha"] = alpha;
        else {
            j["path"] = table_path.string();
            j["order"] = order;
            j["sha256"] = table_sha;
        }
        return j;
    }
};

inline FConfig parse_f_config(const std::string& text, const fs::path& base_dir, const std::string& origin) {
    toml::table tbl;
    try {
        tbl = toml::parse(text, origin);
    } catch (const toml::parse_error& e) {
        fail(ErrorCode::ConfigParseError, origin + ": " + std::string(e.description()));
    }
    // accept either top-level keys or an [f] table
    const toml::table* t = tbl.get_as<toml::table>("f");
    if (!t) t = &tbl;
    FConfig c;
    c.text = text;
    const auto kind = (*t)["kind"].value<std::string>();
    if (!kind) fail(ErrorCode::ConfigParseError, origin + ": missing string key 'kind'");
    c.kind = *kind;
    if (c.kind == "cubic") {
        const auto a = (*t)["alpha"].value<double>();
        if (!a) fail(ErrorCode::ConfigParseError, origin + ": cubic needs a numeric 'alpha'");
        c.alpha = *a;
    } else if (c.kind == "table") {
        const auto p = (*t)["path"].value<std::string>();
        if (!p) fail(ErrorCode::ConfigParseError, origin + ": table needs a string 'path'");
        c.table_path = fs::path(*p).is_absolute() ? fs::path(*p) : base_dir / *p;
        c.order = (*t)["order"].value_or(3);
    } else {
        fail(ErrorCode::ConfigParseError, origin + ": unknown kind '" + c.kind + "' (expected cubic or table)");
    }
    return c;
}

inline FConfig load_f_config(const fs::path& path) {
    if (!fs::exists(path)) fail(ErrorCode::ConfigParseError, "config not found: " + path.string());
    return parse_f_config(read_file(path), path.parent_path(), path.string());
}

/// Builds and validates the nonlinearity described by `c`.
inline Nonlinearity make_nonlinearity(FConfig& c) {
    if (c.kind == "cubic") {
        require(c.alpha > 0.0 && c.alpha < 1.0, ErrorCode::InvalidArgument, "cubic alpha must lie in (0, 1)");
        return Nonlinearity::cubic(c.alpha);
    }
    const std::string text = read_file(c.table_path);
    c.table_sha = sha256_hex(text);
    const auto csv = parse_csv(text, c.table_path.string());
    return Nonlinearity(ReactionTerm(TabulatedTerm(csv.column("s"), csv.column("f"), csv.column("fp"), c.order)));
}

// ---------------------------------------------------------------- manifest

struct OutputEntry {
    std::string path;  // relative to the output directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

/// Reproducibility record: configuration, grid, timing and output hashes.
/// Outputs carry no timing, so identical inputs give identical hashes.
class RunManifest {
public:
    RunManifest(std::string subcommand, fs::path out_dir)
        : subcommand_(std::move(subcommand)), out_dir_(std::move(out_dir)),
          start_(std::chrono::steady_clock::now()) {}

    json& config() noexcept { return config_; }
    json& grid() noexcept { return grid_; }
    json& extra() noexcept { return extra_; }
    const std::vector<OutputEntry>& outputs() const noexcept { return outputs_; }
    const fs::path& out_dir() const noexcept { return out_dir_; }

    /// Writes `content` to out_dir / name and records its hash.
    fs::path emit(const std::string& name, const std::string& content) {
        const fs::path p = out_dir_ / name;
        write_file(p, content);
        outputs_.push_back({name, sha256_hex(content), content.size()});
        return p;
    }

    json to_json() const {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        json outs = json::array();
        for (const auto& o : outputs_) outs.push_back({{"path", o.path}, {"sha256", o.sha256}, {"bytes", o.bytes}});
        json j{{"tool", "rdrobin"},
               {"version", RDROBIN_VERSION},
               {"subcommand", subcommand_},
               {"config", config_},
               {"grid", grid_},
               {"wall_time_s", wall},
               {"outputs", outs}};
        if (!extra_.empty()) j["extra"] = extra_;
        return j;
    }

    fs::path write(const std::string& name = "manifest.json") const {
        const fs::path p = out_dir_ / name;
        write_file(p, dump17(to_json()));
        return p;
    }

private:
    std::string subcommand_;
    fs::path out_dir_;
    std::chrono::steady_clock::time_point start_;
    json config_ = json::object();
    json grid_ = json::object();
    json extra_ = json::object();
    std::vector<OutputEntry> outputs_;
};

}  // namespace rdrobin::io
