#pragma once

// Text I/O: monthly input CSV, flat key = value config files, exact float
// formatting and SHA-256 digests.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "pehaz/core_data.hpp"
#include "pehaz/errors.hpp"

namespace pehaz::io {

// 17 significant digits: parses back to the identical double.
inline std::string fmt(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline double parse_double(std::string_view s, const std::string& where)
{
    const std::string text(s);
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size()) throw ValidationError("not a number '" + text + "' " + where);
    return v;
}

inline std::string trim(std::string_view s)
{
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(a, b - a + 1));
}

inline std::vector<std::string> split(std::string_view line, char sep = ',')
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read file: " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline std::string sha256_hex(std::string_view data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw InternalError("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

inline const std::vector<std::string>& covariate_columns()
{
    static const std::vector<std::string> cols{"tmax_c", "tmin_c", "humidity3pm_pct", "dust_pct", "co_g_per_day", "pneumonia"};
    return cols;
}

// One row per calendar month:
// year,month,cases,tmax_c,tmin_c,humidity3pm_pct,dust_pct,co_g_per_day,pneumonia[,population]
// Cells may be NA except year, month and cases. Non-NA population cells are anchors.
inline RawMonthlySeries parse_monthly_csv(std::string_view text, const std::string& source = "input")
{
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split(line);
            break;
        }
    }
    if (header.empty()) throw ValidationError(source + ": missing header row");
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0] = header[0].substr(3);
    std::map<std::string, std::size_t> col;
    for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = k;
    for (auto const& req : {"year", "month", "cases"})
        if (!col.count(req)) throw ValidationError(source + ": missing required column '" + std::string(req) + "'");
    for (auto const& c : covariate_columns())
        if (!col.count(c)) throw ValidationError(source + ": missing covariate column '" + c + "'");
    const bool has_population = col.count("population") > 0;

    RawMonthlySeries raw;
    for (auto const& c : covariate_columns()) raw.covariates.emplace_back(c, Series{});
    int expected = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        const std::string where = "(" + source + " line " + std::to_string(line_no) + ")";
        if (cells.size() != header.size())
            throw ValidationError("expected " + std::to_string(header.size()) + " cells, found " +
                                  std::to_string(cells.size()) + " " + where);
        auto cell = [&](const std::string& name) -> const std::string& { return cells[col.at(name)]; };
        auto integer = [&](const std::string& name) {
            const double v = parse_double(cell(name), "in column " + name + " " + where);
            if (v != std::floor(v)) throw ValidationError("column " + name + " must be an integer " + where);
            return static_cast<std::int64_t>(v);
        };
        const auto year = integer("year");
        const auto month = integer("month");
        if (month < 1 || month > 12) throw ValidationError("month out of range " + where);
        const int id = month_id(static_cast<int>(year), static_cast<int>(month));
        if (expected < 0) {
            raw.first_month = id;
        } else if (id != expected) {
            throw ValidationError("months must be consecutive; expected " + month_label(expected) + " " + where);
        }
        expected = id + 1;
        if (cell("cases") == "NA") throw ValidationError("case count is NA " + where);
        const auto cases = integer("cases");
        if (cases < 0) throw ValidationError("negative case count " + where);
        raw.event_counts.push_back(cases);
        for (auto& [name, series] : raw.covariates) {
            const auto& v = cell(name);
            series.push_back(v == "NA" || v.empty() ? std::nullopt
                                                    : std::optional<double>(parse_double(v, "in column " + name + " " + where)));
        }
        if (has_population && cell("population") != "NA" && !cell("population").empty())
            raw.population_anchors.push_back({static_cast<double>(id), parse_double(cell("population"), "in column population " + where)});
    }
    if (raw.event_counts.empty()) throw ValidationError(source + ": no data rows");
    raw.validate();
    return raw;
}

inline RawMonthlySeries read_monthly_csv(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) throw ValidationError("input file not found: " + path.string());
    return parse_monthly_csv(read_file(path), path.string());
}

// Flat `key = value` settings with `#` comments. Every key must be consumed
// by a typed getter; finish() rejects leftovers so typos do not pass silently.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::string_view text, const std::string& source = "config")
    {
        KeyValueConfig c;
        c.source_ = source;
        std::istringstream in{std::string(text)};
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            const auto body = trim(hash == std::string::npos ? line : line.substr(0, hash));
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string::npos)
                throw ConfigError(source + " line " + std::to_string(line_no) + ": expected key = value");
            const auto key = trim(body.substr(0, eq));
            const auto value = trim(body.substr(eq + 1));
            if (key.empty()) throw ConfigError(source + " line " + std::to_string(line_no) + ": empty key");
            if (c.values_.count(key)) throw ConfigError(source + ": duplicate key '" + key + "'");
            c.values_[key] = value;
        }
        return c;
    }

    static KeyValueConfig load(const std::filesystem::path& path)
    {
        if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
        return parse(read_file(path), path.string());
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback)
    {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback)
    {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        char* end = nullptr;
        const double v = std::strtod(it->second.c_str(), &end);
        if (it->second.empty() || *end != '\0' || !std::isfinite(v))
            throw ConfigError(source_ + ": key '" + key + "' expects a number, got '" + it->second + "'");
        return v;
    }

    std::int64_t get_int(const std::string& key, std::int64_t fallback)
    {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::int64_t v = 0;
        const auto& s = it->second;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            throw ConfigError(source_ + ": key '" + key + "' expects an integer, got '" + s + "'");
        return v;
    }

    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback)
    {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::uint64_t v = 0;
        const auto& s = it->second;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            throw ConfigError(source_ + ": key '" + key + "' expects a nonnegative integer, got '" + s + "'");
        return v;
    }

    bool get_bool(const std::string& key, bool fallback)
    {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const auto& s = it->second;
        if (s == "true" || s == "yes" || s == "1") return true;
        if (s == "false" || s == "no" || s == "0") return false;
        throw ConfigError(source_ + ": key '" + key + "' expects true or false, got '" + s + "'");
    }

    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback)
    {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<double> out;
        for (auto const& part : split(it->second)) {
            char* end = nullptr;
            const double v = std::strtod(part.c_str(), &end);
            if (part.empty() || *end != '\0')
                throw ConfigError(source_ + ": key '" + key + "' expects a comma-separated list of numbers");
            out.push_back(v);
        }
        return out;
    }

    void finish() const
    {
        for (auto const& [k, v] : values_)
            if (!used_.count(k)) throw ConfigError(source_ + ": unknown key '" + k + "'");
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::string source_;
    std::map<std::string, std::string> values_;
    std::set<std::string> used_;
};

// "tmax_c:0,tmin_c:1" -> selections with lags.
inline std::vector<CovariateSelection> parse_covariate_spec(const std::string& spec)
{
    std::vector<CovariateSelection> out;
    if (trim(spec).empty() || trim(spec) == "none") return out;
    for (auto const& item : split(spec)) {
        const auto colon = item.find(':');
        CovariateSelection sel;
        sel.column = trim(item.substr(0, colon));
        if (colon != std::string::npos) {
            const auto lag = trim(item.substr(colon + 1));
            const auto res = std::from_chars(lag.data(), lag.data() + lag.size(), sel.lag);
            if (res.ec != std::errc{} || res.ptr != lag.data() + lag.size() || sel.lag < 0)
                throw ConfigError("covariate '" + sel.column + "' has an invalid lag '" + lag + "'");
        }
        bool known = false;
        for (auto const& c : covariate_columns()) known = known || c == sel.column;
        if (!known) throw ConfigError("unknown covariate column '" + sel.column + "'");
        out.push_back(sel);
    }
    return out;
}

inline const char* kDefaultCovariates = "tmax_c:0,tmin_c:1,dust_pct:0,humidity3pm_pct:1,co_g_per_day:1,pneumonia:2";

}  // namespace pehaz::io
