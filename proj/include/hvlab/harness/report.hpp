#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "../core.hpp"

namespace hvlab::harness {

struct FitResult {
    double slope = 0;
    double intercept = 0;
    double residual = 0;  // root mean square of the log residuals
    std::size_t points = 0;
};

// Ordinary least squares on (log eps, log value); nonpositive values are dropped with a warning.
inline FitResult fit_rate(const std::vector<std::pair<double, double>>& pts) {
    std::vector<double> x, y;
    for (const auto& [e, v] : pts) {
        if (!(v > 0) || !(e > 0) || !std::isfinite(v)) {
            diag::warn("fit_rate: dropping point (" + std::to_string(e) + ", " + std::to_string(v) + ")");
            continue;
        }
        x.push_back(std::log(e));
        y.push_back(std::log(v));
    }
    if (x.size() < 3) throw NumericalError("fit_rate: need at least 3 positive points, have " + std::to_string(x.size()));
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0) throw NumericalError("fit_rate: all eps values coincide");
    FitResult f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) ss += std::pow(y[i] - f.intercept - f.slope * x[i], 2);
    f.residual = std::sqrt(ss / n);
    f.points = x.size();
    return f;
}

struct MetricRow {
    std::uint64_t N = 0;
    double epsilon = 0;
    double t = 0;
    std::string metric;
    double raw = 0;
    double normalized = 0;

    bool operator==(const MetricRow& o) const {
        auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
        return N == o.N && same(epsilon, o.epsilon) && same(t, o.t) && metric == o.metric && same(raw, o.raw) &&
               same(normalized, o.normalized);
    }
};

struct ErrorRow {
    std::uint64_t N = 0;
    std::string kind;
    std::string message;
};

struct RateReport {
    std::vector<MetricRow> rows;
    std::map<std::string, FitResult> fits;
    std::map<std::string, std::string> fit_errors;
    std::vector<ErrorRow> errors;
    std::map<std::uint64_t, double> wall_seconds;
    std::map<std::uint64_t, nlohmann::json> point_info;  // per-N setup facts (dt, steps, rescale, ...)
    nlohmann::json config_echo;
    double peak_bytes_estimate = 0;
    std::vector<std::string> warnings;

    std::vector<MetricRow> select(const std::string& metric, std::optional<double> t = {}) const {
        std::vector<MetricRow> out;
        for (const auto& r : rows)
            if (r.metric == metric && (!t || r.t == *t)) out.push_back(r);
        return out;
    }
};

inline constexpr const char* csv_header = "N,epsilon,t,metric,raw,normalized";
inline constexpr const char* code_version = "hvlab 1.0.0";

inline std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string metrics_csv(const RateReport& r) {
    std::string s = std::string(csv_header) + "\n";
    for (const auto& row : r.rows)
        s += std::to_string(row.N) + "," + fmt17(row.epsilon) + "," + fmt17(row.t) + "," + row.metric + "," +
             fmt17(row.raw) + "," + fmt17(row.normalized) + "\n";
    return s;
}

inline std::vector<MetricRow> parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != csv_header) throw IoError("metrics csv: missing or wrong header");
    std::vector<MetricRow> rows;
    int lineno = 1;
    auto num = [&](const std::string& s) {
        if (s == "nan") return std::nan("");
        if (s == "inf") return HUGE_VAL;
        if (s == "-inf") return -HUGE_VAL;
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 6) throw IoError("metrics csv line " + std::to_string(lineno) + ": expected 6 fields");
        try {
            rows.push_back({std::stoull(f[0]), num(f[1]), num(f[2]), f[3], num(f[4]), num(f[5])});
        } catch (const std::exception&) {
            throw IoError("metrics csv line " + std::to_string(lineno) + ": bad number");
        }
    }
    return rows;
}

inline nlohmann::json fits_json(const RateReport& r) {
    nlohmann::json j;
    j["code_version"] = code_version;
    j["config"] = r.config_echo;
    auto& fits = j["fits"] = nlohmann::json::object();
    for (const auto& [name, f] : r.fits)
        fits[name] = {{"slope", f.slope}, {"intercept", f.intercept}, {"residual", f.residual}, {"points", f.points}};
    for (const auto& [name, msg] : r.fit_errors) fits[name] = {{"error", msg}};
    auto& errs = j["errors"] = nlohmann::json::array();
    for (const auto& e : r.errors) errs.push_back({{"N", e.N}, {"kind", e.kind}, {"message", e.message}});
    auto& wt = j["wall_seconds"] = nlohmann::json::object();
    for (const auto& [N, s] : r.wall_seconds) wt[std::to_string(N)] = s;
    auto& pts = j["points"] = nlohmann::json::object();
    for (const auto& [N, info] : r.point_info) pts[std::to_string(N)] = info;
    j["resources"] = {{"peak_bytes_estimate", r.peak_bytes_estimate}};
    j["warnings"] = r.warnings;
    return j;
}

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed: " + p.string());
}

} // namespace detail

// metrics.csv and fits.json in out_dir.
inline void emit_report(const RateReport& r, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    detail::write_file(out_dir / "metrics.csv", metrics_csv(r));
    detail::write_file(out_dir / "fits.json", fits_json(r).dump(2) + "\n");
}

} // namespace hvlab::harness
