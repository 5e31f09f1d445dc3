#pragma once

#include <yaml-cpp/yaml.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../hartree.hpp"
#include "../state_factory.hpp"
#include "../vlasov.hpp"

namespace hvlab::harness {

inline constexpr int schema_version = 1;

enum class InitialKind { coherent, fermi_sea, checkpoint };
enum class DeltaRule { sqrt_eps, fixed };
enum class DtRule { bound, fixed };

struct CoherentSpec {
    PhasePoint center;
    std::array<double, 2> widths{1.0, 1.0};
    double cap = 1.0;
    DeltaRule delta_rule = DeltaRule::sqrt_eps;
    double delta = 0;
};

struct FermiSpec {
    double profile_width = 1.5;
    FermiHeight height = FermiHeight::filled;
    std::optional<double> c;
    Purification purification = Purification::projector;
};

struct InitialSpec {
    InitialKind kind = InitialKind::coherent;
    CoherentSpec coherent;
    FermiSpec fermi;
    std::string checkpoint;  // SKDK path, "{N}" is replaced by the particle number
};

struct TimeSpec {
    DtRule rule = DtRule::bound;
    double dt = 0;              // fixed rule
    double fraction = 0.5;      // bound rule: dt = fraction * bound
    double vlasov_dt = 0;       // 0: same as the Hartree step
    double phase_factor = 0.1;
    double transport_factor = 0.25;
    bool exchange = false;
};

struct SemiclassicalSpec {
    std::vector<std::array<double, 4>> points;  // (p0, p1, q0, q1); unused axis entries are 0
};

struct SobolevSpec {
    int s = 2;
    int a = 4;
};

inline const std::vector<std::string>& known_metrics() {
    static const std::vector<std::string> m = {"trace",       "hs",      "l2_wigner",  "l2_limit",
                                               "semiclassical", "commutators", "sobolev", "residual_B"};
    return m;
}

struct RunConfig {
    int dim = 1;
    int M = 0;        // fixed M, or
    int M_per_N = 0;  // M = M_per_N * N
    std::optional<int> M_v;
    double L = 10.0;
    std::optional<double> v_max;
    std::vector<std::uint64_t> N_list;
    std::vector<double> epsilons;  // empty: eps = N^{-1/dim}
    PotentialSpec potential;
    InitialSpec initial;
    double T = 0.5;
    std::vector<double> times;  // sweep: extra record times, T always included
    TimeSpec time;
    std::vector<std::string> metrics;
    SemiclassicalSpec semiclassical;
    SobolevSpec sobolev;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    VlasovMode mode = VlasovMode::grid;
    double memory_limit_gb = 16;
    int evolve_N = 0;           // evolve: particle number (default first of N_list)
    int snapshot_every = 0;     // evolve: steps between kernel snapshots, 0 disables
    YAML::Node source;          // parsed document, echoed into reports

    bool wants(const std::string& m) const {
        return std::find(metrics.begin(), metrics.end(), m) != metrics.end();
    }
    int grid_M(std::uint64_t N) const { return M > 0 ? M : M_per_N * static_cast<int>(N); }
    double epsilon(std::size_t i) const {
        if (!epsilons.empty()) return epsilons[i];
        return std::pow(static_cast<double>(N_list[i]), -1.0 / dim);
    }
};

namespace detail {

inline std::string where(const YAML::Node& n) {
    const auto m = n.Mark();
    if (m.is_null()) return "config";
    return "config:" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
}

[[noreturn]] inline void fail(const YAML::Node& n, const std::string& field, const std::string& msg) {
    throw ConfigError(where(n) + ": field '" + field + "': " + msg);
}

inline void allow_keys(const YAML::Node& map, const std::string& section, std::initializer_list<const char*> keys) {
    if (!map.IsMap()) fail(map, section, "expected a mapping");
    std::set<std::string> ok(keys.begin(), keys.end()), seen;
    for (auto it = map.begin(); it != map.end(); ++it) {
        auto k = it->first.as<std::string>();
        if (!seen.insert(k).second) fail(it->first, section.empty() ? k : section + "." + k, "duplicate key");
        if (!ok.count(k)) {
            std::string list;
            for (const auto& s : ok) list += (list.empty() ? "" : ", ") + s;
            fail(it->first, section.empty() ? k : section + "." + k, "unknown key (expected one of: " + list + ")");
        }
    }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& field) {
    if (!n.IsScalar()) fail(n, field, "expected a scalar");
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        fail(n, field, "cannot parse '" + n.Scalar() + "'");
    }
}

template <class T>
void read(const YAML::Node& map, const char* key, const std::string& section, T& out) {
    if (auto n = map[key]) out = scalar<T>(n, section.empty() ? key : section + "." + key);
}

inline double positive(const YAML::Node& map, const char* key, const std::string& section, double def) {
    double v = def;
    read(map, key, section, v);
    if (map[key] && !(v > 0 && std::isfinite(v))) fail(map[key], section + "." + key, "must be positive");
    return v;
}

template <class T>
std::vector<T> list(const YAML::Node& n, const std::string& field) {
    if (!n.IsSequence()) fail(n, field, "expected a list");
    std::vector<T> out;
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(scalar<T>(n[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

inline std::array<double, 2> pair(const YAML::Node& n, const std::string& field, int dim) {
    std::array<double, 2> out{0, 0};
    if (n.IsScalar()) {
        if (dim != 1) fail(n, field, "expected " + std::to_string(dim) + " components");
        out[0] = scalar<double>(n, field);
        return out;
    }
    auto v = list<double>(n, field);
    if (static_cast<int>(v.size()) != dim) fail(n, field, "expected " + std::to_string(dim) + " components");
    for (int a = 0; a < dim; ++a) out[a] = v[a];
    return out;
}

template <class E>
E choice(const YAML::Node& n, const std::string& field, std::initializer_list<std::pair<const char*, E>> opts) {
    auto s = scalar<std::string>(n, field);
    std::string list;
    for (const auto& [name, val] : opts) {
        if (s == name) return val;
        list += (list.empty() ? "" : " | ") + std::string(name);
    }
    fail(n, field, "unknown value '" + s + "' (" + list + ")");
}

} // namespace detail

inline RunConfig parse_config(const YAML::Node& root) {
    using namespace detail;
    RunConfig c;
    c.source = root;
    if (!root || !root.IsMap()) throw ConfigError("config: top level must be a mapping");
    allow_keys(root, "",
               {"schema_version", "dim", "grid", "N_list", "epsilon", "potential", "initial", "T", "times", "time",
                "metrics", "semiclassical", "sobolev", "seed", "output_dir", "mode", "resources", "evolve"});
    if (!root["schema_version"]) throw ConfigError("config: field 'schema_version' is required");
    int ver = scalar<int>(root["schema_version"], "schema_version");
    if (ver != schema_version)
        fail(root["schema_version"], "schema_version", "unsupported version " + std::to_string(ver));

    read(root, "dim", "", c.dim);
    if (c.dim != 1 && c.dim != 2) fail(root["dim"], "dim", "must be 1 or 2");

    if (!root["grid"]) throw ConfigError("config: section 'grid' is required");
    {
        auto g = root["grid"];
        allow_keys(g, "grid", {"M", "M_per_N", "M_v", "L", "v_max"});
        read(g, "M", "grid", c.M);
        read(g, "M_per_N", "grid", c.M_per_N);
        if ((c.M > 0) == (c.M_per_N > 0)) fail(g, "grid", "give exactly one of M and M_per_N");
        if (c.M < 0 || c.M_per_N < 0) fail(g, "grid.M", "must be positive");
        if (c.M > 0 && (c.M < 8 || c.M % 2)) fail(g["M"], "grid.M", "must be even and >= 8");
        if (c.M_per_N > 0 && c.M_per_N % 2) fail(g["M_per_N"], "grid.M_per_N", "must be even");
        c.L = positive(g, "L", "grid", c.L);
        if (g["M_v"]) c.M_v = scalar<int>(g["M_v"], "grid.M_v");
        if (g["v_max"]) c.v_max = positive(g, "v_max", "grid", 1.0);
    }

    if (!root["N_list"]) throw ConfigError("config: field 'N_list' is required");
    c.N_list = list<std::uint64_t>(root["N_list"], "N_list");
    if (c.N_list.empty()) fail(root["N_list"], "N_list", "must not be empty");
    for (std::size_t i = 0; i < c.N_list.size(); ++i) {
        if (c.N_list[i] == 0) fail(root["N_list"][i], "N_list", "entries must be positive");
        if (i > 0 && c.N_list[i] <= c.N_list[i - 1]) fail(root["N_list"][i], "N_list", "must be strictly increasing");
    }

    if (auto e = root["epsilon"]) {
        allow_keys(e, "epsilon", {"rule", "values"});
        std::string rule = "power";
        read(e, "rule", "epsilon", rule);
        if (rule == "explicit") {
            if (!e["values"]) fail(e, "epsilon.values", "required for rule 'explicit'");
            c.epsilons = list<double>(e["values"], "epsilon.values");
            if (c.epsilons.size() != c.N_list.size()) fail(e["values"], "epsilon.values", "needs one entry per N");
            for (double x : c.epsilons)
                if (!(x > 0)) fail(e["values"], "epsilon.values", "entries must be positive");
        } else if (rule != "power") {
            fail(e["rule"], "epsilon.rule", "unknown value '" + rule + "' (power | explicit)");
        }
    }

    if (auto p = root["potential"]) {
        allow_keys(p, "potential", {"kind", "amplitude", "width"});
        if (p["kind"])
            c.potential.kind = choice<PotentialKind>(p["kind"], "potential.kind",
                                                     {{"zero", PotentialKind::zero},
                                                      {"constant", PotentialKind::constant},
                                                      {"gaussian", PotentialKind::gaussian}});
        read(p, "amplitude", "potential", c.potential.amplitude);
        c.potential.width = positive(p, "width", "potential", c.potential.width);
    }

    if (auto in = root["initial"]) {
        allow_keys(in, "initial", {"kind", "coherent", "fermi_sea", "checkpoint"});
        if (in["kind"])
            c.initial.kind = choice<InitialKind>(in["kind"], "initial.kind",
                                                 {{"coherent", InitialKind::coherent},
                                                  {"fermi_sea", InitialKind::fermi_sea},
                                                  {"checkpoint", InitialKind::checkpoint}});
        if (auto co = in["coherent"]) {
            allow_keys(co, "initial.coherent", {"r", "p", "sigma_r", "sigma_p", "cap", "delta_rule", "delta"});
            auto& s = c.initial.coherent;
            if (co["r"]) s.center.r = pair(co["r"], "initial.coherent.r", c.dim);
            if (co["p"]) s.center.p = pair(co["p"], "initial.coherent.p", c.dim);
            s.widths[0] = positive(co, "sigma_r", "initial.coherent", s.widths[0]);
            s.widths[1] = positive(co, "sigma_p", "initial.coherent", s.widths[1]);
            s.cap = positive(co, "cap", "initial.coherent", s.cap);
            if (s.cap > 1) fail(co["cap"], "initial.coherent.cap", "must not exceed 1");
            if (co["delta_rule"])
                s.delta_rule = choice<DeltaRule>(co["delta_rule"], "initial.coherent.delta_rule",
                                                 {{"sqrt_eps", DeltaRule::sqrt_eps}, {"fixed", DeltaRule::fixed}});
            s.delta = positive(co, "delta", "initial.coherent", 0.0);
            if (s.delta_rule == DeltaRule::fixed && !(s.delta > 0))
                fail(co, "initial.coherent.delta", "required for delta_rule 'fixed'");
        }
        if (auto fs = in["fermi_sea"]) {
            allow_keys(fs, "initial.fermi_sea", {"profile_width", "height", "c", "purification"});
            auto& s = c.initial.fermi;
            s.profile_width = positive(fs, "profile_width", "initial.fermi_sea", s.profile_width);
            if (fs["height"])
                s.height = choice<FermiHeight>(fs["height"], "initial.fermi_sea.height",
                                               {{"filled", FermiHeight::filled}, {"inverse_N", FermiHeight::inverse_N}});
            if (fs["c"]) s.c = positive(fs, "c", "initial.fermi_sea", 1.0);
            if (fs["purification"])
                s.purification = choice<Purification>(fs["purification"], "initial.fermi_sea.purification",
                                                      {{"projector", Purification::projector},
                                                       {"clamp", Purification::clamp},
                                                       {"none", Purification::none}});
        }
        if (auto ck = in["checkpoint"]) c.initial.checkpoint = scalar<std::string>(ck, "initial.checkpoint");
        if (c.initial.kind == InitialKind::checkpoint && c.initial.checkpoint.empty())
            fail(in, "initial.checkpoint", "required for kind 'checkpoint'");
    }

    if (auto t = root["T"]) {
        c.T = scalar<double>(t, "T");
        if (!(c.T >= 0) || !std::isfinite(c.T)) fail(t, "T", "must be >= 0");
    }
    if (auto ts = root["times"]) {
        c.times = list<double>(ts, "times");
        for (std::size_t i = 0; i < c.times.size(); ++i)
            if (!(c.times[i] > 0 && c.times[i] <= c.T) || (i > 0 && c.times[i] <= c.times[i - 1]))
                fail(ts[i], "times", "entries must increase within (0, T]");
    }
    if (auto tm = root["time"]) {
        allow_keys(tm, "time", {"rule", "dt", "fraction", "vlasov_dt", "phase_factor", "transport_factor", "exchange"});
        auto& s = c.time;
        if (tm["rule"]) s.rule = choice<DtRule>(tm["rule"], "time.rule", {{"bound", DtRule::bound}, {"fixed", DtRule::fixed}});
        s.dt = positive(tm, "dt", "time", 0.0);
        s.fraction = positive(tm, "fraction", "time", s.fraction);
        if (s.fraction > 1) fail(tm["fraction"], "time.fraction", "must not exceed 1");
        s.vlasov_dt = positive(tm, "vlasov_dt", "time", 0.0);
        s.phase_factor = positive(tm, "phase_factor", "time", s.phase_factor);
        s.transport_factor = positive(tm, "transport_factor", "time", s.transport_factor);
        read(tm, "exchange", "time", s.exchange);
        if (s.rule == DtRule::fixed && !(s.dt > 0)) fail(tm, "time.dt", "required for rule 'fixed'");
    }

    if (auto m = root["metrics"]) {
        c.metrics = list<std::string>(m, "metrics");
        for (std::size_t i = 0; i < c.metrics.size(); ++i) {
            const auto& k = known_metrics();
            if (std::find(k.begin(), k.end(), c.metrics[i]) == k.end()) {
                std::string names;
                for (const auto& s : k) names += (names.empty() ? "" : ", ") + s;
                fail(m[i], "metrics", "unknown metric '" + c.metrics[i] + "' (" + names + ")");
            }
        }
    } else {
        c.metrics = {"hs", "l2_wigner"};
    }
    if (c.wants("l2_limit") && c.initial.kind != InitialKind::coherent)
        fail(root["metrics"], "metrics", "l2_limit needs coherent initial data");

    if (auto sc = root["semiclassical"]) {
        allow_keys(sc, "semiclassical", {"p", "q", "points"});
        if (sc["points"]) {
            auto pts = sc["points"];
            if (!pts.IsSequence()) fail(pts, "semiclassical.points", "expected a list");
            for (std::size_t i = 0; i < pts.size(); ++i) {
                auto v = list<double>(pts[i], "semiclassical.points[" + std::to_string(i) + "]");
                if (static_cast<int>(v.size()) != 2 * c.dim)
                    fail(pts[i], "semiclassical.points", "each point needs " + std::to_string(2 * c.dim) + " numbers (p, q)");
                std::array<double, 4> pt{0, 0, 0, 0};
                for (int a = 0; a < c.dim; ++a) {
                    pt[a] = v[a];
                    pt[2 + a] = v[c.dim + a];
                }
                c.semiclassical.points.push_back(pt);
            }
        }
        if (sc["p"] || sc["q"]) {
            if (!sc["p"] || !sc["q"]) fail(sc, "semiclassical", "give both p and q lists");
            auto ps = list<double>(sc["p"], "semiclassical.p");
            auto qs = list<double>(sc["q"], "semiclassical.q");
            for (double p : ps)
                for (double q : qs) c.semiclassical.points.push_back({p, 0, q, 0});
        }
    }
    if (c.wants("semiclassical") && c.semiclassical.points.empty())
        fail(root, "semiclassical", "metric 'semiclassical' needs a (p, q) set");

    if (auto so = root["sobolev"]) {
        allow_keys(so, "sobolev", {"s", "a"});
        read(so, "s", "sobolev", c.sobolev.s);
        read(so, "a", "sobolev", c.sobolev.a);
        if (c.sobolev.s < 0 || c.sobolev.s > 5) fail(so["s"], "sobolev.s", "must be in 0..5");
        if (c.sobolev.a < 0 || c.sobolev.a > 4) fail(so["a"], "sobolev.a", "must be in 0..4");
    }

    read(root, "seed", "", c.seed);
    read(root, "output_dir", "", c.output_dir);
    if (auto m = root["mode"]) c.mode = choice<VlasovMode>(m, "mode", {{"grid", VlasovMode::grid},
                                                                      {"characteristics", VlasovMode::characteristics}});
    if (auto r = root["resources"]) {
        allow_keys(r, "resources", {"memory_limit_gb"});
        c.memory_limit_gb = positive(r, "memory_limit_gb", "resources", c.memory_limit_gb);
    }
    if (auto ev = root["evolve"]) {
        allow_keys(ev, "evolve", {"N", "snapshot_every"});
        read(ev, "N", "evolve", c.evolve_N);
        read(ev, "snapshot_every", "evolve", c.snapshot_every);
        if (c.evolve_N < 0 || c.snapshot_every < 0) fail(ev, "evolve", "values must be >= 0");
    }
    return c;
}

inline RunConfig parse_config_text(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("config:" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                          ": syntax error: " + e.msg);
    }
    return parse_config(root);
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config_text(ss.str());
    } catch (const ConfigError& e) {
        std::string msg = e.what();
        if (msg.rfind("config", 0) == 0) msg = path.string() + msg.substr(6);
        throw ConfigError(msg);
    }
}

// Per-N grid and lattice checks that need no state construction.
inline void check_static(const RunConfig& c) {
    for (std::size_t i = 0; i < c.N_list.size(); ++i) {
        const auto N = c.N_list[i];
        const int M = c.grid_M(N);
        if (M < 8 || M % 2) throw ConfigError("grid for N=" + std::to_string(N) + ": M=" + std::to_string(M) + " invalid");
        SpatialGrid g(c.dim, M, c.L);
        const double eps = c.epsilon(i);
        auto pg = PhaseSpaceGrid::dual(g, eps);
        if (c.M_v && *c.M_v != pg.Mv())
            throw ConfigError("grid.M_v=" + std::to_string(*c.M_v) + " differs from the eps-dual value " +
                              std::to_string(pg.Mv()) + " at N=" + std::to_string(N));
        if (c.v_max && std::abs(*c.v_max - pg.v_max()) > 1e-9 * pg.v_max())
            throw ConfigError("grid.v_max=" + std::to_string(*c.v_max) + " differs from the eps-dual value " +
                              std::to_string(pg.v_max()) + " at N=" + std::to_string(N));
        if (c.initial.kind == InitialKind::coherent) {
            double delta = c.initial.coherent.delta_rule == DeltaRule::sqrt_eps ? std::sqrt(eps) : c.initial.coherent.delta;
            CoherentParams{delta, eps, N}.validate(g);
        }
        for (const auto& pt : c.semiclassical.points) {
            double p[2] = {pt[0], pt[1]}, q[2] = {pt[2], pt[3]};
            lattice_shift(g, eps, std::span<const double>(p, c.dim), std::span<const double>(q, c.dim));
        }
    }
}

struct ResourceEstimate {
    double kernel_bytes = 0;  // one dense state, 16 M^(2 dim)
    double peak_bytes = 0;
};

// Largest point of the sweep; the peak counts the live kernels of one comparison point.
inline ResourceEstimate estimate_resources(const RunConfig& c) {
    ResourceEstimate r;
    const int M = c.grid_M(c.N_list.back());
    const double n = std::pow(static_cast<double>(M), c.dim);
    r.kernel_bytes = 16 * n * n;
    r.peak_bytes = 6 * r.kernel_bytes + 8 * 8 * n * n;
    return r;
}

} // namespace hvlab::harness
