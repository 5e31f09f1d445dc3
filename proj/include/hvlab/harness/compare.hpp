#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <thread>

#include "../io.hpp"
#include "config.hpp"
#include "report.hpp"

namespace hvlab::harness {

inline nlohmann::json yaml_to_json(const YAML::Node& n) {
    switch (n.Type()) {
        case YAML::NodeType::Map: {
            nlohmann::json j = nlohmann::json::object();
            for (auto it = n.begin(); it != n.end(); ++it) j[it->first.as<std::string>()] = yaml_to_json(it->second);
            return j;
        }
        case YAML::NodeType::Sequence: {
            nlohmann::json j = nlohmann::json::array();
            for (const auto& e : n) j.push_back(yaml_to_json(e));
            return j;
        }
        case YAML::NodeType::Scalar: {
            const auto& s = n.Scalar();
            if (n.Tag() == "!") return s;  // quoted
            try {
                std::size_t used = 0;
                long long i = std::stoll(s, &used);
                if (used == s.size()) return i;
                double d = std::stod(s, &used);
                if (used == s.size()) return d;
            } catch (const std::exception&) {
            }
            if (s == "true") return true;
            if (s == "false") return false;
            return s;
        }
        default:
            return nullptr;
    }
}

// Initial data for one sweep point.
struct PointSetup {
    std::uint64_t N = 0;
    double eps = 0;
    SpatialGrid grid;
    DensityKernel omega;
    std::optional<WignerFunction> limit_density;  // the analytic M for coherent data
    nlohmann::json info = nlohmann::json::object();
};

inline PointSetup build_point(const RunConfig& c, std::size_t i) {
    PointSetup s;
    s.N = c.N_list[i];
    s.eps = c.epsilon(i);
    s.grid = SpatialGrid(c.dim, c.grid_M(s.N), c.L);
    s.info["M"] = s.grid.M();
    s.info["epsilon"] = s.eps;
    switch (c.initial.kind) {
        case InitialKind::coherent: {
            const auto& cs = c.initial.coherent;
            auto pg = PhaseSpaceGrid::dual(s.grid, s.eps);
            auto Md = gaussian_phase_density(pg, cs.center, cs.widths, cs.cap);
            double delta = cs.delta_rule == DeltaRule::sqrt_eps ? std::sqrt(s.eps) : cs.delta;
            auto b = coherent_superposition_report(Md, {delta, s.eps, s.N});
            s.info["delta"] = delta;
            s.info["trace_rescale"] = b.trace_rescale;
            s.info["max_eigenvalue"] = b.spectrum.max_eigenvalue;
            s.omega = std::move(b.omega);
            s.limit_density = Md.as_wigner();
            break;
        }
        case InitialKind::fermi_sea: {
            const auto& fs = c.initial.fermi;
            auto rho = gaussian_profile(s.grid, s.N, fs.profile_width);
            auto W = fermi_sea_wigner(s.grid, rho, s.N, s.eps, {fs.height, fs.c});
            auto st = fermi_sea_state(W.W, s.N, s.eps, fs.purification);
            s.info["fermi_c"] = W.c;
            s.info["fermi_renormalization"] = W.renormalization;
            s.info["max_fermi_velocity"] = W.max_fermi_velocity;
            s.info["intermediate_fraction"] = st.intermediate_fraction;
            s.omega = std::move(st.omega);
            break;
        }
        case InitialKind::checkpoint: {
            std::string path = c.initial.checkpoint;
            if (auto p = path.find("{N}"); p != std::string::npos) path.replace(p, 3, std::to_string(s.N));
            s.omega = io::read_kernel(path);
            if (s.omega.N() != s.N || s.omega.grid().M() != s.grid.M() || s.omega.grid().dim() != c.dim ||
                std::abs(s.omega.grid().L() - c.L) > 1e-12 * c.L || std::abs(s.omega.eps() - s.eps) > 1e-12 * s.eps)
                throw ConfigError("checkpoint " + path + " does not match the configured grid, N or eps");
            s.info["checkpoint"] = path;
            break;
        }
    }
    return s;
}

inline HartreeOptions hartree_options(const RunConfig& c) {
    HartreeOptions o;
    o.include_exchange = c.time.exchange;
    o.phase_factor = c.time.phase_factor;
    o.transport_factor = c.time.transport_factor;
    o.record_every = 1 << 30;
    return o;
}

// Hartree and Vlasov step sizes at one point.
inline std::pair<double, double> step_sizes(const RunConfig& c, const DensityKernel& omega, const Potential& V,
                                            HartreeOptions& o, nlohmann::json& info) {
    auto bound = hartree_dt_bound(omega, V, o);
    o.dt = c.time.rule == DtRule::fixed ? c.time.dt : c.time.fraction * bound.dt_max;
    require_dt_within_bound(bound, o.dt);
    info["dt_bound"] = bound.dt_max;
    info["dt"] = o.dt;
    double vdt = c.time.vlasov_dt > 0 ? c.time.vlasov_dt : o.dt;
    info["vlasov_dt"] = vdt;
    return {o.dt, vdt};
}

namespace detail {

inline void add_row(std::vector<MetricRow>& rows, const PointSetup& s, double t, const std::string& name, double raw,
                    double norm) {
    rows.push_back({s.N, s.eps, t, name, raw, norm});
}

inline std::vector<double> record_times(const RunConfig& c, bool sweep) {
    std::vector<double> ts;
    if (sweep)
        for (double t : c.times)
            if (t < c.T) ts.push_back(t);
    ts.push_back(c.T);
    return ts;
}

} // namespace detail

// Metrics between the Hartree state and the Vlasov solution at one time.
inline void point_metrics(const RunConfig& c, const PointSetup& s, const Potential& V, double t,
                          const DensityKernel& omega_t, const WignerFunction& W_tilde,
                          const std::optional<WignerFunction>& W_limit, std::vector<MetricRow>& rows) {
    const double N = static_cast<double>(s.N), sqN = std::sqrt(N), eps = s.eps;
    // Only the Wigner metrics need W_t; the operator and semiclassical metrics read omega_t directly.
    std::optional<WignerFunction> W_t;
    if (c.wants("l2_wigner") || c.wants("l2_limit")) W_t = wigner_transform(omega_t);
    std::optional<KernelArray> D;
    if (c.wants("trace") || c.wants("hs")) {
        KernelArray Q = weyl_kernel(W_tilde, N, eps);
        hermitize(Q);
        KernelArray diff = omega_t.kernel();
        for (std::size_t k = 0; k < diff.data().size(); ++k) diff.data()[k] -= Q.data()[k];
        D = std::move(diff);
    }
    for (const auto& m : c.metrics) {
        if (m == "trace") {
            double r = trace_norm(*D);
            detail::add_row(rows, s, t, m, r, r / N);
        } else if (m == "hs") {
            double r = hs_norm(*D);
            detail::add_row(rows, s, t, m, r, r / sqN);
        } else if (m == "l2_wigner") {
            double r = lp_norm(*W_t - W_tilde, 2);
            detail::add_row(rows, s, t, m, r, r);
        } else if (m == "l2_limit") {
            double r = lp_norm(*W_t - *W_limit, 2);
            detail::add_row(rows, s, t, m, r, r);
        } else if (m == "semiclassical") {
            double best_raw = 0, best = -1;
            for (const auto& pt : c.semiclassical.points) {
                std::span<const double> p(pt.data(), c.dim), q(pt.data() + 2, c.dim);
                cplx a = semiclassical_expectation(omega_t, p, q);
                cplx b = N * fourier_wigner(W_tilde, p, q);
                double pn = 0, qn = 0;
                for (int k = 0; k < c.dim; ++k) {
                    pn += p[k] * p[k];
                    qn += q[k] * q[k];
                }
                double raw = std::abs(a - b);
                double norm = raw / (N * std::pow(1 + std::sqrt(pn) + std::sqrt(qn), 2));
                if (norm > best) {
                    best = norm;
                    best_raw = raw;
                }
            }
            detail::add_row(rows, s, t, m, best_raw, best);
        } else if (m == "commutators") {
            double cx = hs_norm(commutator_position(omega_t));
            double cp = hs_norm(commutator_momentum(omega_t));
            detail::add_row(rows, s, t, "commutator_x", cx, cx / (eps * sqN));
            detail::add_row(rows, s, t, "commutator_p", cp, cp / (eps * sqN));
        } else if (m == "sobolev") {
            double r = weighted_sobolev_norm(W_tilde, c.sobolev.s, c.sobolev.a);
            detail::add_row(rows, s, t, m, r, r);
        } else if (m == "residual_B") {
            auto B = residual_operator(W_tilde, V, s.N, eps);
            detail::add_row(rows, s, t, m, B.hs_norm, B.hs_norm / sqN);
        }
    }
}

struct PointResult {
    std::vector<MetricRow> rows;
    nlohmann::json info = nlohmann::json::object();
    std::optional<ErrorRow> error;
    double seconds = 0;
};

inline PointResult run_point(const RunConfig& c, std::size_t i, bool sweep) {
    PointResult out;
    auto t0 = std::chrono::steady_clock::now();
    try {
        auto s = build_point(c, i);
        Potential V(s.grid, c.potential);
        auto ho = hartree_options(c);
        auto [hdt, vdt] = step_sizes(c, s.omega, V, ho, s.info);
        VlasovOptions vo;
        vo.dt = vdt;
        vo.mode = c.mode;
        vo.record_every = 1 << 30;
        auto W_N = wigner_transform(s.omega);
        DensityKernel omega = s.omega;
        WignerFunction W_tilde = W_N;
        std::optional<WignerFunction> W_lim;
        if (c.wants("l2_limit")) W_lim = *s.limit_density;
        double t_prev = 0;
        int hsteps = 0, vsteps = 0;
        for (double t : detail::record_times(c, sweep)) {
            const double span = t - t_prev;
            if (span > 0) {
                ho.dt = hdt;
                auto ht = evolve_hartree(omega, V, span, ho);
                hsteps += ht.steps;
                omega = ht.final_state();
                vo.dt = vdt;
                auto vt = evolve_vlasov(W_tilde, V, span, vo);
                vsteps += vt.steps;
                W_tilde = vt.final_state();
                if (W_lim) W_lim = evolve_vlasov(*W_lim, V, span, vo).final_state();
            }
            point_metrics(c, s, V, t, omega, W_tilde, W_lim, out.rows);
            t_prev = t;
        }
        s.info["hartree_steps"] = hsteps;
        s.info["vlasov_steps"] = vsteps;
        s.info["final_trace"] = omega.trace();
        out.info = std::move(s.info);
    } catch (const NumericalError& e) {
        out.error = ErrorRow{c.N_list[i], "numerical", e.what()};
    } catch (const DataError& e) {
        out.error = ErrorRow{c.N_list[i], "data", e.what()};
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// Fits normalized metrics against eps at the final time.
inline void fit_report(RateReport& r, const RunConfig& c) {
    std::vector<std::string> names;
    for (const auto& row : r.rows)
        if (row.t == c.T && row.metric != "error" && std::find(names.begin(), names.end(), row.metric) == names.end()) names.push_back(row.metric);
    for (const auto& name : names) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& row : r.select(name, c.T)) pts.emplace_back(row.epsilon, row.normalized);
        if (pts.size() < 3) continue;
        try {
            r.fits[name] = fit_rate(pts);
        } catch (const NumericalError& e) {
            r.fit_errors[name] = e.what();
        }
    }
}

// Runs every N of the sweep, up to `threads` points at a time; rows are assembled in N order.
inline RateReport run_comparison(const RunConfig& c, unsigned threads = 1, bool sweep = false) {
    check_static(c);
    auto est = estimate_resources(c);
    const double concurrent = std::min<double>(std::max(1u, threads), static_cast<double>(c.N_list.size()));
    if (est.peak_bytes > c.memory_limit_gb * 1e9)
        throw ConfigError("resource estimate " + std::to_string(est.peak_bytes / 1e9) + " GB per point exceeds limit " +
                          std::to_string(c.memory_limit_gb) + " GB");
    if (sweep && c.N_list.size() < 3) throw ConfigError("sweep needs at least 3 values in N_list");
    std::vector<PointResult> results(c.N_list.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < c.N_list.size();) results[i] = run_point(c, i, sweep);
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned k = 1; k < concurrent; ++k) pool.emplace_back(worker);
        worker();
    }
    RateReport r;
    r.config_echo = yaml_to_json(c.source);
    r.peak_bytes_estimate = est.peak_bytes * concurrent;
    for (std::size_t i = 0; i < results.size(); ++i) {
        auto& res = results[i];
        const auto N = c.N_list[i];
        r.wall_seconds[N] = res.seconds;
        r.point_info[N] = res.info;
        if (res.error) {
            r.errors.push_back(*res.error);
            r.rows.push_back({N, c.epsilon(i), c.T, "error", std::nan(""), std::nan("")});
            continue;
        }
        r.rows.insert(r.rows.end(), res.rows.begin(), res.rows.end());
    }
    fit_report(r, c);
    r.warnings = diag::drain();
    return r;
}

struct HalvingCheck {
    std::uint64_t N = 0;
    double dt = 0;
    double t = 0;
    double difference = 0;  // ||omega_dt - omega_{dt/2}||_HS / ||omega_dt||_HS after t
};

// Short Hartree run at the smallest N with dt and dt/2.
inline HalvingCheck dt_halving_check(const RunConfig& c, int steps = 8) {
    auto s = build_point(c, 0);
    Potential V(s.grid, c.potential);
    auto ho = hartree_options(c);
    step_sizes(c, s.omega, V, ho, s.info);
    HalvingCheck h{s.N, ho.dt, std::min(c.T > 0 ? c.T : ho.dt * steps, ho.dt * steps), 0};
    auto a = evolve_hartree(s.omega, V, h.t, ho).final_state();
    ho.dt /= 2;
    auto b = evolve_hartree(s.omega, V, h.t, ho).final_state();
    h.difference = hs_norm(a.kernel() - b.kernel()) / hs_norm(a);
    return h;
}

struct EvolveSummary {
    std::uint64_t N = 0;
    int hartree_steps = 0;
    int vlasov_steps = 0;
    int snapshots = 0;
};

// Single-N trajectory: trajectory.csv, kernel snapshots and the final classical state.
inline EvolveSummary run_evolve(const RunConfig& c, const std::filesystem::path& out_dir) {
    std::size_t idx = 0;
    if (c.evolve_N > 0) {
        auto it = std::find(c.N_list.begin(), c.N_list.end(), static_cast<std::uint64_t>(c.evolve_N));
        if (it == c.N_list.end()) throw ConfigError("evolve.N=" + std::to_string(c.evolve_N) + " is not in N_list");
        idx = static_cast<std::size_t>(it - c.N_list.begin());
    }
    check_static(c);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    auto s = build_point(c, idx);
    Potential V(s.grid, c.potential);
    auto ho = hartree_options(c);
    auto [hdt, vdt] = step_sizes(c, s.omega, V, ho, s.info);
    ho.record_every = c.snapshot_every > 0 ? c.snapshot_every : 1 << 30;
    ho.snapshot_metrics = true;
    EvolveSummary sum{s.N, 0, 0, 0};
    std::string csv = "t,trace,energy,trace_norm,hs_norm\n";
    auto ht = evolve_hartree(s.omega, V, c.T, ho, [&](const HartreeRecord& r, const KernelArray& K) {
        csv += fmt17(r.t) + "," + fmt17(r.trace) + "," + fmt17(r.energy) + "," + fmt17(r.metrics.trace_norm) + "," +
               fmt17(r.metrics.hs_norm) + "\n";
        if (c.snapshot_every > 0) {
            KernelArray H = K;
            hermitize(H);
            char name[64];
            std::snprintf(name, sizeof name, "omega_t%.6f.skdk", r.t);
            io::write_kernel(out_dir / name, DensityKernel(std::move(H), s.N, s.eps));
            ++sum.snapshots;
        }
    });
    sum.hartree_steps = ht.steps;
    detail::write_file(out_dir / "trajectory.csv", csv);
    io::write_kernel(out_dir / "omega_final.skdk", ht.final_state());
    VlasovOptions vo;
    vo.dt = vdt;
    vo.mode = c.mode;
    vo.record_every = 1 << 30;
    auto W_N = wigner_transform(s.omega);
    io::write_wigner(out_dir / "wigner_initial.skwf", W_N);
    auto vt = evolve_vlasov(W_N, V, c.T, vo);
    sum.vlasov_steps = vt.steps;
    io::write_wigner(out_dir / "vlasov_final.skwf", vt.final_state());
    if (vt.ensemble) io::write_ensemble(out_dir / "ensemble_final.skce", *vt.ensemble);
    return sum;
}

} // namespace hvlab::harness
