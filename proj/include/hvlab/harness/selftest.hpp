#pragma once

#include <chrono>
#include <functional>

#include "../samples.hpp"
#include "compare.hpp"

namespace hvlab::harness {

struct SelftestResult {
    std::string name;
    bool passed = false;
    double value = 0;  // measured deviation
    double limit = 0;
    std::string message;  // exception text when the check threw
};

namespace detail {

inline double rel_frobenius(const KernelArray& a, const KernelArray& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        num += std::norm(a.data()[i] - b.data()[i]);
        den += std::norm(b.data()[i]);
    }
    return std::sqrt(num / den);
}

inline double selftest_zero_time() {
    auto c = parse_config_text(R"(schema_version: 1
grid: {M_per_N: 16, L: 10}
N_list: [2, 4, 8]
potential: {kind: gaussian, amplitude: 0.5, width: 1}
initial:
  kind: coherent
  coherent: {sigma_r: 1.25, sigma_p: 0.8}
T: 0
metrics: [trace, hs, l2_wigner]
)");
    auto r = run_comparison(c);
    if (!r.errors.empty()) throw NumericalError(r.errors.front().message);
    double worst = 0;
    for (const auto& row : r.rows) worst = std::max(worst, std::abs(row.normalized));
    return worst;
}

} // namespace detail

// Exact identities of the transforms, solvers and report plumbing on small grids.
inline std::vector<SelftestResult> run_selftest() {
    std::vector<std::tuple<std::string, double, std::function<double()>>> checks;
    const SpatialGrid g(1, 64, 8.0);
    const std::uint64_t N = 4;
    const double eps = 0.25;

    checks.emplace_back("weyl_quantize inverts wigner_transform", 1e-12, [&] {
        double worst = 0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto omega = random_smooth_state(g, N, eps, seed);
            auto back = weyl_quantize(wigner_transform(omega), N, eps);
            worst = std::max(worst, detail::rel_frobenius(back.kernel(), omega.kernel()));
        }
        return worst;
    });
    checks.emplace_back("wigner function has unit mass", 1e-8, [&] {
        return std::abs(wigner_transform(random_smooth_state(g, N, eps, 7)).mass() - 1);
    });
    checks.emplace_back("hs norm equals scaled wigner L2 norm", 1e-8, [&] {
        auto omega = random_smooth_state(g, N, eps, 11);
        double rhs = hs_wigner_constant(1) * std::sqrt(static_cast<double>(N)) * lp_norm(wigner_transform(omega), 2);
        return std::abs(hs_norm(omega) / rhs - 1);
    });
    checks.emplace_back("commutators equal scaled wigner gradients", 1e-6, [&] {
        auto omega = random_smooth_state(g, N, eps, 13);
        auto W = wigner_transform(omega);
        const double c = hs_wigner_constant(1) * eps * std::sqrt(static_cast<double>(N));
        return std::max(std::abs(hs_norm(commutator_position(omega)) / (c * gradient_l2(W, false)) - 1),
                        std::abs(hs_norm(commutator_momentum(omega)) / (c * gradient_l2(W, true)) - 1));
    });
    checks.emplace_back("semiclassical expectation equals N times fourier_wigner", 1e-8, [&] {
        auto omega = random_smooth_state(g, N, eps, 17);
        auto W = wigner_transform(omega);
        double worst = 0;
        for (int mp = -2; mp <= 2; ++mp)
            for (int tq = -2; tq <= 2; ++tq) {
                double p[1] = {g.wavenumber(mp)}, q[1] = {tq * g.h() / eps};
                cplx a = semiclassical_expectation(omega, p, q);
                cplx b = static_cast<double>(N) * fourier_wigner(W, p, q);
                worst = std::max(worst, std::abs(a - b) / (std::abs(b) + 1e-4));
            }
        return worst;
    });
    checks.emplace_back("trace norm of a valid state equals N", 1e-9, [&] {
        return std::abs(trace_norm(random_smooth_state(g, N, eps, 19)) / N - 1);
    });
    checks.emplace_back("vlasov grid step conserves mass", 1e-12, [&] {
        auto pg = PhaseSpaceGrid(g, 96, 6.0);
        auto W = gaussian_phase_density(pg, {{0.3, 0}, {0.2, 0}}, {0.8, 0.6}).as_wigner();
        Potential V(g, {PotentialKind::gaussian, 1.0, 1.0});
        VlasovOptions o;
        o.dt = 0.05;
        return std::abs(evolve_vlasov(W, V, 0.5, o).final_state().mass() - W.mass());
    });
    checks.emplace_back("characteristics are reversible", 1e-12, [&] {
        auto pg = PhaseSpaceGrid(g, 64, 6.0);
        auto W = gaussian_phase_density(pg, {{0.3, 0}, {0.2, 0}}, {0.8, 0.6}).as_wigner();
        Potential V(g, {PotentialKind::gaussian, 1.0, 1.0});
        auto e0 = ensemble_from_wigner(W);
        auto e = e0;
        for (int s = 0; s < 20; ++s) characteristics_step_inplace(e, V, 0.05);
        for (int s = 0; s < 20; ++s) characteristics_step_inplace(e, V, -0.05);
        double worst = 0;
        for (std::size_t i = 0; i < e.X.size(); ++i)
            worst = std::max({worst, std::abs(std::remainder(e.X[i] - e0.X[i], g.L())), std::abs(e.V[i] - e0.V[i])});
        return worst;
    });
    checks.emplace_back("fit_rate recovers an exact power law", 1e-12, [] {
        auto f = fit_rate({{0.1, 0.1}, {0.05, 0.05}, {0.025, 0.025}});
        auto q = fit_rate({{0.2, 0.04}, {0.1, 0.01}, {0.05, 0.0025}});
        return std::max({std::abs(f.slope - 1), std::abs(f.intercept), std::abs(q.slope - 2)});
    });
    checks.emplace_back("metrics csv round trip", 0, [] {
        RateReport r;
        r.rows = {{4, 0.25, 0.5, "hs", 0.1 / 3, 1.0 / 7}, {8, 0.125, 0.5, "error", std::nan(""), std::nan("")}};
        RateReport empty;
        bool ok = parse_metrics_csv(metrics_csv(r)) == r.rows &&
                  metrics_csv(empty) == std::string(csv_header) + "\n";
        return ok ? 0.0 : 1.0;
    });
    checks.emplace_back("comparison at T=0 gives zero differences", 1e-10, detail::selftest_zero_time);

    std::vector<SelftestResult> out;
    for (auto& [name, limit, fn] : checks) {
        SelftestResult r{name, false, 0, limit, {}};
        try {
            r.value = fn();
            r.passed = r.value <= limit;
        } catch (const std::exception& e) {
            r.message = e.what();
        }
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace hvlab::harness
