#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "classical.hpp"
#include "kernel.hpp"
#include "potential.hpp"
#include "quantum.hpp"

namespace hvlab {

struct HartreeOptions {
    double dt = 1e-3;
    bool include_exchange = false;
    int record_every = 1;
    double phase_factor = 0.1;      // dt * ||V * rho||_inf / eps must stay below this
    double transport_factor = 0.25; // dt * v_max / L must stay below this
    bool snapshot_metrics = false;  // trace and HS norm of omega at each record (dense eigensolve)
    bool keep_states = false;       // store every recorded kernel, not just the last
};

struct HartreeStepBound {
    double dt_max = 0;
    double phase_limit = 0;
    double transport_limit = 0;
    double mean_field_sup = 0;
};

namespace detail {

inline std::vector<double> kernel_density(const KernelArray& K, std::uint64_t N) {
    const std::size_t n = K.grid().size();
    std::vector<double> rho(n);
    for (std::size_t i = 0; i < n; ++i) rho[i] = K(i, i).real() / static_cast<double>(N);
    return rho;
}

inline double sup_abs(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// |k|^2 per natural flat index.
inline std::vector<double> wavenumber_sq(const SpatialGrid& g) {
    std::vector<double> k2(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto [m0, m1] = g.unflatten(i);
        double a = g.k_of(m0);
        double b = g.dim() == 2 ? g.k_of(m1) : 0.0;
        k2[i] = a * a + b * b;
    }
    return k2;
}

} // namespace detail

inline HartreeStepBound hartree_dt_bound(const KernelArray& K, std::uint64_t N, double eps,
                                         const Potential& V, const HartreeOptions& opts) {
    const auto& g = K.grid();
    HartreeStepBound b;
    b.mean_field_sup = V.is_zero() ? 0.0 : detail::sup_abs(convolve_periodic(detail::kernel_density(K, N), V));
    const double vmax = eps * pi * g.M() / g.L();
    b.phase_limit = b.mean_field_sup > 0 ? opts.phase_factor * eps / b.mean_field_sup
                                         : std::numeric_limits<double>::infinity();
    b.transport_limit = opts.transport_factor * g.L() / vmax;
    b.dt_max = std::min(b.phase_limit, b.transport_limit);
    return b;
}

inline HartreeStepBound hartree_dt_bound(const DensityKernel& omega, const Potential& V,
                                         const HartreeOptions& opts) {
    return hartree_dt_bound(omega.kernel(), omega.N(), omega.eps(), V, opts);
}

// Split-step propagator for i eps d_t omega = [-eps^2 Laplacian + V * rho (- X), omega].
class HartreePropagator {
public:
    HartreePropagator(const SpatialGrid& g, const Potential& V, std::uint64_t N, double eps,
                      HartreeOptions opts)
        : g_(g), V_(V), N_(N), eps_(eps), opts_(opts), k2_(detail::wavenumber_sq(g)) {
        require_same_grid(g, V.grid(), "hartree");
        if (!(opts.dt > 0) || !std::isfinite(opts.dt)) throw ConfigError("hartree: dt must be positive");
        if (opts.record_every < 1) throw ConfigError("hartree: record_every must be >= 1");
    }

    const HartreeOptions& options() const { return opts_; }

    // omega -> e^{i tau eps Lap} omega e^{-i tau eps Lap}.
    void kinetic(KernelArray& K, double tau) const {
        const std::size_t n = g_.size();
        std::vector<cplx> a(n);
        for (std::size_t i = 0; i < n; ++i) a[i] = std::polar(1.0, -tau * eps_ * k2_[i]);
        auto& data = K.data();
        detail::kernel_to_momentum(data, g_);
        parallel::for_chunks(n, [&](std::size_t b, std::size_t e, unsigned) {
            for (std::size_t i = b; i < e; ++i) {
                cplx* row = &data[i * n];
                for (std::size_t j = 0; j < n; ++j) row[j] *= a[i] * std::conj(a[j]);
            }
        });
        detail::kernel_from_momentum(data, g_);
    }

    // Mean-field phase conjugation with rho taken from the current diagonal, then exchange.
    void potential(KernelArray& K, double tau) const {
        if (V_.is_zero()) return;
        const std::size_t n = g_.size();
        auto U = convolve_periodic(detail::kernel_density(K, N_), V_);
        std::vector<cplx> a(n);
        for (std::size_t i = 0; i < n; ++i) a[i] = std::polar(1.0, -tau * U[i] / eps_);
        auto& data = K.data();
        parallel::for_chunks(n, [&](std::size_t b, std::size_t e, unsigned) {
            for (std::size_t i = b; i < e; ++i) {
                cplx* row = &data[i * n];
                for (std::size_t j = 0; j < n; ++j) row[j] *= a[i] * std::conj(a[j]);
            }
        });
        if (opts_.include_exchange) exchange(K, tau);
    }

    // Conjugation by exp(+i tau X / eps), X the exchange operator of the current state.
    void exchange(KernelArray& K, double tau) const {
        const int n = K.n();
        KernelArray X(g_);
        const double invN = 1.0 / static_cast<double>(N_);
        for (std::size_t i = 0; i < g_.size(); ++i) {
            auto [i0, i1] = g_.unflatten(i);
            for (std::size_t j = 0; j < g_.size(); ++j) {
                auto [j0, j1] = g_.unflatten(j);
                X(i, j) = K(i, j) * (V_.at_displacement(i0 - j0, i1 - j1) * invN);
            }
        }
        auto es = linalg::hermitian_eigensystem(X.operator_matrix(), n);
        auto G = linalg::spectral_map(es, n, [&](double l) { return std::polar(1.0, tau * l / eps_); });
        auto GK = linalg::matmul(G, linalg::Op::none, K.data(), linalg::Op::none, n);
        K.data() = linalg::matmul(GK, linalg::Op::none, G, linalg::Op::conj_trans, n);
    }

    // Full Strang step: half kinetic, potential, half kinetic.
    void step(KernelArray& K) const {
        kinetic(K, opts_.dt / 2);
        potential(K, opts_.dt);
        kinetic(K, opts_.dt / 2);
    }

    // `count` Strang steps with the inner kinetic halves merged.
    void steps(KernelArray& K, int count, int first_index = 0) const {
        if (count <= 0) return;
        kinetic(K, opts_.dt / 2);
        for (int s = 0; s < count; ++s) {
            potential(K, opts_.dt);
            kinetic(K, s + 1 == count ? opts_.dt / 2 : opts_.dt);
            check_finite(K, first_index + s + 1);
        }
    }

    double energy(const KernelArray& K) const {
        const std::size_t n = g_.size();
        std::vector<cplx> a(K.data());
        detail::kernel_to_momentum(a, g_);
        double kin = 0;
        for (std::size_t i = 0; i < n; ++i) kin += k2_[i] * a[i * n + i].real();
        kin *= eps_ * eps_ * g_.cell_volume() / static_cast<double>(n);
        if (V_.is_zero()) return kin;
        auto rho = detail::kernel_density(K, N_);
        auto U = convolve_periodic(rho, V_);
        double pot = 0;
        for (std::size_t i = 0; i < n; ++i) pot += rho[i] * U[i];
        return kin + 0.5 * static_cast<double>(N_) * pot * g_.cell_volume();
    }

private:
    void check_finite(const KernelArray& K, int step_index) const {
        for (std::size_t i = 0; i < g_.size(); ++i) {
            const cplx& z = K(i, i);
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw NumericalError("hartree: non-finite state at step " + std::to_string(step_index));
        }
    }

    SpatialGrid g_;
    Potential V_;
    std::uint64_t N_;
    double eps_;
    HartreeOptions opts_;
    std::vector<double> k2_;
};

inline void require_dt_within_bound(const HartreeStepBound& b, double dt) {
    if (dt > b.dt_max * (1 + 1e-12))
        throw ConfigError("hartree: dt = " + std::to_string(dt) + " exceeds the stability bound " +
                          std::to_string(b.dt_max) + " (phase " + std::to_string(b.phase_limit) +
                          ", transport " + std::to_string(b.transport_limit) + ")");
}

inline DensityKernel hartree_step(const DensityKernel& omega, const Potential& V, const HartreeOptions& opts) {
    require_dt_within_bound(hartree_dt_bound(omega, V, opts), opts.dt);
    HartreePropagator P(omega.grid(), V, omega.N(), omega.eps(), opts);
    KernelArray K = omega.kernel();
    P.steps(K, 1);
    hermitize(K);
    return DensityKernel(std::move(K), omega.N(), omega.eps());
}

struct HartreeRecord {
    double t = 0;
    double trace = 0;
    double energy = 0;
    OperatorMetricSet metrics;
};

struct HartreeTrajectory {
    std::vector<HartreeRecord> records;
    std::vector<DensityKernel> states;  // every record when keep_states, else only the last
    HartreeStepBound bound;
    double dt = 0;
    int steps = 0;
    const DensityKernel& final_state() const { return states.back(); }
};

using HartreeObserver = std::function<void(const HartreeRecord&, const KernelArray&)>;

// Evolves to T with n = ceil(T / dt) equal steps of T / n.
inline HartreeTrajectory evolve_hartree(const DensityKernel& omega0, const Potential& V, double T,
                                        HartreeOptions opts, const HartreeObserver& observer = {}) {
    if (!(T >= 0) || !std::isfinite(T)) throw ConfigError("hartree: T must be >= 0");
    HartreeTrajectory traj;
    traj.bound = hartree_dt_bound(omega0, V, opts);
    require_dt_within_bound(traj.bound, opts.dt);
    const int nsteps = T > 0 ? static_cast<int>(std::ceil(T / opts.dt - 1e-9)) : 0;
    if (nsteps > 0) opts.dt = T / nsteps;
    traj.dt = opts.dt;
    traj.steps = nsteps;
    HartreePropagator P(omega0.grid(), V, omega0.N(), omega0.eps(), opts);
    const double h = omega0.grid().cell_volume();
    auto record = [&](int s, const KernelArray& K, bool last) {
        HartreeRecord r;
        r.t = s == nsteps ? T : s * opts.dt;
        double tr = 0;
        for (std::size_t i = 0; i < omega0.grid().size(); ++i) tr += K(i, i).real();
        r.trace = tr * h;
        r.energy = P.energy(K);
        if (opts.snapshot_metrics) r.metrics = operator_metrics(K, r.t);
        r.metrics.t = r.t;
        traj.records.push_back(r);
        if (observer) observer(r, K);
        if (opts.keep_states || last) {
            KernelArray H = K;
            hermitize(H);
            traj.states.emplace_back(std::move(H), omega0.N(), omega0.eps());
        }
    };
    KernelArray K = omega0.kernel();
    record(0, K, nsteps == 0);
    int done = 0;
    while (done < nsteps) {
        int chunk = std::min(opts.record_every, nsteps - done);
        P.steps(K, chunk, done);
        done += chunk;
        record(done, K, done == nsteps);
    }
    return traj;
}

struct ResidualReport {
    KernelArray B;
    double trace_norm = 0;
    double hs_norm = 0;
};

// B(x; y) = [U(x) - U(y) - grad U((x + y)/2).(x - y)] omega(x; y), with U and grad U sampled on the
// grid with doubled M; x - y is the minimal-image displacement.
inline KernelArray residual_kernel(const KernelArray& omega, std::span<const double> U_fine,
                                   const std::vector<std::vector<double>>& grad_fine) {
    const auto& g = omega.grid();
    const int M = g.M(), M2 = 2 * M, d = g.dim();
    SpatialGrid fine(d, M2, g.L());
    detail::require_size(U_fine.size(), fine.size(), "residual_kernel");
    if (static_cast<int>(grad_fine.size()) != d) throw ConfigError("residual_kernel: need one gradient per axis");
    for (const auto& gr : grad_fine) detail::require_size(gr.size(), fine.size(), "residual_kernel");
    const std::size_t n = g.size();
    KernelArray B(g);
    parallel::for_chunks(n, [&](std::size_t b, std::size_t e, unsigned) {
        for (std::size_t i = b; i < e; ++i) {
            auto xi = g.unflatten(i);
            const double Ux = U_fine[fine.flatten(2 * xi[0], d == 2 ? 2 * xi[1] : 0)];
            for (std::size_t j = 0; j < n; ++j) {
                auto yj = g.unflatten(j);
                int s[2] = {0, 0}, mid[2] = {0, 0};
                for (int a = 0; a < d; ++a) {
                    s[a] = fft::centered(((xi[a] - yj[a]) % M + M) % M, M);
                    mid[a] = ((2 * yj[a] + s[a]) % M2 + M2) % M2;
                }
                const double Uy = U_fine[fine.flatten(2 * yj[0], d == 2 ? 2 * yj[1] : 0)];
                const std::size_t m = fine.flatten(mid[0], d == 2 ? mid[1] : 0);
                double bracket = Ux - Uy;
                for (int a = 0; a < d; ++a) bracket -= grad_fine[a][m] * (s[a] * g.h());
                B(i, j) = omega(i, j) * bracket;
            }
        }
    });
    return B;
}

inline ResidualReport residual_operator(const WignerFunction& W, const Potential& V, std::uint64_t N, double eps) {
    const auto& g = W.grid().spatial();
    require_same_grid(g, V.grid(), "residual_operator");
    ResidualReport r;
    if (V.is_zero()) {
        r.B = KernelArray(g);
        return r;
    }
    auto omega = weyl_quantize(W, N, eps);
    auto U = convolve_periodic(vlasov_density(W), V);
    auto U_fine = spectral_refine(U, g);
    std::vector<std::vector<double>> grad(g.dim());
    for (int a = 0; a < g.dim(); ++a) grad[a] = spectral_refine(U, g, a);
    r.B = residual_kernel(omega.kernel(), U_fine, grad);
    r.trace_norm = trace_norm(r.B);
    r.hs_norm = hs_norm(r.B);
    return r;
}

} // namespace hvlab
