#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <span>
#include <vector>

#include "classical.hpp"
#include "kernel.hpp"
#include "potential.hpp"

namespace hvlab {

// Constant c in ||omega||_HS = c sqrt(N) ||W||_2 when N eps^d = 1.
inline double hs_wigner_constant(int dim) { return std::pow(2 * pi, 0.5 * dim); }

namespace detail {

struct ShiftIndex {
    int s0, s1;     // natural
    int c0, c1;     // centered
};

inline ShiftIndex shift_index(const SpatialGrid& g, std::size_t flat) {
    auto [s0, s1] = g.unflatten(flat);
    return {s0, s1, fft::centered(s0, g.M()), g.dim() == 2 ? fft::centered(s1, g.M()) : 0};
}

// e^{sign i pi mu.s / M} for every natural mode mu, for the half-cell shift along a band.
inline void half_shift_phases(const SpatialGrid& g, const ShiftIndex& s, int sign,
                              std::vector<cplx>& out) {
    const int M = g.M();
    out.resize(g.size());
    for_each_mode(g.dim(), M, [&](std::size_t nat, int m0, int m1) {
        double ph = sign * pi * (static_cast<double>(m0) * s.c0 + static_cast<double>(m1) * s.c1) / M;
        out[nat] = std::polar(1.0, ph);
    });
}

inline std::size_t add_shift(const SpatialGrid& g, std::size_t b, const ShiftIndex& s) {
    auto [b0, b1] = g.unflatten(b);
    return g.flatten(g.wrap(b0 + s.s0), g.dim() == 2 ? g.wrap(b1 + s.s1) : 0);
}

// Velocity slot (centered order) of a natural frequency index, flattened.
inline std::size_t velocity_slot(const SpatialGrid& g, std::size_t nat) {
    auto [m0, m1] = g.unflatten(nat);
    const int M = g.M();
    int v0 = (m0 + M / 2) % M;
    int v1 = g.dim() == 2 ? (m1 + M / 2) % M : 0;
    return g.flatten(v0, v1);
}

inline double wigner_prefactor(const SpatialGrid& g, double N, double eps) {
    return g.cell_volume() / (std::pow(2 * pi, g.dim()) * N * std::pow(eps, g.dim()));
}

} // namespace detail

// W(x_j, v_m) from the center/difference re-indexing of the kernel.
inline WignerFunction wigner_transform(const DensityKernel& omega) {
    const auto& g = omega.grid();
    const std::size_t n = g.size();
    if (g.M() % 2 != 0) throw ConfigError("wigner_transform needs even M");
    auto dims = g.fft_dims();
    std::vector<cplx> C(n * n);
    std::vector<cplx> band(n), phase;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t sf = 0; sf < n; ++sf) {
        auto s = detail::shift_index(g, sf);
        for (std::size_t b = 0; b < n; ++b) band[b] = omega(detail::add_shift(g, b, s), b);
        fft::full(band.data(), dims, fft::forward);
        detail::half_shift_phases(g, s, -1, phase);
        for (std::size_t m = 0; m < n; ++m) band[m] *= phase[m];
        fft::full(band.data(), dims, fft::backward);
        for (std::size_t j = 0; j < n; ++j) C[j * n + sf] = band[j] * inv_n;
    }
    fft::many(C.data(), dims, static_cast<int>(n), 1, static_cast<int>(n), fft::forward);
    const double pref = detail::wigner_prefactor(g, static_cast<double>(omega.N()), omega.eps());
    auto pg = PhaseSpaceGrid::dual(g, omega.eps());
    std::vector<double> W(n * n);
    double re_max = 0, im_max = 0;
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t m = 0; m < n; ++m) {
            cplx z = C[j * n + m] * pref;
            W[j * n + detail::velocity_slot(g, m)] = z.real();
            re_max = std::max(re_max, std::abs(z.real()));
            im_max = std::max(im_max, std::abs(z.imag()));
        }
    if (im_max > 1e-8 * re_max)
    {
        char buf[96];
        std::snprintf(buf, sizeof buf, "wigner_transform: imaginary residue %.3e relative (limit 1e-8)", im_max / re_max);
        throw NumericalError(buf);
    }
    return WignerFunction(pg, std::move(W));
}

// Kernel N sum_v W((x+y)/2, v) e^{i v.(x-y)/eps} h_v^d; exact inverse of wigner_transform.
inline KernelArray weyl_kernel(const WignerFunction& W, double N, double eps) {
    const auto& pg = W.grid();
    const auto& g = pg.spatial();
    if (!pg.is_dual_of(eps))
        throw ConfigError("weyl_quantize: velocity lattice is not the eps-dual of the spatial lattice");
    const std::size_t n = g.size();
    auto dims = g.fft_dims();
    std::vector<cplx> C(n * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t m = 0; m < n; ++m) C[j * n + m] = W(j, detail::velocity_slot(g, m));
    fft::many(C.data(), dims, static_cast<int>(n), 1, static_cast<int>(n), fft::backward);
    const double pref = detail::wigner_prefactor(g, N, eps);
    const double cscale = 1.0 / (pref * static_cast<double>(n));
    KernelArray K(g);
    std::vector<cplx> band(n), phase;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t sf = 0; sf < n; ++sf) {
        auto s = detail::shift_index(g, sf);
        for (std::size_t j = 0; j < n; ++j) band[j] = C[j * n + sf] * cscale;
        fft::full(band.data(), dims, fft::forward);
        detail::half_shift_phases(g, s, +1, phase);
        for (std::size_t m = 0; m < n; ++m) band[m] *= phase[m];
        fft::full(band.data(), dims, fft::backward);
        for (std::size_t b = 0; b < n; ++b) K(detail::add_shift(g, b, s), b) = band[b] * inv_n;
    }
    return K;
}

// Restores exact Hermitian symmetry (averages with the adjoint).
inline void hermitize(KernelArray& K) {
    const std::size_t n = K.grid().size();
    for (std::size_t i = 0; i < n; ++i) {
        K(i, i) = cplx(K(i, i).real(), 0.0);
        for (std::size_t j = i + 1; j < n; ++j) {
            cplx a = 0.5 * (K(i, j) + std::conj(K(j, i)));
            K(i, j) = a;
            K(j, i) = std::conj(a);
        }
    }
}

inline DensityKernel weyl_quantize(const WignerFunction& W, std::uint64_t N, double eps) {
    auto K = weyl_kernel(W, static_cast<double>(N), eps);
    hermitize(K);
    return DensityKernel(std::move(K), N, eps);
}

// rho(x_i) = omega(x_i; x_i) / N.
inline std::vector<double> density(const DensityKernel& omega) {
    const auto& g = omega.grid();
    std::vector<double> rho(g.size());
    const double invN = 1.0 / static_cast<double>(omega.N());
    double re_max = 0, im_max = 0, neg = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const cplx& z = omega(i, i);
        rho[i] = z.real() * invN;
        re_max = std::max(re_max, std::abs(z.real()));
        im_max = std::max(im_max, std::abs(z.imag()));
        neg = std::min(neg, rho[i]);
    }
    if (im_max > 1e-12 * std::max(re_max, 1e-300))
        throw NumericalError("density: diagonal not real (imaginary part " + std::to_string(im_max) + ")");
    if (neg < -1e-8) diag::warn("density: negative value " + std::to_string(neg) + " on the diagonal");
    return rho;
}

namespace detail {

inline bool is_hermitian_like(const KernelArray& A, cplx phase, double tol) {
    const int n = A.n();
    double amax = 0, d = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            cplx x = phase * A(i, j);
            cplx y = phase * A(j, i);
            amax = std::max(amax, std::abs(x));
            d = std::max(d, std::abs(x - std::conj(y)));
        }
    return amax == 0 || d <= tol * amax;
}

} // namespace detail

// Sum of singular values of h^d A. Hermitian and anti-Hermitian inputs use the eigensolver.
inline double trace_norm(const KernelArray& A) {
    const int n = A.n();
    auto m = A.operator_matrix();
    bool zero = true;
    for (const auto& z : m) zero = zero && z == cplx(0);
    if (zero) return 0.0;
    for (cplx phase : {cplx(1), cplx(0, 1)}) {
        if (detail::is_hermitian_like(A, phase, 1e-13)) {
            for (auto& z : m) z *= phase;
            auto ev = linalg::hermitian_eigenvalues(std::move(m), n);
            double s = 0;
            for (double x : ev) s += std::abs(x);
            return s;
        }
    }
    auto sv = linalg::singular_values(std::move(m), n);
    double s = 0;
    for (double x : sv) s += x;
    return s;
}

inline double trace_norm(const DensityKernel& omega) { return trace_norm(omega.kernel()); }

inline double hs_norm(const KernelArray& A) {
    double s = 0;
    for (const auto& z : A.data()) s += std::norm(z);
    return A.grid().cell_volume() * std::sqrt(s);
}

inline double hs_norm(const DensityKernel& omega) { return hs_norm(omega.kernel()); }

inline double hs_norm(const std::vector<KernelArray>& per_axis) {
    double s = 0;
    for (const auto& A : per_axis) s += std::pow(hs_norm(A), 2);
    return std::sqrt(s);
}

inline OperatorMetricSet operator_metrics(const KernelArray& A, double t) {
    return {trace_norm(A), hs_norm(A), t};
}

// Per-axis kernels (x_a - y_a) omega(x; y), minimal-image displacement; the ambiguous
// half-box displacement is set to zero.
inline std::vector<KernelArray> commutator_position(const DensityKernel& omega) {
    const auto& g = omega.grid();
    const std::size_t n = g.size();
    const int M = g.M();
    std::vector<KernelArray> out;
    for (int a = 0; a < g.dim(); ++a) {
        KernelArray K(g);
        for (std::size_t i = 0; i < n; ++i) {
            auto xi = g.unflatten(i);
            for (std::size_t j = 0; j < n; ++j) {
                auto yj = g.unflatten(j);
                int s = fft::centered(((xi[a] - yj[a]) % M + M) % M, M);
                if (s == -M / 2) s = 0;
                K(i, j) = omega(i, j) * (s * g.h());
            }
        }
        out.push_back(std::move(K));
    }
    return out;
}

namespace detail {

// Transforms a kernel to (k1, k2): forward over rows index, backward over column index.
inline void kernel_to_momentum(std::vector<cplx>& K, const SpatialGrid& g) {
    const int n = static_cast<int>(g.size());
    auto dims = g.fft_dims();
    fft::many(K.data(), dims, n, n, 1, fft::forward);   // over x for each column
    fft::many(K.data(), dims, n, 1, n, fft::backward);  // over y for each row
}

inline void kernel_from_momentum(std::vector<cplx>& K, const SpatialGrid& g) {
    const int n = static_cast<int>(g.size());
    auto dims = g.fft_dims();
    fft::many(K.data(), dims, n, n, 1, fft::backward);
    fft::many(K.data(), dims, n, 1, n, fft::forward);
    fft::scale(K, 1.0 / (static_cast<double>(n) * n));
}

} // namespace detail

// Per-axis kernels eps (d/dx_a + d/dy_a) omega(x; y), spectral with Nyquist dropped.
inline std::vector<KernelArray> commutator_momentum(const DensityKernel& omega, double eps) {
    const auto& g = omega.grid();
    const std::size_t n = g.size();
    const int M = g.M();
    std::vector<cplx> base(omega.kernel().data());
    detail::kernel_to_momentum(base, g);
    std::vector<KernelArray> out;
    for (int a = 0; a < g.dim(); ++a) {
        std::vector<double> k(n);
        for (std::size_t i = 0; i < n; ++i) {
            int m = g.unflatten(i)[a];
            k[i] = (m == M / 2) ? 0.0 : g.k_of(m);
        }
        std::vector<cplx> A(base.size());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) A[i * n + j] = base[i * n + j] * cplx(0, eps * (k[i] - k[j]));
        detail::kernel_from_momentum(A, g);
        out.emplace_back(g, std::move(A));
    }
    return out;
}

inline std::vector<KernelArray> commutator_momentum(const DensityKernel& omega) {
    return commutator_momentum(omega, omega.eps());
}

struct LatticeShift {
    std::array<int, 2> p_index{0, 0};  // p = 2 pi m / L
    std::array<int, 2> q_cells{0, 0};  // eps q = t h
};

// Resolves (p, q) to lattice integers or throws.
inline LatticeShift lattice_shift(const SpatialGrid& g, double eps, std::span<const double> p,
                                  std::span<const double> q) {
    const int d = g.dim();
    if (static_cast<int>(p.size()) != d || static_cast<int>(q.size()) != d)
        throw ConfigError("semiclassical observable: p and q need dim components");
    LatticeShift ls;
    for (int a = 0; a < d; ++a) {
        double mp = p[a] * g.L() / (2 * pi);
        double tq = eps * q[a] / g.h();
        long rp = std::lround(mp), rq = std::lround(tq);
        if (std::abs(mp - rp) > 1e-9 * std::max(1.0, std::abs(mp)))
            throw ConfigError("p = " + std::to_string(p[a]) + " is not on the dual lattice 2 pi m / L");
        if (std::abs(tq - rq) > 1e-9 * std::max(1.0, std::abs(tq)))
            throw ConfigError("eps q = " + std::to_string(eps * q[a]) + " is not a multiple of h");
        ls.p_index[a] = static_cast<int>(rp);
        ls.q_cells[a] = static_cast<int>(rq);
    }
    return ls;
}

// tr e^{i p.x + q.eps grad} omega = e^{i eps p.q/2} h^d sum_x e^{i p.x} omega(x + eps q; x).
inline cplx semiclassical_expectation(const DensityKernel& omega, std::span<const double> p,
                                      std::span<const double> q) {
    const auto& g = omega.grid();
    const double eps = omega.eps();
    auto ls = lattice_shift(g, eps, p, q);
    double pq = 0;
    for (int a = 0; a < g.dim(); ++a) pq += p[a] * q[a];
    cplx s = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto [i0, i1] = g.unflatten(i);
        auto x = g.coords(i);
        double ph = 0;
        for (int a = 0; a < g.dim(); ++a) ph += p[a] * x[a];
        std::size_t shifted = g.flatten(g.wrap(i0 + ls.q_cells[0]),
                                        g.dim() == 2 ? g.wrap(i1 + ls.q_cells[1]) : 0);
        s += std::polar(1.0, ph) * omega(shifted, i);
    }
    return s * std::polar(g.cell_volume(), eps * pq / 2);
}

// X(x; y) = V(x - y) omega(x; y) / N.
inline KernelArray exchange_operator(const DensityKernel& omega, const Potential& V) {
    const auto& g = omega.grid();
    require_same_grid(g, V.grid(), "exchange_operator");
    const std::size_t n = g.size();
    const double invN = 1.0 / static_cast<double>(omega.N());
    KernelArray X(g);
    if (V.is_zero()) return X;
    for (std::size_t i = 0; i < n; ++i) {
        auto [i0, i1] = g.unflatten(i);
        for (std::size_t j = 0; j < n; ++j) {
            auto [j0, j1] = g.unflatten(j);
            X(i, j) = omega(i, j) * (V.at_displacement(i0 - j0, i1 - j1) * invN);
        }
    }
    return X;
}

} // namespace hvlab
