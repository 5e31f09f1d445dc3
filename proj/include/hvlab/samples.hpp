#pragma once

#include <random>
#include <vector>

#include "kernel.hpp"
#include "state_factory.hpp"

namespace hvlab {

struct RandomStateOptions {
    int orbitals_per_particle = 2;
    double width_cells = 4;          // orbital width in grid cells
    double center_fraction = 0.2;    // centers within +- fraction * L
    double momentum_fraction = 0.2;  // momenta within +- fraction * v_max of the dual grid
};

namespace detail {

// Keeps odd modes with |m| < M/4 per axis. The orbital becomes antiperiodic under a half-box
// shift and every kernel band is free of Nyquist content, so its Wigner transform is exactly real.
inline void odd_quarter_band_filter(std::vector<cplx>& f, const SpatialGrid& g) {
    auto dims = g.fft_dims();
    fft::full(f.data(), dims, fft::forward);
    const int M = g.M();
    for_each_mode(g.dim(), M, [&](std::size_t nat, int m0, int m1) {
        bool keep = std::abs(m0) < M / 4 && (m0 & 1);
        if (g.dim() == 2) keep = keep && std::abs(m1) < M / 4 && (m1 & 1);
        if (!keep) f[nat] = 0;
    });
    fft::full(f.data(), dims, fft::backward);
    fft::scale(f, 1.0 / static_cast<double>(g.size()));
}

} // namespace detail

// Random smooth valid state: Gram-Schmidt orthonormalized, band-limited Gaussian packets with occupations in (0, 1) summing to N.
inline DensityKernel random_smooth_state(const SpatialGrid& g, std::uint64_t N, double eps,
                                         std::uint64_t seed, RandomStateOptions opt = {}) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const int K = static_cast<int>(N) * opt.orbitals_per_particle;
    const std::size_t n = g.size();
    if (static_cast<std::size_t>(K) > n) throw ConfigError("random state: more orbitals than grid points");
    const double w = g.cell_volume();
    const double vmax = eps * pi * g.M() / g.L();
    CoherentParams prm{opt.width_cells * g.h(), eps, N};
    std::vector<std::vector<cplx>> orb;
    for (int k = 0; k < K; ++k) {
        PhasePoint c;
        for (int a = 0; a < g.dim(); ++a) {
            c.r[a] = opt.center_fraction * g.L() * U(rng);
            c.p[a] = opt.momentum_fraction * vmax * U(rng);
        }
        auto f = coherent_orbital(g, prm, c);
        detail::odd_quarter_band_filter(f, g);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : orb) {
                cplx s = 0;
                for (std::size_t i = 0; i < n; ++i) s += std::conj(q[i]) * f[i];
                s *= w;
                for (std::size_t i = 0; i < n; ++i) f[i] -= s * q[i];
            }
        double nn = 0;
        for (const auto& z : f) nn += std::norm(z);
        nn = std::sqrt(nn * w);
        if (nn < 1e-6) {
            --k;
            continue;
        }
        for (auto& z : f) z /= nn;
        orb.push_back(std::move(f));
    }
    std::vector<double> occ(K);
    double s = 0;
    for (auto& o : occ) {
        o = 1 + 0.5 * U(rng);
        s += o;
    }
    for (auto& o : occ) o *= static_cast<double>(N) / s;
    KernelArray A(g);
    for (int k = 0; k < K; ++k) {
        const auto& f = orb[k];
        for (std::size_t i = 0; i < n; ++i) {
            cplx fi = f[i] * occ[k];
            cplx* row = &A.data()[i * n];
            for (std::size_t j = 0; j < n; ++j) row[j] += fi * std::conj(f[j]);
        }
    }
    hermitize(A);
    return DensityKernel(std::move(A), N, eps);
}

} // namespace hvlab
