#pragma once

#include <cmath>
#include <vector>

#include "hvlab/kernel.hpp"
#include "hvlab/state_factory.hpp"

namespace hvlab::testing {

inline double frob_rel(const KernelArray& a, const KernelArray& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        num += std::norm(a.data()[i] - b.data()[i]);
        den += std::norm(b.data()[i]);
    }
    return std::sqrt(num / den);
}

inline double frob_abs(const KernelArray& a, const KernelArray& b) {
    double num = 0;
    for (std::size_t i = 0; i < a.data().size(); ++i) num += std::norm(a.data()[i] - b.data()[i]);
    return std::sqrt(num);
}

inline DensityKernel pure_state(const SpatialGrid& g, const std::vector<cplx>& f, double eps) {
    const std::size_t n = g.size();
    KernelArray K(g);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) K(i, j) = f[i] * std::conj(f[j]);
    return DensityKernel(std::move(K), 1, eps);
}

inline std::vector<cplx> normalized(std::vector<cplx> f, const SpatialGrid& g) {
    double s = 0;
    for (auto& z : f) s += std::norm(z);
    s = std::sqrt(s * g.cell_volume());
    for (auto& z : f) z /= s;
    return f;
}

// Coherent superposition of a unit Gaussian M in 1D: M = 16 N nodes on L = 10, eps = 1/N, delta = sqrt(eps).
struct CoherentSetup {
    SpatialGrid g;
    double eps;
    double delta;
    DensityKernel omega;
};

inline CoherentSetup coherent_gaussian_setup(std::uint64_t N, int M_per_N = 16, double L = 10.0,
                                             PhasePoint c = {{0.0, 0}, {0.0, 0}}) {
    SpatialGrid g(1, M_per_N * static_cast<int>(N), L);
    const double eps = 1.0 / static_cast<double>(N);
    const double delta = std::sqrt(eps);
    auto pg = PhaseSpaceGrid::dual(g, eps);
    auto Md = gaussian_phase_density(pg, c, {1.0, 1.0});
    auto omega = coherent_superposition_report(Md, {delta, eps, N}, false).omega;
    return {g, eps, delta, std::move(omega)};
}

} // namespace hvlab::testing
