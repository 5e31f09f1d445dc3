#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "core.hpp"
#include "fft.hpp"
#include "grid.hpp"

namespace hvlab {

namespace detail {

inline void require_size(std::size_t got, std::size_t want, const char* what) {
    if (got != want)
        throw ConfigError(std::string(what) + ": array has " + std::to_string(got) +
                          " entries, grid needs " + std::to_string(want));
}

// Natural FFT index of a centered-order index (m + M/2 stored at position i).
inline int natural_from_centered_slot(int slot, int M) { return (slot + M / 2) % M; }

// Applies fn(natural flat index, centered multi-index) over a grid of M^dim.
template <class Fn>
void for_each_mode(int dim, int M, Fn&& fn) {
    if (dim == 1) {
        for (int i = 0; i < M; ++i) fn(static_cast<std::size_t>(i), fft::centered(i, M), 0);
        return;
    }
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j)
            fn(static_cast<std::size_t>(i) * M + j, fft::centered(i, M), fft::centered(j, M));
}

} // namespace detail

// F(k_m) = h^d sum_j f(x_j) e^{-i k_m x_j}; output in centered order, slot m + M/2 per axis.
inline std::vector<cplx> forward_dft(std::span<const cplx> f, const SpatialGrid& g) {
    detail::require_size(f.size(), g.size(), "forward_dft");
    std::vector<cplx> a(f.begin(), f.end());
    fft::full(a.data(), g.fft_dims(), fft::forward);
    const int M = g.M();
    const double w = g.cell_volume();
    std::vector<cplx> out(a.size());
    detail::for_each_mode(g.dim(), M, [&](std::size_t nat, int m0, int m1) {
        double sign = ((m0 + m1) % 2 == 0) ? 1.0 : -1.0;
        std::size_t slot = g.dim() == 1 ? static_cast<std::size_t>(m0 + M / 2)
                                        : static_cast<std::size_t>(m0 + M / 2) * M + (m1 + M / 2);
        out[slot] = a[nat] * (w * sign);
    });
    return out;
}

// Inverse of forward_dft: f(x_j) = L^{-d} sum_m F(k_m) e^{i k_m x_j}.
inline std::vector<cplx> inverse_dft(std::span<const cplx> F, const SpatialGrid& g) {
    detail::require_size(F.size(), g.size(), "inverse_dft");
    const int M = g.M();
    std::vector<cplx> a(F.size());
    detail::for_each_mode(g.dim(), M, [&](std::size_t nat, int m0, int m1) {
        double sign = ((m0 + m1) % 2 == 0) ? 1.0 : -1.0;
        std::size_t slot = g.dim() == 1 ? static_cast<std::size_t>(m0 + M / 2)
                                        : static_cast<std::size_t>(m0 + M / 2) * M + (m1 + M / 2);
        a[nat] = F[slot] * sign;
    });
    fft::full(a.data(), g.fft_dims(), fft::backward);
    const double s = 1.0 / std::pow(g.L(), g.dim());
    fft::scale(a, s);
    return a;
}

// Frequency-domain norm matching h^d sum |f|^2.
inline double spectral_norm_sq(std::span<const cplx> F, const SpatialGrid& g) {
    double s = 0;
    for (const auto& z : F) s += std::norm(z);
    return s / std::pow(g.L(), g.dim());
}

// Natural-order FFT of a real field.
inline std::vector<cplx> fft_real(std::span<const double> f, const SpatialGrid& g) {
    std::vector<cplx> a(f.begin(), f.end());
    fft::full(a.data(), g.fft_dims(), fft::forward);
    return a;
}

inline std::vector<double> ifft_to_real(std::vector<cplx> a, const SpatialGrid& g,
                                        const char* what, double tol = 1e-12) {
    fft::full(a.data(), g.fft_dims(), fft::backward);
    const double s = 1.0 / static_cast<double>(g.size());
    double re_max = 0, im_max = 0;
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i].real() * s;
        re_max = std::max(re_max, std::abs(out[i]));
        im_max = std::max(im_max, std::abs(a[i].imag() * s));
    }
    if (im_max > tol * std::max(re_max, 1e-300) && im_max > 1e-300)
        throw NumericalError(std::string(what) + ": imaginary residue " + std::to_string(im_max) +
                             " relative to " + std::to_string(re_max));
    return out;
}

// d/dx_axis by multiplication with i k; Nyquist mode dropped.
inline std::vector<double> spectral_gradient(std::span<const double> f, const SpatialGrid& g,
                                             int axis) {
    detail::require_size(f.size(), g.size(), "spectral_gradient");
    if (axis < 0 || axis >= g.dim()) throw ConfigError("spectral_gradient: axis out of range");
    auto a = fft_real(f, g);
    const int M = g.M();
    detail::for_each_mode(g.dim(), M, [&](std::size_t nat, int m0, int m1) {
        int m = axis == 0 ? m0 : m1;
        if (m == -M / 2) {
            a[nat] = 0;
            return;
        }
        a[nat] *= cplx(0, g.wavenumber(m));
    });
    return ifft_to_real(std::move(a), g, "spectral_gradient", 1e-10);
}

// h^d sum_y f(x - y) g(y) for two fields sampled at the nodes.
inline std::vector<double> convolve_fields(std::span<const double> f, std::span<const double> gfield,
                                           const SpatialGrid& g) {
    detail::require_size(f.size(), g.size(), "convolve_fields");
    detail::require_size(gfield.size(), g.size(), "convolve_fields");
    auto A = fft_real(f, g);
    auto B = fft_real(gfield, g);
    const int M = g.M();
    const double w = g.cell_volume();
    // Node j sits at displacement (j - M/2) h, so the product picks up (-1)^m per axis.
    detail::for_each_mode(g.dim(), M, [&](std::size_t nat, int m0, int m1) {
        double sign = ((m0 + m1) % 2 == 0) ? 1.0 : -1.0;
        A[nat] *= B[nat] * (w * sign);
    });
    return ifft_to_real(std::move(A), g, "convolve_fields");
}

// Trigonometric interpolant of f on the grid with M doubled (node 2j of the fine grid is node j);
// with axis >= 0 returns its derivative along that axis instead. The Nyquist mode is split evenly.
inline std::vector<double> spectral_refine(std::span<const double> f, const SpatialGrid& g, int axis = -1) {
    detail::require_size(f.size(), g.size(), "spectral_refine");
    if (axis >= g.dim()) throw ConfigError("spectral_refine: axis out of range");
    const int M = g.M(), M2 = 2 * M;
    SpatialGrid fine(g.dim(), M2, g.L());
    auto A = fft_real(f, g);
    std::vector<cplx> B(fine.size(), cplx(0));
    const double up = std::pow(2.0, g.dim());
    detail::for_each_mode(g.dim(), M, [&](std::size_t nat, int m0, int m1) {
        int ms[2] = {m0, m1};
        if (axis >= 0 && ms[axis] == -M / 2) return;
        cplx c = A[nat] * up;
        if (axis >= 0) c *= cplx(0, g.wavenumber(ms[axis]));
        int n0 = m0 == -M / 2 ? 2 : 1, n1 = (g.dim() == 2 && m1 == -M / 2) ? 2 : 1;
        c /= static_cast<double>(n0 * n1);
        for (int a = 0; a < n0; ++a)
            for (int b = 0; b < n1; ++b) {
                int f0 = (a == 1 ? -m0 : m0), f1 = (b == 1 ? -m1 : m1);
                B[fine.flatten((f0 + M2) % M2, g.dim() == 2 ? (f1 + M2) % M2 : 0)] += c;
            }
    });
    return ifft_to_real(std::move(B), fine, "spectral_refine", 1e-10);
}

inline double integrate(std::span<const double> f, const SpatialGrid& g) {
    double s = 0;
    for (double x : f) s += x;
    return s * g.cell_volume();
}

} // namespace hvlab
