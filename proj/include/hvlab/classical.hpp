#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "fft.hpp"
#include "grid.hpp"
#include "spectral.hpp"

namespace hvlab {

// Real phase-space function, values[x_index * nv + v_index].
class WignerFunction {
public:
    WignerFunction() = default;
    WignerFunction(const PhaseSpaceGrid& g, std::vector<double> values)
        : grid_(g), values_(std::move(values)) {
        if (values_.size() != g.size())
            throw ConfigError("wigner function has " + std::to_string(values_.size()) +
                              " values, grid needs " + std::to_string(g.size()));
        if (!all_finite(values_)) throw NumericalError("wigner function has non-finite values");
    }

    const PhaseSpaceGrid& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    double operator()(std::size_t ix, std::size_t iv) const { return values_[ix * grid_.nv() + iv]; }

    double mass() const {
        double s = 0;
        for (double w : values_) s += w;
        return s * grid_.cell_volume();
    }

    WignerFunction operator-(const WignerFunction& o) const {
        require_same_grid(grid_, o.grid_, "wigner difference");
        std::vector<double> v(values_);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= o.values_[i];
        return WignerFunction(grid_, std::move(v));
    }
    WignerFunction scaled(double c) const {
        std::vector<double> v(values_);
        for (auto& x : v) x *= c;
        return WignerFunction(grid_, std::move(v));
    }

private:
    PhaseSpaceGrid grid_;
    std::vector<double> values_;
};

inline constexpr double lp_inf = std::numeric_limits<double>::infinity();

inline double lp_norm(const WignerFunction& W, double p) {
    const auto& v = W.values();
    const double w = W.grid().cell_volume();
    if (p == 1) {
        double s = 0;
        for (double x : v) s += std::abs(x);
        return s * w;
    }
    if (p == 2) {
        double s = 0;
        for (double x : v) s += x * x;
        return std::sqrt(s * w);
    }
    if (std::isinf(p)) {
        double m = 0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
    throw ConfigError("lp_norm supports p = 1, 2, inf");
}

// Fraction of |W| mass in the outermost two velocity layers of any axis.
inline double boundary_mass_fraction(const WignerFunction& W) {
    const auto& g = W.grid();
    const int Mv = g.Mv();
    double edge = 0, total = 0;
    for (std::size_t ix = 0; ix < g.nx(); ++ix)
        for (std::size_t iv = 0; iv < g.nv(); ++iv) {
            double a = std::abs(W(ix, iv));
            total += a;
            auto [j0, j1] = g.unflatten_v(iv);
            bool outer = j0 < 2 || j0 >= Mv - 2;
            if (g.dim() == 2) outer = outer || j1 < 2 || j1 >= Mv - 2;
            if (outer) edge += a;
        }
    return total > 0 ? edge / total : 0.0;
}

inline bool guard_velocity_box(const WignerFunction& W, const std::string& context,
                               double limit = 1e-6) {
    double f = boundary_mass_fraction(W);
    if (f > limit) {
        diag::warn(context + ": velocity box too small, edge-layer mass fraction " + std::to_string(f));
        return false;
    }
    return true;
}

// Vlasov density rho(x) = h_v^d sum_v W(x, v).
inline std::vector<double> vlasov_density(const WignerFunction& W) {
    const auto& g = W.grid();
    const double wv = std::pow(g.hv(), g.dim());
    std::vector<double> rho(g.nx(), 0.0);
    for (std::size_t ix = 0; ix < g.nx(); ++ix) {
        double s = 0;
        const double* row = &W.values()[ix * g.nv()];
        for (std::size_t iv = 0; iv < g.nv(); ++iv) s += row[iv];
        rho[ix] = s * wv;
    }
    return rho;
}

// h^d h_v^d sum W(x, v) e^{i p.x} e^{i q.v}.
inline cplx fourier_wigner(const WignerFunction& W, std::span<const double> p,
                           std::span<const double> q) {
    const auto& g = W.grid();
    const int d = g.dim();
    if (static_cast<int>(p.size()) != d || static_cast<int>(q.size()) != d)
        throw ConfigError("fourier_wigner: p and q need dim components");
    std::vector<cplx> ex(g.nx()), ev(g.nv());
    for (std::size_t ix = 0; ix < g.nx(); ++ix) {
        auto x = g.spatial().coords(ix);
        double ph = 0;
        for (int a = 0; a < d; ++a) ph += p[a] * x[a];
        ex[ix] = std::polar(1.0, ph);
    }
    for (std::size_t iv = 0; iv < g.nv(); ++iv) {
        auto v = g.vcoords(iv);
        double ph = 0;
        for (int a = 0; a < d; ++a) ph += q[a] * v[a];
        ev[iv] = std::polar(1.0, ph);
    }
    cplx s = 0;
    for (std::size_t ix = 0; ix < g.nx(); ++ix) {
        cplx r = 0;
        const double* row = &W.values()[ix * g.nv()];
        for (std::size_t iv = 0; iv < g.nv(); ++iv) r += row[iv] * ev[iv];
        s += r * ex[ix];
    }
    return s * g.cell_volume();
}

namespace detail {

// Angular wavenumber of natural index i on axis c of the phase-space FFT layout.
inline double phase_wavenumber(const PhaseSpaceGrid& g, int c, int i) {
    if (c < g.dim()) return g.spatial().k_of(i);
    return 2 * pi * fft::centered(i, g.Mv()) / (2 * g.v_max());
}

inline int phase_axis_len(const PhaseSpaceGrid& g, int c) {
    return c < g.dim() ? g.spatial().M() : g.Mv();
}

// Visits every phase-space FFT mode with its per-axis natural indices.
template <class Fn>
void for_each_phase_mode(const PhaseSpaceGrid& g, Fn&& fn) {
    const int rank = 2 * g.dim();
    std::array<int, 4> idx{0, 0, 0, 0};
    std::array<int, 4> len{1, 1, 1, 1};
    for (int c = 0; c < rank; ++c) len[c] = phase_axis_len(g, c);
    const std::size_t total = g.size();
    for (std::size_t flat = 0; flat < total; ++flat) {
        fn(flat, idx);
        for (int c = rank - 1; c >= 0; --c) {
            if (++idx[c] < len[c]) break;
            idx[c] = 0;
        }
    }
}

inline std::vector<cplx> phase_fft(const WignerFunction& W) {
    std::vector<cplx> a(W.values().begin(), W.values().end());
    auto dims = W.grid().fft_dims();
    fft::full(a.data(), dims, fft::forward);
    return a;
}

inline std::vector<double> phase_ifft_real(std::vector<cplx> a, const PhaseSpaceGrid& g) {
    auto dims = g.fft_dims();
    fft::full(a.data(), dims, fft::backward);
    const double s = 1.0 / static_cast<double>(g.size());
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i].real() * s;
    return out;
}

inline void enumerate_multi_indices(int rank, int max_order, std::vector<std::array<int, 4>>& out) {
    std::array<int, 4> b{0, 0, 0, 0};
    auto rec = [&](auto&& self, int c, int left) -> void {
        if (c == rank) {
            out.push_back(b);
            return;
        }
        for (int k = 0; k <= left; ++k) {
            b[c] = k;
            self(self, c + 1, left - k);
        }
        b[c] = 0;
    };
    rec(rec, 0, max_order);
}

} // namespace detail

// Spectral partial derivative of W with multi-index beta over (x axes, v axes).
inline std::vector<double> phase_derivative(const WignerFunction& W, const std::array<int, 4>& beta) {
    const auto& g = W.grid();
    auto F = detail::phase_fft(W);
    const int rank = 2 * g.dim();
    detail::for_each_phase_mode(g, [&](std::size_t flat, const std::array<int, 4>& idx) {
        cplx factor = 1;
        for (int c = 0; c < rank; ++c) {
            if (beta[c] == 0) continue;
            int len = detail::phase_axis_len(g, c);
            if (idx[c] == len / 2) {
                factor = 0;
                break;
            }
            factor *= std::pow(cplx(0, detail::phase_wavenumber(g, c, idx[c])), beta[c]);
        }
        F[flat] *= factor;
    });
    return detail::phase_ifft_real(std::move(F), g);
}

// L2 norm of grad_x W (x_only) or grad_v W, spectral.
inline double gradient_l2(const WignerFunction& W, bool x_axes) {
    const auto& g = W.grid();
    double s = 0;
    for (int a = 0; a < g.dim(); ++a) {
        std::array<int, 4> beta{0, 0, 0, 0};
        beta[x_axes ? a : g.dim() + a] = 1;
        auto d = phase_derivative(W, beta);
        for (double x : d) s += x * x;
    }
    return std::sqrt(s * g.cell_volume());
}

// (sum_{|beta| <= s} int (1 + x^2 + v^2)^a |d^beta W|^2)^{1/2}
inline double weighted_sobolev_norm(const WignerFunction& W, int s, int a) {
    if (s < 0 || s > 5) throw ConfigError("sobolev order s must be in 0..5");
    if (a < 0 || a > 4) throw ConfigError("sobolev weight a must be in 0..4");
    const auto& g = W.grid();
    const int rank = 2 * g.dim();
    std::vector<double> weight(g.size());
    for (std::size_t ix = 0; ix < g.nx(); ++ix) {
        auto x = g.spatial().coords(ix);
        double x2 = x[0] * x[0] + x[1] * x[1];
        for (std::size_t iv = 0; iv < g.nv(); ++iv) {
            auto v = g.vcoords(iv);
            weight[ix * g.nv() + iv] = std::pow(1 + x2 + v[0] * v[0] + v[1] * v[1], a);
        }
    }
    std::vector<std::array<int, 4>> betas;
    detail::enumerate_multi_indices(rank, s, betas);
    auto F = detail::phase_fft(W);
    double total = 0;
    std::vector<cplx> G(F.size());
    for (const auto& beta : betas) {
        bool zero_order = true;
        for (int c = 0; c < rank; ++c) zero_order = zero_order && beta[c] == 0;
        double acc = 0;
        if (zero_order) {
            for (std::size_t i = 0; i < W.values().size(); ++i)
                acc += weight[i] * W.values()[i] * W.values()[i];
        } else {
            G = F;
            detail::for_each_phase_mode(g, [&](std::size_t flat, const std::array<int, 4>& idx) {
                cplx factor = 1;
                for (int c = 0; c < rank; ++c) {
                    if (beta[c] == 0) continue;
                    int len = detail::phase_axis_len(g, c);
                    if (idx[c] == len / 2) {
                        factor = 0;
                        break;
                    }
                    factor *= std::pow(cplx(0, detail::phase_wavenumber(g, c, idx[c])), beta[c]);
                }
                G[flat] *= factor;
            });
            auto d = detail::phase_ifft_real(G, g);
            for (std::size_t i = 0; i < d.size(); ++i) acc += weight[i] * d[i] * d[i];
        }
        total += acc;
    }
    return std::sqrt(total * g.cell_volume());
}

// Periodic convolution with g_k = (k / 2 pi)^d exp(-k (x^2 + v^2) / 2).
inline WignerFunction mollify(const WignerFunction& W, double k) {
    if (!(k > 0) || !std::isfinite(k)) throw ConfigError("mollify: k must be positive");
    const auto& g = W.grid();
    auto F = detail::phase_fft(W);
    const int rank = 2 * g.dim();
    detail::for_each_phase_mode(g, [&](std::size_t flat, const std::array<int, 4>& idx) {
        double k2 = 0;
        for (int c = 0; c < rank; ++c) {
            double w = detail::phase_wavenumber(g, c, idx[c]);
            k2 += w * w;
        }
        F[flat] *= std::exp(-k2 / (2 * k));
    });
    return WignerFunction(g, detail::phase_ifft_real(std::move(F), g));
}

// Cyclic shift by whole cells in x and v.
inline WignerFunction translate(const WignerFunction& W, std::array<int, 2> dx, std::array<int, 2> dv) {
    const auto& g = W.grid();
    const auto& s = g.spatial();
    const int Mv = g.Mv();
    std::vector<double> out(W.values().size());
    for (std::size_t ix = 0; ix < g.nx(); ++ix) {
        auto [i0, i1] = s.unflatten(ix);
        std::size_t jx = s.flatten(s.wrap(i0 + dx[0]), g.dim() == 2 ? s.wrap(i1 + dx[1]) : 0);
        for (std::size_t iv = 0; iv < g.nv(); ++iv) {
            auto [j0, j1] = g.unflatten_v(iv);
            int w0 = ((j0 + dv[0]) % Mv + Mv) % Mv;
            int w1 = g.dim() == 2 ? ((j1 + dv[1]) % Mv + Mv) % Mv : 0;
            out[jx * g.nv() + g.flatten_v(w0, w1)] = W(ix, iv);
        }
    }
    return WignerFunction(g, std::move(out));
}

// Samples f(x, v) on the grid.
template <class Fn>
WignerFunction sample_wigner(const PhaseSpaceGrid& g, Fn&& f) {
    std::vector<double> v(g.size());
    for (std::size_t ix = 0; ix < g.nx(); ++ix) {
        auto x = g.spatial().coords(ix);
        for (std::size_t iv = 0; iv < g.nv(); ++iv) v[ix * g.nv() + iv] = f(x, g.vcoords(iv));
    }
    return WignerFunction(g, std::move(v));
}

} // namespace hvlab
