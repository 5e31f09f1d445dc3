#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "classical.hpp"
#include "kernel.hpp"
#include "quantum.hpp"

namespace hvlab {

// Smooth phase-space probability density M(r, p) with 0 <= M <= 1 and unit mass.
class PhaseDensity {
public:
    PhaseDensity(const PhaseSpaceGrid& g, std::vector<double> values) : W_(g, std::move(values)) {
        double lo = 0, hi = 0;
        for (double x : W_.values()) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        if (lo < -1e-12 || hi > 1 + 1e-12)
            throw DataError("phase density outside [0, 1]: range [" + std::to_string(lo) + ", " +
                            std::to_string(hi) + "]");
        double m = W_.mass();
        if (std::abs(m - 1) > 1e-8) throw DataError("phase density mass " + std::to_string(m) + " != 1");
    }

    const PhaseSpaceGrid& grid() const { return W_.grid(); }
    const std::vector<double>& values() const { return W_.values(); }
    const WignerFunction& as_wigner() const { return W_; }
    double sup() const { return lp_norm(W_, lp_inf); }

private:
    WignerFunction W_;
};

struct PhasePoint {
    std::array<double, 2> r{0, 0};
    std::array<double, 2> p{0, 0};
};

// Gaussian in (r, p), scaled to unit mass; where it would exceed cap it is truncated at cap
// and the scale is raised until the mass is 1 again.
inline PhaseDensity gaussian_phase_density(const PhaseSpaceGrid& g, PhasePoint center,
                                           std::array<double, 2> widths, double cap = 1.0) {
    if (!(widths[0] > 0) || !(widths[1] > 0)) throw ConfigError("gaussian widths must be positive");
    if (!(cap > 0) || cap > 1) throw ConfigError("cap must lie in (0, 1]");
    const double sr = widths[0], sp = widths[1];
    if (sr < 2 * g.spatial().h() || sp < 2 * g.hv())
        throw ConfigError("gaussian widths not resolved by the grid");
    const int d = g.dim();
    auto shape = sample_wigner(g, [&](const std::array<double, 2>& x, const std::array<double, 2>& v) {
        double e = 0;
        for (int a = 0; a < d; ++a) {
            e += std::pow(x[a] - center.r[a], 2) / (2 * sr * sr);
            e += std::pow(v[a] - center.p[a], 2) / (2 * sp * sp);
        }
        return std::exp(-e);
    });
    const double cell = g.cell_volume();
    if (cap * cell * static_cast<double>(g.size()) <= 1.0)
        throw DataError("cap " + std::to_string(cap) + " cannot carry unit mass on this grid");
    auto mass_at = [&](double lam) {
        double s = 0;
        for (double x : shape.values()) s += std::min(lam * x, cap);
        return s * cell;
    };
    double raw = shape.mass();
    double lam = 1.0 / raw;
    if (lam * lp_norm(shape, lp_inf) > cap) {
        double lo = lam, hi = lam;
        while (mass_at(hi) < 1) {
            hi *= 2;
            if (hi > 1e300) throw DataError("cap too small for unit mass");
        }
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            double mid = 0.5 * (lo + hi);
            (mass_at(mid) < 1 ? lo : hi) = mid;
        }
        lam = hi;
    }
    std::vector<double> v(shape.values().size());
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = std::min(lam * shape.values()[i], cap);
        s += v[i];
    }
    double fix = 1.0 / (s * cell);
    for (auto& x : v) x = std::min(x * fix, cap);
    return PhaseDensity(g, std::move(v));
}

struct CoherentParams {
    double delta = 0;
    double eps = 0;
    std::uint64_t N = 1;

    void validate(const SpatialGrid& g) const {
        if (!(delta > 0) || !(eps > 0) || N == 0) throw ConfigError("coherent params must be positive");
        if (delta < 2 * g.h())
            throw ConfigError("coherent width delta=" + std::to_string(delta) + " below 2h=" +
                              std::to_string(2 * g.h()));
        if (delta > g.L() / 8)
            throw ConfigError("coherent width delta=" + std::to_string(delta) + " above L/8");
    }
};

namespace detail {

// Periodized g(x) = (pi delta^2)^{-1/4} exp(-x^2 / 2 delta^2) on one axis.
inline double periodic_gauss_1d(double x, double delta, double L) {
    double s = 0;
    for (int k = -2; k <= 2; ++k) s += std::exp(-std::pow(x + k * L, 2) / (2 * delta * delta));
    return s * std::pow(pi * delta * delta, -0.25);
}

inline double minimal_image(double x, double L) { return x - L * std::round(x / L); }

} // namespace detail

// Normalized orbital e^{i p.x / eps} g(x - r) on the grid (plain, not periodized).
inline std::vector<cplx> coherent_orbital(const SpatialGrid& g, const CoherentParams& prm,
                                          const PhasePoint& at) {
    std::vector<cplx> f(g.size());
    const int d = g.dim();
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto x = g.coords(i);
        double e = 0, ph = 0;
        for (int a = 0; a < d; ++a) {
            e += std::pow(x[a] - at.r[a], 2);
            ph += at.p[a] * x[a];
        }
        f[i] = std::polar(std::pow(pi * prm.delta * prm.delta, -0.25 * d) *
                              std::exp(-e / (2 * prm.delta * prm.delta)),
                          ph / prm.eps);
    }
    return f;
}

struct OverlapResult {
    double formula = 0;
    double quadrature = 0;
};

// exp(-|r - r'|^2 / 4 delta^2 - delta^2 |p - p'|^2 / 4 eps^2) and the grid inner product.
inline OverlapResult coherent_overlap(const SpatialGrid& g, const CoherentParams& prm,
                                      const PhasePoint& a, const PhasePoint& b) {
    prm.validate(g);
    double dr2 = 0, dp2 = 0;
    for (int k = 0; k < g.dim(); ++k) {
        dr2 += std::pow(a.r[k] - b.r[k], 2);
        dp2 += std::pow(a.p[k] - b.p[k], 2);
    }
    OverlapResult out;
    out.formula = std::exp(-dr2 / (4 * prm.delta * prm.delta) -
                           prm.delta * prm.delta * dp2 / (4 * prm.eps * prm.eps));
    auto fa = coherent_orbital(g, prm, a);
    auto fb = coherent_orbital(g, prm, b);
    cplx s = 0;
    for (std::size_t i = 0; i < fa.size(); ++i) s += fa[i] * std::conj(fb[i]);
    out.quadrature = std::abs(s) * g.cell_volume();
    return out;
}

struct CoherentBuild {
    DensityKernel omega;
    double trace_rescale = 1;
    SpectrumReport spectrum;
};

// omega = sum_{r,p} w M(r,p) f_pr (x) conj(f_pr(y)), f_pr = eps^{-d/2} e^{i p.x/eps} g(x - r).
inline CoherentBuild coherent_superposition_report(const PhaseDensity& Md, const CoherentParams& prm,
                                                   bool check_spectrum = true) {
    const auto& pg = Md.grid();
    const auto& g = pg.spatial();
    prm.validate(g);
    if (!pg.is_dual_of(prm.eps))
        throw ConfigError("coherent_superposition: M must live on the eps-dual phase-space grid");
    const int d = g.dim();
    const int M = g.M();
    const std::size_t n = g.size();
    const double w = pg.cell_volume() * std::pow(prm.eps, -d);
    const int reach = std::min(M / 2, static_cast<int>(std::ceil(9 * prm.delta / g.h())));
    std::vector<cplx> P(n);
    std::vector<cplx> K(n * n, cplx(0));
    auto dims = g.fft_dims();
    const int len = std::min(2 * reach + 1, M);
    std::vector<std::size_t> nodes;
    std::vector<double> gv;
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = &Md.values()[r * pg.nv()];
        bool any = false;
        for (std::size_t iv = 0; iv < pg.nv(); ++iv) any = any || row[iv] != 0;
        if (!any) continue;
        for (std::size_t iv = 0; iv < pg.nv(); ++iv) {
            // velocity slot -> natural frequency index
            auto [j0, j1] = pg.unflatten_v(iv);
            std::size_t nat = g.flatten((j0 + M / 2) % M, d == 2 ? (j1 + M / 2) % M : 0);
            P[nat] = row[iv];
        }
        fft::full(P.data(), dims, fft::backward);
        auto [r0, r1] = g.unflatten(r);
        auto rc = g.coords(r);
        nodes.clear();
        gv.clear();
        for (int o0 = 0; o0 < len; ++o0) {
            int i0 = g.wrap(r0 - reach + o0);
            double g0 = detail::periodic_gauss_1d(detail::minimal_image(g.node(i0) - rc[0], g.L()),
                                                  prm.delta, g.L());
            if (d == 1) {
                nodes.push_back(g.flatten(i0));
                gv.push_back(g0);
                continue;
            }
            for (int o1 = 0; o1 < len; ++o1) {
                int i1 = g.wrap(r1 - reach + o1);
                double gg = g0 * detail::periodic_gauss_1d(
                                     detail::minimal_image(g.node(i1) - rc[1], g.L()), prm.delta, g.L());
                nodes.push_back(g.flatten(i0, i1));
                gv.push_back(gg);
            }
        }
        for (std::size_t ia = 0; ia < nodes.size(); ++ia) {
            const std::size_t a = nodes[ia];
            auto [a0, a1] = g.unflatten(a);
            const double wa = w * gv[ia];
            cplx* Krow = &K[a * n];
            for (std::size_t ib = 0; ib < nodes.size(); ++ib) {
                const std::size_t b = nodes[ib];
                auto [b0, b1] = g.unflatten(b);
                std::size_t s = g.flatten(g.wrap(a0 - b0), d == 2 ? g.wrap(a1 - b1) : 0);
                Krow[b] += P[s] * (wa * gv[ib]);
            }
        }
    }
    KernelArray kernel(g, std::move(K));
    hermitize(kernel);
    double tr = 0;
    for (std::size_t i = 0; i < n; ++i) tr += kernel(i, i).real();
    tr *= g.cell_volume();
    const double target = static_cast<double>(prm.N);
    const double rescale = target / tr;
    if (std::abs(rescale - 1) > 1e-3)
        throw DataError("coherent superposition trace " + std::to_string(tr) + " needs rescale " +
                        std::to_string(rescale) + " (over 0.1%); check N eps^d = 1 and box size");
    for (auto& z : kernel.data()) z *= rescale;
    CoherentBuild out{DensityKernel(std::move(kernel), prm.N, prm.eps), rescale, {}};
    if (check_spectrum) {
        out.spectrum = out.omega.spectrum();
        if (out.spectrum.max_eigenvalue > 1 + 1e-6)
            throw DataError("M too concentrated for Pauli bound (largest eigenvalue " +
                            std::to_string(out.spectrum.max_eigenvalue) + ")");
        if (out.spectrum.min_eigenvalue < -1e-8)
            throw DataError("coherent superposition has negative eigenvalue " +
                            std::to_string(out.spectrum.min_eigenvalue));
    }
    return out;
}

inline DensityKernel coherent_superposition(const PhaseDensity& Md, const CoherentParams& prm) {
    return coherent_superposition_report(Md, prm).omega;
}

// Exact Wigner function of the coherent superposition of a Gaussian M, normalized to mass 1.
inline double coherent_gaussian_wigner(const std::array<double, 2>& x, const std::array<double, 2>& v,
                                       int dim, const PhasePoint& c, std::array<double, 2> widths,
                                       double delta, double eps) {
    double sx2 = widths[0] * widths[0] + delta * delta / 2;
    double sv2 = widths[1] * widths[1] + eps * eps / (2 * delta * delta);
    double e = 0;
    for (int a = 0; a < dim; ++a) {
        e += std::pow(x[a] - c.r[a], 2) / (2 * sx2);
        e += std::pow(v[a] - c.p[a], 2) / (2 * sv2);
    }
    return std::exp(-e) / std::pow(2 * pi * std::sqrt(sx2 * sv2), dim);
}

// Wigner function of a single normalized coherent orbital.
inline double coherent_state_wigner(const std::array<double, 2>& x, const std::array<double, 2>& v,
                                    int dim, const PhasePoint& c, double delta, double eps) {
    double e = 0;
    for (int a = 0; a < dim; ++a) {
        e += std::pow(x[a] - c.r[a], 2) / (delta * delta);
        e += delta * delta * std::pow(v[a] - c.p[a], 2) / (eps * eps);
    }
    return std::exp(-e) / std::pow(pi * eps, dim);
}

enum class FermiHeight { inverse_N, filled };

struct FermiSeaOptions {
    FermiHeight height = FermiHeight::inverse_N;
    std::optional<double> c;
};

struct FermiSeaResult {
    WignerFunction W;
    double c = 0;
    double height = 0;
    double renormalization = 1;
    double max_fermi_velocity = 0;
};

namespace detail {

// Covered fraction of the velocity cell at |v| by the ball of radius vF.
inline double fermi_fraction(double vabs, double vF, double hv, int dim) {
    if (vF <= 0) return 0.0;
    if (dim == 1) {
        double lo = std::max(vabs - hv / 2, -vF), hi = std::min(vabs + hv / 2, vF);
        return std::max(0.0, hi - lo) / hv;
    }
    double f = std::clamp((vF - vabs) / hv + 0.5, 0.0, 1.0);
    return f * std::min(1.0, 2 * vF / hv);
}

} // namespace detail

// W(x, v) = H 1(|v| <= c rho(x)^{1/d}), H = 1/N or (2 pi eps)^{-d}/N, on the eps-dual grid.
inline FermiSeaResult fermi_sea_wigner(const SpatialGrid& g, std::span<const double> rho_profile,
                                       std::uint64_t N, double eps, FermiSeaOptions opt = {}) {
    detail::require_size(rho_profile.size(), g.size(), "fermi_sea_wigner");
    const int d = g.dim();
    double total = 0;
    for (double r : rho_profile) {
        if (r < 0) throw ConfigError("fermi_sea_wigner: density profile must be nonnegative");
        total += r;
    }
    total *= g.cell_volume();
    if (std::abs(total - static_cast<double>(N)) > 1e-8 * static_cast<double>(N))
        throw ConfigError("fermi_sea_wigner: profile integrates to " + std::to_string(total) +
                          ", expected N=" + std::to_string(N));
    auto pg = PhaseSpaceGrid::dual(g, eps);
    const double H = opt.height == FermiHeight::inverse_N
                         ? 1.0 / static_cast<double>(N)
                         : std::pow(2 * pi * eps, -d) / static_cast<double>(N);
    const double hv = pg.hv();
    std::vector<double> root(g.size());
    double rmax = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        root[i] = std::pow(rho_profile[i], 1.0 / d);
        rmax = std::max(rmax, root[i]);
    }
    const double vlimit = pg.v_max() - 2.5 * hv;
    auto build = [&](double c, std::vector<double>* out) {
        if (c * rmax > vlimit)
            throw ConfigError("velocity box too small for max Fermi velocity " +
                              std::to_string(c * rmax) + " (v_max " + std::to_string(pg.v_max()) + ")");
        double s = 0;
        for (std::size_t ix = 0; ix < g.size(); ++ix) {
            double vF = c * root[ix];
            for (std::size_t iv = 0; iv < pg.nv(); ++iv) {
                auto v = pg.vcoords(iv);
                double f = detail::fermi_fraction(std::hypot(v[0], v[1]), vF, hv, d);
                s += f;
                if (out) (*out)[ix * pg.nv() + iv] = H * f;
            }
        }
        return H * s * pg.cell_volume();
    };
    FermiSeaResult res;
    res.height = H;
    double c;
    if (opt.c) {
        c = *opt.c;
        if (!(c > 0)) throw ConfigError("fermi constant c must be positive");
    } else {
        const double ball = d == 1 ? 2.0 : pi;
        double c0 = std::pow(1.0 / (H * ball * static_cast<double>(N)), 1.0 / d);
        double lo = 0, hi = c0;
        while (build(hi, nullptr) < 1) {
            lo = hi;
            hi *= 1.02;
        }
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            double mid = 0.5 * (lo + hi);
            (build(mid, nullptr) < 1 ? lo : hi) = mid;
        }
        c = 0.5 * (lo + hi);
    }
    std::vector<double> vals(pg.size(), 0.0);
    double mass = build(c, &vals);
    if (opt.c && std::abs(mass - 1) > 1e-2)
        diag::warn("fermi_sea_wigner: mass " + std::to_string(mass) + " before renormalization");
    res.renormalization = 1.0 / mass;
    for (auto& x : vals) x *= res.renormalization;
    res.c = c;
    res.max_fermi_velocity = c * rmax;
    res.W = WignerFunction(pg, std::move(vals));
    return res;
}

enum class Purification { none, projector, clamp };

struct FermiStateResult {
    DensityKernel omega;
    std::vector<double> raw_eigenvalues;
    double intermediate_fraction = 0;  // share of eigenvalues in (0.05, 0.95)
};

// Weyl quantization of Fermi-sea data, optionally purified to a valid state.
inline FermiStateResult fermi_sea_state(const WignerFunction& W, std::uint64_t N, double eps,
                                        Purification mode = Purification::projector) {
    auto K = weyl_kernel(W, static_cast<double>(N), eps);
    hermitize(K);
    const auto& g = K.grid();
    const int n = K.n();
    FermiStateResult res;
    auto es = linalg::hermitian_eigensystem(K.operator_matrix(), n);
    res.raw_eigenvalues = es.values;
    int mid = 0;
    for (double x : es.values) mid += (x > 0.05 && x < 0.95);
    res.intermediate_fraction = static_cast<double>(mid) / n;
    const double inv_w = 1.0 / g.cell_volume();
    if (mode == Purification::none) {
        res.omega = DensityKernel(std::move(K), N, eps);
        return res;
    }
    if (mode == Purification::projector && N > static_cast<std::uint64_t>(n))
        throw DataError("cannot place N particles in a grid of " + std::to_string(n) + " states");
    const double cutoff = mode == Purification::projector ? es.values[n - N] : 0.0;
    auto mapped = linalg::spectral_map(es, n, [&](double x) -> cplx {
        if (mode == Purification::projector) return x >= cutoff ? 1.0 : 0.0;
        return std::clamp(x, 0.0, 1.0);
    });
    // eigenvalue ties at the cutoff are resolved by index order
    if (mode == Purification::projector) {
        int count = 0;
        for (double x : es.values) count += x >= cutoff;
        if (count != static_cast<int>(N)) {
            std::vector<double> occ(n, 0.0);
            for (int k = n - static_cast<int>(N); k < n; ++k) occ[k] = 1.0;
            linalg::EigenSystem e2{occ, es.vectors};
            mapped = linalg::spectral_map(e2, n, [](double x) -> cplx { return x; });
        }
    }
    KernelArray out(g, std::move(mapped));
    for (auto& z : out.data()) z *= inv_w;
    hermitize(out);
    double tr = 0;
    for (int i = 0; i < n; ++i) tr += out(i, i).real();
    tr *= g.cell_volume();
    if (mode == Purification::clamp) {
        double s = static_cast<double>(N) / tr;
        if (std::abs(s - 1) > 1e-3) diag::warn("fermi_sea_state: clamp purification rescaled trace by " +
                                               std::to_string(s));
        for (auto& z : out.data()) z *= s;
    } else {
        double s = static_cast<double>(N) / tr;
        for (auto& z : out.data()) z *= s;
    }
    res.omega = DensityKernel(std::move(out), N, eps);
    return res;
}

// N times a normalized periodized Gaussian bump of the given width centered at the origin.
inline std::vector<double> gaussian_profile(const SpatialGrid& g, std::uint64_t N, double width) {
    if (!(width > 0)) throw ConfigError("profile width must be positive");
    std::vector<double> rho(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto x = g.coords(i);
        double v = 1;
        for (int a = 0; a < g.dim(); ++a)
            v *= detail::periodic_gauss_1d(x[a], width, g.L());
        rho[i] = v;
    }
    double s = integrate(rho, g);
    for (auto& r : rho) r *= static_cast<double>(N) / s;
    return rho;
}

} // namespace hvlab
