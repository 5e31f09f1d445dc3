#pragma once

#include <array>
#include <cmath>
#include <algorithm>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "classical.hpp"
#include "linalg.hpp"
#include "potential.hpp"

namespace hvlab {

// ---------------------------------------------------------------------------
// Grid mode: semi-Lagrangian Strang splitting.

namespace detail {

// Weights of the 4-point Lagrange interpolant on nodes {-2, -1, 0, 1} evaluated at -phi.
inline std::array<double, 4> cubic_weights(double phi) {
    static constexpr double nodes[4] = {-2, -1, 0, 1};
    const double x = -phi;
    std::array<double, 4> w{};
    for (int k = 0; k < 4; ++k) {
        double num = 1, den = 1;
        for (int m = 0; m < 4; ++m) {
            if (m == k) continue;
            num *= x - nodes[m];
            den *= nodes[k] - nodes[m];
        }
        w[k] = num / den;
    }
    return w;
}

// out[j] = in(j - alpha) on a zero-extended line of length len with stride, in conservative form:
// the cell primitive is shifted by cubic interpolation and differenced, so the sum is kept exactly.
inline void shift_line(const double* in, double* out, int len, std::size_t stride, double alpha,
                       std::vector<double>& prim) {
    prim.assign(len + 1, 0.0);
    for (int j = 0; j < len; ++j) prim[j + 1] = prim[j] + in[j * stride];
    auto S = [&](int i) { return prim[std::clamp(i, 0, len)]; };
    const double fl = std::floor(alpha);
    const int ia = static_cast<int>(fl);
    auto w = cubic_weights(alpha - fl);
    auto shifted = [&](int j) {
        double s = 0;
        for (int k = 0; k < 4; ++k) s += w[k] * S(j - ia + (k - 2));
        return s;
    };
    double lo = shifted(0);
    for (int j = 0; j < len; ++j) {
        double hi = shifted(j + 1);
        out[j * stride] = hi - lo;
        lo = hi;
    }
}

} // namespace detail

class VlasovGridSolver {
public:
    VlasovGridSolver(const PhaseSpaceGrid& pg, const Potential& V) : pg_(pg), V_(V) {
        require_same_grid(pg.spatial(), V.grid(), "vlasov");
        xdims_.assign(pg.dim(), pg.spatial().M());
    }

    const PhaseSpaceGrid& grid() const { return pg_; }

    // W(x, v) <- W(x - 2 v tau, v), spectral in x; the Nyquist mode uses the real (cosine) shift.
    void advect_x(std::vector<double>& W, double tau) const {
        const std::size_t nx = pg_.nx(), nv = pg_.nv();
        std::vector<cplx> a(W.begin(), W.end());
        fft::many(a.data(), xdims_, static_cast<int>(nv), static_cast<int>(nv), 1, fft::forward);
        const auto& f = shift_factors(tau);
        parallel::for_chunks(nx, [&](std::size_t b, std::size_t e, unsigned) {
            for (std::size_t i = b * nv; i < e * nv; ++i) a[i] *= f[i];
        });
        fft::many(a.data(), xdims_, static_cast<int>(nv), static_cast<int>(nv), 1, fft::backward);
        const double s = 1.0 / static_cast<double>(nx);
        for (std::size_t i = 0; i < W.size(); ++i) W[i] = a[i].real() * s;
    }

    // -grad (V * rho) from the current data.
    std::vector<std::vector<double>> force(const std::vector<double>& W) const {
        const std::size_t nx = pg_.nx(), nv = pg_.nv();
        const double wv = std::pow(pg_.hv(), pg_.dim());
        std::vector<double> rho(nx);
        for (std::size_t ix = 0; ix < nx; ++ix) {
            double s = 0;
            for (std::size_t iv = 0; iv < nv; ++iv) s += W[ix * nv + iv];
            rho[ix] = s * wv;
        }
        return mean_field_force(rho, V_);
    }

    // W(x, v) <- W(x, v - F(x) tau), cubic Lagrange per axis.
    void advect_v(std::vector<double>& W, double tau) const {
        if (V_.is_zero()) return;
        auto F = force(W);
        const int Mv = pg_.Mv(), d = pg_.dim();
        const std::size_t nx = pg_.nx(), nv = pg_.nv();
        double worst = 0;
        for (const auto& Fa : F)
            for (double f : Fa) worst = std::max(worst, std::abs(f * tau / pg_.hv()));
        if (worst > Mv / 4.0)
            throw ConfigError("vlasov: force shift of " + std::to_string(worst) + " cells exceeds M_v/4 = " +
                              std::to_string(Mv / 4) + "; reduce dt");
        parallel::for_chunks(nx, [&](std::size_t b, std::size_t e, unsigned) {
            std::vector<double> tmp(nv), prim;
            for (std::size_t ix = b; ix < e; ++ix) {
                double* block = &W[ix * nv];
                for (int ax = 0; ax < d; ++ax) {
                    double alpha = F[ax][ix] * tau / pg_.hv();
                    if (alpha == 0) continue;
                    if (d == 1) {
                        detail::shift_line(block, tmp.data(), Mv, 1, alpha, prim);
                    } else if (ax == 0) {
                        for (int j1 = 0; j1 < Mv; ++j1) detail::shift_line(block + j1, tmp.data() + j1, Mv, Mv, alpha, prim);
                    } else {
                        for (int j0 = 0; j0 < Mv; ++j0)
                            detail::shift_line(block + j0 * Mv, tmp.data() + j0 * Mv, Mv, 1, alpha, prim);
                    }
                    std::copy(tmp.begin(), tmp.end(), block);
                }
            }
        });
    }

    void step(std::vector<double>& W, double dt) const {
        advect_x(W, dt / 2);
        advect_v(W, dt);
        advect_x(W, dt / 2);
    }

private:
    // Per-mode factors of the x shift by 2 v tau, laid out like the data; cached for the last tau.
    const std::vector<cplx>& shift_factors(double tau) const {
        if (tau == factor_tau_ && !factors_.empty()) return factors_;
        const auto& g = pg_.spatial();
        const int M = g.M(), d = pg_.dim();
        const std::size_t nx = pg_.nx(), nv = pg_.nv();
        std::vector<std::array<int, 2>> modes(nx);
        detail::for_each_mode(d, M, [&](std::size_t nat, int m0, int m1) { modes[nat] = {m0, m1}; });
        factors_.resize(nx * nv);
        parallel::for_chunks(nx, [&](std::size_t b, std::size_t e, unsigned) {
            for (std::size_t ix = b; ix < e; ++ix)
                for (std::size_t iv = 0; iv < nv; ++iv) {
                    auto v = pg_.vcoords(iv);
                    cplx f = 1;
                    for (int ax = 0; ax < d; ++ax) {
                        int m = modes[ix][ax];
                        double arg = g.wavenumber(m) * 2 * v[ax] * tau;
                        f *= (m == -M / 2) ? cplx(std::cos(arg), 0) : std::polar(1.0, -arg);
                    }
                    factors_[ix * nv + iv] = f;
                }
        });
        factor_tau_ = tau;
        return factors_;
    }

    PhaseSpaceGrid pg_;
    Potential V_;
    std::vector<int> xdims_;
    mutable std::vector<cplx> factors_;
    mutable double factor_tau_ = 0;
};

inline WignerFunction vlasov_step_grid(const WignerFunction& W, const Potential& V, double dt) {
    VlasovGridSolver S(W.grid(), V);
    std::vector<double> v(W.values());
    S.step(v, dt);
    return WignerFunction(W.grid(), std::move(v));
}

// ---------------------------------------------------------------------------
// Characteristics mode.

// Markers in phase space; positions are not wrapped (deposition wraps).
struct CharacteristicEnsemble {
    int dim = 1;
    std::vector<double> X, V, w;  // X and V hold dim entries per marker
    std::vector<double> X0, V0;
    double v_limit = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> probe_centers;  // each followed by 2 dim neighbours
    double probe_delta = 0;

    std::size_t count() const { return w.size(); }
    double total_weight() const {
        double s = 0;
        for (double x : w) s += x;
        return s;
    }

    void add(std::array<double, 2> x, std::array<double, 2> v, double weight) {
        for (int a = 0; a < dim; ++a) {
            X.push_back(x[a]);
            V.push_back(v[a]);
            X0.push_back(x[a]);
            V0.push_back(v[a]);
        }
        w.push_back(weight);
    }

    // Zero-weight cluster: the point plus one neighbour per phase-space direction at distance delta.
    void add_probe(std::array<double, 2> x, std::array<double, 2> v, double delta) {
        if (!(delta > 0)) throw ConfigError("probe offset must be positive");
        probe_delta = delta;
        probe_centers.push_back(count());
        add(x, v, 0.0);
        for (int c = 0; c < 2 * dim; ++c) {
            auto xx = x;
            auto vv = v;
            if (c < dim)
                xx[c] += delta;
            else
                vv[c - dim] += delta;
            add(xx, vv, 0.0);
        }
    }
};

inline void check_ensemble(const CharacteristicEnsemble& e, std::size_t min_count = 1000) {
    std::size_t weighted = 0;
    for (double x : e.w)
        if (x != 0) ++weighted;
    if (weighted < min_count)
        throw ConfigError("ensemble has " + std::to_string(weighted) + " weighted markers, need >= " +
                          std::to_string(min_count));
    if (std::abs(e.total_weight() - 1.0) > 1e-10)
        throw DataError("ensemble weights sum to " + std::to_string(e.total_weight()) + ", not 1");
}

// Markers on the phase-space nodes with signed weights W * cell volume (exact zeros skipped).
inline CharacteristicEnsemble ensemble_from_wigner(const WignerFunction& W) {
    const auto& g = W.grid();
    CharacteristicEnsemble e;
    e.dim = g.dim();
    e.v_limit = g.v_max();
    const double cv = g.cell_volume();
    for (std::size_t ix = 0; ix < g.nx(); ++ix) {
        auto x = g.spatial().coords(ix);
        for (std::size_t iv = 0; iv < g.nv(); ++iv) {
            double val = W(ix, iv);
            if (val != 0) e.add(x, g.vcoords(iv), val * cv);
        }
    }
    double s = e.total_weight();
    if (!(std::abs(s) > 0)) throw DataError("ensemble_from_wigner: zero total mass");
    for (auto& x : e.w) x /= s;
    return e;
}

namespace detail {

// Cloud-in-cell stencil: base node indices and weights per axis.
struct CicStencil {
    int i0[2] = {0, 0};
    double f[2] = {0, 0};
};

inline CicStencil cic(const SpatialGrid& g, const double* x) {
    CicStencil s;
    for (int a = 0; a < g.dim(); ++a) {
        double u = (x[a] + g.L() / 2) / g.h();
        double fl = std::floor(u);
        s.i0[a] = g.wrap(static_cast<int>(static_cast<long long>(fl) % g.M()));
        s.f[a] = u - fl;
    }
    return s;
}

} // namespace detail

// rho on the grid from weighted markers (CIC); per-chunk partials summed in chunk order.
inline std::vector<double> deposit(const CharacteristicEnsemble& e, const SpatialGrid& g) {
    const int d = e.dim;
    const std::size_t n = g.size(), count = e.count();
    const unsigned chunks = parallel::chunk_count(count);
    std::vector<std::vector<double>> part(chunks, std::vector<double>(n, 0.0));
    const double inv_cell = 1.0 / g.cell_volume();
    parallel::for_chunks(count, [&](std::size_t b, std::size_t end, unsigned c) {
        auto& rho = part[c];
        for (std::size_t p = b; p < end; ++p) {
            if (e.w[p] == 0) continue;
            auto s = detail::cic(g, &e.X[p * d]);
            if (d == 1) {
                rho[s.i0[0]] += e.w[p] * (1 - s.f[0]);
                rho[g.wrap(s.i0[0] + 1)] += e.w[p] * s.f[0];
            } else {
                for (int a = 0; a < 2; ++a)
                    for (int b2 = 0; b2 < 2; ++b2) {
                        double wt = (a ? s.f[0] : 1 - s.f[0]) * (b2 ? s.f[1] : 1 - s.f[1]);
                        rho[g.flatten(g.wrap(s.i0[0] + a), g.wrap(s.i0[1] + b2))] += e.w[p] * wt;
                    }
            }
        }
    });
    std::vector<double> rho(n, 0.0);
    for (const auto& pc : part)
        for (std::size_t i = 0; i < n; ++i) rho[i] += pc[i];
    for (auto& r : rho) r *= inv_cell;
    return rho;
}

inline double interpolate_cic(const SpatialGrid& g, std::span<const double> f, const double* x) {
    auto s = detail::cic(g, x);
    if (g.dim() == 1) return f[s.i0[0]] * (1 - s.f[0]) + f[g.wrap(s.i0[0] + 1)] * s.f[0];
    double r = 0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            r += f[g.flatten(g.wrap(s.i0[0] + a), g.wrap(s.i0[1] + b))] * (a ? s.f[0] : 1 - s.f[0]) *
                 (b ? s.f[1] : 1 - s.f[1]);
    return r;
}

// W on the phase-space grid from weighted markers: CIC in x (periodic) and in v (markers beyond
// the velocity box are dropped with a warning).
inline WignerFunction deposit_phase_space(const CharacteristicEnsemble& e, const PhaseSpaceGrid& pg) {
    const auto& g = pg.spatial();
    const int d = e.dim, Mv = pg.Mv();
    if (d != pg.dim()) throw ConfigError("deposit_phase_space: ensemble and grid dimensions differ");
    std::vector<double> W(pg.size(), 0.0);
    double lost = 0;
    for (std::size_t p = 0; p < e.count(); ++p) {
        if (e.w[p] == 0) continue;
        auto sx = detail::cic(g, &e.X[p * d]);
        int jv[2] = {0, 0};
        double fv[2] = {0, 0};
        bool inside = true;
        for (int a = 0; a < d; ++a) {
            double u = (e.V[p * d + a] + pg.v_max()) / pg.hv();
            double fl = std::floor(u);
            jv[a] = static_cast<int>(fl);
            fv[a] = u - fl;
            if (jv[a] == Mv - 1 && fv[a] == 0) {
                jv[a] = Mv - 2;
                fv[a] = 1;
            }
            inside = inside && jv[a] >= 0 && jv[a] + 1 < Mv;
        }
        if (!inside) {
            lost += std::abs(e.w[p]);
            continue;
        }
        const int corners = 1 << (2 * d);
        for (int c = 0; c < corners; ++c) {
            double wt = e.w[p];
            int ix[2] = {0, 0}, iv[2] = {0, 0};
            for (int a = 0; a < d; ++a) {
                int bx = (c >> a) & 1, bv = (c >> (d + a)) & 1;
                ix[a] = g.wrap(sx.i0[a] + bx);
                iv[a] = jv[a] + bv;
                wt *= (bx ? sx.f[a] : 1 - sx.f[a]) * (bv ? fv[a] : 1 - fv[a]);
            }
            W[g.flatten(ix[0], d == 2 ? ix[1] : 0) * pg.nv() + pg.flatten_v(iv[0], d == 2 ? iv[1] : 0)] += wt;
        }
    }
    if (lost > 0) diag::warn("deposit_phase_space: weight " + std::to_string(lost) + " outside the velocity box");
    const double inv = 1.0 / pg.cell_volume();
    for (auto& x : W) x *= inv;
    return WignerFunction(pg, std::move(W));
}

namespace detail {

inline void drift(CharacteristicEnsemble& e, double tau) {
    parallel::for_chunks(e.X.size(), [&](std::size_t b, std::size_t end, unsigned) {
        for (std::size_t i = b; i < end; ++i) e.X[i] += 2 * e.V[i] * tau;
    });
}

inline void kick(CharacteristicEnsemble& e, const SpatialGrid& g,
                 const std::vector<std::vector<double>>& F, double tau) {
    const int d = e.dim;
    parallel::for_chunks(e.count(), [&](std::size_t b, std::size_t end, unsigned) {
        for (std::size_t p = b; p < end; ++p)
            for (int a = 0; a < d; ++a) e.V[p * d + a] += interpolate_cic(g, F[a], &e.X[p * d]) * tau;
    });
}

inline void warn_escapes(const CharacteristicEnsemble& e) {
    std::size_t out = 0;
    for (double v : e.V)
        if (std::abs(v) > e.v_limit) ++out;
    if (out > 0)
        diag::warn("characteristics: " + std::to_string(out) + " marker velocities left |v| <= " +
                   std::to_string(e.v_limit));
}

} // namespace detail

// Drift-kick-drift for x' = 2v, v' = -grad(V * rho)(x), rho deposited at the half-drift positions.
inline void characteristics_step_inplace(CharacteristicEnsemble& e, const Potential& V, double dt) {
    const auto& g = V.grid();
    if (e.dim != g.dim()) throw ConfigError("characteristics: ensemble and grid dimensions differ");
    detail::drift(e, dt / 2);
    if (!V.is_zero()) {
        auto F = mean_field_force(deposit(e, g), V);
        detail::kick(e, g, F, dt);
    }
    detail::drift(e, dt / 2);
    detail::warn_escapes(e);
}

inline CharacteristicEnsemble characteristics_step(CharacteristicEnsemble e, const Potential& V, double dt) {
    characteristics_step_inplace(e, V, dt);
    return e;
}

// ---------------------------------------------------------------------------
// Diagnostics.

struct SobolevSample {
    double t = 0;
    std::vector<double> norms;  // index k = 0..k_max
};

struct FlowDiagnostics {
    double jacobian_dev = 0;     // max |det grad Phi - 1| over probe clusters
    double max_entry = 0;        // max |entry of grad Phi|
    std::size_t clusters_used = 0;
    std::vector<SobolevSample> sobolev_track;
};

// Forward-difference flow Jacobian per probe cluster.
inline FlowDiagnostics jacobian_probe(const CharacteristicEnsemble& e) {
    FlowDiagnostics fd;
    const int d = e.dim, r = 2 * d;
    for (std::size_t c : e.probe_centers) {
        std::vector<double> J(r * r);
        bool ok = true;
        auto state = [&](std::size_t p, int comp) { return comp < d ? e.X[p * d + comp] : e.V[p * d + comp - d]; };
        for (int col = 0; col < r; ++col) {
            std::size_t q = c + 1 + col;
            for (int row = 0; row < r; ++row) {
                double v = (state(q, row) - state(c, row)) / e.probe_delta;
                if (!std::isfinite(v)) ok = false;
                J[row * r + col] = v;
            }
        }
        if (!ok) {
            diag::warn("jacobian_probe: degenerate cluster at marker " + std::to_string(c) + " skipped");
            continue;
        }
        double det;
        if (r == 2) {
            det = J[0] * J[3] - J[1] * J[2];
        } else {
            std::vector<double> A(J);
            det = 1;
            for (int k = 0; k < r; ++k) {
                int piv = k;
                for (int i = k + 1; i < r; ++i)
                    if (std::abs(A[i * r + k]) > std::abs(A[piv * r + k])) piv = i;
                if (A[piv * r + k] == 0) {
                    det = 0;
                    break;
                }
                if (piv != k) {
                    for (int j = 0; j < r; ++j) std::swap(A[k * r + j], A[piv * r + j]);
                    det = -det;
                }
                det *= A[k * r + k];
                for (int i = k + 1; i < r; ++i) {
                    double m = A[i * r + k] / A[k * r + k];
                    for (int j = k; j < r; ++j) A[i * r + j] -= m * A[k * r + j];
                }
            }
        }
        fd.jacobian_dev = std::max(fd.jacobian_dev, std::abs(det - 1));
        for (double v : J) fd.max_entry = std::max(fd.max_entry, std::abs(v));
        ++fd.clusters_used;
    }
    return fd;
}

// ---------------------------------------------------------------------------
// Dobrushin fixed-point iteration.

struct DobrushinResult {
    std::vector<std::vector<std::vector<double>>> iterates;  // [iteration][step] deposited density
    std::vector<double> distances;                           // sup_t L1 between consecutive iterates
    std::vector<double> ratios;
    double horizon = 0;
    double dt = 0;
    bool contracted = false;
};

// Contraction horizon sqrt(1 / (2 sup |D^2 V|)).
inline double dobrushin_horizon(const Potential& V) {
    if (V.is_zero()) return std::numeric_limits<double>::infinity();
    const auto& g = V.grid();
    double lip = 0;
    for (int a = 0; a < g.dim(); ++a)
        for (int b = 0; b < g.dim(); ++b) {
            auto d2 = spectral_gradient(spectral_gradient(V.samples(), g, a), g, b);
            for (double x : d2) lip = std::max(lip, std::abs(x));
        }
    return lip > 0 ? std::sqrt(1.0 / (2 * lip)) : std::numeric_limits<double>::infinity();
}

namespace detail {

// Flows e over the frozen density trajectory; returns the deposited densities at the kick times.
inline std::vector<std::vector<double>> frozen_flow(CharacteristicEnsemble e, const Potential& V,
                                                   const std::vector<std::vector<double>>& candidate,
                                                   double dt) {
    const auto& g = V.grid();
    std::vector<std::vector<double>> out;
    out.reserve(candidate.size());
    for (const auto& rho : candidate) {
        drift(e, dt / 2);
        out.push_back(deposit(e, g));
        if (!V.is_zero()) kick(e, g, mean_field_force(rho, V), dt);
        drift(e, dt / 2);
    }
    return out;
}

inline double sup_l1(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b,
                     double cell) {
    double m = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        double s = 0;
        for (std::size_t i = 0; i < a[k].size(); ++i) s += std::abs(a[k][i] - b[k][i]);
        m = std::max(m, s * cell);
    }
    return m;
}

} // namespace detail

// Picard iteration of the characteristics map over [0, delta]; the first candidate is rho_0 frozen.
inline DobrushinResult dobrushin_iterate(const CharacteristicEnsemble& mu0, const Potential& V, double delta,
                                         double dt, int n_iter) {
    if (!(delta > 0) || !(dt > 0)) throw ConfigError("dobrushin: interval and dt must be positive");
    if (n_iter < 1) throw ConfigError("dobrushin: need at least one iteration");
    const auto& g = V.grid();
    DobrushinResult r;
    r.horizon = dobrushin_horizon(V);
    if (delta > r.horizon)
        diag::warn("dobrushin: interval " + std::to_string(delta) + " beyond contraction horizon " +
                   std::to_string(r.horizon));
    const int steps = static_cast<int>(std::ceil(delta / dt - 1e-9));
    r.dt = delta / steps;
    std::vector<std::vector<double>> cand(steps, deposit(mu0, g));
    r.iterates.push_back(cand);
    for (int it = 0; it < n_iter; ++it) {
        auto next = detail::frozen_flow(mu0, V, r.iterates.back(), r.dt);
        r.distances.push_back(detail::sup_l1(next, r.iterates.back(), g.cell_volume()));
        r.iterates.push_back(std::move(next));
        std::size_t k = r.distances.size();
        if (k >= 2) r.ratios.push_back(r.distances[k - 2] > 0 ? r.distances[k - 1] / r.distances[k - 2] : 0.0);
    }
    r.contracted = !r.ratios.empty() && r.ratios.back() < 1;
    if (r.distances.back() == 0) r.contracted = true;
    if (!r.contracted) {
        std::string trace;
        for (double q : r.ratios) trace += " " + std::to_string(q);
        diag::warn("dobrushin: no contraction after " + std::to_string(n_iter) + " iterations; ratios" + trace);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Evolution drivers.

enum class VlasovMode { grid, characteristics };

inline std::string to_string(VlasovMode m) { return m == VlasovMode::grid ? "grid" : "characteristics"; }

inline VlasovMode vlasov_mode_from(const std::string& s) {
    if (s == "grid") return VlasovMode::grid;
    if (s == "characteristics") return VlasovMode::characteristics;
    throw ConfigError("unknown vlasov mode '" + s + "' (grid | characteristics)");
}

struct VlasovOptions {
    double dt = 1e-2;
    int record_every = 1;
    VlasovMode mode = VlasovMode::grid;
    int sobolev_order = -1;  // track ||W||_{H^k_a} for k <= order; negative disables
    int sobolev_weight = 4;
    bool keep_states = false;
    int probes = 0;  // characteristics mode: probe clusters seeded at the heaviest markers
    double probe_delta = 1e-6;
};

struct VlasovRecord {
    double t = 0;
    double mass = 0;
    double l1 = 0, l2 = 0, linf = 0;  // grid mode only
};

struct VlasovTrajectory {
    std::vector<VlasovRecord> records;
    std::vector<WignerFunction> states;  // grid mode: every record when keep_states, else only the last
    std::optional<CharacteristicEnsemble> ensemble;  // characteristics mode: final markers
    std::vector<double> final_density;
    FlowDiagnostics diagnostics;
    double dt = 0;
    int steps = 0;
    const WignerFunction& final_state() const { return states.back(); }
};

namespace detail {

inline int step_count(double T, double& dt) {
    if (!(T >= 0) || !std::isfinite(T)) throw ConfigError("vlasov: T must be >= 0");
    if (!(dt > 0) || !std::isfinite(dt)) throw ConfigError("vlasov: dt must be positive");
    const int n = T > 0 ? static_cast<int>(std::ceil(T / dt - 1e-9)) : 0;
    if (n > 0) dt = T / n;
    return n;
}

inline void seed_probes(CharacteristicEnsemble& e, int probes, double delta) {
    if (probes <= 0) return;
    std::vector<std::size_t> idx(e.count());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::size_t take = std::min<std::size_t>(probes, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + take, idx.end(),
                      [&](std::size_t a, std::size_t b) { return std::abs(e.w[a]) > std::abs(e.w[b]); });
    const int d = e.dim;
    for (std::size_t k = 0; k < take; ++k) {
        std::array<double, 2> x{0, 0}, v{0, 0};
        for (int a = 0; a < d; ++a) {
            x[a] = e.X[idx[k] * d + a];
            v[a] = e.V[idx[k] * d + a];
        }
        e.add_probe(x, v, delta);
    }
}

} // namespace detail

inline VlasovTrajectory evolve_vlasov(const WignerFunction& W0, const Potential& V, double T, VlasovOptions opts) {
    VlasovTrajectory traj;
    const auto& pg = W0.grid();
    traj.steps = detail::step_count(T, opts.dt);
    traj.dt = opts.dt;
    if (opts.record_every < 1) throw ConfigError("vlasov: record_every must be >= 1");
    const int n = traj.steps;

    if (opts.mode == VlasovMode::characteristics) {
        auto e = ensemble_from_wigner(W0);
        detail::seed_probes(e, opts.probes, opts.probe_delta);
        const auto& g = pg.spatial();
        auto rec = [&](int s) {
            VlasovRecord r;
            r.t = s == n ? T : s * opts.dt;
            r.mass = e.total_weight();
            traj.records.push_back(r);
        };
        rec(0);
        for (int s = 1; s <= n; ++s) {
            characteristics_step_inplace(e, V, opts.dt);
            if (s % opts.record_every == 0 || s == n) rec(s);
        }
        traj.final_density = deposit(e, g);
        traj.states.push_back(deposit_phase_space(e, pg));
        traj.diagnostics = jacobian_probe(e);
        traj.ensemble = std::move(e);
        return traj;
    }

    VlasovGridSolver S(pg, V);
    std::vector<double> W(W0.values());
    auto rec = [&](int s) {
        WignerFunction Wt(pg, W);
        VlasovRecord r;
        r.t = s == n ? T : s * opts.dt;
        r.mass = Wt.mass();
        r.l1 = lp_norm(Wt, 1);
        r.l2 = lp_norm(Wt, 2);
        r.linf = lp_norm(Wt, lp_inf);
        traj.records.push_back(r);
        if (opts.sobolev_order >= 0) {
            SobolevSample smp{r.t, {}};
            for (int k = 0; k <= opts.sobolev_order; ++k)
                smp.norms.push_back(weighted_sobolev_norm(Wt, k, opts.sobolev_weight));
            traj.diagnostics.sobolev_track.push_back(std::move(smp));
        }
        if (opts.keep_states || s == n) traj.states.push_back(std::move(Wt));
    };
    rec(0);
    for (int s = 1; s <= n; ++s) {
        S.step(W, opts.dt);
        if (s % opts.record_every == 0 || s == n) rec(s);
    }
    traj.final_density = vlasov_density(traj.states.back());
    guard_velocity_box(traj.states.back(), "vlasov");
    return traj;
}

// Characteristics evolution from an explicit ensemble.
inline VlasovTrajectory evolve_vlasov(const CharacteristicEnsemble& e0, const Potential& V, double T,
                                      VlasovOptions opts) {
    VlasovTrajectory traj;
    traj.steps = detail::step_count(T, opts.dt);
    traj.dt = opts.dt;
    auto e = e0;
    auto rec = [&](int s) {
        VlasovRecord r;
        r.t = s == traj.steps ? T : s * opts.dt;
        r.mass = e.total_weight();
        traj.records.push_back(r);
    };
    rec(0);
    for (int s = 1; s <= traj.steps; ++s) {
        characteristics_step_inplace(e, V, opts.dt);
        if (s % opts.record_every == 0 || s == traj.steps) rec(s);
    }
    traj.final_density = deposit(e, V.grid());
    traj.diagnostics = jacobian_probe(e);
    traj.ensemble = std::move(e);
    return traj;
}

} // namespace hvlab
