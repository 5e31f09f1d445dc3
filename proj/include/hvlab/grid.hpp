#pragma once

#include <array>
#include <cmath>
#include <sstream>

#include "core.hpp"
#include "fft.hpp"

namespace hvlab {

// Uniform periodic grid on [-L/2, L/2)^dim.
class SpatialGrid {
public:
    SpatialGrid() = default;
    SpatialGrid(int dim, int M, double L) : dim_(dim), M_(M), L_(L), dims_{M, M} {
        if (dim != 1 && dim != 2) throw ConfigError("grid dim must be 1 or 2");
        if (M < 8 || M % 2 != 0) throw ConfigError("grid M must be even and >= 8");
        if (!(L > 0) || !std::isfinite(L)) throw ConfigError("grid L must be positive");
    }

    int dim() const { return dim_; }
    int M() const { return M_; }
    double L() const { return L_; }
    double h() const { return L_ / M_; }
    double cell_volume() const { return std::pow(h(), dim_); }
    std::size_t size() const { return ipow(static_cast<std::size_t>(M_), dim_); }

    double node(int j) const { return -L_ / 2 + j * h(); }
    double wavenumber(int m) const { return 2 * pi * m / L_; }
    // Wavenumber of natural FFT index i.
    double k_of(int i) const { return wavenumber(fft::centered(i, M_)); }

    std::array<int, 2> unflatten(std::size_t idx) const {
        if (dim_ == 1) return {static_cast<int>(idx), 0};
        return {static_cast<int>(idx / M_), static_cast<int>(idx % M_)};
    }
    std::size_t flatten(int i0, int i1 = 0) const {
        return dim_ == 1 ? static_cast<std::size_t>(i0)
                         : static_cast<std::size_t>(i0) * M_ + i1;
    }
    int wrap(int i) const { return ((i % M_) + M_) % M_; }

    std::array<double, 2> coords(std::size_t idx) const {
        auto [i0, i1] = unflatten(idx);
        return {node(i0), dim_ == 2 ? node(i1) : 0.0};
    }

    std::span<const int> fft_dims() const { return {dims_.data(), static_cast<std::size_t>(dim_)}; }

    bool operator==(const SpatialGrid& o) const {
        return dim_ == o.dim_ && M_ == o.M_ && L_ == o.L_;
    }

    std::string describe() const {
        std::ostringstream s;
        s << "dim=" << dim_ << " M=" << M_ << " L=" << L_;
        return s.str();
    }

private:
    int dim_ = 1;
    int M_ = 8;
    double L_ = 1;
    std::array<int, 2> dims_{M_, M_};
};

inline void require_same_grid(const SpatialGrid& a, const SpatialGrid& b, const char* what) {
    if (!(a == b)) throw ConfigError(std::string(what) + ": grid mismatch (" + a.describe() +
                                     " vs " + b.describe() + ")");
}

// Spatial grid times a velocity grid with M_v points per axis on [-v_max, v_max).
class PhaseSpaceGrid {
public:
    PhaseSpaceGrid() = default;
    PhaseSpaceGrid(SpatialGrid spatial, int Mv, double v_max)
        : spatial_(spatial), Mv_(Mv), v_max_(v_max) {
        if (Mv < 8 || Mv % 2 != 0) throw ConfigError("velocity points must be even and >= 8");
        if (!(v_max > 0) || !std::isfinite(v_max)) throw ConfigError("v_max must be positive");
    }

    // Velocity lattice v = eps * k dual to the spatial lattice.
    static PhaseSpaceGrid dual(const SpatialGrid& g, double eps) {
        if (!(eps > 0)) throw ConfigError("epsilon must be positive");
        return PhaseSpaceGrid(g, g.M(), eps * pi * g.M() / g.L());
    }

    const SpatialGrid& spatial() const { return spatial_; }
    int dim() const { return spatial_.dim(); }
    int Mv() const { return Mv_; }
    double v_max() const { return v_max_; }
    double hv() const { return 2 * v_max_ / Mv_; }
    double velocity(int j) const { return -v_max_ + j * hv(); }
    std::size_t nx() const { return spatial_.size(); }
    std::size_t nv() const { return ipow(static_cast<std::size_t>(Mv_), dim()); }
    std::size_t size() const { return nx() * nv(); }
    double cell_volume() const { return spatial_.cell_volume() * std::pow(hv(), dim()); }

    std::array<int, 2> unflatten_v(std::size_t idx) const {
        if (dim() == 1) return {static_cast<int>(idx), 0};
        return {static_cast<int>(idx / Mv_), static_cast<int>(idx % Mv_)};
    }
    std::size_t flatten_v(int j0, int j1 = 0) const {
        return dim() == 1 ? static_cast<std::size_t>(j0) : static_cast<std::size_t>(j0) * Mv_ + j1;
    }
    std::array<double, 2> vcoords(std::size_t idx) const {
        auto [j0, j1] = unflatten_v(idx);
        return {velocity(j0), dim() == 2 ? velocity(j1) : 0.0};
    }

    bool is_dual_of(double eps) const {
        double want = eps * pi * spatial_.M() / spatial_.L();
        return Mv_ == spatial_.M() && std::abs(v_max_ - want) <= 1e-12 * want;
    }

    // Full phase-space FFT dims: spatial axes then velocity axes.
    std::vector<int> fft_dims() const {
        std::vector<int> d;
        for (int a = 0; a < dim(); ++a) d.push_back(spatial_.M());
        for (int a = 0; a < dim(); ++a) d.push_back(Mv_);
        return d;
    }

    bool operator==(const PhaseSpaceGrid& o) const {
        return spatial_ == o.spatial_ && Mv_ == o.Mv_ && v_max_ == o.v_max_;
    }

    std::string describe() const {
        std::ostringstream s;
        s << spatial_.describe() << " Mv=" << Mv_ << " v_max=" << v_max_;
        return s.str();
    }

private:
    SpatialGrid spatial_;
    int Mv_ = 8;
    double v_max_ = 1;
};

inline void require_same_grid(const PhaseSpaceGrid& a, const PhaseSpaceGrid& b, const char* what) {
    if (!(a == b)) throw ConfigError(std::string(what) + ": phase-space grid mismatch (" +
                                     a.describe() + " vs " + b.describe() + ")");
}

} // namespace hvlab
