#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "grid.hpp"
#include "linalg.hpp"

namespace hvlab {

// Square complex kernel A(x_i; x_j) on a spatial grid, row-major.
class KernelArray {
public:
    KernelArray() = default;
    explicit KernelArray(const SpatialGrid& g) : grid_(g), data_(g.size() * g.size(), cplx(0)) {}
    KernelArray(const SpatialGrid& g, std::vector<cplx> data) : grid_(g), data_(std::move(data)) {
        if (data_.size() != g.size() * g.size())
            throw ConfigError("kernel array has " + std::to_string(data_.size()) +
                              " entries, grid needs " + std::to_string(g.size() * g.size()));
    }

    const SpatialGrid& grid() const { return grid_; }
    int n() const { return static_cast<int>(grid_.size()); }
    const std::vector<cplx>& data() const { return data_; }
    std::vector<cplx>& data() { return data_; }
    const cplx& operator()(std::size_t i, std::size_t j) const { return data_[i * grid_.size() + j]; }
    cplx& operator()(std::size_t i, std::size_t j) { return data_[i * grid_.size() + j]; }

    KernelArray operator-(const KernelArray& o) const {
        require_same_grid(grid_, o.grid_, "kernel difference");
        KernelArray r(grid_, data_);
        for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] -= o.data_[i];
        return r;
    }
    KernelArray operator+(const KernelArray& o) const {
        require_same_grid(grid_, o.grid_, "kernel sum");
        KernelArray r(grid_, data_);
        for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] += o.data_[i];
        return r;
    }
    KernelArray scaled(cplx c) const {
        KernelArray r(grid_, data_);
        for (auto& z : r.data_) z *= c;
        return r;
    }

    // h^d * kernel, the matrix of the operator it represents.
    std::vector<cplx> operator_matrix() const {
        std::vector<cplx> m(data_);
        const double w = grid_.cell_volume();
        for (auto& z : m) z *= w;
        return m;
    }

private:
    SpatialGrid grid_;
    std::vector<cplx> data_;
};

struct OperatorMetricSet {
    double trace_norm = 0;
    double hs_norm = 0;
    double t = 0;
};

struct SpectrumReport {
    double min_eigenvalue = 0;
    double max_eigenvalue = 0;
    std::vector<double> eigenvalues;
};

// One-particle reduced density: Hermitian, trace N, spectrum in [0, 1].
class DensityKernel {
public:
    DensityKernel() = default;
    DensityKernel(KernelArray kernel, std::uint64_t N, double eps)
        : kernel_(std::move(kernel)), N_(N), eps_(eps) {
        if (N == 0) throw ConfigError("particle number must be positive");
        if (!(eps > 0) || !std::isfinite(eps)) throw ConfigError("epsilon must be positive");
        check_structure();
    }

    const KernelArray& kernel() const { return kernel_; }
    const SpatialGrid& grid() const { return kernel_.grid(); }
    std::uint64_t N() const { return N_; }
    double eps() const { return eps_; }
    int n() const { return kernel_.n(); }
    const cplx& operator()(std::size_t i, std::size_t j) const { return kernel_(i, j); }

    double trace() const {
        double s = 0;
        for (std::size_t i = 0; i < grid().size(); ++i) s += kernel_(i, i).real();
        return s * grid().cell_volume();
    }

    // Eigenvalues of the h^d-weighted operator.
    SpectrumReport spectrum() const {
        SpectrumReport r;
        r.eigenvalues = linalg::hermitian_eigenvalues(kernel_.operator_matrix(), n());
        r.min_eigenvalue = r.eigenvalues.front();
        r.max_eigenvalue = r.eigenvalues.back();
        return r;
    }

    // Throws DataError if the spectrum leaves [-tol, 1 + tol].
    SpectrumReport check_spectrum(double tol = 1e-8) const {
        auto r = spectrum();
        if (r.min_eigenvalue < -tol || r.max_eigenvalue > 1 + tol)
            throw DataError("density kernel spectrum [" + std::to_string(r.min_eigenvalue) + ", " +
                            std::to_string(r.max_eigenvalue) + "] outside [0, 1]");
        return r;
    }

private:
    void check_structure() const {
        if (!all_finite(kernel_.data())) throw NumericalError("density kernel has non-finite entries");
        double herm = linalg::hermitian_defect(kernel_.data(), n());
        if (herm > 1e-10) throw DataError("density kernel not Hermitian (defect " + std::to_string(herm) + ")");
        double tr = trace();
        if (std::abs(tr - static_cast<double>(N_)) > 1e-8 * static_cast<double>(N_))
            throw DataError("density kernel trace " + std::to_string(tr) + " differs from N=" +
                            std::to_string(N_));
    }

    KernelArray kernel_;
    std::uint64_t N_ = 1;
    double eps_ = 1;
};

} // namespace hvlab
