#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "spectral.hpp"

namespace hvlab {

enum class PotentialKind { zero, constant, gaussian };

inline std::string to_string(PotentialKind k) {
    switch (k) {
    case PotentialKind::zero: return "zero";
    case PotentialKind::constant: return "constant";
    case PotentialKind::gaussian: return "gaussian";
    }
    return "?";
}

inline PotentialKind potential_kind_from(const std::string& s) {
    if (s == "zero") return PotentialKind::zero;
    if (s == "constant") return PotentialKind::constant;
    if (s == "gaussian") return PotentialKind::gaussian;
    throw ConfigError("unknown potential kind '" + s + "' (zero|constant|gaussian)");
}

// gaussian: amplitude * exp(-|x|^2 / (2 width^2)); constant: amplitude.
struct PotentialSpec {
    PotentialKind kind = PotentialKind::zero;
    double amplitude = 0;
    double width = 1;
};

// Pair interaction sampled on the displacement lattice s*h, s in natural FFT order.
class Potential {
public:
    Potential(const SpatialGrid& g, PotentialSpec spec) : grid_(g), spec_(spec) {
        if (spec.kind == PotentialKind::gaussian && !(spec.width > 0))
            throw ConfigError("gaussian potential needs width > 0");
        if (!std::isfinite(spec.amplitude)) throw ConfigError("potential amplitude not finite");
        samples_.assign(g.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) {
            auto [s0, s1] = g.unflatten(i);
            double d0 = fft::centered(s0, g.M()) * g.h();
            double d1 = g.dim() == 2 ? fft::centered(s1, g.M()) * g.h() : 0.0;
            samples_[i] = evaluate(spec, d0 * d0 + d1 * d1);
        }
        finish();
    }

    static Potential from_samples(const SpatialGrid& g, std::vector<double> samples) {
        detail::require_size(samples.size(), g.size(), "Potential::from_samples");
        Potential p(g);
        p.samples_ = std::move(samples);
        p.finish();
        return p;
    }

    static double evaluate(const PotentialSpec& spec, double r2) {
        switch (spec.kind) {
        case PotentialKind::zero: return 0.0;
        case PotentialKind::constant: return spec.amplitude;
        case PotentialKind::gaussian:
            return spec.amplitude * std::exp(-r2 / (2 * spec.width * spec.width));
        }
        return 0.0;
    }

    const SpatialGrid& grid() const { return grid_; }
    const PotentialSpec& spec() const { return spec_; }
    const std::vector<double>& samples() const { return samples_; }
    // h^d * FFT of the displacement samples, natural order.
    const std::vector<cplx>& fourier() const { return fourier_; }

    // V at lattice displacement (s0, s1) cells, any integers.
    double at_displacement(int s0, int s1 = 0) const {
        return samples_[grid_.flatten(grid_.wrap(s0), grid_.dim() == 2 ? grid_.wrap(s1) : 0)];
    }

    bool is_zero() const { return sup_norm_ == 0.0; }
    double sup_norm() const { return sup_norm_; }

    // Discrete version of the integral of |V^(p)| (1 + |p|^2) dp.
    double fourier_moment() const {
        double s = 0;
        const double dk = std::pow(2 * pi / grid_.L(), grid_.dim());
        detail::for_each_mode(grid_.dim(), grid_.M(), [&](std::size_t nat, int m0, int m1) {
            double k2 = std::pow(grid_.wavenumber(m0), 2) +
                        (grid_.dim() == 2 ? std::pow(grid_.wavenumber(m1), 2) : 0.0);
            s += std::abs(fourier_[nat]) * (1 + k2);
        });
        return s * dk;
    }

    bool is_even(double tol = 1e-14) const {
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            auto [s0, s1] = grid_.unflatten(i);
            double other = at_displacement(-s0, -s1);
            if (std::abs(samples_[i] - other) > tol * std::max(1.0, sup_norm_)) return false;
        }
        return true;
    }

private:
    explicit Potential(const SpatialGrid& g) : grid_(g) {}

    void finish() {
        sup_norm_ = 0;
        for (double v : samples_) {
            if (!std::isfinite(v)) throw ConfigError("potential samples not finite");
            sup_norm_ = std::max(sup_norm_, std::abs(v));
        }
        fourier_ = fft_real(samples_, grid_);
        fft::scale(fourier_, grid_.cell_volume());
    }

    SpatialGrid grid_;
    PotentialSpec spec_;
    std::vector<double> samples_;
    std::vector<cplx> fourier_;
    double sup_norm_ = 0;
};

// h^d sum_y V(x - y) f(y) via the frequency-domain product.
inline std::vector<double> convolve_periodic(std::span<const double> f, const Potential& V) {
    const auto& g = V.grid();
    detail::require_size(f.size(), g.size(), "convolve_periodic");
    if (V.is_zero()) return std::vector<double>(f.size(), 0.0);
    auto A = fft_real(f, g);
    const auto& Vh = V.fourier();
    for (std::size_t i = 0; i < A.size(); ++i) A[i] *= Vh[i];
    return ifft_to_real(std::move(A), g, "convolve_periodic");
}

inline std::vector<double> convolve_periodic(std::span<const double> f, const SpatialGrid& g,
                                             const Potential& V) {
    require_same_grid(g, V.grid(), "convolve_periodic");
    return convolve_periodic(f, V);
}

// -grad (V * rho), one array per axis.
inline std::vector<std::vector<double>> mean_field_force(std::span<const double> rho,
                                                         const Potential& V) {
    const auto& g = V.grid();
    std::vector<std::vector<double>> F(g.dim());
    if (V.is_zero()) {
        for (auto& f : F) f.assign(g.size(), 0.0);
        return F;
    }
    auto U = convolve_periodic(rho, V);
    for (int a = 0; a < g.dim(); ++a) {
        F[a] = spectral_gradient(U, g, a);
        for (auto& x : F[a]) x = -x;
    }
    return F;
}

} // namespace hvlab
