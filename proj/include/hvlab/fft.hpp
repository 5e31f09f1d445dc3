#pragma once

#include <fftw3.h>

#include <array>
#include <map>
#include <mutex>
#include <span>

#include "core.hpp"

namespace hvlab::fft {

inline constexpr int forward = FFTW_FORWARD;
inline constexpr int backward = FFTW_BACKWARD;

inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct PlanKey {
    int rank;
    std::array<int, 4> dims;
    int howmany;
    int stride;
    int dist;
    int sign;
    auto operator<=>(const PlanKey&) const = default;
};

class PlanCache {
public:
    PlanCache() = default;
    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;
    ~PlanCache() {
        std::lock_guard lk(planner_mutex());
        for (auto& [k, p] : plans_) fftw_destroy_plan(p);
    }

    fftw_plan get(const PlanKey& key, cplx* data) {
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::lock_guard lk(planner_mutex());
        auto* z = reinterpret_cast<fftw_complex*>(data);
        fftw_plan p = fftw_plan_many_dft(key.rank, key.dims.data(), key.howmany, z, nullptr,
                                         key.stride, key.dist, z, nullptr, key.stride, key.dist,
                                         key.sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!p) throw NumericalError("fftw planner failed");
        plans_.emplace(key, p);
        return p;
    }

private:
    std::map<PlanKey, fftw_plan> plans_;
};

inline PlanCache& thread_cache() {
    thread_local PlanCache cache;
    return cache;
}

// Unnormalized in-place transform of `howmany` interleaved blocks.
inline void many(cplx* data, std::span<const int> dims, int howmany, int stride, int dist,
                 int sign) {
    if (dims.empty() || dims.size() > 4) throw ConfigError("fft rank must be 1..4");
    PlanKey key{static_cast<int>(dims.size()), {1, 1, 1, 1}, howmany, stride, dist, sign};
    std::copy(dims.begin(), dims.end(), key.dims.begin());
    fftw_plan p = thread_cache().get(key, data);
    auto* z = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(p, z, z);
}

inline void full(cplx* data, std::span<const int> dims, int sign) {
    many(data, dims, 1, 1, 0, sign);
}

inline void scale(std::span<cplx> a, double s) {
    for (auto& z : a) z *= s;
}

// Maps natural FFT index to signed frequency in [-M/2, M/2).
inline int centered(int i, int M) { return i < M / 2 ? i : i - M; }

} // namespace hvlab::fft
