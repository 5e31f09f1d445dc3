#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace hvlab {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;

// Bad input, bad configuration or a violated precondition.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A computation produced inconsistent or non-finite numbers.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input data violates a physical admissibility constraint.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace diag {

struct Sink {
    std::mutex mu;
    std::function<void(std::string_view)> fn;
    std::vector<std::string> log;
    bool keep = true;
};

inline Sink& sink() {
    static Sink s;
    return s;
}

inline void set_handler(std::function<void(std::string_view)> fn) {
    auto& s = sink();
    std::lock_guard lk(s.mu);
    s.fn = std::move(fn);
}

inline void warn(std::string msg) {
    auto& s = sink();
    std::lock_guard lk(s.mu);
    if (s.fn) s.fn(msg);
    if (s.keep) s.log.push_back(std::move(msg));
}

inline std::vector<std::string> drain() {
    auto& s = sink();
    std::lock_guard lk(s.mu);
    std::vector<std::string> out;
    out.swap(s.log);
    return out;
}

} // namespace diag

namespace parallel {

inline unsigned& inner_threads() {
    static unsigned n = 1;
    return n;
}

// Splits [0, n) into fixed contiguous chunks; chunk c always covers the same
// range for a given thread count.
template <class Fn>
void for_chunks(std::size_t n, Fn&& fn) {
    unsigned t = std::max(1u, inner_threads());
    if (t == 1 || n < 2 * t) {
        fn(std::size_t{0}, n, 0u);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(t - 1);
    auto bounds = [&](unsigned c) { return std::pair{n * c / t, n * (c + 1) / t}; };
    for (unsigned c = 1; c < t; ++c) {
        auto [b, e] = bounds(c);
        pool.emplace_back([&fn, b, e, c] { fn(b, e, c); });
    }
    auto [b0, e0] = bounds(0);
    fn(b0, e0, 0u);
}

inline unsigned chunk_count(std::size_t n) {
    unsigned t = std::max(1u, inner_threads());
    return (t == 1 || n < 2 * t) ? 1u : t;
}

} // namespace parallel

inline std::size_t ipow(std::size_t b, int e) {
    std::size_t r = 1;
    while (e-- > 0) r *= b;
    return r;
}

inline bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline bool all_finite(const std::vector<cplx>& v) {
    return std::all_of(v.begin(), v.end(), [](const cplx& z) {
        return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
}

} // namespace hvlab
