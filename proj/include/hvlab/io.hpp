#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "classical.hpp"
#include "kernel.hpp"
#include "vlasov.hpp"

namespace hvlab::io {

static_assert(std::endian::native == std::endian::little, "checkpoints are written little-endian");

inline constexpr std::uint16_t checkpoint_version = 1;

namespace detail {

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    }
    template <class T>
    void put(T v) {
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void magic(const char (&m)[5]) { bytes(m, 4); }
    void finish() {
        out_.flush();
        if (!out_) throw IoError("write failed: " + path_.string());
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open " + path.string());
    }
    template <class T>
    T get() {
        T v{};
        bytes(&v, sizeof(T));
        return v;
    }
    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw IoError("truncated checkpoint: " + path_.string());
    }
    void expect_magic(const char (&m)[5]) {
        char got[4];
        bytes(got, 4);
        if (std::memcmp(got, m, 4) != 0)
            throw IoError(path_.string() + ": expected magic " + std::string(m, 4) + ", found " + std::string(got, 4));
        auto v = get<std::uint16_t>();
        if (v != checkpoint_version)
            throw IoError(path_.string() + ": unsupported checkpoint version " + std::to_string(v));
    }
    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in checkpoint: " + path_.string());
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ifstream in_;
};

inline void check_header(bool ok, const Reader& r, const std::string& what) {
    if (!ok) throw IoError(r.path().string() + ": invalid header field " + what);
}

} // namespace detail

// "SKDK" u16 version, u8 dim, u32 M, f64 L, u64 N, f64 eps, interleaved (re, im) f64.
inline void write_kernel(const std::filesystem::path& path, const DensityKernel& omega) {
    detail::Writer w(path);
    const auto& g = omega.grid();
    w.magic("SKDK");
    w.put<std::uint16_t>(checkpoint_version);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(g.dim()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.M()));
    w.put<double>(g.L());
    w.put<std::uint64_t>(omega.N());
    w.put<double>(omega.eps());
    const auto& d = omega.kernel().data();
    w.bytes(d.data(), d.size() * sizeof(cplx));
    w.finish();
}

inline DensityKernel read_kernel(const std::filesystem::path& path) {
    detail::Reader r(path);
    r.expect_magic("SKDK");
    int dim = r.get<std::uint8_t>();
    int M = static_cast<int>(r.get<std::uint32_t>());
    double L = r.get<double>();
    auto N = r.get<std::uint64_t>();
    double eps = r.get<double>();
    detail::check_header(dim == 1 || dim == 2, r, "dim");
    detail::check_header(M >= 8 && M <= (1 << 16), r, "M");
    SpatialGrid g(dim, M, L);
    std::vector<cplx> data(g.size() * g.size());
    r.bytes(data.data(), data.size() * sizeof(cplx));
    r.expect_end();
    return DensityKernel(KernelArray(g, std::move(data)), N, eps);
}

// "SKWF" u16 version, u8 dim, u32 M, u32 M_v, f64 L, f64 v_max, f64 values.
inline void write_wigner(const std::filesystem::path& path, const WignerFunction& W) {
    detail::Writer w(path);
    const auto& pg = W.grid();
    w.magic("SKWF");
    w.put<std::uint16_t>(checkpoint_version);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(pg.dim()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(pg.spatial().M()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(pg.Mv()));
    w.put<double>(pg.spatial().L());
    w.put<double>(pg.v_max());
    w.bytes(W.values().data(), W.values().size() * sizeof(double));
    w.finish();
}

inline WignerFunction read_wigner(const std::filesystem::path& path) {
    detail::Reader r(path);
    r.expect_magic("SKWF");
    int dim = r.get<std::uint8_t>();
    int M = static_cast<int>(r.get<std::uint32_t>());
    int Mv = static_cast<int>(r.get<std::uint32_t>());
    double L = r.get<double>();
    double vmax = r.get<double>();
    detail::check_header(dim == 1 || dim == 2, r, "dim");
    detail::check_header(M >= 8 && M <= (1 << 16), r, "M");
    detail::check_header(Mv >= 8 && Mv <= (1 << 16), r, "M_v");
    PhaseSpaceGrid pg(SpatialGrid(dim, M, L), Mv, vmax);
    std::vector<double> v(pg.size());
    r.bytes(v.data(), v.size() * sizeof(double));
    r.expect_end();
    return WignerFunction(pg, std::move(v));
}

// "SKCE" u16 version, u8 dim, u64 count, then per marker X[dim] V[dim] w X0[dim] V0[dim] as f64.
inline void write_ensemble(const std::filesystem::path& path, const CharacteristicEnsemble& e) {
    detail::Writer w(path);
    const int d = e.dim;
    w.magic("SKCE");
    w.put<std::uint16_t>(checkpoint_version);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(d));
    w.put<std::uint64_t>(e.count());
    for (std::size_t i = 0; i < e.count(); ++i) {
        w.bytes(&e.X[i * d], d * sizeof(double));
        w.bytes(&e.V[i * d], d * sizeof(double));
        w.put<double>(e.w[i]);
        w.bytes(&e.X0[i * d], d * sizeof(double));
        w.bytes(&e.V0[i * d], d * sizeof(double));
    }
    w.finish();
}

inline CharacteristicEnsemble read_ensemble(const std::filesystem::path& path) {
    detail::Reader r(path);
    r.expect_magic("SKCE");
    CharacteristicEnsemble e;
    e.dim = r.get<std::uint8_t>();
    detail::check_header(e.dim == 1 || e.dim == 2, r, "dim");
    auto n = r.get<std::uint64_t>();
    detail::check_header(n < (std::uint64_t{1} << 40), r, "count");
    const int d = e.dim;
    e.X.resize(n * d);
    e.V.resize(n * d);
    e.X0.resize(n * d);
    e.V0.resize(n * d);
    e.w.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        r.bytes(&e.X[i * d], d * sizeof(double));
        r.bytes(&e.V[i * d], d * sizeof(double));
        e.w[i] = r.get<double>();
        r.bytes(&e.X0[i * d], d * sizeof(double));
        r.bytes(&e.V0[i * d], d * sizeof(double));
    }
    r.expect_end();
    return e;
}

} // namespace hvlab::io
