#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "hvlab/io.hpp"
#include "support.hpp"

using namespace hvlab;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "hvlab_test_io";
    std::filesystem::create_directories(dir);
    return dir / name;
}

void truncate_by(const std::filesystem::path& p, std::uintmax_t n) {
    std::filesystem::resize_file(p, std::filesystem::file_size(p) - n);
}

WignerFunction sample_wigner() {
    PhaseSpaceGrid pg(SpatialGrid(1, 32, 10.0), 48, 4.0);
    return gaussian_phase_density(pg, {{0.5, 0}, {-0.3, 0}}, {1.0, 0.8}).as_wigner();
}

} // namespace

TEST(Checkpoint, KernelRoundTripIsBitExact) {
    auto s = hvlab::testing::coherent_gaussian_setup(4);
    auto p = scratch("k.skdk");
    io::write_kernel(p, s.omega);
    auto back = io::read_kernel(p);
    EXPECT_EQ(back.N(), s.omega.N());
    EXPECT_EQ(back.eps(), s.omega.eps());
    EXPECT_EQ(back.grid().M(), s.omega.grid().M());
    EXPECT_EQ(back.grid().L(), s.omega.grid().L());
    EXPECT_EQ(back.kernel().data(), s.omega.kernel().data());
}

TEST(Checkpoint, WignerRoundTripIsBitExact) {
    auto W = sample_wigner();
    auto p = scratch("w.skwf");
    io::write_wigner(p, W);
    auto back = io::read_wigner(p);
    EXPECT_EQ(back.grid().Mv(), 48);
    EXPECT_EQ(back.grid().v_max(), 4.0);
    EXPECT_EQ(back.values(), W.values());
}

TEST(Checkpoint, EnsembleRoundTripIsBitExact) {
    auto e = ensemble_from_wigner(sample_wigner());
    for (auto& x : e.X) x += 0.25;
    auto p = scratch("e.skce");
    io::write_ensemble(p, e);
    auto back = io::read_ensemble(p);
    EXPECT_EQ(back.dim, e.dim);
    EXPECT_EQ(back.X, e.X);
    EXPECT_EQ(back.V, e.V);
    EXPECT_EQ(back.w, e.w);
    EXPECT_EQ(back.X0, e.X0);
    EXPECT_EQ(back.V0, e.V0);
}

TEST(Checkpoint, WrongMagicIsIoError) {
    auto p = scratch("w_as_k.skwf");
    io::write_wigner(p, sample_wigner());
    EXPECT_THROW(io::read_kernel(p), IoError);
}

TEST(Checkpoint, TruncatedAndPaddedFilesAreIoErrors) {
    auto s = hvlab::testing::coherent_gaussian_setup(4);
    auto p = scratch("t.skdk");
    io::write_kernel(p, s.omega);
    truncate_by(p, 8);
    EXPECT_THROW(io::read_kernel(p), IoError);
    io::write_kernel(p, s.omega);
    {
        std::ofstream out(p, std::ios::binary | std::ios::app);
        out.put('x');
    }
    EXPECT_THROW(io::read_kernel(p), IoError);
}

TEST(Checkpoint, MissingFileMessageNamesPath) {
    try {
        io::read_wigner("/nonexistent/dir/w.skwf");
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/w.skwf"), std::string::npos);
    }
}

TEST(Deposit, PhaseSpaceDepositReproducesGridData) {
    auto W = sample_wigner();
    auto back = deposit_phase_space(ensemble_from_wigner(W), W.grid());
    double err = 0, ref = 0;
    for (std::size_t i = 0; i < W.values().size(); ++i) {
        err = std::max(err, std::abs(back.values()[i] - W.values()[i]));
        ref = std::max(ref, std::abs(W.values()[i]));
    }
    EXPECT_LE(err, 1e-12 * ref);
}
