#include <gtest/gtest.h>

#include "hvlab/vlasov.hpp"

using namespace hvlab;

namespace {

// Periodized Gaussian blob in x times a Gaussian in v, unit mass on the torus.
double blob(double x, double v, double x0, double v0, double sx, double sv, double L) {
    double s = 0;
    for (int k = -3; k <= 3; ++k) s += std::exp(-std::pow(x - x0 + k * L, 2) / (2 * sx * sx));
    return s * std::exp(-std::pow(v - v0, 2) / (2 * sv * sv)) / (2 * pi * sx * sv);
}

PhaseSpaceGrid test_grid(int M = 64, double L = 8.0, int Mv = 64, double vmax = 4.0) {
    return PhaseSpaceGrid(SpatialGrid(1, M, L), Mv, vmax);
}

WignerFunction smooth_blob(const PhaseSpaceGrid& pg) {
    return sample_wigner(pg, [&](const auto& x, const auto& v) {
        return blob(x[0], v[0], 0.3, 0.2, 0.8, 0.7, pg.spatial().L());
    });
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

CharacteristicEnsemble lattice_ensemble(const WignerFunction& W) { return ensemble_from_wigner(W); }

}  // namespace

TEST(VlasovGrid, FreeTransportIsExact) {
    auto pg = test_grid();
    auto W0 = smooth_blob(pg);
    Potential V(pg.spatial(), {PotentialKind::zero, 0, 1});
    const double T = 1.0;
    auto traj = evolve_vlasov(W0, V, T, {.dt = 0.1});
    auto exact = sample_wigner(pg, [&](const auto& x, const auto& v) {
        return blob(x[0] - 2 * v[0] * T, v[0], 0.3, 0.2, 0.8, 0.7, pg.spatial().L());
    });
    EXPECT_LE(lp_norm(traj.final_state() - exact, 2), 1e-8);
}

TEST(VlasovGrid, FreeTransportIn2d) {
    SpatialGrid g(2, 32, 8.0);
    PhaseSpaceGrid pg(g, 16, 4.0);
    auto W0 = sample_wigner(pg, [&](const auto& x, const auto& v) {
        return blob(x[0], v[0], 0.2, 0.3, 0.9, 0.8, 8.0) * blob(x[1], v[1], -0.4, -0.1, 0.9, 0.8, 8.0);
    });
    Potential V(g, {PotentialKind::zero, 0, 1});
    auto W = vlasov_step_grid(W0, V, 0.5);
    auto exact = sample_wigner(pg, [&](const auto& x, const auto& v) {
        return blob(x[0] - v[0], v[0], 0.2, 0.3, 0.9, 0.8, 8.0) * blob(x[1] - v[1], v[1], -0.4, -0.1, 0.9, 0.8, 8.0);
    });
    EXPECT_LE(lp_norm(W - exact, 2), 1e-8);
}

TEST(VlasovGrid, SpatiallyUniformDataIsStationary) {
    auto pg = test_grid();
    auto W0 = sample_wigner(pg, [&](const auto&, const auto& v) {
        return std::exp(-v[0] * v[0] / 0.5) / (std::sqrt(0.5 * pi) * pg.spatial().L());
    });
    Potential V(pg.spatial(), {PotentialKind::gaussian, 1.5, 0.6});
    auto traj = evolve_vlasov(W0, V, 1.0, {.dt = 0.05});
    EXPECT_LE(max_abs_diff(traj.final_state().values(), W0.values()), 1e-10);
}

TEST(VlasovGrid, ConservationWithGaussianPotential) {
    // centred blob and even potential: the maximum sits on the fixed point of the flow, a grid node
    auto pg = test_grid(64, 8.0, 1024, 6.0);
    auto W0 = sample_wigner(pg, [&](const auto& x, const auto& v) { return blob(x[0], v[0], 0, 0, 0.8, 0.7, 8.0); });
    Potential V(pg.spatial(), {PotentialKind::gaussian, 1.0, 1.0});
    auto traj = evolve_vlasov(W0, V, 1.0, {.dt = 0.02, .record_every = 5});
    const auto& r0 = traj.records.front();
    EXPECT_EQ(traj.records.back().t, 1.0);
    for (const auto& r : traj.records) {
        EXPECT_NEAR(r.mass, r0.mass, 1e-12);
        EXPECT_NEAR(r.l1, r0.l1, 1e-6);
        EXPECT_NEAR(r.l2, r0.l2, 1e-6);
        EXPECT_NEAR(r.linf, r0.linf, 1e-6);
    }
}

TEST(VlasovGrid, ShiftLineKeepsSumAndReproducesSmoothShift) {
    const int n = 200;
    std::vector<double> in(n), out(n), prim;
    for (int j = 0; j < n; ++j) in[j] = std::exp(-std::pow((j - 100.0) / 12.0, 2));
    detail::shift_line(in.data(), out.data(), n, 1, 7.3, prim);
    double s0 = 0, s1 = 0, err = 0;
    for (int j = 0; j < n; ++j) {
        s0 += in[j];
        s1 += out[j];
        err = std::max(err, std::abs(out[j] - std::exp(-std::pow((j - 107.3) / 12.0, 2))));
    }
    EXPECT_NEAR(s1, s0, 1e-12);
    EXPECT_LE(err, 2e-5);
}

TEST(VlasovGrid, LargeForceShiftIsConfigError) {
    auto pg = test_grid(32, 4.0, 16, 1.0);
    auto W0 = smooth_blob(pg);
    Potential V(pg.spatial(), {PotentialKind::gaussian, 50.0, 0.3});
    EXPECT_THROW(vlasov_step_grid(W0, V, 0.5), ConfigError);
}

TEST(VlasovGrid, CubicWeightsReproduceCubics) {
    for (double phi : {0.0, 0.25, 0.5, 0.9}) {
        auto w = detail::cubic_weights(phi);
        double nodes[4] = {-2, -1, 0, 1};
        for (int p = 0; p <= 3; ++p) {
            double s = 0;
            for (int k = 0; k < 4; ++k) s += w[k] * std::pow(nodes[k], p);
            EXPECT_NEAR(s, std::pow(-phi, p), 1e-14);
        }
    }
}

TEST(Characteristics, FreeFlight) {
    SpatialGrid g(1, 32, 6.0);
    CharacteristicEnsemble e;
    e.add({0.1, 0}, {0.7, 0}, 0.5);
    e.add({-1.2, 0}, {-0.3, 0}, 0.5);
    Potential V(g, {PotentialKind::zero, 0, 1});
    for (int s = 0; s < 10; ++s) characteristics_step_inplace(e, V, 0.1);
    EXPECT_NEAR(e.X[0], 0.1 + 2 * 0.7 * 1.0, 1e-14);
    EXPECT_NEAR(e.X[1], -1.2 - 2 * 0.3 * 1.0, 1e-14);
    EXPECT_EQ(e.V[0], 0.7);
    EXPECT_EQ(e.V[1], -0.3);
}

TEST(Characteristics, SingleMarkerFeelsNoSelfForce) {
    SpatialGrid g(1, 64, 8.0);
    CharacteristicEnsemble e;
    e.add({0.37, 0}, {0.2, 0}, 1.0);
    Potential V(g, {PotentialKind::gaussian, 2.0, 0.5});
    for (int s = 0; s < 20; ++s) characteristics_step_inplace(e, V, 0.05);
    EXPECT_NEAR(e.V[0], 0.2, 1e-12);
    EXPECT_NEAR(e.X[0], 0.37 + 2 * 0.2 * 1.0, 1e-12);
}

TEST(Characteristics, ReversibleStep) {
    auto pg = test_grid(32, 8.0, 32, 3.0);
    auto e = lattice_ensemble(smooth_blob(pg));
    Potential V(pg.spatial(), {PotentialKind::gaussian, 1.0, 0.8});
    auto f = characteristics_step(characteristics_step(e, V, 0.05), V, -0.05);
    EXPECT_LE(max_abs_diff(f.X, e.X), 1e-12);
    EXPECT_LE(max_abs_diff(f.V, e.V), 1e-12);
}

TEST(Characteristics, EnsembleValidation) {
    auto pg = test_grid(32, 8.0, 32, 3.0);
    auto e = lattice_ensemble(smooth_blob(pg));
    EXPECT_NO_THROW(check_ensemble(e));
    EXPECT_NEAR(e.total_weight(), 1.0, 1e-12);
    CharacteristicEnsemble small;
    small.add({0, 0}, {0, 0}, 1.0);
    EXPECT_THROW(check_ensemble(small), ConfigError);
    e.w[0] += 0.01;
    EXPECT_THROW(check_ensemble(e), DataError);
}

TEST(Characteristics, DepositConservesMass) {
    SpatialGrid g(2, 16, 4.0);
    CharacteristicEnsemble e;
    e.dim = 2;
    e.add({0.13, -1.9}, {0, 0}, 0.3);
    e.add({1.99, 0.5}, {0, 0}, 0.9);
    e.add({-3.1, 7.3}, {0, 0}, -0.2);
    EXPECT_NEAR(integrate(deposit(e, g), g), 1.0, 1e-14);
}

TEST(Jacobian, IdentityAtTimeZeroAndUnitForFreeFlow) {
    SpatialGrid g(1, 32, 6.0);
    CharacteristicEnsemble e;
    e.add({0, 0}, {0, 0}, 1.0);
    e.add_probe({0.5, 0}, {0.3, 0}, 1e-6);
    auto d0 = jacobian_probe(e);
    EXPECT_EQ(d0.clusters_used, 1u);
    EXPECT_LE(d0.jacobian_dev, 1e-9);
    Potential V(g, {PotentialKind::zero, 0, 1});
    for (int s = 0; s < 10; ++s) characteristics_step_inplace(e, V, 0.1);
    auto d1 = jacobian_probe(e);
    EXPECT_LE(d1.jacobian_dev, 1e-9);
    EXPECT_NEAR(d1.max_entry, 2.0, 1e-8);  // shear dx/dv = 2 t
}

TEST(Jacobian, InteractingRunPreservesVolume) {
    auto pg = test_grid(64, 8.0, 64, 4.0);
    Potential V(pg.spatial(), {PotentialKind::gaussian, 1.0, 0.8});
    auto traj = evolve_vlasov(smooth_blob(pg), V, 1.0,
                              {.dt = 0.02, .mode = VlasovMode::characteristics, .probes = 8, .probe_delta = 1e-6});
    EXPECT_EQ(traj.diagnostics.clusters_used, 8u);
    EXPECT_LE(traj.diagnostics.jacobian_dev, 1e-4);
    for (const auto& r : traj.records) EXPECT_EQ(r.mass, traj.records.front().mass);
}

TEST(Dobrushin, FreeFlowConvergesInOneIteration) {
    auto pg = test_grid(32, 8.0, 32, 3.0);
    auto e = lattice_ensemble(smooth_blob(pg));
    Potential V(pg.spatial(), {PotentialKind::zero, 0, 1});
    auto r = dobrushin_iterate(e, V, 0.1, 0.02, 3);
    EXPECT_GT(r.distances[0], 0.0);
    EXPECT_EQ(r.distances[1], 0.0);
    EXPECT_EQ(r.distances[2], 0.0);
}

TEST(Dobrushin, ContractsAndFixedPointMatchesSelfConsistentFlow) {
    auto pg = test_grid(64, 8.0, 64, 4.0);
    auto e = lattice_ensemble(smooth_blob(pg));
    Potential V(pg.spatial(), {PotentialKind::gaussian, 1.0, 0.8});
    auto r = dobrushin_iterate(e, V, 0.1, 0.01, 6);
    ASSERT_GE(r.ratios.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_LT(r.ratios[k], 0.5) << k;
    // the self-consistent flow deposits at the same kick times; its trajectory is the fixed point
    auto f = e;
    const auto& g = pg.spatial();
    double worst = 0;
    for (std::size_t k = 0; k < r.iterates.back().size(); ++k) {
        detail::drift(f, r.dt / 2);
        auto rho = deposit(f, g);
        double s = 0;
        for (std::size_t i = 0; i < rho.size(); ++i) s += std::abs(rho[i] - r.iterates.back()[k][i]);
        worst = std::max(worst, s * g.cell_volume());
        detail::kick(f, g, mean_field_force(rho, V), r.dt);
        detail::drift(f, r.dt / 2);
    }
    EXPECT_LE(worst, 1e-10);
}

TEST(VlasovModes, GridAndCharacteristicsAgree) {
    auto pg = test_grid(64, 8.0, 64, 4.0);
    auto W0 = smooth_blob(pg);
    Potential V(pg.spatial(), {PotentialKind::gaussian, 1.0, 0.8});
    auto a = evolve_vlasov(W0, V, 0.5, {.dt = 0.01});
    auto b = evolve_vlasov(W0, V, 0.5, {.dt = 0.01, .mode = VlasovMode::characteristics});
    double s = 0;
    for (std::size_t i = 0; i < a.final_density.size(); ++i) s += std::abs(a.final_density[i] - b.final_density[i]);
    EXPECT_LE(s * pg.spatial().h(), 0.02);
}

TEST(VlasovModes, ZeroTimeIsIdentity) {
    auto pg = test_grid(32, 8.0, 32, 3.0);
    auto W0 = smooth_blob(pg);
    Potential V(pg.spatial(), {PotentialKind::gaussian, 1.0, 0.8});
    auto traj = evolve_vlasov(W0, V, 0.0, {});
    EXPECT_EQ(traj.final_state().values(), W0.values());
    EXPECT_EQ(traj.steps, 0);
}

TEST(VlasovModes, SobolevGrowthHasFiniteExponent) {
    auto pg = test_grid(32, 8.0, 32, 4.0);
    Potential V(pg.spatial(), {PotentialKind::gaussian, 1.0, 0.8});
    auto traj = evolve_vlasov(smooth_blob(pg), V, 1.0, {.dt = 0.05, .record_every = 4, .sobolev_order = 2});
    ASSERT_GE(traj.diagnostics.sobolev_track.size(), 3u);
    const auto& tr = traj.diagnostics.sobolev_track;
    double l0 = std::log(tr.front().norms[2]);
    double rate = 0;
    for (const auto& s : tr)
        if (s.t > 0) rate = std::max(rate, (std::log(s.norms[2]) - l0) / s.t);
    EXPECT_TRUE(std::isfinite(rate));
    for (const auto& s : tr) EXPECT_LE(std::log(s.norms[2]) - l0, rate * s.t + 1e-12);
}
