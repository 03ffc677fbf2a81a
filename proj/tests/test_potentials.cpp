#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "stochdisp/potentials.hpp"

using namespace stochdisp;

namespace {

// Independent oracle: lowest eigenvalue of the second-order finite-difference
// Hamiltonian -D2 + V on the periodic 1D grid.
double fd_ground_energy(const Potential& pot) {
    const Grid& g = pot.grid();
    const auto n = static_cast<Eigen::Index>(g.size());
    const double h2 = g.spacing() * g.spacing();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        H(i, i) = 2.0 / h2 + pot.field().values[static_cast<std::size_t>(i)];
        H(i, (i + 1) % n) = -1.0 / h2;
        H(i, (i + n - 1) % n) = -1.0 / h2;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H, Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(0);
}

}  // namespace

TEST(MakePotential, ZeroDepthGivesZeroPotential) {
    const Grid g(2, 32, 10.0);
    for (auto kind : {PotentialKind::gaussian_well, PotentialKind::compact_bump, PotentialKind::zero}) {
        const Potential p = make_potential(kind, 0.0, 1.0, g);
        EXPECT_TRUE(p.is_zero());
        EXPECT_EQ(p.norms().l32_1, 0.0);
        EXPECT_EQ(p.norms().l32_inf, 0.0);
        EXPECT_EQ(p.norms().linf, 0.0);
    }
}

TEST(MakePotential, GaussianDepthIsSupNorm) {
    const Grid g(3, 32, 16.0);
    const Potential p = make_potential(PotentialKind::gaussian_well, 2.5, 1.0, g);
    EXPECT_DOUBLE_EQ(p.norms().linf, 2.5);
    EXPECT_DOUBLE_EQ(p.field().values[g.flatten({16, 16, 16})], -2.5);
}

TEST(MakePotential, FactorizationIdentity) {
    for (int d = 1; d <= 3; ++d) {
        const Grid g(d, d == 3 ? 16 : 64, 12.0);
        for (double depth : {1.7, -0.8}) {
            for (auto kind : {PotentialKind::gaussian_well, PotentialKind::compact_bump, PotentialKind::sech2_well}) {
                const double width = kind == PotentialKind::sech2_well ? 0.9 : 1.5;
                const Potential p = make_potential(kind, depth, width, g);
                double worst = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double v1 = p.v1().values[i], v2 = p.v2().values[i];
                    worst = std::max(worst, std::abs(v1 * v2 - p.field().values[i]));
                    EXPECT_GE(v1, 0.0);
                    EXPECT_EQ(std::abs(v2), v1);
                }
                EXPECT_LE(worst, 1e-14);
            }
        }
    }
}

TEST(MakePotential, CompactSupportStrictlyInside) {
    const Grid g(1, 256, 20.0);
    const Potential p = make_potential(PotentialKind::compact_bump, 1.0, 2.0, g, Vec{3.0, 0, 0});
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.position(i)[0];
        if (std::abs(x - 3.0) >= 2.0) {
            EXPECT_EQ(p.field().values[i], 0.0);
        }
    }
    EXPECT_LT(p.field().values[g.size() / 2 + 38], 0.0);
}

TEST(MakePotential, SupportExceedingMarginRejected) {
    const Grid g(1, 64, 10.0);
    try {
        make_potential(PotentialKind::compact_bump, 1.0, 2.0, g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::configuration);
    }
    EXPECT_THROW(make_potential(PotentialKind::gaussian_well, 1.0, 0.0, g), Error);
    EXPECT_THROW(make_potential(PotentialKind::gaussian_well, 1.0, 1.0, g, Vec{3.5, 0, 0}), Error);
}

TEST(MakePotential, OpenFrameShift) {
    const Grid g(1, 128, 16.0);
    const Potential p = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, g);
    const RealField near = p.sample_shifted(Vec{2.0, 0, 0});
    const RealField far = p.sample_shifted(Vec{40.0, 0, 0});
    const RealField periodic = translate(p.field(), Vec{-2.0, 0, 0});
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(near.values[i], periodic.values[i], 1e-10);
    EXPECT_EQ(sup_norm(far), 0.0);
    // Custom fields translate periodically.
    const Potential custom = Potential::from_field(p.field());
    EXPECT_GT(sup_norm(custom.sample_shifted(Vec{16.0, 0, 0})), 0.99);
}

TEST(PotentialNorms, PlateauWeakNorm) {
    const Grid g(3, 16, 8.0);
    RealField plateau(g);
    std::size_t cells = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (norm(g.position(i)) < 2.0) {
            plateau.values[i] = -1.5;
            ++cells;
        }
    }
    const double m = static_cast<double>(cells) * g.cell_volume();
    const PotentialNorms n = potential_norms(Potential::from_field(plateau));
    EXPECT_NEAR(n.l32_inf, std::pow(m, 2.0 / 3.0) * 1.5, 1e-12);
    EXPECT_NEAR(n.l32_1, 1.5 * std::pow(m, 2.0 / 3.0) * 1.5, 1e-12);
    EXPECT_DOUBLE_EQ(n.linf, 1.5);
}

TEST(PotentialNorms, Homogeneity) {
    const Grid g(2, 32, 10.0);
    const Potential a = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, g);
    const Potential b = make_potential(PotentialKind::gaussian_well, 2.0, 1.0, g);
    EXPECT_NEAR(b.norms().l32_1, 2.0 * a.norms().l32_1, 1e-12);
    EXPECT_NEAR(b.norms().l32_inf, 2.0 * a.norms().l32_inf, 1e-12);
    EXPECT_NEAR(b.norms().linf, 2.0 * a.norms().linf, 1e-12);
}

TEST(GroundState, Sech2WellCalibration) {
    const Grid g(1, 512, 40.0);
    const Potential p = make_potential(PotentialKind::sech2_well, 2.0, 1.0, g);
    const double tol = 1e-8;
    const GroundState gs = ground_state(p, tol);
    EXPECT_NEAR(gs.energy, -1.0, 2e-2);
    EXPECT_NEAR(gs.energy, fd_ground_energy(p), 1e-2);
    EXPECT_TRUE(gs.converged);
    EXPECT_LT(gs.residual, 10.0 * tol);
    EXPECT_NEAR(l2_norm(gs.phi), 1.0, 1e-12);
    // Independent residual evaluation.
    ComplexField r = apply_hamiltonian(gs.phi, p.field());
    for (std::size_t i = 0; i < r.size(); ++i) r.values[i] -= gs.energy * gs.phi.values[i];
    EXPECT_LT(l2_norm(r), 10.0 * tol);
}

TEST(GroundState, DeeperWellLowersEnergy) {
    const Grid g(1, 256, 40.0);
    double previous = 0.0;
    for (double depth : {1.0, 2.0, 3.0}) {
        const Potential p = make_potential(PotentialKind::gaussian_well, depth, 1.0, g);
        const double e = ground_state(p, 1e-9).energy;
        EXPECT_LT(e, previous);
        EXPECT_NEAR(e, fd_ground_energy(p), 2e-2);
        previous = e;
    }
}

TEST(GroundState, StableUnderRefinement) {
    const double tol = 1e-8;
    const Potential coarse = make_potential(PotentialKind::sech2_well, 2.0, 1.0, Grid(1, 256, 40.0));
    const Potential fine = make_potential(PotentialKind::sech2_well, 2.0, 1.0, Grid(1, 512, 40.0));
    EXPECT_LT(std::abs(ground_state(coarse, tol).energy - ground_state(fine, tol).energy), 5.0 * tol);
}

TEST(GroundState, ThreeDimensionalWell) {
    const Grid g(3, 32, 16.0);
    const Potential p = make_potential(PotentialKind::gaussian_well, 4.0, 1.0, g);
    const GroundState gs = ground_state(p, 1e-7);
    EXPECT_LT(gs.energy, 0.0);
    EXPECT_LT(gs.residual, 1e-6);
}

TEST(GroundState, NoBoundStateReported) {
    const Grid g(1, 128, 20.0);
    for (double depth : {0.0, -1.0}) {
        try {
            ground_state(make_potential(PotentialKind::gaussian_well, depth, 1.0, g), 1e-8);
            FAIL() << depth;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::no_bound_state);
        }
    }
}

TEST(PotentialCsv, WritesHeaderAndRows) {
    const auto file = std::filesystem::temp_directory_path() / "stochdisp_potential.csv";
    write_potential_csv(make_potential(PotentialKind::gaussian_well, 1.0, 1.0, Grid(2, 16, 12.0)), file.string());
    std::ifstream in(file);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "x1,x2,V");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    EXPECT_EQ(rows, 256u);
    std::filesystem::remove(file);
}
