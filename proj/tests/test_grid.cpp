#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "stochdisp/grid.hpp"
#include "stochdisp/potentials.hpp"

using namespace stochdisp;

namespace {

ComplexField random_field(const Grid& g, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    ComplexField f(g);
    for (auto& v : f.values) v = complex(n(rng), n(rng));
    return f;
}

double max_abs_diff(const ComplexField& a, const ComplexField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

}  // namespace

TEST(Grid, RejectsInvalidShapes) {
    EXPECT_THROW(Grid(0, 16, 1.0), Error);
    EXPECT_THROW(Grid(4, 16, 1.0), Error);
    EXPECT_THROW(Grid(1, 12, 1.0), Error);
    EXPECT_THROW(Grid(1, 1, 1.0), Error);
    EXPECT_THROW(Grid(1, 16, 0.0), Error);
    EXPECT_THROW(Grid(1, 16, std::nan("")), Error);
}

TEST(Grid, SpacingTimesPointsIsBoxLength) {
    for (int d = 1; d <= 3; ++d) {
        const Grid g(d, 32, 7.5);
        EXPECT_DOUBLE_EQ(g.spacing() * 32, 7.5);
        EXPECT_EQ(g.size(), static_cast<std::size_t>(std::pow(32, d)));
        EXPECT_NEAR(g.axis_coordinate(0), -3.75, 1e-15);
    }
}

TEST(Grid, FrequencyLatticeCoversSymmetricRange) {
    const Grid g(1, 8, 2.0 * std::numbers::pi);
    std::vector<double> k;
    for (std::size_t i = 0; i < 8; ++i) k.push_back(g.axis_wavenumber(i));
    EXPECT_EQ(k, (std::vector<double>{0, 1, 2, 3, -4, -3, -2, -1}));
}

TEST(Grid, FlattenRoundTrip) {
    const Grid g(3, 4, 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.flatten(g.unflatten(i)), i);
    EXPECT_EQ(g.flatten({1, 2, 3}), 1u * 16 + 2u * 4 + 3u);
}

TEST(Grid, ForwardInverseIsIdentity) {
    for (int d = 1; d <= 3; ++d) {
        const Grid g(d, 16, 3.0);
        const ComplexField f = random_field(g, 11u + static_cast<unsigned>(d));
        const ComplexField back = from_spectrum<complex>(g, spectrum(f));
        EXPECT_LT(max_abs_diff(f, back), 1e-13);
    }
}

TEST(Grid, PlancherelConsistency) {
    const Grid g(2, 32, 5.0);
    const ComplexField f = random_field(g, 3);
    double ell2 = 0.0;
    for (const auto& v : f.values) ell2 += std::norm(v);
    EXPECT_NEAR(l2_norm(f), std::sqrt(ell2) * std::pow(g.spacing(), 1.0), 1e-12 * l2_norm(f));
    const auto data = spectrum(f);
    double spec = 0.0;
    for (const auto& v : data) spec += std::norm(v);
    EXPECT_NEAR(std::sqrt(spec * g.cell_volume() / static_cast<double>(g.size())), l2_norm(f), 1e-12 * l2_norm(f));
}

TEST(FreePropagate, ZeroTimeIsIdentity) {
    const Grid g(1, 64, 10.0);
    const ComplexField f = random_field(g, 5);
    EXPECT_EQ(max_abs_diff(free_propagate(f, 0.0), f), 0.0);
}

TEST(FreePropagate, MatchesSpreadingGaussian) {
    const Grid g(1, 512, 40.0);
    const ComplexField z0 = ComplexField::from_function(g, [](const Vec& x) { return std::exp(-0.5 * x[0] * x[0]); });
    const double t = 1.0;
    const ComplexField z = free_propagate(z0, t);
    // i Z_t = -Z_xx:  Z(x, t) = (1 + 2 i t)^{-1/2} exp(-x^2 / (2 (1 + 2 i t))).
    const complex a(1.0, 2.0 * t);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.position(i)[0];
        const complex exact = std::pow(a, -0.5) * std::exp(-x * x / (2.0 * a));
        worst = std::max(worst, std::abs(z.values[i] - exact));
    }
    EXPECT_LT(worst, 1e-8);
}

TEST(FreePropagate, Unitary) {
    for (int d = 1; d <= 3; ++d) {
        const Grid g(d, 16, 4.0);
        const ComplexField f = random_field(g, 17);
        for (double t : {0.1, 1.0, -3.7, 100.0}) {
            EXPECT_LE(std::abs(l2_norm(free_propagate(f, t)) - l2_norm(f)), 1e-12 * l2_norm(f));
        }
    }
}

TEST(FreePropagate, GroupLaw) {
    const Grid g(2, 32, 6.0);
    const ComplexField f = random_field(g, 19);
    const ComplexField a = free_propagate(free_propagate(f, 0.3), 0.45);
    const ComplexField b = free_propagate(f, 0.75);
    EXPECT_LT(max_abs_diff(a, b), 1e-12 * sup_norm(f) * 10);
}

TEST(FreePropagate, CommutesWithTranslation) {
    const Grid g(2, 32, 6.0);
    const ComplexField f = random_field(g, 23);
    const Vec a{0.37, -1.2, 0.0};
    const ComplexField lhs = free_propagate(translate(f, a), 0.8);
    const ComplexField rhs = translate(free_propagate(f, 0.8), a);
    EXPECT_LT(max_abs_diff(lhs, rhs), 1e-11);
}

TEST(FreePropagate, RejectsNonFiniteTime) {
    const Grid g(1, 16, 1.0);
    const ComplexField f(g);
    EXPECT_THROW(free_propagate(f, std::nan("")), Error);
    EXPECT_THROW(free_propagate(f, std::numeric_limits<double>::infinity()), Error);
}

TEST(HeatPropagate, ZeroTauIsIdentityAndNegativeRejected) {
    const Grid g(1, 32, 4.0);
    const ComplexField f = random_field(g, 29);
    EXPECT_EQ(max_abs_diff(heat_propagate(f, 0.0), f), 0.0);
    EXPECT_THROW(heat_propagate(f, -1e-3), Error);
}

TEST(HeatPropagate, PreservesMass) {
    const Grid g(1, 64, 8.0);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RealField f(g);
    for (auto& v : f.values) v = u(rng);
    for (double tau : {0.01, 0.5, 4.0}) {
        EXPECT_NEAR(integral(heat_propagate(f, tau)), integral(f), 1e-12 * std::max(1.0, std::abs(integral(f))));
    }
}

TEST(HeatPropagate, ContractionAndPositivityOnResolvedData) {
    for (int d = 1; d <= 3; ++d) {
        const Grid g(d, d == 3 ? 32 : 128, 16.0);
        const Potential well = make_potential(PotentialKind::gaussian_well, 1.0, 1.5, g);
        const RealField f = modulus(well.field());
        for (double tau : {0.05, 0.5, 5.0}) {
            const RealField h = heat_propagate(f, tau);
            for (double p : {1.0, 2.0, infinity}) {
                EXPECT_LE(lp_norm(h, p), lp_norm(f, p) * (1.0 + 1e-12)) << "d=" << d << " tau=" << tau << " p=" << p;
            }
            double lowest = 0.0;
            for (double v : h.values) lowest = std::min(lowest, v);
            EXPECT_GE(lowest, -1e-10 * sup_norm(f));
        }
    }
}

TEST(HeatPropagate, SupBoundWithStableConstant) {
    // ||e^{tau Delta}|V|||_inf <= min(c tau^{-d/2}, ||V||_inf) with c fitted across tau.
    const Grid g(3, 64, 48.0);
    const Potential pot = make_potential(PotentialKind::compact_bump, 1.0, 1.0, g);
    const RealField f = modulus(pot.field());
    std::vector<double> c;
    for (double tau : {1.0, 2.0, 4.0, 8.0}) {
        const double sup = sup_norm(heat_propagate(f, tau));
        EXPECT_LE(sup, sup_norm(f));
        c.push_back(sup * std::pow(tau, 1.5));
    }
    const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
    EXPECT_LT(*hi / *lo, 1.25);
    // Asymptotic constant of the heat kernel: int |V| / (4 pi)^{3/2}.
    EXPECT_NEAR(c.back(), integral(f) / std::pow(4.0 * std::numbers::pi, 1.5), 0.05 * c.back());
}

TEST(Translate, ZeroAndFullPeriodAreIdentity) {
    const Grid g(2, 16, 3.0);
    const ComplexField f = random_field(g, 37);
    EXPECT_EQ(max_abs_diff(translate(f, Vec{0, 0, 0}), f), 0.0);
    EXPECT_LT(max_abs_diff(translate(f, Vec{3.0, 0, 0}), f), 1e-12);
    EXPECT_LT(max_abs_diff(translate(f, Vec{3.0, -6.0, 0}), f), 1e-12);
}

TEST(Translate, LatticeShiftMatchesIndexRotation) {
    const Grid g(1, 64, 8.0);
    const ComplexField f = random_field(g, 41);
    for (long s : {1L, 5L, -3L, 32L}) {
        const ComplexField shifted = translate(f, Vec{static_cast<double>(s) * g.spacing(), 0, 0});
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto j = static_cast<std::size_t>(((static_cast<long>(i) + s) % 64 + 64) % 64);
            EXPECT_NEAR(std::abs(shifted.values[i] - f.values[j]), 0.0, 1e-12);
        }
    }
}

TEST(Translate, PositiveShiftMovesFeatureLeft) {
    const Grid g(1, 256, 20.0);
    const double x0 = 2.0, a = 3.0;
    const ComplexField f =
        ComplexField::from_function(g, [&](const Vec& x) { return std::exp(-4.0 * (x[0] - x0) * (x[0] - x0)); });
    const ComplexField h = translate(f, Vec{a, 0, 0});
    std::size_t peak = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (std::abs(h.values[i]) > std::abs(h.values[peak])) peak = i;
    }
    EXPECT_NEAR(g.position(peak)[0], x0 - a, g.spacing());
}

TEST(Translate, CompositionLaw) {
    const Grid g(3, 8, 2.0);
    const ComplexField f = random_field(g, 43);
    const Vec a{0.1, 0.7, -0.3}, b{-0.45, 0.2, 1.1};
    EXPECT_LT(max_abs_diff(translate(translate(f, a), b), translate(f, a + b)), 1e-12);
}

TEST(Derivatives, SpectralDerivativeOfSine) {
    const Grid g(2, 32, 2.0 * std::numbers::pi);
    const ComplexField f = ComplexField::from_function(g, [](const Vec& x) { return std::sin(3.0 * x[1]); });
    const ComplexField df = partial_derivative(f, 1);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_NEAR(std::abs(df.values[i] - 3.0 * std::cos(3.0 * g.position(i)[1])), 0.0, 1e-12);
    }
    EXPECT_THROW(partial_derivative(f, 2), Error);
}

TEST(Derivatives, GradientEnergyOfPlaneWave) {
    const Grid g(1, 64, 10.0);
    const double xi = 5.0 * g.frequency_step();
    const ComplexField f = ComplexField::from_function(g, [&](const Vec& x) { return std::polar(1.0, xi * x[0]); });
    EXPECT_NEAR(gradient_energy(f), xi * xi * 10.0, 1e-10);
}

TEST(SpaceTimeField, RejectsForeignSlicesAndBadStep) {
    const Grid g(1, 16, 1.0), other(1, 32, 1.0);
    SpaceTimeField F(g, 0.1);
    F.push_back(ComplexField(g));
    EXPECT_THROW(F.push_back(ComplexField(other)), Error);
    EXPECT_THROW(SpaceTimeField(g, 0.0), Error);
    EXPECT_DOUBLE_EQ(F.horizon(), 0.0);
}

TEST(Fields, GridMismatchIsReported) {
    const Grid g(1, 16, 1.0), other(1, 16, 2.0);
    ComplexField a(g), b(other);
    try {
        a += b;
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::grid_mismatch);
    }
}
