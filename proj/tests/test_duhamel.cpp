#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "stochdisp/duhamel.hpp"

using namespace stochdisp;

namespace {

ComplexField gaussian_packet(const Grid& g, double width, double k0 = 0.0, double x0 = 0.0) {
    ComplexField z = ComplexField::from_function(g, [&](const Vec& x) {
        const double r = x[0] - x0;
        return std::polar(std::exp(-r * r / (2.0 * width * width)), k0 * x[0]);
    });
    return complex(1.0 / l2_norm(z), 0.0) * z;
}

// Independent discrete scheme A_m = U(h) (1 - i h V_{m-1}) A_{m-1}; its Born
// expansion is exactly the left-rectangle series.
SpaceTimeField interaction_euler(const ComplexField& z0, const Potential& pot, const PathSample& path, double alpha,
                                 double h, std::size_t steps) {
    SpaceTimeField out(z0.grid, h);
    out.push_back(z0);
    ComplexField a = z0;
    for (std::size_t m = 1; m <= steps; ++m) {
        const RealField v = pot.sample_shifted(alpha * path.at(static_cast<double>(m - 1) * h));
        for (std::size_t i = 0; i < a.size(); ++i) a.values[i] *= complex(1.0, -h * v.values[i]);
        a = free_propagate(a, h);
        out.push_back(a);
    }
    return out;
}

double final_distance(const SpaceTimeField& a, const ComplexField& b) { return l2_norm(a[a.size() - 1] - b); }

ComplexField partial_sum(int order, const ComplexField& z0, const Potential& pot, const PathSample& path,
                         double alpha, double dt, double horizon) {
    ComplexField acc(z0.grid);
    for (int n = 0; n <= order; ++n) {
        const SpaceTimeField b = born_term(n, z0, pot, path, alpha, dt, horizon);
        acc += b[b.size() - 1];
    }
    return acc;
}

// Real-space oracle for the symbol form with generator Delta for the noise:
// int_0^T int (e^{alpha^2 s Delta}|V|) conj(e^{-is Delta} g) e^{-is Delta} f dx ds,
// composite 3-point Gauss-Legendre in s.
complex form_oracle(const RealField& v, double alpha, double t_cut, const ComplexField& f, const ComplexField& g) {
    const RealField absv = modulus(v);
    const double nodes[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
    const double weights[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    const int panels = 400;
    const double h = t_cut / panels;
    complex acc{0.0, 0.0};
    for (int p = 0; p < panels; ++p) {
        for (int q = 0; q < 3; ++q) {
            const double s = (p + 0.5) * h + 0.5 * h * nodes[q];
            const RealField smooth = heat_propagate(absv, alpha * alpha * s);
            const ComplexField uf = free_propagate(f, -s);
            const ComplexField ug = free_propagate(g, -s);
            complex local{0.0, 0.0};
            for (std::size_t i = 0; i < uf.size(); ++i) local += smooth.values[i] * uf.values[i] * std::conj(ug.values[i]);
            acc += 0.5 * h * weights[q] * local * f.grid.cell_volume();
        }
    }
    return acc;
}

double max_entry_distance(const SymbolMatrix& a, const SymbolMatrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.entries.size(); ++i) worst = std::max(worst, std::abs(a.entries[i] - b.entries[i]));
    return worst;
}

}  // namespace

TEST(BornTerm, ZerothOrderIsFreeEvolution) {
    const Grid g(1, 128, 32.0);
    const Potential pot = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, g);
    const ComplexField z0 = gaussian_packet(g, 1.0, 1.0);
    const PathSample path = sample_brownian(3, 200, 1.0, 1);
    const SpaceTimeField b0 = born_term(0, z0, pot, path, 2.0, 0.01, 1.0);
    ASSERT_EQ(b0.size(), 101u);
    for (std::size_t m : {std::size_t{0}, std::size_t{37}, std::size_t{100}}) {
        EXPECT_LT(l2_norm(b0[m] - free_propagate(z0, b0.time(m))), 1e-12);
    }
}

TEST(BornTerm, SeriesSumsToDiscreteScheme) {
    const Grid g(1, 128, 32.0);
    const ComplexField z0 = gaussian_packet(g, 1.0);
    const PathSample path = sample_brownian(11, 400, 1.0, 1);
    const double dt = 0.01, horizon = 1.0;
    double previous = 0.0;
    for (double depth : {0.4, 0.2, 0.1}) {
        const Potential pot = make_potential(PotentialKind::gaussian_well, depth, 1.0, g);
        const SpaceTimeField exact = interaction_euler(z0, pot, path, 1.5, dt, 100);
        const double err = final_distance(exact, partial_sum(2, z0, pot, path, 1.5, dt, horizon));
        if (previous > 0.0) {
            EXPECT_NEAR(previous / err, 8.0, 1.0) << depth;
        }
        previous = err;
    }
}

TEST(BornTerm, HigherPartialSumsApproximateEvolveBetter) {
    const Grid g(1, 128, 32.0);
    const Potential pot = make_potential(PotentialKind::gaussian_well, 0.3, 1.0, g);
    const ComplexField z0 = gaussian_packet(g, 1.0);
    const PathSample path = sample_brownian(5, 2000, 1.0, 1);
    const double dt = 1e-3;
    const Trajectory traj = evolve(z0, pot, path, 1.0, dt, 1.0);
    const ComplexField& z = traj[traj.size() - 1];
    const double e1 = l2_norm(partial_sum(1, z0, pot, path, 1.0, dt, 1.0) - z);
    const double e3 = l2_norm(partial_sum(3, z0, pot, path, 1.0, dt, 1.0) - z);
    EXPECT_LT(e3, 0.5 * e1);
}

TEST(BornTerm, OrderCapAndArguments) {
    const Grid g(1, 32, 16.0);
    const Potential pot = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, g);
    const ComplexField z0 = gaussian_packet(g, 1.0);
    const PathSample path = zero_path(10, 1.0, 1);
    try {
        born_term(5, z0, pot, path, 1.0, 0.1, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::resource);
    }
    EXPECT_NO_THROW(born_term(5, z0, pot, path, 1.0, 0.1, 1.0, 6));
    EXPECT_THROW(born_term(-1, z0, pot, path, 1.0, 0.1, 1.0), Error);
    EXPECT_THROW(born_term(1, z0, pot, path, 1.0, 0.1, 2.0), Error);
}

TEST(HeatSmoothing, ZeroAlphaIsExact) {
    const Potential pot = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, Grid(1, 128, 20.0));
    EXPECT_LT(heat_smoothing_check(pot, 0.0, 0.5, 10, 1), 1e-13);
}

TEST(HeatSmoothing, ConvergesToHalfGeneratorHeatFlow) {
    const Potential pot = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, Grid(1, 128, 20.0));
    EXPECT_LT(heat_smoothing_check(pot, 1.0, 0.5, 200000, 7), 5e-3);
    const Potential pot2 = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, Grid(2, 32, 16.0));
    EXPECT_LT(heat_smoothing_check(pot2, 2.0, 0.25, 40000, 8), 2e-2);
}

TEST(HeatSmoothing, ErrorHalvesWhenPathsQuadruple) {
    const Potential pot = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, Grid(1, 64, 20.0));
    auto rms = [&](std::size_t n_paths, std::uint64_t stream) {
        double acc = 0.0;
        const int reps = 200;
        for (int r = 0; r < reps; ++r) {
            const double e = heat_smoothing_check(pot, 1.0, 0.1, n_paths, derive_seed(99, stream, r));
            acc += e * e;
        }
        return std::sqrt(acc / reps);
    };
    const double ratio = rms(500, 0) / rms(2000, 1);
    EXPECT_NEAR(ratio, 2.0, 0.6);
}

TEST(WSymbol, HermitianAndBounded) {
    const Grid g(1, 64, 20.0);
    const Potential pot = make_potential(PotentialKind::gaussian_well, 1.5, 1.0, g);
    const double alpha = 2.0, t_cut = 1.0;
    const SymbolMatrix w = w_symbol(pot, alpha, t_cut);
    const auto vhat = fourier_coefficients(modulus(pot.field()));
    double vmax = 0.0;
    for (auto c : vhat) vmax = std::max(vmax, std::abs(c));
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < g.size(); ++j) {
            EXPECT_LT(std::abs(w(i, j) - std::conj(w(j, i))), 1e-15);
            EXPECT_LE(std::abs(w(i, j)), t_cut * vmax * (1.0 + 1e-12));
            const double dk = g.axis_wavenumber(i) - g.axis_wavenumber(j);
            if (i != j) {
                EXPECT_LE(std::abs(w(i, j)), vmax / (alpha * alpha * dk * dk) * (1.0 + 1e-12));
            }
        }
    }
}

TEST(WSymbol, FormMatchesRealSpaceOracle) {
    const Grid g(1, 32, 16.0);
    const Potential pot = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, g);
    const ComplexField f = gaussian_packet(g, 1.0, 0.5, -0.5);
    const ComplexField h = gaussian_packet(g, 1.2, -0.3, 0.8);
    for (double alpha : {0.0, 0.7, 2.0}) {
        const SymbolMatrix w = w_symbol(pot, alpha, 1.0);
        const complex got = symbol_form(w, f, h);
        const complex want = form_oracle(pot.field(), alpha, 1.0, f, h);
        EXPECT_LT(std::abs(got - want), 1e-8 * std::max(1.0, std::abs(want))) << alpha;
        // Diagonal values are real and non-negative.
        EXPECT_NEAR(symbol_form(w, f, f).imag(), 0.0, 1e-13);
        EXPECT_GT(symbol_form(w, f, f).real(), 0.0);
    }
}

TEST(WSymbol, DeltaConsistency) {
    const Grid g(1, 32, 16.0);
    const Potential pot = make_potential(PotentialKind::gaussian_well, -1.3, 1.0, g);
    const RealField absv = modulus(pot.field());
    for (double alpha : {0.5, 3.0}) {
        const SymbolMatrix w = w_symbol(pot, alpha, 2.0);
        const SymbolMatrix delta = SymbolMatrix::identity(g, alpha, 2.0);
        EXPECT_LT(max_entry_distance(apply_LV(delta, absv, alpha), w), 1e-10);
        EXPECT_LT(max_entry_distance(apply_RV(delta, absv, alpha), w), 1e-10);
    }
}

TEST(WSymbol, RejectsHigherDimensions) {
    const Potential pot = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, Grid(2, 16, 12.0));
    try {
        w_symbol(pot, 1.0, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    }
}

TEST(SymbolCalculus, LeftAndRightActionsAreAdjoint) {
    const Grid g(1, 32, 16.0);
    const Potential pot = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, g);
    const SymbolMatrix w = w_symbol(pot, 1.0, 1.0);
    const SymbolMatrix l = apply_LV(w, pot.field(), 1.0);
    const SymbolMatrix r = apply_RV(w, pot.field(), 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < g.size(); ++j) EXPECT_LT(std::abs(l(i, j) - std::conj(r(j, i))), 1e-13);
    }
}

TEST(SymbolCalculus, SecondOrderFormIsRealNonNegative) {
    const Grid g(1, 64, 16.0);
    const ComplexField z0 = gaussian_packet(g, 1.0, 0.7);
    for (double depth : {1.0, -2.0}) {
        const Potential pot = make_potential(PotentialKind::gaussian_well, depth, 1.0, g);
        for (double alpha : {0.5, 1.0, 4.0}) {
            for (double t_cut : {0.5, 2.0}) {
                const SymbolMatrix w = w_symbol(pot, alpha, t_cut);
                const complex value = symbol_form(apply_word("RL", w, pot.field(), alpha), z0, z0) +
                                      symbol_form(apply_word("LR", w, pot.field(), alpha), z0, z0);
                EXPECT_NEAR(value.imag(), 0.0, 1e-12 * std::abs(value));
                EXPECT_GE(value.real(), 0.0) << depth << " " << alpha << " " << t_cut;
            }
        }
    }
}

TEST(SymbolCalculus, WordsAndComposition) {
    EXPECT_EQ(enumerate_words(2), (std::vector<std::string>{""}));
    EXPECT_EQ(enumerate_words(3), (std::vector<std::string>{"LR", "RL"}));
    const auto four = enumerate_words(4);
    EXPECT_EQ(four.size(), 6u);
    EXPECT_EQ(four.front(), "LLRR");
    EXPECT_EQ(four.back(), "RRLL");
    EXPECT_THROW(enumerate_words(1), Error);

    const Grid g(1, 16, 12.0);
    const Potential pot = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, g);
    const SymbolMatrix w = w_symbol(pot, 1.0, 1.0);
    const SymbolMatrix composed = apply_LV(apply_RV(w, pot.field(), 1.0), pot.field(), 1.0);
    EXPECT_EQ(max_entry_distance(apply_word("LR", w, pot.field(), 1.0), composed), 0.0);
    EXPECT_THROW(apply_word("LX", w, pot.field(), 1.0), Error);
}

TEST(SymbolExport, RoundTrip) {
    const Grid g(1, 16, 12.0);
    const SymbolMatrix w = w_symbol(make_potential(PotentialKind::gaussian_well, 1.0, 1.0, g), 1.5, 0.75);
    const auto file = std::filesystem::temp_directory_path() / "stochdisp_symbol.bin";
    write_symbol(w, file.string());
    EXPECT_EQ(std::filesystem::file_size(file), 8u + 8u + 24u + 16u * 256u);
    const SymbolMatrix back = read_symbol(file.string());
    EXPECT_EQ(back.grid, g);
    EXPECT_EQ(back.alpha, 1.5);
    EXPECT_EQ(back.time_cutoff, 0.75);
    EXPECT_EQ(max_entry_distance(back, w), 0.0);
    std::filesystem::resize_file(file, 100);
    EXPECT_THROW(read_symbol(file.string()), Error);
    std::filesystem::remove(file);
    try {
        read_symbol(file.string());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::io);
    }
}

TEST(SeriesMajorant, AlphaScaling) {
    const SeriesMajorant a = series_majorant(4, 3.0, 1.2, 0.8);
    const SeriesMajorant b = series_majorant(4, 6.0, 1.2, 0.8);
    for (int n = 1; n <= 4; ++n) {
        EXPECT_NEAR(b.terms[n - 1] / a.terms[n - 1], std::pow(2.0, -4.0 * n), 1e-15);
    }
    EXPECT_NEAR(a.threshold, std::pow(3.2, 0.25) * std::sqrt(1.2), 1e-14);
    EXPECT_FALSE(a.divergent);
    EXPECT_NEAR(a.sum, a.ratio / (1.0 - a.ratio), 1e-15);
    const SeriesMajorant c = series_majorant(3, 1.0, 1.2, 0.8);
    EXPECT_TRUE(c.divergent);
    EXPECT_TRUE(std::isinf(c.sum));
    EXPECT_THROW(series_majorant(3, 0.0, 1.0, 1.0), Error);
}

TEST(McSeriesBound, DominatedAndReproducible) {
    const Grid g(1, 64, 24.0);
    const Potential pot = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, g);
    const ComplexField z0 = gaussian_packet(g, 1.0);
    const SeriesBoundEstimate a = mc_series_bound(pot, 2.0, z0, 8, 0.02, 1.0, 17);
    const SeriesBoundEstimate b = mc_series_bound(pot, 2.0, z0, 8, 0.02, 1.0, 17);
    EXPECT_EQ(a.estimate, b.estimate);
    EXPECT_GT(a.estimate, 0.0);
    EXPECT_GT(a.standard_error, 0.0);
    EXPECT_TRUE(a.dominated);
    EXPECT_NEAR(a.majorant.sum, a.estimate, 1e-10 * a.estimate);
    EXPECT_NEAR(a.fitted_c, a.majorant.ratio * 16.0 / (4.0 * std::pow(pot.norms().l32_1, 2.0)), 1e-12);
    // Zero potential: nothing to estimate.
    const SeriesBoundEstimate zero = mc_series_bound(make_potential(PotentialKind::zero, 0.0, 1.0, g), 2.0, z0, 4,
                                                     0.05, 1.0, 1);
    EXPECT_EQ(zero.estimate, 0.0);
    EXPECT_TRUE(zero.dominated);
}
