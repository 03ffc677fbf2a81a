#include <gtest/gtest.h>

#include <Eigen/SVD>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "stochdisp/opnorm.hpp"

using namespace stochdisp;

namespace {

// Direct O(M^2) kernel sum built from the grid-level propagators.
SpaceTimeField direct_sum(const SpaceTimeOperator& op, const SpaceTimeField& f) {
    SpaceTimeField out = op.zeros();
    const RealField& v1 = op.potential().v1();
    const RealField& v2 = op.potential().v2();
    for (std::size_t m = 0; m < op.steps(); ++m) {
        if (!op.output().contains(m)) continue;
        ComplexField acc(op.grid());
        for (std::size_t k = 0; k < m; ++k) {
            if (!op.input().contains(k)) continue;
            const ComplexField moved = translate(pointwise(f[k], v1), op.shift(m) - op.shift(k));
            acc += free_propagate(moved, op.time(m) - op.time(k));
        }
        out[m] = complex(op.step(), 0.0) * pointwise(acc, v2);
    }
    return out;
}

double relative_distance(const SpaceTimeField& a, const SpaceTimeField& b) {
    SpaceTimeField d = a;
    for (std::size_t m = 0; m < d.size(); ++m) d[m] -= b[m];
    return spacetime_norm(d) / std::max(spacetime_norm(b), 1e-300);
}

// Largest singular value of the materialized operator matrix.
double dense_norm(const SpaceTimeOperator& op) {
    const std::size_t dim = op.steps() * op.grid().size();
    Eigen::MatrixXcd a(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t c = 0; c < dim; ++c) {
        SpaceTimeField e = op.zeros();
        e[c / op.grid().size()].values[c % op.grid().size()] = 1.0;
        const SpaceTimeField col = direct_sum(op, e);
        for (std::size_t r = 0; r < dim; ++r) {
            a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = col[r / op.grid().size()].values[r % op.grid().size()];
        }
    }
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(a);
    return svd.singularValues()(0);
}

SpaceTimeOperator brownian_operator(int dim, std::size_t n, double box, std::size_t steps, double alpha,
                                    std::uint64_t seed, double depth = 1.0) {
    const Potential pot = make_potential(PotentialKind::gaussian_well, depth, 1.0, Grid(dim, n, box));
    const PathSample path = sample_brownian(seed, steps, 1.0, dim);
    return SpaceTimeOperator(pot, path, alpha, 1.0, steps);
}

NormOptions tight() { return NormOptions{20000, 1e-14}; }

}  // namespace

TEST(ApplyS, ZeroPotentialAndZeroInput) {
    const Potential zero = make_potential(PotentialKind::zero, 0.0, 1.0, Grid(1, 32, 16.0));
    const SpaceTimeOperator op(zero, sample_brownian(1, 16, 1.0, 1), 2.0, 1.0, 16);
    const SpaceTimeField f = random_spacetime_field(op, 4);
    EXPECT_EQ(spacetime_norm(apply_S(op, f)), 0.0);
    EXPECT_EQ(estimate_norm(op, 1).value, 0.0);
    const SpaceTimeOperator op2 = brownian_operator(1, 32, 16.0, 16, 2.0, 1);
    EXPECT_EQ(spacetime_norm(apply_S(op2, op2.zeros())), 0.0);
}

TEST(ApplyS, MatchesDirectKernelSum) {
    for (int dim : {1, 2}) {
        const SpaceTimeOperator op = brownian_operator(dim, dim == 1 ? 64 : 16, 16.0, 20, 3.0, 7);
        const SpaceTimeField f = random_spacetime_field(op, 9);
        EXPECT_LT(relative_distance(apply_S(op, f), direct_sum(op, f)), 1e-12);
        const SpaceTimeOperator w = op.windowed({12, 20}, {3, 9});
        EXPECT_LT(relative_distance(apply_S(w, f), direct_sum(w, f)), 1e-12);
    }
}

TEST(ApplyS, AdjointIdentity) {
    for (int dim : {1, 2, 3}) {
        const SpaceTimeOperator op = brownian_operator(dim, dim == 3 ? 8 : 32, 12.0, 24, 2.5, 11);
        for (const SpaceTimeOperator& w : {op, op.windowed({8, 24}, {0, 16}), op.windowed({0, 8}, {8, 24})}) {
            const SpaceTimeField f = random_spacetime_field(w, 21);
            const SpaceTimeField g = random_spacetime_field(w, 22);
            const complex lhs = spacetime_inner(apply_S(w, f), g);
            const complex rhs = spacetime_inner(f, apply_S_adjoint(w, g));
            EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(std::abs(lhs), 1e-300)) << dim;
        }
    }
}

TEST(ApplyS, Causality) {
    const SpaceTimeOperator op = brownian_operator(1, 64, 16.0, 32, 2.0, 5);
    const SpaceTimeField f = random_spacetime_field(op, 1);
    SpaceTimeField g = f;
    for (std::size_t m = 20; m < 32; ++m) g[m] = complex(3.0, -1.0) * g[m];
    const SpaceTimeField sf = apply_S(op, f), sg = apply_S(op, g);
    for (std::size_t m = 0; m <= 20; ++m) EXPECT_EQ(sf[m].values, sg[m].values) << m;
    EXPECT_GT(l2_norm(sf[21] - sg[21]), 0.0);
}

TEST(ApplyS, LatticeMismatchRejected) {
    const SpaceTimeOperator op = brownian_operator(1, 32, 16.0, 16, 2.0, 5);
    const SpaceTimeOperator other = brownian_operator(1, 64, 16.0, 16, 2.0, 5);
    try {
        apply_S(op, other.zeros());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::grid_mismatch);
    }
    const SpaceTimeOperator longer = brownian_operator(1, 32, 16.0, 32, 2.0, 5);
    EXPECT_THROW(apply_S(op, longer.zeros()), Error);
}

TEST(EstimateNorm, MatchesDenseSvdOracle) {
    {
        const SpaceTimeOperator op = brownian_operator(1, 16, 8.0, 8, 1.0, 3, 2.0);
        EXPECT_NEAR(estimate_norm(op, 5, tight()).value, dense_norm(op), 1e-6 * dense_norm(op));
    }
    {
        const SpaceTimeOperator op = brownian_operator(1, 64, 16.0, 16, 4.0, 4);
        const double want = dense_norm(op);
        EXPECT_NEAR(estimate_norm(op, 6, tight()).value, want, 1e-6 * want);
    }
    {
        const SpaceTimeOperator op = brownian_operator(2, 8, 8.0, 8, 2.0, 8);
        const double want = dense_norm(op);
        EXPECT_NEAR(estimate_norm(op, 6, tight()).value, want, 1e-6 * want);
    }
}

TEST(EstimateNorm, DeterministicAndMonotoneDiagnostics) {
    const SpaceTimeOperator op = brownian_operator(1, 64, 16.0, 32, 2.0, 4);
    const NormEstimate a = estimate_norm(op, 9);
    const NormEstimate b = estimate_norm(op, 9);
    EXPECT_EQ(a.value, b.value);
    EXPECT_TRUE(a.converged);
    EXPECT_LE(a.convergence_gap, 1e-10);
    const NormEstimate few = estimate_norm(op, 9, NormOptions{10, 1e-300});
    EXPECT_FALSE(few.converged);
    EXPECT_EQ(few.iterations, 10u);
    EXPECT_LE(few.value, a.value * (1.0 + 1e-12));
    EXPECT_THROW(estimate_norm(op, 9, NormOptions{9, 1e-10}), Error);
}

TEST(EstimateNorm, ZeroPathStationarity) {
    const Potential pot = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, Grid(1, 128, 32.0));
    const SpaceTimeOperator op(pot, zero_path(64, 2.0, 1), 1.0, 2.0, 64);
    const double first = estimate_norm(op.windowed({0, 32}, {0, 32}), 1).value;
    const double second = estimate_norm(op.windowed({32, 64}, {32, 64}), 2).value;
    const double middle = estimate_norm(op.windowed({16, 48}, {16, 48}), 3).value;
    EXPECT_NEAR(second, first, 1e-6 * first);
    EXPECT_NEAR(middle, first, 1e-6 * first);
}

TEST(EstimateNorm, StaticNormStableUnderRefinement) {
    const Potential pot = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, Grid(1, 256, 32.0));
    std::vector<double> norms;
    for (std::size_t steps : {32u, 64u, 128u, 256u}) {
        const SpaceTimeOperator op(pot, zero_path(steps, 1.0, 1), 1.0, 1.0, steps);
        norms.push_back(estimate_norm(op, 1).value);
    }
    for (double n : norms) EXPECT_TRUE(std::isfinite(n));
    const double d1 = std::abs(norms[1] - norms[0]), d2 = std::abs(norms[2] - norms[1]), d3 = std::abs(norms[3] - norms[2]);
    EXPECT_LT(d2, d1);
    EXPECT_LT(d3, d2);
    EXPECT_LT(d3 / norms[3], 0.02);
}

TEST(BlockNorm, CausalZerosAndPythagorean) {
    const SpaceTimeOperator op = brownian_operator(1, 64, 16.0, 64, 2.0, 12);
    const int n = 4;
    double sum = 0.0;
    for (int j = 1; j <= n; ++j) {
        for (int k = 1; k <= n; ++k) {
            const NormEstimate b = block_norm(op, n, j, k, 100 + static_cast<std::uint64_t>(4 * j + k));
            if (k > j) {
                EXPECT_EQ(b.value, 0.0);
            } else {
                EXPECT_GT(b.value, 0.0);
            }
            sum += b.value * b.value;
        }
    }
    const double full = estimate_norm(op, 1).value;
    EXPECT_LE(full * full, sum + 1e-8);
    EXPECT_THROW(block_norm(op, 5, 1, 1, 1), Error);
    EXPECT_THROW(block_norm(op, 4, 0, 1, 1), Error);
    EXPECT_THROW(block_norm(op, 4, 5, 1, 1), Error);
}

TEST(BlockNorm, DiagonalBlockMatchesWindowedDenseOracle) {
    const SpaceTimeOperator op = brownian_operator(1, 32, 16.0, 16, 2.0, 12);
    const SpaceTimeOperator w = op.windowed({8, 12}, {8, 12});
    EXPECT_NEAR(block_norm(op, 4, 3, 3, 1, tight()).value, dense_norm(w), 1e-6 * dense_norm(w));
}

TEST(SeparatedLinearNorm, SinglePieceIsStaticNorm) {
    const Potential pot = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, Grid(1, 128, 32.0));
    SeparatedOptions opts;
    opts.steps_per_piece = 64;
    const NormEstimate sep = separated_linear_norm(pot, 1, 3.0, opts);
    const SpaceTimeOperator stat(pot, zero_path(64, 1.0, 1), 3.0, 1.0, 64);
    EXPECT_NEAR(sep.value, estimate_norm(stat, opts.seed).value, 1e-12);
}

TEST(SeparatedLinearNorm, TwoPiecesBelowStatic) {
    const Potential pot = make_potential(PotentialKind::gaussian_well, 1.0, 1.0, Grid(1, 512, 64.0));
    SeparatedOptions opts;
    opts.steps_per_piece = 64;
    const double one = separated_linear_norm(pot, 1, 1.0, opts).value;
    const double two = separated_linear_norm(pot, 2, 1.0, opts).value;
    EXPECT_LT(two, one);
    EXPECT_LE(separated_linear_norm(pot, 2, 2.0, opts).value, two * (1.0 + 1e-6));
}

TEST(RestrictedNormGrowth, NondecreasingAndZeroForZeroPotential) {
    const Grid g(1, 128, 32.0);
    const PathSample path = sample_brownian(31, 256, 4.0, 1);
    const std::vector<double> horizons{0.5, 1.0, 2.0, 3.0, 4.0};
    const auto series = restricted_norm_growth(make_potential(PotentialKind::gaussian_well, 1.0, 1.0, g), path, 1.0,
                                               horizons, 1.0 / 64.0, 5);
    ASSERT_EQ(series.size(), horizons.size());
    for (std::size_t i = 1; i < series.size(); ++i) {
        EXPECT_GE(series[i].estimate.value, series[i - 1].estimate.value - 1e-6);
        EXPECT_EQ(series[i].horizon, horizons[i]);
    }
    // Still growing at the largest horizon.
    EXPECT_GT(series.back().estimate.value, series[series.size() - 2].estimate.value);

    const auto zero = restricted_norm_growth(make_potential(PotentialKind::zero, 0.0, 1.0, g), path, 1.0, horizons,
                                             1.0 / 64.0, 5);
    for (const auto& r : zero) EXPECT_EQ(r.estimate.value, 0.0);
    EXPECT_THROW(restricted_norm_growth(make_potential(PotentialKind::zero, 0.0, 1.0, g), path, 1.0, {1.0, 0.5}, 0.1, 1),
                 Error);
    EXPECT_THROW(restricted_norm_growth(make_potential(PotentialKind::zero, 0.0, 1.0, g), path, 1.0, {1.0, 5.0}, 0.1, 1),
                 Error);
}

TEST(NormSeriesCsv, Columns) {
    const auto file = std::filesystem::temp_directory_path() / "stochdisp_norms.csv";
    write_norm_series_csv({{1.0, 0.5, 1e-12}, {2.0, 0.25, 3e-11}}, file.string());
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "parameter,norm_estimate,convergence_gap");
    std::getline(in, line);
    EXPECT_EQ(line.substr(0, 6), "1,0.5,");
    std::filesystem::remove(file);
}
