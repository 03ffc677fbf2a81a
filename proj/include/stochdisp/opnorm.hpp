#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stochdisp/error.hpp"
#include "stochdisp/grid.hpp"
#include "stochdisp/paths.hpp"
#include "stochdisp/potentials.hpp"

namespace stochdisp {

/// Half-open range [begin, end) of time nodes.
struct NodeWindow {
    std::size_t begin = 0;
    std::size_t end = 0;

    bool contains(std::size_t m) const noexcept { return m >= begin && m < end; }
    std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
};

/**
 * Space-time operator with kernel
 *
 *   K(t, s) = V2 e^{i(t-s)Delta} e^{alpha (gamma(t) - gamma(s)) . grad} V1,  s < t,
 *
 * on the left-endpoint lattice t_m = m h, m = 0..M-1, h = horizon / M, acting
 * on L^2_{t,x} with the quadrature inner product h dV sum conj(F) G. V1, V2 are
 * the static factors of the potential; translations are periodic. Inputs are
 * restricted to `input` and outputs to `output` (time windows).
 */
class SpaceTimeOperator {
public:
    SpaceTimeOperator(Potential pot, PathSample path, double alpha, double horizon, std::size_t steps)
        : pot_(std::move(pot)), path_(std::move(path)), alpha_(alpha), horizon_(horizon), steps_(steps) {
        require(steps >= 1, ErrorKind::invalid_argument, "SpaceTimeOperator: need at least one time node");
        require(std::isfinite(horizon) && horizon > 0.0, ErrorKind::invalid_argument,
                "SpaceTimeOperator: horizon must be positive");
        require(std::isfinite(alpha), ErrorKind::invalid_argument, "SpaceTimeOperator: alpha must be finite");
        require(path_.dim == pot_.grid().dim(), ErrorKind::invalid_argument,
                "SpaceTimeOperator: path and potential dimensions differ");
        require(horizon <= path_.horizon() * (1.0 + 1e-12), ErrorKind::invalid_argument,
                "SpaceTimeOperator: path does not cover the horizon");
        input_ = output_ = NodeWindow{0, steps};
        shifts_.reserve(steps);
        for (std::size_t m = 0; m < steps; ++m) shifts_.push_back(alpha * path_.at(time(m)));
    }

    /// Operator on [0, horizon] with the smallest node count whose step is <= dt.
    static SpaceTimeOperator with_step(Potential pot, PathSample path, double alpha, double horizon, double dt) {
        require(dt > 0.0, ErrorKind::invalid_argument, "SpaceTimeOperator: dt must be positive");
        const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
        return SpaceTimeOperator(std::move(pot), std::move(path), alpha, horizon, steps);
    }

    const Grid& grid() const noexcept { return pot_.grid(); }
    const Potential& potential() const noexcept { return pot_; }
    const PathSample& path() const noexcept { return path_; }
    double alpha() const noexcept { return alpha_; }
    double horizon() const noexcept { return horizon_; }
    std::size_t steps() const noexcept { return steps_; }
    double step() const noexcept { return horizon_ / static_cast<double>(steps_); }
    double time(std::size_t m) const noexcept { return step() * static_cast<double>(m); }
    const Vec& shift(std::size_t m) const { return shifts_[m]; }
    const NodeWindow& input() const noexcept { return input_; }
    const NodeWindow& output() const noexcept { return output_; }

    /// Same kernel with outputs restricted to `out` and inputs to `in`.
    SpaceTimeOperator windowed(NodeWindow out, NodeWindow in) const {
        require(out.end <= steps_ && in.end <= steps_ && out.begin <= out.end && in.begin <= in.end,
                ErrorKind::invalid_argument, "SpaceTimeOperator: window outside the lattice");
        SpaceTimeOperator copy = *this;
        copy.output_ = out;
        copy.input_ = in;
        return copy;
    }

    SpaceTimeField zeros() const {
        SpaceTimeField f(grid(), step());
        for (std::size_t m = 0; m < steps_; ++m) f.push_back(ComplexField(grid()));
        return f;
    }

    void check_lattice(const SpaceTimeField& f) const {
        require(f.grid == grid() && f.size() == steps_ && std::abs(f.dt - step()) <= 1e-12 * step(),
                ErrorKind::grid_mismatch, "space-time field does not match the operator lattice");
    }

    /// e^{i xi . a} for every slot (the multiplier of translate(., a)).
    std::vector<complex> translation_phase(const Vec& a) const {
        const Grid& g = grid();
        const std::size_t n = g.points_per_axis();
        std::array<std::vector<complex>, 3> axis;
        for (int d = 0; d < g.dim(); ++d) {
            axis[d].resize(n);
            for (std::size_t j = 0; j < n; ++j) axis[d][j] = std::polar(1.0, g.axis_wavenumber(j) * a[d]);
        }
        std::vector<complex> out(g.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const auto idx = g.unflatten(i);
            complex p = axis[0][idx[0]];
            for (int d = 1; d < g.dim(); ++d) p *= axis[d][idx[d]];
            out[i] = p;
        }
        return out;
    }

private:
    Potential pot_;
    PathSample path_;
    double alpha_;
    double horizon_;
    std::size_t steps_;
    NodeWindow input_;
    NodeWindow output_;
    std::vector<Vec> shifts_;
};

/**
 * (SF)_m = sum_{k<m} h V2 e^{i(t_m - t_k)Delta} translate(V1 F_k, shift_m - shift_k),
 * evaluated by the forward recursion in Fourier space (O(M N^d log N)).
 */
inline SpaceTimeField apply_S(const SpaceTimeOperator& op, const SpaceTimeField& f) {
    op.check_lattice(f);
    SpaceTimeField out = op.zeros();
    const NodeWindow in = op.input(), win = op.output();
    if (in.size() == 0 || win.size() == 0 || in.begin + 1 >= win.end || op.potential().is_zero()) return out;

    const Grid& g = op.grid();
    const double h = op.step();
    const int rank = g.dim();
    const int n = static_cast<int>(g.points_per_axis());
    const auto k2 = g.frequency_squared();
    const RealField& v1 = op.potential().v1();
    const RealField& v2 = op.potential().v2();

    std::vector<complex> acc(g.size(), complex(0.0, 0.0));  // U^_m, pre-translation
    std::vector<complex> work(g.size());
    for (std::size_t m = in.begin + 1; m < win.end; ++m) {
        const std::size_t k = m - 1;
        if (in.contains(k)) {
            for (std::size_t i = 0; i < work.size(); ++i) work[i] = v1.values[i] * f[k].values[i];
            fft::forward(work, rank, n);
            const auto phase = op.translation_phase(-1.0 * op.shift(k));
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += h * phase[i] * work[i];
        }
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] *= std::polar(1.0, -k2[i] * h);
        if (!win.contains(m)) continue;
        const auto phase = op.translation_phase(op.shift(m));
        for (std::size_t i = 0; i < acc.size(); ++i) work[i] = phase[i] * acc[i];
        fft::inverse(work, rank, n);
        for (std::size_t i = 0; i < work.size(); ++i) out[m].values[i] = v2.values[i] * work[i];
    }
    return out;
}

/// Adjoint in the lattice inner product, by the backward recursion of the reversed kernel.
inline SpaceTimeField apply_S_adjoint(const SpaceTimeOperator& op, const SpaceTimeField& g_field) {
    op.check_lattice(g_field);
    SpaceTimeField out = op.zeros();
    const NodeWindow in = op.input(), win = op.output();
    if (in.size() == 0 || win.size() == 0 || in.begin + 1 >= win.end || op.potential().is_zero()) return out;

    const Grid& g = op.grid();
    const double h = op.step();
    const int rank = g.dim();
    const int n = static_cast<int>(g.points_per_axis());
    const auto k2 = g.frequency_squared();
    const RealField& v1 = op.potential().v1();
    const RealField& v2 = op.potential().v2();

    std::vector<complex> acc(g.size(), complex(0.0, 0.0));
    std::vector<complex> work(g.size());
    for (std::size_t k = win.end - 1; k-- > in.begin;) {
        const std::size_t m = k + 1;
        if (win.contains(m)) {
            for (std::size_t i = 0; i < work.size(); ++i) work[i] = v2.values[i] * g_field[m].values[i];
            fft::forward(work, rank, n);
            const auto phase = op.translation_phase(-1.0 * op.shift(m));
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += phase[i] * work[i];
        }
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] *= std::polar(1.0, k2[i] * h);
        if (!in.contains(k)) continue;
        const auto phase = op.translation_phase(op.shift(k));
        for (std::size_t i = 0; i < acc.size(); ++i) work[i] = phase[i] * acc[i];
        fft::inverse(work, rank, n);
        for (std::size_t i = 0; i < work.size(); ++i) out[k].values[i] = h * v1.values[i] * work[i];
    }
    return out;
}

/// <F, G> = h dV sum_m sum_x conj(F) G.
inline complex spacetime_inner(const SpaceTimeField& f, const SpaceTimeField& g) {
    require(f.size() == g.size() && f.grid == g.grid, ErrorKind::grid_mismatch, "space-time fields differ");
    complex acc{0.0, 0.0};
    for (std::size_t m = 0; m < f.size(); ++m) acc += inner(f[m], g[m]);
    return acc * f.dt;
}

inline double spacetime_norm(const SpaceTimeField& f) { return std::sqrt(std::max(0.0, spacetime_inner(f, f).real())); }

/// Independent standard complex Gaussian values on every node, seeded.
inline SpaceTimeField random_spacetime_field(const SpaceTimeOperator& op, std::uint64_t seed) {
    SpaceTimeField f = op.zeros();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t m = 0; m < f.size(); ++m) {
        for (auto& v : f[m].values) v = complex(normal(rng), normal(rng));
    }
    return f;
}

struct NormEstimate {
    double value = 0.0;
    double convergence_gap = 0.0;  // relative gap of the last two iterates
    std::size_t iterations = 0;
    bool converged = false;
    std::optional<SpaceTimeField> vector;  // final right singular vector estimate (unit norm)
};

struct NormOptions {
    std::size_t iterations = 500;
    double tolerance = 1e-10;
};

/**
 * Dominant singular value by power iteration on S*S. The start vector is a
 * seeded Gaussian restricted to the input window unless `start` is given.
 * Estimates are monotone nondecreasing in the iteration count.
 */
inline NormEstimate estimate_norm(const SpaceTimeOperator& op, std::uint64_t seed, NormOptions opts = {},
                                  const SpaceTimeField* start = nullptr) {
    require(opts.iterations >= 10, ErrorKind::invalid_argument, "estimate_norm: need at least 10 iterations");
    NormEstimate out;
    SpaceTimeField v = start != nullptr ? *start : random_spacetime_field(op, seed);
    op.check_lattice(v);
    for (std::size_t m = 0; m < v.size(); ++m) {
        if (!op.input().contains(m)) v[m] = ComplexField(op.grid());
    }
    double nv = spacetime_norm(v);
    if (nv == 0.0) {
        v = random_spacetime_field(op, seed);
        for (std::size_t m = 0; m < v.size(); ++m) {
            if (!op.input().contains(m)) v[m] = ComplexField(op.grid());
        }
        nv = spacetime_norm(v);
    }
    out.vector = v;
    if (nv == 0.0) {
        out.converged = true;
        return out;
    }
    auto scale = [](SpaceTimeField& f, double s) {
        for (std::size_t m = 0; m < f.size(); ++m) f[m] *= complex(s, 0.0);
    };
    scale(v, 1.0 / nv);
    double previous = 0.0;
    for (std::size_t it = 1; it <= opts.iterations; ++it) {
        const SpaceTimeField w = apply_S(op, v);
        const double sigma = spacetime_norm(w);
        out.iterations = it;
        if (sigma == 0.0) {
            out.value = 0.0;
            out.convergence_gap = 0.0;
            out.converged = true;
            out.vector = v;
            return out;
        }
        out.value = sigma;
        out.vector = v;
        out.convergence_gap = std::abs(sigma - previous) / sigma;
        if (it > 1 && out.convergence_gap <= opts.tolerance) {
            out.converged = true;
            return out;
        }
        previous = sigma;
        SpaceTimeField u = apply_S_adjoint(op, w);
        const double nu = spacetime_norm(u);
        if (nu == 0.0) break;
        scale(u, 1.0 / nu);
        v = std::move(u);
    }
    return out;
}

inline std::vector<NodeWindow> time_blocks(const SpaceTimeOperator& op, int n) {
    require(n >= 1, ErrorKind::invalid_argument, "block decomposition needs n >= 1");
    require(op.steps() % static_cast<std::size_t>(n) == 0, ErrorKind::invalid_argument,
            "block decomposition: node count " + std::to_string(op.steps()) + " is not divisible by " +
                std::to_string(n));
    const std::size_t len = op.steps() / static_cast<std::size_t>(n);
    std::vector<NodeWindow> out;
    for (int j = 0; j < n; ++j) out.push_back({static_cast<std::size_t>(j) * len, static_cast<std::size_t>(j + 1) * len});
    return out;
}

/// ||T_jk|| with output block j and input block k (1-based, equal time blocks); k > j is exactly 0.
inline NormEstimate block_norm(const SpaceTimeOperator& op, int n, int j, int k, std::uint64_t seed,
                               NormOptions opts = {}) {
    require(j >= 1 && j <= n && k >= 1 && k <= n, ErrorKind::invalid_argument, "block_norm: block index out of range");
    const auto blocks = time_blocks(op, n);
    if (k > j) {
        NormEstimate zero;
        zero.converged = true;
        return zero;
    }
    return estimate_norm(op.windowed(blocks[static_cast<std::size_t>(j - 1)], blocks[static_cast<std::size_t>(k - 1)]),
                         seed, opts);
}

struct SeparatedOptions {
    std::size_t steps_per_piece = 64;
    NormOptions norm;
    std::uint64_t seed = 1;
};

/// ||S|| on [0, 1] along the separated piecewise-linear family with n pieces.
inline NormEstimate separated_linear_norm(const Potential& pot, int n, double alpha, SeparatedOptions opts = {}) {
    require(n >= 1, ErrorKind::invalid_argument, "separated_linear_norm: n must be >= 1");
    const int dim = pot.grid().dim();
    const PathSample path = make_piecewise_linear(separated_velocities(n), dim, opts.steps_per_piece, 1.0);
    const SpaceTimeOperator op(pot, path, alpha, 1.0, path.steps());
    return estimate_norm(op, opts.seed, opts.norm);
}

struct RestrictedNorm {
    double horizon = 0.0;
    NormEstimate estimate;
};

/**
 * ||T|| restricted to [0, R] for each R, on one lattice of step dt over the
 * largest R. Each estimate is warm-started from the previous singular vector,
 * so the series is nondecreasing up to rounding.
 */
inline std::vector<RestrictedNorm> restricted_norm_growth(const Potential& pot, const PathSample& path, double alpha,
                                                          const std::vector<double>& horizons, double dt,
                                                          std::uint64_t seed, NormOptions opts = {}) {
    require(!horizons.empty(), ErrorKind::invalid_argument, "restricted_norm_growth: no horizons");
    for (std::size_t i = 1; i < horizons.size(); ++i) {
        require(horizons[i] > horizons[i - 1], ErrorKind::invalid_argument,
                "restricted_norm_growth: horizons must be increasing");
    }
    const SpaceTimeOperator full = SpaceTimeOperator::with_step(pot, path, alpha, horizons.back(), dt);
    std::vector<RestrictedNorm> out;
    std::optional<SpaceTimeField> warm;
    for (double r : horizons) {
        require(r > 0.0, ErrorKind::invalid_argument, "restricted_norm_growth: horizons must be positive");
        const auto nodes = static_cast<std::size_t>(std::llround(r / full.step()));
        require(std::abs(static_cast<double>(nodes) * full.step() - r) <= 1e-9 * r, ErrorKind::invalid_argument,
                "restricted_norm_growth: horizon is not on the time lattice");
        const SpaceTimeOperator op = full.windowed({0, nodes}, {0, nodes});
        NormEstimate est = estimate_norm(op, seed, opts, warm ? &*warm : nullptr);
        if (est.vector) warm = est.vector;
        out.push_back({r, std::move(est)});
    }
    return out;
}

struct NormSeriesRow {
    double parameter = 0.0;
    double norm_estimate = 0.0;
    double convergence_gap = 0.0;
};

inline void write_norm_series_csv(const std::vector<NormSeriesRow>& rows, const std::string& filename) {
    std::ofstream out(filename);
    require(static_cast<bool>(out), ErrorKind::io, "cannot open '" + filename + "' for writing");
    out.precision(17);
    out << "parameter,norm_estimate,convergence_gap\n";
    for (const auto& r : rows) out << r.parameter << ',' << r.norm_estimate << ',' << r.convergence_gap << '\n';
    require(static_cast<bool>(out), ErrorKind::io, "failed writing '" + filename + "'");
}

}  // namespace stochdisp
