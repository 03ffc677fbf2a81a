#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stochdisp/error.hpp"
#include "stochdisp/grid.hpp"

namespace stochdisp {

enum class PathKind { zero, brownian, fbm, piecewise_linear };

inline std::string to_string(PathKind kind) {
    switch (kind) {
        case PathKind::zero: return "zero";
        case PathKind::brownian: return "brownian";
        case PathKind::fbm: return "fbm";
        case PathKind::piecewise_linear: return "piecewise_linear";
    }
    return "unknown";
}

inline PathKind path_kind_from_string(const std::string& s) {
    if (s == "zero") return PathKind::zero;
    if (s == "brownian") return PathKind::brownian;
    if (s == "fbm") return PathKind::fbm;
    if (s == "piecewise_linear") return PathKind::piecewise_linear;
    throw Error(ErrorKind::invalid_argument, "unknown path kind '" + s + "'");
}

/**
 * A driving curve gamma sampled on the uniform lattice t_k = k dt, k = 0..M,
 * starting at the origin. The magnitude alpha is carried along for the
 * record but applied by the consumers (solver, operators), so one unit-scale
 * path per seed serves every alpha.
 */
struct PathSample {
    int dim = 1;
    double dt = 1.0;
    std::vector<Vec> positions;  // M + 1 entries, positions[0] == 0
    PathKind kind = PathKind::zero;
    double hurst = 0.5;
    std::vector<Vec> velocities;  // piecewise-linear pieces, in order
    std::uint64_t seed = 0;
    double alpha = 1.0;

    std::size_t steps() const noexcept { return positions.empty() ? 0 : positions.size() - 1; }
    double horizon() const noexcept { return dt * static_cast<double>(steps()); }
    double time(std::size_t k) const noexcept { return dt * static_cast<double>(k); }

    /// gamma(t) by linear interpolation between lattice nodes.
    Vec at(double t) const {
        require(t >= -1e-12 * horizon() && t <= horizon() * (1.0 + 1e-12), ErrorKind::invalid_argument,
                "path evaluated outside [0, horizon]");
        if (t <= 0.0) return positions.front();
        const double s = t / dt;
        auto k = static_cast<std::size_t>(std::floor(s));
        if (k >= steps()) return positions.back();
        const double w = s - static_cast<double>(k);
        return (1.0 - w) * positions[k] + w * positions[k + 1];
    }
};

namespace detail {

inline void check_lattice(std::size_t steps, double horizon, int dim) {
    require(steps >= 1, ErrorKind::invalid_argument, "path needs at least one step");
    require(std::isfinite(horizon) && horizon > 0.0, ErrorKind::invalid_argument, "path horizon must be positive");
    require(dim >= 1 && dim <= 3, ErrorKind::invalid_argument, "path dimension must be 1, 2 or 3");
}

}  // namespace detail

inline PathSample zero_path(std::size_t steps, double horizon, int dim) {
    detail::check_lattice(steps, horizon, dim);
    PathSample p;
    p.dim = dim;
    p.dt = horizon / static_cast<double>(steps);
    p.positions.assign(steps + 1, Vec{0.0, 0.0, 0.0});
    p.kind = PathKind::zero;
    return p;
}

/// Standard Brownian motion: independent N(0, dt) increments per coordinate.
inline PathSample sample_brownian(std::uint64_t seed, std::size_t steps, double horizon, int dim) {
    detail::check_lattice(steps, horizon, dim);
    PathSample p = zero_path(steps, horizon, dim);
    p.kind = PathKind::brownian;
    p.seed = seed;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(p.dt));
    for (std::size_t k = 1; k <= steps; ++k) {
        Vec x = p.positions[k - 1];
        for (int a = 0; a < dim; ++a) x[a] += normal(rng);
        p.positions[k] = x;
    }
    return p;
}

/**
 * Exact fractional Brownian motion on a fixed lattice via the Cholesky factor
 * of Cov(t_i, t_j) = (t_i^{2H} + t_j^{2H} - |t_i - t_j|^{2H}) / 2.
 * The factor is computed once; `sample` is then O(M^2) per coordinate.
 */
class FbmSampler {
public:
    static constexpr std::size_t default_max_steps = 4096;

    FbmSampler(std::size_t steps, double horizon, double hurst, std::size_t max_steps = default_max_steps)
        : steps_(steps), horizon_(horizon), hurst_(hurst) {
        detail::check_lattice(steps, horizon, 1);
        require(hurst > 0.0 && hurst < 1.0, ErrorKind::invalid_argument, "Hurst exponent must lie in (0, 1)");
        require(steps <= max_steps, ErrorKind::resource,
                "fBM with " + std::to_string(steps) + " steps exceeds the dense Cholesky cap of " +
                    std::to_string(max_steps));
        const auto m = static_cast<Eigen::Index>(steps);
        const double dt = horizon / static_cast<double>(steps);
        Eigen::MatrixXd cov(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double ti = dt * static_cast<double>(i + 1);
            for (Eigen::Index j = 0; j <= i; ++j) {
                const double tj = dt * static_cast<double>(j + 1);
                const double c = 0.5 * (std::pow(ti, 2 * hurst) + std::pow(tj, 2 * hurst) -
                                        std::pow(std::abs(ti - tj), 2 * hurst));
                cov(i, j) = c;
                cov(j, i) = c;
            }
        }
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        require(llt.info() == Eigen::Success, ErrorKind::resource, "fBM covariance is not numerically positive definite");
        factor_ = llt.matrixL();
    }

    PathSample sample(std::uint64_t seed, int dim) const {
        PathSample p = zero_path(steps_, horizon_, dim);
        p.kind = PathKind::fbm;
        p.hurst = hurst_;
        p.seed = seed;
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        const auto m = static_cast<Eigen::Index>(steps_);
        for (int a = 0; a < dim; ++a) {
            Eigen::VectorXd z(m);
            for (Eigen::Index i = 0; i < m; ++i) z(i) = normal(rng);
            const Eigen::VectorXd x = factor_.triangularView<Eigen::Lower>() * z;
            for (Eigen::Index i = 0; i < m; ++i) p.positions[static_cast<std::size_t>(i + 1)][a] = x(i);
        }
        return p;
    }

private:
    std::size_t steps_;
    double horizon_;
    double hurst_;
    Eigen::MatrixXd factor_;
};

inline PathSample sample_fbm(std::uint64_t seed, std::size_t steps, double horizon, int dim, double hurst) {
    return FbmSampler(steps, horizon, hurst).sample(seed, dim);
}

/// Continuous path, affine with velocity velocities[j] on the j-th of n equal
/// pieces of [0, horizon]; each piece spans `steps_per_piece` lattice steps.
inline PathSample make_piecewise_linear(const std::vector<Vec>& velocities, int dim, std::size_t steps_per_piece,
                                        double horizon = 1.0) {
    require(!velocities.empty(), ErrorKind::invalid_argument, "piecewise-linear path needs at least one velocity");
    require(steps_per_piece >= 1, ErrorKind::invalid_argument, "steps_per_piece must be >= 1");
    const std::size_t n = velocities.size();
    PathSample p = zero_path(n * steps_per_piece, horizon, dim);
    p.kind = PathKind::piecewise_linear;
    p.velocities = velocities;
    for (std::size_t k = 1; k < p.positions.size(); ++k) {
        const std::size_t piece = (k - 1) / steps_per_piece;
        p.positions[k] = p.positions[k - 1] + p.dt * velocities[piece];
        for (int a = dim; a < 3; ++a) p.positions[k][a] = 0.0;
    }
    // Recompute breakpoints exactly so each piece is affine to roundoff.
    Vec start{0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t s = 0; s <= steps_per_piece; ++s) {
            p.positions[j * steps_per_piece + s] = start + (p.dt * static_cast<double>(s)) * velocities[j];
        }
        start = p.positions[(j + 1) * steps_per_piece];
    }
    return p;
}

/// Velocities along the first axis with pairwise separation n^2 + 1 > n^2,
/// centered so that their sum vanishes.
inline std::vector<Vec> separated_velocities(std::size_t n) {
    std::vector<Vec> v(n, Vec{0.0, 0.0, 0.0});
    const double gap = static_cast<double>(n * n) + 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        v[j][0] = gap * (static_cast<double>(j) - 0.5 * static_cast<double>(n - 1));
    }
    return v;
}

/**
 * Lower-bound estimate of K(gamma, eps, r): the largest time a window of
 * length eps spends within distance r of a straight line y0 + v t.
 *
 * The sup over (y0, v) is replaced by a finite candidate family per window:
 * every line through two sampled points of the window plus the least-squares
 * line of every sub-window. Time is measured by the trapezoidal rule on the
 * hit indicator. The family contains the sub-window candidates of every
 * shorter window, so the estimate is monotone in eps as well as in r, and it
 * is exact for affine paths.
 */
inline double concentration_K(const PathSample& path, double eps, double r) {
    require(r > 0.0, ErrorKind::invalid_argument, "concentration_K: radius must be positive");
    require(eps >= 2.0 * path.dt * (1.0 - 1e-12), ErrorKind::invalid_argument,
            "concentration_K: eps smaller than two lattice steps");
    require(eps <= path.horizon() * (1.0 + 1e-12), ErrorKind::invalid_argument,
            "concentration_K: eps exceeds the path horizon");
    const std::size_t width = static_cast<std::size_t>(std::floor(eps / path.dt + 1e-9));
    const std::size_t m = path.steps();
    const int d = path.dim;
    const auto& g = path.positions;

    // Prefix sums for least-squares lines.
    std::vector<double> st(m + 2, 0.0), stt(m + 2, 0.0);
    std::vector<Vec> sg(m + 2, Vec{0, 0, 0}), stg(m + 2, Vec{0, 0, 0});
    for (std::size_t k = 0; k <= m; ++k) {
        const double t = path.time(k);
        st[k + 1] = st[k] + t;
        stt[k + 1] = stt[k] + t * t;
        sg[k + 1] = sg[k] + g[k];
        stg[k + 1] = stg[k] + t * g[k];
    }

    const double r_tol = r * (1.0 + 1e-12) + 1e-13;
    std::vector<char> hit(width + 1);
    double best = 0.0;
    const double full = static_cast<double>(width) * path.dt;

    auto measure = [&](std::size_t a, const Vec& base, double t_base, const Vec& v) {
        for (std::size_t k = 0; k <= width; ++k) {
            const double t = path.time(a + k);
            double dist2 = 0.0;
            for (int c = 0; c < d; ++c) {
                const double diff = g[a + k][c] - (base[c] + v[c] * (t - t_base));
                dist2 += diff * diff;
            }
            hit[k] = dist2 <= r_tol * r_tol;
        }
        double acc = 0.0;
        for (std::size_t k = 0; k < width; ++k) acc += 0.5 * path.dt * (hit[k] + hit[k + 1]);
        return acc;
    };

    for (std::size_t a = 0; a + width <= m; ++a) {
        for (std::size_t i = a; i <= a + width && best < full; ++i) {
            for (std::size_t j = i + 1; j <= a + width && best < full; ++j) {
                const double span = path.time(j) - path.time(i);
                // Line through the two samples.
                Vec v{0, 0, 0};
                for (int c = 0; c < d; ++c) v[c] = (g[j][c] - g[i][c]) / span;
                best = std::max(best, measure(a, g[i], path.time(i), v));
                // Least-squares line of the sub-window [i, j] (>= 3 nodes).
                if (j >= i + 2) {
                    const double cnt = static_cast<double>(j - i + 1);
                    const double mt = (st[j + 1] - st[i]) / cnt;
                    const double var = (stt[j + 1] - stt[i]) / cnt - mt * mt;
                    Vec ls_v{0, 0, 0}, ls_mean{0, 0, 0};
                    for (int c = 0; c < d; ++c) {
                        ls_mean[c] = (sg[j + 1][c] - sg[i][c]) / cnt;
                        ls_v[c] = ((stg[j + 1][c] - stg[i][c]) / cnt - mt * ls_mean[c]) / var;
                    }
                    best = std::max(best, measure(a, ls_mean, mt, ls_v));
                }
            }
        }
        if (best >= full) break;
    }
    return best;
}

/**
 * Riemann-sum proxy for the energy of the occupation measure of the graph
 * (t, gamma(t)), t in [0, 1):
 *
 *   sum_{i != j} dt^2 / |(t_i, gamma_i) - (t_j, gamma_j)|^beta
 *
 * over the left-endpoint nodes t_k = k dt < 1.
 */
inline double local_time_energy(const PathSample& path, double beta) {
    require(beta > 0.0, ErrorKind::invalid_argument, "local_time_energy: beta must be positive");
    const auto nodes = static_cast<std::size_t>(std::llround(1.0 / path.dt));
    require(nodes >= 2 && nodes <= path.steps(), ErrorKind::invalid_argument,
            "local_time_energy: path must cover the unit time window");
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes; ++i) {
        for (std::size_t j = i + 1; j < nodes; ++j) {
            const double dt = path.time(j) - path.time(i);
            const Vec dg = path.positions[j] - path.positions[i];
            const double dist2 = dt * dt + dot(dg, dg);
            acc += std::pow(dist2, -0.5 * beta);
        }
    }
    return 2.0 * acc * path.dt * path.dt;
}

/// CSV with header "t,x1,...,xd", preceded by one '#' metadata line.
inline void write_path_csv(const PathSample& path, const std::string& filename) {
    std::ofstream out(filename);
    require(static_cast<bool>(out), ErrorKind::io, "cannot open '" + filename + "' for writing");
    out << "# kind=" << to_string(path.kind) << " seed=" << path.seed << " hurst=" << path.hurst
        << " alpha=" << path.alpha << "\n";
    out << "t";
    for (int a = 0; a < path.dim; ++a) out << ",x" << (a + 1);
    out << "\n" << std::setprecision(17);
    for (std::size_t k = 0; k < path.positions.size(); ++k) {
        out << path.time(k);
        for (int a = 0; a < path.dim; ++a) out << "," << path.positions[k][a];
        out << "\n";
    }
}

inline PathSample read_path_csv(const std::string& filename) {
    std::ifstream in(filename);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open '" + filename + "'");
    PathSample p;
    std::string line;
    std::vector<double> times;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream meta(line.substr(1));
            std::string token;
            while (meta >> token) {
                const auto eq = token.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = token.substr(0, eq), value = token.substr(eq + 1);
                if (key == "kind") p.kind = path_kind_from_string(value);
                if (key == "seed") p.seed = std::stoull(value);
                if (key == "hurst") p.hurst = std::stod(value);
                if (key == "alpha") p.alpha = std::stod(value);
            }
            continue;
        }
        if (!header_seen) {
            p.dim = static_cast<int>(std::count(line.begin(), line.end(), ','));
            require(p.dim >= 1 && p.dim <= 3, ErrorKind::io, "path CSV must have 2 to 4 columns");
            header_seen = true;
            continue;
        }
        std::istringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');
        times.push_back(std::stod(cell));
        Vec x{0, 0, 0};
        for (int a = 0; a < p.dim; ++a) {
            require(static_cast<bool>(std::getline(row, cell, ',')), ErrorKind::io, "short row in path CSV");
            x[a] = std::stod(cell);
        }
        p.positions.push_back(x);
    }
    require(times.size() >= 2, ErrorKind::io, "path CSV needs at least two rows");
    p.dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    for (std::size_t k = 0; k < times.size(); ++k) {
        require(std::abs(times[k] - p.time(k)) <= 1e-9 * std::max(1.0, times.back()), ErrorKind::io,
                "path CSV times are not a uniform lattice starting at 0");
    }
    return p;
}

}  // namespace stochdisp
