#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "stochdisp/error.hpp"
#include "stochdisp/evolve.hpp"
#include "stochdisp/grid.hpp"
#include "stochdisp/paths.hpp"
#include "stochdisp/potentials.hpp"
#include "stochdisp/seeding.hpp"

namespace stochdisp {

inline constexpr int default_born_order_cap = 4;

/**
 * n-th Duhamel term of i dZ/dt = (-Delta + V(x - alpha gamma(t))) Z:
 *
 *   B_0(t) = e^{it Delta} Z0,
 *   B_n(t) = -i int_0^t e^{i(t-s) Delta} V(x - alpha gamma(s)) B_{n-1}(s) ds,
 *
 * with the left-endpoint rule on t_m = m dt, accumulated recursively so each
 * order costs O(M) transforms. Returns B_n at t_0..t_M.
 */
inline SpaceTimeField born_term(int n, const ComplexField& z0, const Potential& pot, const PathSample& path,
                                double alpha, double dt, double horizon, int order_cap = default_born_order_cap) {
    require(n >= 0, ErrorKind::invalid_argument, "born_term: order must be non-negative");
    require(n <= order_cap, ErrorKind::resource,
            "born_term: order " + std::to_string(n) + " exceeds the cap " + std::to_string(order_cap));
    require(dt > 0.0 && horizon > 0.0, ErrorKind::invalid_argument, "born_term: dt and T must be positive");
    require(horizon <= path.horizon() * (1.0 + 1e-12), ErrorKind::invalid_argument,
            "born_term: T exceeds the path horizon");
    require(z0.grid == pot.grid(), ErrorKind::grid_mismatch, "born_term: grids differ");

    const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    const double h = horizon / static_cast<double>(steps);
    const Grid& g = z0.grid;
    const auto k2 = g.frequency_squared();
    auto step = [&](const ComplexField& f) {
        return apply_fourier_multiplier(f, [&](std::size_t i) { return std::polar(1.0, -k2[i] * h); });
    };

    SpaceTimeField term(g, h);
    term.push_back(z0);
    for (std::size_t m = 1; m <= steps; ++m) term.push_back(step(term[m - 1]));
    if (n == 0) return term;

    std::vector<RealField> potentials;
    potentials.reserve(steps);
    for (std::size_t m = 0; m < steps; ++m) {
        potentials.push_back(pot.sample_shifted(alpha * path.at(static_cast<double>(m) * h)));
    }
    for (int order = 1; order <= n; ++order) {
        SpaceTimeField next(g, h);
        ComplexField acc(g);
        next.push_back(acc);
        for (std::size_t m = 1; m <= steps; ++m) {
            const ComplexField& prev = term[m - 1];
            const RealField& v = potentials[m - 1];
            for (std::size_t i = 0; i < acc.size(); ++i) acc.values[i] += complex(0.0, -h) * v.values[i] * prev.values[i];
            acc = step(acc);
            next.push_back(acc);
        }
        term = std::move(next);
    }
    return term;
}

/**
 * Monte Carlo check of E |V|(x - alpha B_s) = e^{tau Delta}|V| with
 * tau = alpha^2 s / 2 (B has per-coordinate variance s, generator Delta/2).
 * Endpoints B_s ~ N(0, s I) are drawn from `seed`; the translates are averaged
 * on the Fourier side. Returns ||MC - heat||_2 / ||heat||_2.
 */
inline double heat_smoothing_check(const Potential& pot, double alpha, double s, std::size_t n_paths,
                                   std::uint64_t seed) {
    require(s > 0.0, ErrorKind::invalid_argument, "heat_smoothing_check: s must be positive");
    require(n_paths >= 1, ErrorKind::invalid_argument, "heat_smoothing_check: need at least one path");
    const Grid& g = pot.grid();
    const RealField absv = modulus(pot.field());
    const RealField target = heat_propagate(absv, 0.5 * alpha * alpha * s);
    const double target_norm = l2_norm(target);
    if (target_norm == 0.0) return 0.0;

    const std::size_t n = g.points_per_axis();
    const int d = g.dim();
    std::vector<complex> mean_phase(g.size(), complex(0.0, 0.0));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(s));
    std::array<std::vector<complex>, 3> axis_phase;
    for (auto& a : axis_phase) a.resize(n);
    for (std::size_t p = 0; p < n_paths; ++p) {
        for (int a = 0; a < d; ++a) {
            const double shift = alpha * normal(rng);
            // e^{-i xi shift} for every lattice wavenumber on this axis.
            for (std::size_t j = 0; j < n; ++j) axis_phase[a][j] = std::polar(1.0, -g.axis_wavenumber(j) * shift);
        }
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto idx = g.unflatten(i);
            complex ph = axis_phase[0][idx[0]];
            for (int a = 1; a < d; ++a) ph *= axis_phase[a][idx[a]];
            mean_phase[i] += ph;
        }
    }
    const double inv = 1.0 / static_cast<double>(n_paths);
    const RealField estimate = apply_fourier_multiplier(absv, [&](std::size_t i) { return mean_phase[i] * inv; });
    return l2_norm(estimate - target) / target_norm;
}

/**
 * Discretized sesquilinear kernel W(xi1, xi2) on a 1D frequency lattice. The
 * associated form is
 *
 *   W(f, g) = L sum_{xi1, xi2} W(xi1, xi2) f^(xi1) conj(g^(xi2))
 *
 * with f^ the Fourier-series coefficients of f. Rows and columns are in FFT
 * slot order.
 */
struct SymbolMatrix {
    Grid grid;
    double alpha = 0.0;
    double time_cutoff = 1.0;
    std::vector<complex> entries;  // row-major, size N * N

    SymbolMatrix(const Grid& g, double a, double t_cut)
        : grid(g), alpha(a), time_cutoff(t_cut), entries(g.size() * g.size()) {
        require(g.dim() == 1, ErrorKind::invalid_argument, "symbol matrices are one-dimensional");
        require(t_cut > 0.0, ErrorKind::invalid_argument, "symbol time cutoff must be positive");
    }

    std::size_t size() const noexcept { return grid.size(); }
    complex& operator()(std::size_t i, std::size_t j) { return entries[i * size() + j]; }
    const complex& operator()(std::size_t i, std::size_t j) const { return entries[i * size() + j]; }

    void check_compatible(const SymbolMatrix& other) const {
        require(grid == other.grid, ErrorKind::grid_mismatch, "symbols live on different grids");
    }

    /// Kernel of the identity form delta_{xi1 = xi2}.
    static SymbolMatrix identity(const Grid& g, double alpha, double t_cut) {
        SymbolMatrix w(g, alpha, t_cut);
        for (std::size_t i = 0; i < g.size(); ++i) w(i, i) = 1.0;
        return w;
    }
};

/// Fourier-series coefficients c(xi) = (1/L) int f e^{-i xi x} dx (rectangle rule), FFT slot order.
template <typename T>
std::vector<complex> fourier_coefficients(const Field<T>& f) {
    auto data = spectrum(f);
    const Grid& g = f.grid;
    const double scale = 1.0 / static_cast<double>(g.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        // Grid nodes start at -L/2: e^{-i xi x_j} = e^{-2 pi i j k / N} e^{i xi L / 2}.
        double sign = 1.0;
        const auto idx = g.unflatten(i);
        for (int a = 0; a < g.dim(); ++a) {
            if (g.signed_index(idx[a]) % 2 != 0) sign = -sign;
        }
        data[i] *= sign * scale;
    }
    return data;
}

namespace detail {

/// (1 - e^{-T D}) / D with the removable value T at D = 0.
inline complex truncated_resolvent(complex d, double t_cut) {
    const complex z = t_cut * d;
    if (std::abs(z) < 1e-4) {
        // Series of (1 - e^{-z}) / z = 1 - z/2 + z^2/6 - z^3/24.
        return t_cut * (1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0);
    }
    return (1.0 - std::exp(-z)) / d;
}

inline complex symbol_denominator(const Grid& g, double alpha, std::size_t i, std::size_t j) {
    const double k1 = g.axis_wavenumber(i), k2 = g.axis_wavenumber(j);
    const double dk = k1 - k2;
    return complex(alpha * alpha * dk * dk, -(k1 * k1 - k2 * k2));
}

inline std::size_t slot_difference(std::size_t a, std::size_t b, std::size_t n) { return (a + n - b) % n; }

}  // namespace detail

/// W(xi1, xi2) = |V|^(xi2 - xi1) (1 - e^{-T_cut D}) / D, D = alpha^2 |xi1 - xi2|^2 - i (|xi1|^2 - |xi2|^2).
inline SymbolMatrix w_symbol(const RealField& v, double alpha, double t_cut) {
    SymbolMatrix w(v.grid, alpha, t_cut);
    const auto vhat = fourier_coefficients(modulus(v));
    const std::size_t n = w.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            w(i, j) = vhat[detail::slot_difference(j, i, n)] *
                      detail::truncated_resolvent(detail::symbol_denominator(v.grid, alpha, i, j), t_cut);
        }
    }
    return w;
}

inline SymbolMatrix w_symbol(const Potential& pot, double alpha, double t_cut) {
    return w_symbol(pot.field(), alpha, t_cut);
}

/// (L_V W)(xi1, xi2) = sum_eta W(xi1 + eta, xi2) V^(eta) * (1 - e^{-T D}) / D  (circular in eta).
inline SymbolMatrix apply_LV(const SymbolMatrix& w, const RealField& v, double alpha) {
    require(v.grid == w.grid, ErrorKind::grid_mismatch, "apply_LV: potential and symbol grids differ");
    const auto vhat = fourier_coefficients(v);
    const std::size_t n = w.size();
    SymbolMatrix out(w.grid, alpha, w.time_cutoff);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            complex acc{0.0, 0.0};
            for (std::size_t e = 0; e < n; ++e) acc += w((i + e) % n, j) * vhat[e];
            out(i, j) = acc * detail::truncated_resolvent(detail::symbol_denominator(w.grid, alpha, i, j), w.time_cutoff);
        }
    }
    return out;
}

/// (R_V W)(xi1, xi2) = sum_eta W(xi1, xi2 + eta) conj(V^(eta)) * (1 - e^{-T D}) / D.
inline SymbolMatrix apply_RV(const SymbolMatrix& w, const RealField& v, double alpha) {
    require(v.grid == w.grid, ErrorKind::grid_mismatch, "apply_RV: potential and symbol grids differ");
    const auto vhat = fourier_coefficients(v);
    const std::size_t n = w.size();
    SymbolMatrix out(w.grid, alpha, w.time_cutoff);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            complex acc{0.0, 0.0};
            for (std::size_t e = 0; e < n; ++e) acc += w(i, (j + e) % n) * std::conj(vhat[e]);
            out(i, j) = acc * detail::truncated_resolvent(detail::symbol_denominator(w.grid, alpha, i, j), w.time_cutoff);
        }
    }
    return out;
}

/// W(f, g) = L sum W(xi1, xi2) f^(xi1) conj(g^(xi2)).
inline complex symbol_form(const SymbolMatrix& w, const ComplexField& f, const ComplexField& g) {
    require(f.grid == w.grid && g.grid == w.grid, ErrorKind::grid_mismatch, "symbol_form: grids differ");
    const auto fh = fourier_coefficients(f);
    const auto gh = fourier_coefficients(g);
    complex acc{0.0, 0.0};
    const std::size_t n = w.size();
    for (std::size_t i = 0; i < n; ++i) {
        complex row{0.0, 0.0};
        for (std::size_t j = 0; j < n; ++j) row += w(i, j) * std::conj(gh[j]);
        acc += fh[i] * row;
    }
    return acc * w.grid.box_length();
}

/// Words over {L, R} of length 2(n - 2) with n - 2 of each letter, lexicographic.
inline std::vector<std::string> enumerate_words(int n) {
    require(n >= 2, ErrorKind::invalid_argument, "enumerate_words: order must be >= 2");
    const int k = n - 2;
    std::string word(static_cast<std::size_t>(k), 'L');
    word.append(static_cast<std::size_t>(k), 'R');
    std::vector<std::string> out;
    do {
        out.push_back(word);
    } while (std::next_permutation(word.begin(), word.end()));
    return out;
}

/// Composition: the rightmost letter acts first, so "LR" is L_V(R_V(W)).
inline SymbolMatrix apply_word(const std::string& word, const SymbolMatrix& w, const RealField& v, double alpha) {
    SymbolMatrix out = w;
    for (auto it = word.rbegin(); it != word.rend(); ++it) {
        require(*it == 'L' || *it == 'R', ErrorKind::invalid_argument, "words use the letters L and R only");
        out = *it == 'L' ? apply_LV(out, v, alpha) : apply_RV(out, v, alpha);
    }
    return out;
}

/// Binary export: 8-byte magic, int32 dim, int32 N, then L, alpha, T_cut and N^2 complex entries (doubles).
inline void write_symbol(const SymbolMatrix& w, const std::string& filename) {
    std::ofstream out(filename, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::io, "cannot open '" + filename + "' for writing");
    const char magic[8] = {'S', 'D', 'S', 'Y', 'M', '1', 0, 0};
    const std::int32_t dims[2] = {w.grid.dim(), static_cast<std::int32_t>(w.grid.points_per_axis())};
    const double header[3] = {w.grid.box_length(), w.alpha, w.time_cutoff};
    out.write(magic, sizeof magic);
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    out.write(reinterpret_cast<const char*>(w.entries.data()),
              static_cast<std::streamsize>(w.entries.size() * sizeof(complex)));
}

inline SymbolMatrix read_symbol(const std::string& filename) {
    std::ifstream in(filename, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open '" + filename + "'");
    char magic[8];
    std::int32_t dims[2];
    double header[3];
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(dims), sizeof dims);
    in.read(reinterpret_cast<char*>(header), sizeof header);
    require(in && std::memcmp(magic, "SDSYM1", 6) == 0, ErrorKind::io, "'" + filename + "' is not a symbol file");
    SymbolMatrix w(Grid(dims[0], static_cast<std::size_t>(dims[1]), header[0]), header[1], header[2]);
    in.read(reinterpret_cast<char*>(w.entries.data()), static_cast<std::streamsize>(w.entries.size() * sizeof(complex)));
    require(static_cast<bool>(in), ErrorKind::io, "symbol file '" + filename + "' is truncated");
    return w;
}

struct SeriesMajorant {
    std::vector<double> terms;  // n = 1..count: (4C)^n alpha^{-4n} v^{2n}
    double ratio = 0.0;         // 4 C alpha^{-4} v^2
    double sum = 0.0;           // r / (1 - r), infinite when r >= 1
    double threshold = 0.0;     // (4C)^{1/4} v^{1/2}
    bool divergent = false;     // alpha <= threshold
};

/// Geometric majorant of the Born series for ||Z0||_2 = 1, with caller-supplied C.
inline SeriesMajorant series_majorant(int count, double alpha, double v_norm, double c) {
    require(alpha > 0.0, ErrorKind::invalid_argument, "series_majorant: alpha must be positive");
    require(count >= 1 && c > 0.0 && v_norm >= 0.0, ErrorKind::invalid_argument, "series_majorant: bad arguments");
    SeriesMajorant out;
    out.ratio = 4.0 * c * std::pow(alpha, -4.0) * v_norm * v_norm;
    double term = 1.0;
    for (int n = 1; n <= count; ++n) {
        term *= out.ratio;
        out.terms.push_back(term);
    }
    out.threshold = std::pow(4.0 * c, 0.25) * std::sqrt(v_norm);
    out.divergent = v_norm > 0.0 && alpha <= out.threshold;
    out.sum = out.ratio < 1.0 ? out.ratio / (1.0 - out.ratio) : std::numeric_limits<double>::infinity();
    return out;
}

struct SeriesBoundEstimate {
    double estimate = 0.0;        // MC mean of ||V1(x - alpha B_t) Z||^2_{L^2_{t,x}}
    double standard_error = 0.0;
    double fitted_c = 0.0;        // C for which the majorant sum equals the estimate
    SeriesMajorant majorant;      // evaluated with fitted_c
    bool dominated = false;       // estimate <= majorant sum (with the fitted C)
};

/**
 * MC estimate of E ||V1(x - alpha B_t) Z(t)||^2 over [0, T] with Z the full
 * solution, and the constant C that makes the geometric majorant
 * sum_n (4C)^n alpha^{-4n} v^{2n} ||Z0||^2 equal to it, v = ||V||_{L^{3/2,1}}.
 */
inline SeriesBoundEstimate mc_series_bound(const Potential& pot, double alpha, const ComplexField& z0,
                                           std::size_t n_paths, double dt, double horizon, std::uint64_t seed) {
    require(alpha > 0.0, ErrorKind::invalid_argument, "mc_series_bound: alpha must be positive");
    require(n_paths >= 2, ErrorKind::invalid_argument, "mc_series_bound: need at least two paths");
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    std::vector<double> samples;
    for (std::size_t p = 0; p < n_paths; ++p) {
        const PathSample path = sample_brownian(derive_seed(seed, 0, p), steps, horizon, pot.grid().dim());
        const Trajectory traj = evolve(z0, pot, path, alpha, dt, horizon);
        const auto w = trapezoid_weights(traj.size(), traj.field.dt);
        double acc = 0.0;
        for (std::size_t m = 0; m < traj.size(); ++m) {
            const RealField v = traj.potential.sample_shifted(traj.shift(m));
            double local = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) local += std::abs(v.values[i]) * std::norm(traj[m].values[i]);
            acc += w[m] * local * pot.grid().cell_volume();
        }
        samples.push_back(acc);
    }
    SeriesBoundEstimate out;
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= static_cast<double>(samples.size() - 1);
    out.estimate = mean;
    out.standard_error = std::sqrt(var / static_cast<double>(samples.size()));

    const double z_mass = mass(z0);
    const double v_norm = pot.norms().l32_1;
    const double q = z_mass > 0.0 ? mean / z_mass : 0.0;
    if (v_norm > 0.0 && q > 0.0) {
        const double r = q / (1.0 + q);
        out.fitted_c = r * std::pow(alpha, 4.0) / (4.0 * v_norm * v_norm);
        out.majorant = series_majorant(8, alpha, v_norm, out.fitted_c);
        out.dominated = mean <= out.majorant.sum * z_mass * (1.0 + 1e-12);
    } else {
        out.dominated = true;
    }
    return out;
}

}  // namespace stochdisp
