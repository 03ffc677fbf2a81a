#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <string>
#include <vector>

#include "stochdisp/error.hpp"
#include "stochdisp/grid.hpp"
#include "stochdisp/norms.hpp"
#include "stochdisp/paths.hpp"
#include "stochdisp/potentials.hpp"
#include "stochdisp/pseudoconformal.hpp"

namespace stochdisp {

struct EvolveOptions {
    std::size_t record_stride = 1;  // keep every stride-th node (t = 0 and t = T always kept)
};

/**
 * Solution of i dZ/dt = (-Delta + V(x - alpha gamma(t))) Z on [0, T], stored
 * at the recorded nodes. `field.dt` is the spacing of recorded nodes.
 */
struct Trajectory {
    SpaceTimeField field;
    Potential potential;
    PathSample path;
    double alpha = 0.0;
    double dt = 0.0;  // solver step
    double horizon = 0.0;
    std::size_t stride = 1;

    std::size_t size() const noexcept { return field.size(); }
    double time(std::size_t m) const noexcept { return field.time(m); }
    const ComplexField& operator[](std::size_t m) const { return field[m]; }

    /// Potential center displacement alpha * gamma(t_m).
    Vec shift(std::size_t m) const { return alpha * path.at(std::min(time(m), path.horizon())); }
};

/**
 * Strang splitting: half potential phase, exact kinetic step, half potential
 * phase, with the path evaluated at the step midpoint (linear interpolation
 * between path nodes). The step count is ceil(T / dt); the step actually used
 * is T / steps.
 */
inline Trajectory evolve(const ComplexField& z0, const Potential& pot, const PathSample& path, double alpha,
                         double dt, double horizon, const EvolveOptions& opts = {}) {
    require(std::isfinite(dt) && dt > 0.0, ErrorKind::invalid_argument, "evolve: dt must be positive");
    require(std::isfinite(horizon) && horizon > 0.0, ErrorKind::invalid_argument, "evolve: T must be positive");
    require(horizon <= path.horizon() * (1.0 + 1e-12), ErrorKind::invalid_argument,
            "evolve: T exceeds the path horizon");
    require(std::isfinite(alpha), ErrorKind::invalid_argument, "evolve: alpha must be finite");
    require(z0.grid == pot.grid(), ErrorKind::grid_mismatch, "evolve: initial data and potential grids differ");
    require(opts.record_stride >= 1, ErrorKind::invalid_argument, "evolve: record_stride must be >= 1");
    require(path.dim == z0.grid.dim(), ErrorKind::invalid_argument, "evolve: path and grid dimensions differ");

    const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    const double h = horizon / static_cast<double>(steps);
    const Grid& g = z0.grid;
    const auto k2 = g.frequency_squared();
    std::vector<complex> kinetic(k2.size());
    for (std::size_t i = 0; i < k2.size(); ++i) kinetic[i] = std::polar(1.0, -k2[i] * h);

    // Keep the last node on the record lattice; if stride does not divide steps the
    // recorded spacing is adjusted to the nearest divisor below.
    std::size_t stride = std::min(opts.record_stride, steps);
    while (steps % stride != 0) --stride;

    Trajectory traj{SpaceTimeField(g, h * static_cast<double>(stride)), pot, path, alpha, h, horizon, stride};
    ComplexField z = z0;
    traj.field.push_back(z);
    std::vector<complex> phase(g.size());
    for (std::size_t s = 0; s < steps; ++s) {
        if (!pot.is_zero()) {
            const RealField v = pot.sample_shifted(alpha * path.at((static_cast<double>(s) + 0.5) * h));
            for (std::size_t i = 0; i < phase.size(); ++i) phase[i] = std::polar(1.0, -0.5 * h * v.values[i]);
            for (std::size_t i = 0; i < phase.size(); ++i) z.values[i] *= phase[i];
        }
        z = apply_fourier_multiplier(z, [&](std::size_t i) { return kinetic[i]; });
        if (!pot.is_zero()) {
            for (std::size_t i = 0; i < phase.size(); ++i) z.values[i] *= phase[i];
        }
        if ((s + 1) % stride == 0) traj.field.push_back(z);
    }
    return traj;
}

inline double mass(const ComplexField& z) {
    const double n = l2_norm(z);
    return n * n;
}

/// Largest |M(t_m) - M(0)| / M(0) over recorded nodes.
inline double max_relative_mass_drift(const Trajectory& traj) {
    const double m0 = mass(traj[0]);
    double worst = 0.0;
    for (std::size_t m = 0; m < traj.size(); ++m) worst = std::max(worst, std::abs(mass(traj[m]) - m0));
    return m0 > 0.0 ? worst / m0 : worst;
}

/// E(t_m) = int |grad Z|^2 + V(x - alpha gamma(t_m)) |Z|^2 dx.
inline double energy(const Trajectory& traj, std::size_t m) {
    require(m < traj.size(), ErrorKind::invalid_argument, "energy: time index out of range");
    const ComplexField& z = traj[m];
    double e = gradient_energy(z);
    if (!traj.potential.is_zero()) {
        const RealField v = traj.potential.sample_shifted(traj.shift(m));
        double acc = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) acc += v.values[i] * std::norm(z.values[i]);
        e += acc * z.grid.cell_volume();
    }
    return e;
}

/// Largest |E(t_m) - E(0)| over recorded nodes.
inline double max_energy_drift(const Trajectory& traj) {
    const double e0 = energy(traj, 0);
    double worst = 0.0;
    for (std::size_t m = 1; m < traj.size(); ++m) worst = std::max(worst, std::abs(energy(traj, m) - e0));
    return worst;
}

/// int chi_R(x - x0 - v t_m) |Z(t_m, x)|^2 dx, chi_R the smooth cutoff of radius R (periodic distance).
inline double cylinder_mass(const Trajectory& traj, const Vec& x0, const Vec& v, double radius, std::size_t m) {
    require(m < traj.size(), ErrorKind::invalid_argument, "cylinder_mass: time index out of range");
    const ComplexField& z = traj[m];
    const RealField chi = smooth_cutoff(z.grid, x0 + traj.time(m) * v, radius);
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) acc += chi.values[i] * std::norm(z.values[i]);
    return acc * z.grid.cell_volume();
}

/// |<phi(. - alpha gamma(t_m)), Z(t_m)>|, phi translated spectrally (periodically).
inline double ground_overlap(const Trajectory& traj, const ComplexField& phi, std::size_t m) {
    require(m < traj.size(), ErrorKind::invalid_argument, "ground_overlap: time index out of range");
    const Vec s = traj.shift(m);
    return std::abs(inner(translate(phi, Vec{-s[0], -s[1], -s[2]}), traj[m]));
}

/// (1/T) int_0^T ||Z(t)||_{L^{6,2}}^2 dt, trapezoidal over recorded nodes with t <= T.
inline double rage_statistic(const Trajectory& traj, double horizon) {
    require(horizon > 0.0 && horizon <= traj.field.horizon() * (1.0 + 1e-12), ErrorKind::invalid_argument,
            "rage_statistic: T must lie in (0, trajectory horizon]");
    const auto count = static_cast<std::size_t>(std::llround(horizon / traj.field.dt)) + 1;
    const auto w = trapezoid_weights(count, traj.field.dt);
    double acc = 0.0;
    for (std::size_t m = 0; m < count; ++m) {
        const double l62 = lorentz_norm(traj[m], 6.0, 2.0);
        acc += w[m] * l62 * l62;
    }
    return acc / horizon;
}

/// Strichartz norms of Z(t_m) - e^{i t_m Delta} Z0.
inline StrichartzNorms strichartz_deviation(const Trajectory& traj, const ComplexField& z0) {
    SpaceTimeField diff(traj.field.grid, traj.field.dt);
    for (std::size_t m = 0; m < traj.size(); ++m) diff.push_back(traj[m] - free_propagate(z0, traj.time(m)));
    return strichartz_norms(diff);
}

struct WaveOperatorEstimate {
    ComplexField w;                   // e^{-i t_M Delta} Z(t_M)
    std::vector<double> cauchy_tail;  // d_k = ||W_k - W_{k-1}||_2, k = 1..M
    double tail_sum = 0.0;            // sum of d_k over the second half of the record
    bool converged = false;           // tail_sum < tolerance
    bool tail_decreasing = false;     // second-half sum <= first-half sum
};

inline WaveOperatorEstimate wave_operator_estimate(const Trajectory& traj, double tolerance = 1e-3) {
    WaveOperatorEstimate out{free_propagate(traj[traj.size() - 1], -traj.time(traj.size() - 1)), {}, 0.0, false, false};
    ComplexField previous = traj[0];
    for (std::size_t k = 1; k < traj.size(); ++k) {
        ComplexField current = free_propagate(traj[k], -traj.time(k));
        out.cauchy_tail.push_back(l2_norm(current - previous));
        previous = std::move(current);
    }
    const std::size_t n = out.cauchy_tail.size();
    double head = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (2 * k < n) {
            head += out.cauchy_tail[k];
        } else {
            out.tail_sum += out.cauchy_tail[k];
        }
    }
    out.converged = out.tail_sum < tolerance;
    out.tail_decreasing = out.tail_sum <= head;
    return out;
}

/// Parameters of the observables written per time node.
struct ObservableProbe {
    Vec cylinder_center{0, 0, 0};
    Vec cylinder_velocity{0, 0, 0};
    double cylinder_radius = 1.0;
    std::optional<ComplexField> ground;  // overlap column is empty without it
};

/// CSV columns: t, mass, energy, cylinder_mass, ground_overlap, l2_norm_L62.
inline void write_observables_csv(const Trajectory& traj, const ObservableProbe& probe, const std::string& filename) {
    std::ofstream out(filename);
    require(static_cast<bool>(out), ErrorKind::io, "cannot open '" + filename + "' for writing");
    out << "t,mass,energy,cylinder_mass,ground_overlap,l2_norm_L62\n" << std::setprecision(17);
    for (std::size_t m = 0; m < traj.size(); ++m) {
        out << traj.time(m) << "," << mass(traj[m]) << "," << energy(traj, m) << ","
            << cylinder_mass(traj, probe.cylinder_center, probe.cylinder_velocity, probe.cylinder_radius, m) << ",";
        if (probe.ground) out << ground_overlap(traj, *probe.ground, m);
        out << "," << lorentz_norm(traj[m], 6.0, 2.0) << "\n";
    }
}

}  // namespace stochdisp
