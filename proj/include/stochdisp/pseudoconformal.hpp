#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "stochdisp/grid.hpp"

namespace stochdisp {

/// Smooth radial step: 1 for r <= 1, 0 for r >= 2, C-infinity in between.
inline double smooth_step_down(double r) {
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return 0.0;
    auto bump = [](double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; };
    const double s = r - 1.0;
    return bump(1.0 - s) / (bump(1.0 - s) + bump(s));
}

/// Minimum-image displacement x - c on the periodic box.
inline Vec periodic_offset(const Grid& g, const Vec& x, const Vec& c) {
    Vec d = x - c;
    const double L = g.box_length();
    for (int a = 0; a < g.dim(); ++a) d[a] -= L * std::round(d[a] / L);
    return d;
}

/// chi_R(x - c) = chi(|x - c| / R), periodic distance.
inline RealField smooth_cutoff(const Grid& g, const Vec& center, double radius) {
    require(radius > 0.0, ErrorKind::invalid_argument, "cutoff radius must be positive");
    RealField chi(g);
    for (std::size_t i = 0; i < chi.size(); ++i) {
        chi.values[i] = smooth_step_down(norm(periodic_offset(g, g.position(i), center)) / radius);
    }
    return chi;
}

/**
 * phi(., 0) = (2 pi)^{-d/2} conj(psi^), with psi^(xi) = int e^{-i x.xi} psi(x) dx.
 *
 * The conjugate makes phi(., 0) the t -> 0 limit of `pseudoconformal_at`
 * for i dZ/dt = -Delta Z; norms are unaffected by it.
 * The transform lives on the frequency lattice of the input grid, so the
 * result is returned on `psi0.grid.dual()`, whose nodes are exactly those
 * frequencies. For L^2 = 2 pi N the dual grid is the grid itself.
 */
inline ComplexField pseudoconformal(const ComplexField& psi0) {
    const Grid& g = psi0.grid;
    const Grid dual = g.dual();
    const auto data = spectrum(psi0);
    const auto n = static_cast<long long>(g.points_per_axis());
    const double scale = g.cell_volume() * std::pow(2.0 * std::numbers::pi, -0.5 * g.dim());

    ComplexField phi(dual);
    for (std::size_t j = 0; j < phi.size(); ++j) {
        const auto idx = dual.unflatten(j);
        std::array<std::size_t, 3> slot{0, 0, 0};
        double sign = 1.0;
        for (int a = 0; a < g.dim(); ++a) {
            const long long s = static_cast<long long>(idx[a]) - n / 2;
            slot[a] = static_cast<std::size_t>(((s % n) + n) % n);
            if (s % 2 != 0) sign = -sign;  // e^{i xi L/2} = (-1)^s
        }
        phi.values[j] = sign * scale * std::conj(data[g.flatten(slot)]);
    }
    return phi;
}

namespace detail {

// Applies an N x N matrix along one axis of a d-dimensional cube stored row-major.
inline std::vector<complex> apply_along_axis(const std::vector<complex>& in, const Grid& g, int axis,
                                             const std::vector<complex>& matrix) {
    const std::size_t n = g.points_per_axis();
    std::size_t stride = 1;
    for (int a = g.dim() - 1; a > axis; --a) stride *= n;
    const std::size_t block = stride * n;
    std::vector<complex> out(in.size());
    for (std::size_t base = 0; base < in.size(); base += block) {
        for (std::size_t inner = 0; inner < stride; ++inner) {
            for (std::size_t j = 0; j < n; ++j) {
                complex acc{0.0, 0.0};
                for (std::size_t k = 0; k < n; ++k) acc += matrix[j * n + k] * in[base + inner + k * stride];
                out[base + inner + j * stride] = acc;
            }
        }
    }
    return out;
}

}  // namespace detail

/// Band-limited (trigonometric) interpolant of f evaluated at the tensor
/// points (x_{i_1} * scale, ..., x_{i_d} * scale). Points outside the box wrap.
inline ComplexField trig_interpolate_scaled(const ComplexField& f, double scale) {
    const Grid& g = f.grid;
    const std::size_t n = g.points_per_axis();
    const double x0 = -0.5 * g.box_length();
    std::vector<complex> matrix(n * n);
    for (std::size_t j = 0; j < n; ++j) {
        const double y = g.axis_coordinate(j) * scale;
        for (std::size_t k = 0; k < n; ++k) {
            const double xi = g.axis_wavenumber(k);
            // Nyquist slot: symmetric split so real data interpolates to real values.
            const complex e = (2 * k == n) ? complex(std::cos(xi * (y - x0)), 0.0) : std::polar(1.0, xi * (y - x0));
            matrix[j * n + k] = e / static_cast<double>(n);
        }
    }
    auto data = spectrum(f);
    for (int a = 0; a < g.dim(); ++a) data = detail::apply_along_axis(data, g, a, matrix);
    return ComplexField(g, std::move(data));
}

/**
 * Time-dependent pseudoconformal image of the free solution psi(t) = e^{it Delta} psi0:
 *
 *   phi(x, t) = (2 i t)^{-d/2} conj(psi(x / (2t), 1 / (4t))) e^{i |x|^2 / (4t)}.
 *
 * This is the form adapted to i dZ/dt = -Delta Z; phi again solves the free
 * equation. |t| below `time_floor` is rejected.
 */
inline ComplexField pseudoconformal_at(const ComplexField& psi0, double t, double time_floor = 1e-3) {
    require(std::isfinite(t) && std::abs(t) >= time_floor, ErrorKind::singular_time,
            "pseudoconformal_at: |t| below the singular-time floor");
    const Grid& g = psi0.grid;
    const ComplexField psi_s = free_propagate(psi0, 1.0 / (4.0 * t));
    ComplexField phi = trig_interpolate_scaled(psi_s, 1.0 / (2.0 * t));
    const complex prefactor = std::pow(complex(0.0, 2.0 * t), -0.5 * g.dim());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const Vec x = g.position(i);
        phi.values[i] = prefactor * std::conj(phi.values[i]) * std::polar(1.0, dot(x, x) / (4.0 * t));
    }
    return phi;
}

/**
 * Discrete check of the local mass balance
 *
 *   d/dt int chi |psi|^2 dx = 2 int grad chi . Im(conj(psi) grad psi) dx,
 *
 * which holds for i dpsi/dt = -Delta psi. Returns the largest mismatch over
 * interior nodes with the time derivative taken by centered differences.
 */
inline double mass_current_check(const SpaceTimeField& trajectory, const RealField& chi) {
    require(trajectory.size() >= 3, ErrorKind::invalid_argument, "mass_current_check needs at least 3 time nodes");
    require(chi.grid == trajectory.grid, ErrorKind::grid_mismatch, "cutoff and trajectory grids differ");
    const Grid& g = trajectory.grid;
    const ComplexField chi_c = to_complex(chi);
    std::vector<RealField> grad_chi;
    for (int a = 0; a < g.dim(); ++a) grad_chi.push_back(real_part(partial_derivative(chi_c, a)));

    auto local_mass = [&](const ComplexField& psi) {
        double acc = 0.0;
        for (std::size_t i = 0; i < psi.size(); ++i) acc += chi.values[i] * std::norm(psi.values[i]);
        return acc * g.cell_volume();
    };

    double worst = 0.0;
    for (std::size_t m = 1; m + 1 < trajectory.size(); ++m) {
        const double lhs = (local_mass(trajectory[m + 1]) - local_mass(trajectory[m - 1])) / (2.0 * trajectory.dt);
        double rhs = 0.0;
        const ComplexField& psi = trajectory[m];
        for (int a = 0; a < g.dim(); ++a) {
            const ComplexField dpsi = partial_derivative(psi, a);
            for (std::size_t i = 0; i < psi.size(); ++i) {
                rhs += grad_chi[a].values[i] * std::imag(std::conj(psi.values[i]) * dpsi.values[i]);
            }
        }
        rhs *= 2.0 * g.cell_volume();
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

}  // namespace stochdisp
