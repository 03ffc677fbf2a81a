#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "stochdisp/grid.hpp"

namespace stochdisp {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

/**
 * Lorentz quasi-norm ||f||_{L^{p,q}} from the decreasing rearrangement of |f|.
 *
 * On the grid f* is a step function: the k-th largest |value| a_k occupies
 * t in [k dV, (k+1) dV). The defining integral int (t^{1/p} f*(t))^q dt/t is
 * then evaluated exactly cell by cell:
 *
 *   ||f||^q = sum_k a_k^q (p/q) (t_{k+1}^{q/p} - t_k^{q/p}),
 *
 * and for q = infinity the value is max_k a_k t_{k+1}^{1/p}. With this
 * normalization ||f||_{L^{p,p}} equals the quadrature L^p norm exactly and an
 * indicator of measure m has norm (p/q)^{1/q} m^{1/p}.
 *
 * The exponents that matter here are (3/2, 1), (3/2, inf) and (6, 2); any
 * p > 1, q >= 1 is accepted since the cell-wise integral is exact.
 */
template <typename T>
double lorentz_norm(const Field<T>& f, double p, double q) {
    require(p > 1.0 && std::isfinite(p), ErrorKind::unsupported_exponent,
            "Lorentz norm needs finite p > 1");
    require(q >= 1.0 || std::isinf(q), ErrorKind::unsupported_exponent, "Lorentz norm needs q >= 1");

    std::vector<double> a(f.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::abs(f.values[i]);
    std::sort(a.begin(), a.end(), std::greater<>());

    const double dv = f.grid.cell_volume();
    if (std::isinf(q)) {
        double best = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (a[k] == 0.0) break;
            best = std::max(best, a[k] * std::pow(dv * static_cast<double>(k + 1), 1.0 / p));
        }
        return best;
    }

    const double r = q / p;
    double acc = 0.0;
    double prev = 0.0;  // t_k^{q/p}
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] == 0.0) break;
        const double next = std::pow(dv * static_cast<double>(k + 1), r);
        acc += std::pow(a[k], q) * (next - prev);
        prev = next;
    }
    return std::pow(acc * p / q, 1.0 / q);
}

struct StrichartzNorms {
    double l2t_l62 = 0.0;  // (int ||F(t)||_{L^{6,2}}^2 dt)^{1/2}, trapezoidal in t
    double linf_l2 = 0.0;  // max_m ||F(t_m)||_{L^2}

    /// Norm on the intersection space: the larger of the two components.
    double intersection() const noexcept { return std::max(l2t_l62, linf_l2); }
};

/// Trapezoidal weights for m = 0..count-1 on a uniform lattice.
inline std::vector<double> trapezoid_weights(std::size_t count, double dt) {
    std::vector<double> w(count, dt);
    if (count == 1) {
        w[0] = 0.0;
    } else if (count > 1) {
        w.front() = 0.5 * dt;
        w.back() = 0.5 * dt;
    }
    return w;
}

inline StrichartzNorms strichartz_norms(const SpaceTimeField& F) {
    require(F.size() > 0, ErrorKind::invalid_argument, "strichartz_norms: empty space-time field");
    const auto w = trapezoid_weights(F.size(), F.dt);
    StrichartzNorms out;
    double acc = 0.0;
    for (std::size_t m = 0; m < F.size(); ++m) {
        const double l62 = lorentz_norm(F[m], 6.0, 2.0);
        acc += w[m] * l62 * l62;
        out.linf_l2 = std::max(out.linf_l2, l2_norm(F[m]));
    }
    out.l2t_l62 = std::sqrt(acc);
    return out;
}

/// ||f||_{H^1} = ||<xi> f^||, or ||<x> f||_{L^2} when `weighted` is set.
inline double h1_weighted_norm(const ComplexField& f, bool weighted) {
    const Grid& g = f.grid;
    double acc = 0.0;
    if (weighted) {
        for (std::size_t i = 0; i < f.size(); ++i) {
            const Vec x = g.position(i);
            acc += (1.0 + dot(x, x)) * std::norm(f.values[i]);
        }
        return std::sqrt(acc * g.cell_volume());
    }
    const auto data = spectrum(f);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vec k = g.frequency(i);
        acc += (1.0 + dot(k, k)) * std::norm(data[i]);
    }
    return std::sqrt(acc * g.cell_volume() / static_cast<double>(g.size()));
}

}  // namespace stochdisp
