#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <string>

#include "stochdisp/error.hpp"
#include "stochdisp/grid.hpp"
#include "stochdisp/norms.hpp"

namespace stochdisp {

enum class PotentialKind { zero, gaussian_well, compact_bump, sech2_well, custom };

inline std::string to_string(PotentialKind kind) {
    switch (kind) {
        case PotentialKind::zero: return "zero";
        case PotentialKind::gaussian_well: return "gaussian_well";
        case PotentialKind::compact_bump: return "compact_bump";
        case PotentialKind::sech2_well: return "sech2_well";
        case PotentialKind::custom: return "custom";
    }
    return "unknown";
}

inline PotentialKind potential_kind_from_string(const std::string& s) {
    if (s == "zero") return PotentialKind::zero;
    if (s == "gaussian_well") return PotentialKind::gaussian_well;
    if (s == "compact_bump") return PotentialKind::compact_bump;
    if (s == "sech2_well") return PotentialKind::sech2_well;
    if (s == "custom") return PotentialKind::custom;
    throw Error(ErrorKind::invalid_argument, "unknown potential kind '" + s + "'");
}

struct PotentialNorms {
    double l32_1 = 0.0;    // ||V||_{L^{3/2,1}}
    double l32_inf = 0.0;  // ||V||_{L^{3/2,inf}}
    double linf = 0.0;     // ||V||_inf
};

inline PotentialNorms potential_norms(const RealField& v) {
    return {lorentz_norm(v, 1.5, 1.0), lorentz_norm(v, 1.5, infinity), sup_norm(v)};
}

/**
 * Real potential V with its factorization V = V1 V2, V1 = |V|^{1/2},
 * V2 = |V|^{1/2} sgn V. Analytic kinds are wells: V(x) = -depth * profile(|x - c| / width)
 * with profile(0) = 1, so a positive depth is attractive.
 */
class Potential {
public:
    Potential(PotentialKind kind, RealField field, double depth, double width, const Vec& center)
        : kind_(kind), depth_(depth), width_(width), center_(center), v_(std::move(field)), v1_(v_.grid), v2_(v_.grid) {
        for (std::size_t i = 0; i < v_.size(); ++i) {
            const double a = std::sqrt(std::abs(v_.values[i]));
            v1_.values[i] = a;
            v2_.values[i] = v_.values[i] < 0.0 ? -a : a;
        }
        norms_ = stochdisp::potential_norms(v_);
    }

    /// Arbitrary sampled potential; translations of it are periodic.
    static Potential from_field(RealField field) {
        return Potential(PotentialKind::custom, std::move(field), 0.0, 0.0, Vec{0, 0, 0});
    }

    const Grid& grid() const noexcept { return v_.grid; }
    PotentialKind kind() const noexcept { return kind_; }
    double depth() const noexcept { return depth_; }
    double width() const noexcept { return width_; }
    const Vec& center() const noexcept { return center_; }
    const RealField& field() const noexcept { return v_; }
    const RealField& v1() const noexcept { return v1_; }
    const RealField& v2() const noexcept { return v2_; }
    const PotentialNorms& norms() const noexcept { return norms_; }
    bool is_zero() const noexcept { return norms_.linf == 0.0; }
    bool is_analytic() const noexcept { return kind_ != PotentialKind::custom; }

    /// Radial profile with profile(0) = 1; s = |x - c| / width.
    static double profile(PotentialKind kind, double s) {
        switch (kind) {
            case PotentialKind::gaussian_well: return std::exp(-s * s);
            case PotentialKind::compact_bump: return s < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
            case PotentialKind::sech2_well: {
                const double c = 1.0 / std::cosh(s);
                return c * c;
            }
            default: return 0.0;
        }
    }

    /// Radius beyond which the profile is treated as zero.
    static double support_radius(PotentialKind kind, double width) {
        switch (kind) {
            case PotentialKind::gaussian_well: return 2.0 * width;
            case PotentialKind::compact_bump: return width;
            case PotentialKind::sech2_well: return 4.0 * width;
            default: return 0.0;
        }
    }

    /**
     * V(x - shift) on the grid. Analytic kinds are evaluated in the open
     * frame (no periodic images), so a potential carried far from the origin
     * leaves the box instead of re-entering it. Custom fields wrap.
     */
    RealField sample_shifted(const Vec& shift) const {
        if (is_zero()) return RealField(grid());
        if (!is_analytic()) return translate(v_, Vec{-shift[0], -shift[1], -shift[2]});
        RealField out(grid());
        const Vec c = center_ + shift;
        for (std::size_t i = 0; i < out.size(); ++i) {
            out.values[i] = -depth_ * profile(kind_, norm(grid().position(i) - c) / width_);
        }
        return out;
    }

private:
    PotentialKind kind_;
    double depth_;
    double width_;
    Vec center_;
    RealField v_;
    RealField v1_;
    RealField v2_;
    PotentialNorms norms_;
};

/// Builds an analytic well. The support radius plus a margin of 2 * width must fit in the box.
inline Potential make_potential(PotentialKind kind, double depth, double width, const Grid& grid,
                                const Vec& center = Vec{0, 0, 0}) {
    require(kind != PotentialKind::custom, ErrorKind::invalid_argument, "use Potential::from_field for custom fields");
    require(std::isfinite(depth), ErrorKind::invalid_argument, "potential depth must be finite");
    if (kind == PotentialKind::zero || depth == 0.0) {
        return Potential(PotentialKind::zero, RealField(grid), 0.0, width > 0.0 ? width : 1.0, center);
    }
    require(std::isfinite(width) && width > 0.0, ErrorKind::invalid_argument, "potential width must be positive");
    const double reach = Potential::support_radius(kind, width) + 2.0 * width;
    for (int a = 0; a < grid.dim(); ++a) {
        require(std::abs(center[a]) + reach <= 0.5 * grid.box_length(), ErrorKind::configuration,
                "potential support plus margin (" + std::to_string(reach) + ") does not fit in the box");
    }
    RealField v(grid);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v.values[i] = -depth * Potential::profile(kind, norm(grid.position(i) - center) / width);
    }
    return Potential(kind, std::move(v), depth, width, center);
}

inline PotentialNorms potential_norms(const Potential& pot) { return pot.norms(); }

/// (-Delta + V) f, spectral Laplacian.
inline ComplexField apply_hamiltonian(const ComplexField& f, const RealField& v) {
    const Grid& g = f.grid;
    const auto k2 = g.frequency_squared();
    ComplexField out = apply_fourier_multiplier(f, [&](std::size_t i) { return complex(k2[i], 0.0); });
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += v.values[i] * f.values[i];
    return out;
}

inline double rayleigh_quotient(const ComplexField& f, const RealField& v) {
    return inner(f, apply_hamiltonian(f, v)).real() / inner(f, f).real();
}

struct GroundState {
    ComplexField phi;
    double energy = 0.0;
    double residual = 0.0;  // ||(-Delta + V) phi - E phi||_2
    std::size_t iterations = 0;
    bool converged = false;
};

struct GroundStateOptions {
    double imaginary_step = 0.05;
    std::size_t max_imaginary_steps = 4000;
    std::size_t max_refine_iterations = 2000;
};

/**
 * Lowest eigenpair of -Delta + V.
 *
 * Imaginary-time Strang steps e^{-tau V/2} e^{tau Delta} e^{-tau V/2} with
 * renormalization drive the iterate into the ground-state basin until the
 * relative energy change per step is below max(tol, 1e-10). The splitting
 * biases the fixed point by O(tau^2), so the result is then refined by a
 * preconditioned locally optimal block iteration on span{phi, P r, p}
 * (P = (1 + |xi|^2)^{-1}) until the residual is at most tol.
 */
inline GroundState ground_state(const Potential& pot, double tol, const GroundStateOptions& opts = {}) {
    require(tol > 0.0, ErrorKind::invalid_argument, "ground_state: tol must be positive");
    const Grid& g = pot.grid();
    const RealField& v = pot.field();
    const auto k2 = g.frequency_squared();
    const double width = pot.width() > 0.0 ? pot.width() : 1.0;

    ComplexField phi = ComplexField::from_function(g, [&](const Vec& x) {
        const Vec d = x - pot.center();
        return std::exp(-0.5 * dot(d, d) / (width * width));
    });
    auto normalize = [](ComplexField& f) {
        const double n = l2_norm(f);
        require(n > 0.0, ErrorKind::no_bound_state, "ground_state: iterate collapsed to zero");
        f *= complex(1.0 / n, 0.0);
    };
    normalize(phi);

    GroundState out{phi};
    const double tau = opts.imaginary_step;
    RealField half(g);
    for (std::size_t i = 0; i < v.size(); ++i) half.values[i] = std::exp(-0.5 * tau * v.values[i]);
    double energy = rayleigh_quotient(phi, v);
    for (std::size_t step = 0; step < opts.max_imaginary_steps; ++step) {
        for (std::size_t i = 0; i < phi.size(); ++i) phi.values[i] *= half.values[i];
        phi = apply_fourier_multiplier(phi, [&](std::size_t i) { return complex(std::exp(-k2[i] * tau), 0.0); });
        for (std::size_t i = 0; i < phi.size(); ++i) phi.values[i] *= half.values[i];
        normalize(phi);
        const double next = rayleigh_quotient(phi, v);
        ++out.iterations;
        const bool settled = std::abs(next - energy) <= std::max(tol, 1e-10) * std::max(1.0, std::abs(next));
        energy = next;
        if (settled) break;
    }

    // Locally optimal refinement.
    auto precondition = [&](const ComplexField& r) {
        return apply_fourier_multiplier(r, [&](std::size_t i) { return complex(1.0 / (1.0 + k2[i]), 0.0); });
    };
    std::optional<ComplexField> previous_direction;
    double residual = 0.0;
    for (std::size_t it = 0; it < opts.max_refine_iterations; ++it) {
        const ComplexField hphi = apply_hamiltonian(phi, v);
        energy = inner(phi, hphi).real();
        ComplexField r = hphi;
        for (std::size_t i = 0; i < r.size(); ++i) r.values[i] -= energy * phi.values[i];
        residual = l2_norm(r);
        ++out.iterations;
        if (residual <= tol) break;

        std::vector<ComplexField> basis{phi, precondition(r)};
        if (previous_direction) basis.push_back(*previous_direction);
        // Orthonormalize (two Gram-Schmidt passes); drop dependent directions.
        std::vector<ComplexField> q;
        for (auto& b : basis) {
            for (int pass = 0; pass < 2; ++pass) {
                for (const auto& e : q) {
                    const complex c = inner(e, b);
                    for (std::size_t i = 0; i < b.size(); ++i) b.values[i] -= c * e.values[i];
                }
            }
            const double n = l2_norm(b);
            if (n > 1e-12) {
                b *= complex(1.0 / n, 0.0);
                q.push_back(b);
            }
        }
        const auto dim = static_cast<Eigen::Index>(q.size());
        Eigen::MatrixXcd h(dim, dim);
        std::vector<ComplexField> hq;
        for (const auto& e : q) hq.push_back(apply_hamiltonian(e, v));
        for (Eigen::Index a = 0; a < dim; ++a) {
            for (Eigen::Index b = 0; b < dim; ++b) h(a, b) = inner(q[a], hq[b]);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h);
        const Eigen::VectorXcd c = eig.eigenvectors().col(0);
        ComplexField next(g);
        ComplexField direction(g);
        for (Eigen::Index a = 0; a < dim; ++a) {
            for (std::size_t i = 0; i < next.size(); ++i) {
                next.values[i] += c(a) * q[a].values[i];
                if (a > 0) direction.values[i] += c(a) * q[a].values[i];
            }
        }
        normalize(next);
        phi = std::move(next);
        if (l2_norm(direction) > 1e-14) {
            normalize(direction);
            previous_direction = std::move(direction);
        } else {
            previous_direction.reset();
        }
    }

    require(energy < 0.0, ErrorKind::no_bound_state,
            "ground_state: lowest energy " + std::to_string(energy) + " is not negative; deepen the well");
    // Fix the global phase so the largest component is real and positive.
    std::size_t peak = 0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        if (std::abs(phi.values[i]) > std::abs(phi.values[peak])) peak = i;
    }
    const complex phase = std::conj(phi.values[peak]) / std::abs(phi.values[peak]);
    phi *= phase;

    out.phi = std::move(phi);
    out.energy = energy;
    out.residual = residual;
    out.converged = residual <= tol;
    return out;
}

/// CSV with header "x1,...,xd,V".
inline void write_potential_csv(const Potential& pot, const std::string& filename) {
    std::ofstream out(filename);
    require(static_cast<bool>(out), ErrorKind::io, "cannot open '" + filename + "' for writing");
    const Grid& g = pot.grid();
    for (int a = 0; a < g.dim(); ++a) out << "x" << (a + 1) << ",";
    out << "V\n" << std::setprecision(17);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec x = g.position(i);
        for (int a = 0; a < g.dim(); ++a) out << x[a] << ",";
        out << pot.field().values[i] << "\n";
    }
}

}  // namespace stochdisp
