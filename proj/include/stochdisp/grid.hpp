#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "stochdisp/error.hpp"
#include "stochdisp/fft.hpp"

namespace stochdisp {

using complex = std::complex<double>;

/// Point or displacement in R^d, d <= 3. Unused trailing components stay 0.
using Vec = std::array<double, 3>;

inline Vec operator+(const Vec& a, const Vec& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec operator-(const Vec& a, const Vec& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec operator*(double s, const Vec& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec& a, const Vec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

/**
 * Periodic box [-L/2, L/2)^d sampled with N points per axis.
 *
 * Spatial nodes sit at x_i = -L/2 + i L/N. Frequencies follow the FFT
 * ordering: index i carries 2 pi/L * i for i < N/2 and 2 pi/L * (i - N)
 * otherwise, so the lattice is {-N/2, ..., N/2 - 1} * 2 pi / L.
 * Flat indices are row-major (last axis fastest), matching FFTW.
 */
class Grid {
public:
    Grid(int dim, std::size_t points_per_axis, double box_length)
        : dim_(dim), n_(points_per_axis), length_(box_length) {
        require(dim >= 1 && dim <= 3, ErrorKind::invalid_argument,
                "grid dimension must be 1, 2 or 3, got " + std::to_string(dim));
        require(points_per_axis >= 2 && (points_per_axis & (points_per_axis - 1)) == 0,
                ErrorKind::invalid_argument,
                "points per axis must be a power of two >= 2, got " + std::to_string(points_per_axis));
        require(std::isfinite(box_length) && box_length > 0.0, ErrorKind::invalid_argument,
                "box length must be positive and finite");
    }

    int dim() const noexcept { return dim_; }
    std::size_t points_per_axis() const noexcept { return n_; }
    double box_length() const noexcept { return length_; }
    double spacing() const noexcept { return length_ / static_cast<double>(n_); }
    double cell_volume() const noexcept { return std::pow(spacing(), dim_); }
    double volume() const noexcept { return std::pow(length_, dim_); }
    double frequency_step() const noexcept { return 2.0 * std::numbers::pi / length_; }

    std::size_t size() const noexcept {
        std::size_t total = 1;
        for (int a = 0; a < dim_; ++a) total *= n_;
        return total;
    }

    double axis_coordinate(std::size_t i) const noexcept {
        return -0.5 * length_ + static_cast<double>(i) * spacing();
    }

    /// Signed frequency index in {-N/2, ..., N/2 - 1} for FFT slot i.
    long long signed_index(std::size_t i) const noexcept {
        const auto n = static_cast<long long>(n_);
        const auto s = static_cast<long long>(i);
        return s < n / 2 ? s : s - n;
    }

    double axis_wavenumber(std::size_t i) const noexcept {
        return frequency_step() * static_cast<double>(signed_index(i));
    }

    std::array<std::size_t, 3> unflatten(std::size_t flat) const noexcept {
        std::array<std::size_t, 3> idx{0, 0, 0};
        for (int a = dim_ - 1; a >= 0; --a) {
            idx[static_cast<std::size_t>(a)] = flat % n_;
            flat /= n_;
        }
        return idx;
    }

    std::size_t flatten(const std::array<std::size_t, 3>& idx) const noexcept {
        std::size_t flat = 0;
        for (int a = 0; a < dim_; ++a) flat = flat * n_ + idx[static_cast<std::size_t>(a)];
        return flat;
    }

    Vec position(std::size_t flat) const noexcept {
        const auto idx = unflatten(flat);
        Vec x{0.0, 0.0, 0.0};
        for (int a = 0; a < dim_; ++a) x[a] = axis_coordinate(idx[a]);
        return x;
    }

    Vec frequency(std::size_t flat) const noexcept {
        const auto idx = unflatten(flat);
        Vec k{0.0, 0.0, 0.0};
        for (int a = 0; a < dim_; ++a) k[a] = axis_wavenumber(idx[a]);
        return k;
    }

    /// |xi|^2 for every FFT slot.
    std::vector<double> frequency_squared() const {
        std::vector<double> out(size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const Vec k = frequency(i);
            out[i] = dot(k, k);
        }
        return out;
    }

    /// Grid whose spatial nodes coincide with this grid's frequency lattice.
    Grid dual() const { return Grid(dim_, n_, 2.0 * std::numbers::pi * static_cast<double>(n_) / length_); }

    bool operator==(const Grid& other) const noexcept {
        return dim_ == other.dim_ && n_ == other.n_ && length_ == other.length_;
    }

private:
    int dim_;
    std::size_t n_;
    double length_;
};

/// Values sampled on a Grid. T is double (potentials, cutoffs) or complex (wavefunctions).
template <typename T>
struct Field {
    Grid grid;
    std::vector<T> values;

    explicit Field(const Grid& g) : grid(g), values(g.size(), T{}) {}
    Field(const Grid& g, std::vector<T> v) : grid(g), values(std::move(v)) {
        require(values.size() == grid.size(), ErrorKind::grid_mismatch,
                "field value count does not match grid size");
    }

    template <typename Fn>
    static Field from_function(const Grid& g, Fn&& fn) {
        Field f(g);
        for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = static_cast<T>(fn(g.position(i)));
        return f;
    }

    std::size_t size() const noexcept { return values.size(); }
    T& operator[](std::size_t i) { return values[i]; }
    const T& operator[](std::size_t i) const { return values[i]; }

    Field& operator+=(const Field& o) {
        check_same(o);
        for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
        return *this;
    }
    Field& operator-=(const Field& o) {
        check_same(o);
        for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
        return *this;
    }
    Field& operator*=(T s) {
        for (auto& v : values) v *= s;
        return *this;
    }

    void check_same(const Field& o) const {
        require(grid == o.grid, ErrorKind::grid_mismatch, "fields live on different grids");
    }
};

using RealField = Field<double>;
using ComplexField = Field<complex>;

template <typename T>
Field<T> operator+(Field<T> a, const Field<T>& b) { return a += b; }
template <typename T>
Field<T> operator-(Field<T> a, const Field<T>& b) { return a -= b; }
template <typename T>
Field<T> operator*(T s, Field<T> a) { return a *= s; }

/// Pointwise product; multiplying a wavefunction by a real potential is the common case.
template <typename T, typename U>
auto pointwise(const Field<T>& a, const Field<U>& b) {
    require(a.grid == b.grid, ErrorKind::grid_mismatch, "pointwise product of fields on different grids");
    using R = decltype(T{} * U{});
    Field<R> out(a.grid);
    for (std::size_t i = 0; i < a.size(); ++i) out.values[i] = a.values[i] * b.values[i];
    return out;
}

inline ComplexField to_complex(const RealField& f) {
    ComplexField out(f.grid);
    for (std::size_t i = 0; i < f.size(); ++i) out.values[i] = f.values[i];
    return out;
}

inline RealField real_part(const ComplexField& f) {
    RealField out(f.grid);
    for (std::size_t i = 0; i < f.size(); ++i) out.values[i] = f.values[i].real();
    return out;
}

template <typename T>
RealField modulus(const Field<T>& f) {
    RealField out(f.grid);
    for (std::size_t i = 0; i < f.size(); ++i) out.values[i] = std::abs(f.values[i]);
    return out;
}

/// <f, g> = int conj(f) g dx by the rectangle rule (exact for trigonometric polynomials).
inline complex inner(const ComplexField& f, const ComplexField& g) {
    f.check_same(g);
    complex acc{0.0, 0.0};
    for (std::size_t i = 0; i < f.size(); ++i) acc += std::conj(f.values[i]) * g.values[i];
    return acc * f.grid.cell_volume();
}

template <typename T>
double l2_norm(const Field<T>& f) {
    double acc = 0.0;
    for (const auto& v : f.values) acc += std::norm(v);
    return std::sqrt(acc * f.grid.cell_volume());
}

template <typename T>
double sup_norm(const Field<T>& f) {
    double m = 0.0;
    for (const auto& v : f.values) m = std::max(m, std::abs(v));
    return m;
}

/// Quadrature L^p norm; p = infinity gives the sup norm.
template <typename T>
double lp_norm(const Field<T>& f, double p) {
    require(p >= 1.0, ErrorKind::unsupported_exponent, "L^p norm needs p >= 1");
    if (std::isinf(p)) return sup_norm(f);
    double acc = 0.0;
    for (const auto& v : f.values) acc += std::pow(std::abs(v), p);
    return std::pow(acc * f.grid.cell_volume(), 1.0 / p);
}

template <typename T>
T integral(const Field<T>& f) {
    T acc{};
    for (const auto& v : f.values) acc += v;
    return acc * f.grid.cell_volume();
}

/// Unnormalized DFT coefficients in FFT slot order.
template <typename T>
std::vector<complex> spectrum(const Field<T>& f) {
    std::vector<complex> data(f.values.begin(), f.values.end());
    fft::forward(data, f.grid.dim(), static_cast<int>(f.grid.points_per_axis()));
    return data;
}

template <typename T>
Field<T> from_spectrum(const Grid& g, std::vector<complex> data) {
    fft::inverse(data, g.dim(), static_cast<int>(g.points_per_axis()));
    Field<T> out(g);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if constexpr (std::is_same_v<T, double>) {
            out.values[i] = data[i].real();
        } else {
            out.values[i] = data[i];
        }
    }
    return out;
}

/// Multiplies the spectrum of f by multiplier(slot). Real fields stay real
/// (the imaginary part produced by an asymmetric Nyquist phase is dropped).
template <typename T, typename Multiplier>
Field<T> apply_fourier_multiplier(const Field<T>& f, Multiplier&& multiplier) {
    auto data = spectrum(f);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] *= multiplier(i);
    return from_spectrum<T>(f.grid, std::move(data));
}

/// e^{it Delta} f, i.e. the solution at time t of i dZ/dt = -Delta Z.
inline ComplexField free_propagate(const ComplexField& f, double t) {
    require(std::isfinite(t), ErrorKind::invalid_argument, "free_propagate: time must be finite");
    if (t == 0.0) return f;
    const Grid& g = f.grid;
    return apply_fourier_multiplier(f, [&](std::size_t i) {
        const Vec k = g.frequency(i);
        return std::polar(1.0, -dot(k, k) * t);
    });
}

/// e^{tau Delta} f for tau >= 0.
template <typename T>
Field<T> heat_propagate(const Field<T>& f, double tau) {
    require(std::isfinite(tau) && tau >= 0.0, ErrorKind::invalid_argument,
            "heat_propagate: tau must be finite and non-negative");
    if (tau == 0.0) return f;
    const Grid& g = f.grid;
    return apply_fourier_multiplier(f, [&](std::size_t i) {
        const Vec k = g.frequency(i);
        return complex(std::exp(-dot(k, k) * tau), 0.0);
    });
}

/// (translate(f, a))(x) = f(x + a), i.e. e^{a . grad} f, realized as a Fourier phase.
/// Shifting by a positive a moves features toward smaller x.
template <typename T>
Field<T> translate(const Field<T>& f, const Vec& a) {
    if (a[0] == 0.0 && a[1] == 0.0 && a[2] == 0.0) return f;
    const Grid& g = f.grid;
    return apply_fourier_multiplier(f, [&](std::size_t i) { return std::polar(1.0, dot(g.frequency(i), a)); });
}

/// Spectral partial derivative along `axis`.
inline ComplexField partial_derivative(const ComplexField& f, int axis) {
    require(axis >= 0 && axis < f.grid.dim(), ErrorKind::invalid_argument, "derivative axis out of range");
    const Grid& g = f.grid;
    return apply_fourier_multiplier(f, [&](std::size_t i) { return complex(0.0, g.frequency(i)[axis]); });
}

/// int |grad f|^2 dx computed on the Fourier side.
inline double gradient_energy(const ComplexField& f) {
    const auto data = spectrum(f);
    const Grid& g = f.grid;
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vec k = g.frequency(i);
        acc += dot(k, k) * std::norm(data[i]);
    }
    return acc * g.cell_volume() / static_cast<double>(g.size());
}

/// Space-time samples F(t_m), t_m = m * dt, m = 0..M, all on one grid.
struct SpaceTimeField {
    Grid grid;
    double dt;
    std::vector<ComplexField> slices;

    SpaceTimeField(const Grid& g, double time_step) : grid(g), dt(time_step) {
        require(std::isfinite(time_step) && time_step > 0.0, ErrorKind::invalid_argument,
                "space-time field needs a positive time step");
    }

    std::size_t size() const noexcept { return slices.size(); }
    double time(std::size_t m) const noexcept { return dt * static_cast<double>(m); }
    double horizon() const noexcept { return slices.empty() ? 0.0 : time(slices.size() - 1); }

    void push_back(ComplexField f) {
        require(f.grid == grid, ErrorKind::grid_mismatch, "space-time slice on a different grid");
        slices.push_back(std::move(f));
    }

    ComplexField& operator[](std::size_t m) { return slices[m]; }
    const ComplexField& operator[](std::size_t m) const { return slices[m]; }
};

}  // namespace stochdisp
