// Copyright 2026 The sfcl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Real periodic fields on the unit torus T^d (d = 1, 2), their discrete Fourier
// transforms, the fractional Laplacian as a Fourier multiplier, and norms.
//
// Transform convention: u_hat[k] = (1/N^d) sum_j u(x_j) exp(-2 pi i k.x_j),
// nodes x_j = j/N, wavenumbers k in {-N/2, ..., N/2 - 1} stored in FFT order.
#pragma once

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "sfcl/errors.hpp"

namespace sfcl {

using Complex = std::complex<double>;
using Spectrum = std::vector<Complex>;
using Point = std::array<double, 2>;
using WaveVector = std::array<int, 2>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kFourPiSq = kTwoPi * kTwoPi;

/// Uniform periodic grid on the unit torus.
class GridSpec {
public:
    GridSpec(int dim, int points_per_axis) : dim_(dim), n_(points_per_axis) {
        if (dim_ != 1 && dim_ != 2) {
            throw ConfigError("grid dimension must be 1 or 2, got " + std::to_string(dim_));
        }
        if (n_ < 8 || !std::has_single_bit(static_cast<unsigned>(n_))) {
            throw ConfigError("points per axis must be a power of two >= 8, got " +
                              std::to_string(n_));
        }
    }

    explicit GridSpec(int points_per_axis) : GridSpec(1, points_per_axis) {}

    int dim() const noexcept { return dim_; }
    int points_per_axis() const noexcept { return n_; }
    double cell_width() const noexcept { return 1.0 / n_; }
    std::size_t size() const noexcept {
        return dim_ == 1 ? static_cast<std::size_t>(n_) : static_cast<std::size_t>(n_) * n_;
    }

    /// Physical coordinate of flat node index (row-major, axis 0 slowest).
    Point node(std::size_t idx) const noexcept {
        if (dim_ == 1) return {static_cast<double>(idx) / n_, 0.0};
        return {static_cast<double>(idx / n_) / n_, static_cast<double>(idx % n_) / n_};
    }

    /// Signed wavenumber for an FFT-ordered index along one axis.
    int wavenumber(int m) const noexcept { return m < n_ / 2 ? m : m - n_; }

    WaveVector wavevector(std::size_t idx) const noexcept {
        if (dim_ == 1) return {wavenumber(static_cast<int>(idx)), 0};
        return {wavenumber(static_cast<int>(idx / n_)), wavenumber(static_cast<int>(idx % n_))};
    }

    /// Flat FFT-ordered index of a wavevector (components taken modulo N).
    std::size_t mode_index(WaveVector k) const noexcept {
        auto wrap = [this](int v) { return static_cast<std::size_t>(((v % n_) + n_) % n_); };
        if (dim_ == 1) return wrap(k[0]);
        return wrap(k[0]) * n_ + wrap(k[1]);
    }

    /// |k|^2 for the mode at flat index idx.
    double wavenumber_sq(std::size_t idx) const noexcept {
        const auto k = wavevector(idx);
        return static_cast<double>(k[0]) * k[0] + static_cast<double>(k[1]) * k[1];
    }

    bool operator==(const GridSpec&) const = default;

private:
    int dim_;
    int n_;
};

// ---------------------------------------------------------------------------
// Multipliers
// ---------------------------------------------------------------------------

/// Symbol of -Delta: 4 pi^2 |k|^2.
inline double laplacian_symbol(double k_sq) noexcept { return kFourPiSq * k_sq; }

/// Symbol of (-Delta)^theta: (4 pi^2 |k|^2)^theta. theta = 1 reproduces laplacian_symbol exactly.
inline double fractional_symbol(double k_sq, double theta) noexcept {
    return std::pow(laplacian_symbol(k_sq), theta);
}

inline void check_theta(double theta) {
    if (!(theta > 0.0 && theta <= 1.0)) {
        throw ParameterError("fractional order theta must lie in (0, 1], got " +
                             std::to_string(theta));
    }
}

// ---------------------------------------------------------------------------
// FFT backend
// ---------------------------------------------------------------------------

namespace detail {

/// Process-wide FFTW plan cache. Planning is serialized; execution through the
/// new-array interface is reentrant, so one plan serves every thread.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int dim, int n, int sign) {
        std::lock_guard lock(mutex_);
        const auto key = std::make_tuple(dim, n, sign);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        const std::size_t total = dim == 1 ? n : static_cast<std::size_t>(n) * n;
        auto* in = fftw_alloc_complex(total);
        auto* out = fftw_alloc_complex(total);
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fftw_plan plan = dim == 1 ? fftw_plan_dft_1d(n, in, out, sign, flags)
                                  : fftw_plan_dft_2d(n, n, in, out, sign, flags);
        fftw_free(in);
        fftw_free(out);
        plans_.emplace(key, plan);
        return plan;
    }

    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;

private:
    PlanCache() = default;
    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    std::mutex mutex_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

inline fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace detail

/// Reusable forward/inverse transform for one grid. Not shareable between
/// threads (owns scratch buffers); cheap to construct per task.
class FourierTransform {
public:
    explicit FourierTransform(const GridSpec& grid)
        : grid_(grid),
          forward_(detail::PlanCache::instance().get(grid.dim(), grid.points_per_axis(),
                                                     FFTW_FORWARD)),
          inverse_(detail::PlanCache::instance().get(grid.dim(), grid.points_per_axis(),
                                                     FFTW_BACKWARD)),
          scratch_(grid.size()),
          scale_(1.0 / static_cast<double>(grid.size())) {}

    const GridSpec& grid() const noexcept { return grid_; }

    void forward(std::span<const double> values, Spectrum& out) {
        if (values.size() != grid_.size()) throw ShapeError("field size does not match grid");
        out.resize(grid_.size());
        for (std::size_t i = 0; i < values.size(); ++i) scratch_[i] = Complex(values[i], 0.0);
        fftw_execute_dft(forward_, detail::as_fftw(scratch_.data()), detail::as_fftw(out.data()));
        for (auto& c : out) c *= scale_;
    }

    /// Real part of the inverse transform; the imaginary residue is discarded.
    void inverse(const Spectrum& spectrum, std::span<double> out) {
        if (spectrum.size() != grid_.size() || out.size() != grid_.size()) {
            throw ShapeError("spectrum size does not match grid");
        }
        scratch_ = spectrum;
        inverse_buffer_.resize(grid_.size());
        fftw_execute_dft(inverse_, detail::as_fftw(scratch_.data()),
                         detail::as_fftw(inverse_buffer_.data()));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = inverse_buffer_[i].real();
    }

    /// Full complex inverse, for checking the imaginary residue.
    void inverse_complex(const Spectrum& spectrum, Spectrum& out) {
        if (spectrum.size() != grid_.size()) throw ShapeError("spectrum size does not match grid");
        scratch_ = spectrum;
        out.resize(grid_.size());
        fftw_execute_dft(inverse_, detail::as_fftw(scratch_.data()), detail::as_fftw(out.data()));
    }

private:
    GridSpec grid_;
    fftw_plan forward_;
    fftw_plan inverse_;
    Spectrum scratch_;
    Spectrum inverse_buffer_;
    double scale_;
};

// ---------------------------------------------------------------------------
// SpectralField
// ---------------------------------------------------------------------------

/// A real field sampled on the grid nodes. Immutable value type.
class SpectralField {
public:
    SpectralField(GridSpec grid, std::vector<double> values)
        : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size()) {
            throw ShapeError("field has " + std::to_string(values_.size()) +
                             " values, grid expects " + std::to_string(grid_.size()));
        }
    }

    static SpectralField constant(const GridSpec& grid, double c) {
        return {grid, std::vector<double>(grid.size(), c)};
    }

    static SpectralField zero(const GridSpec& grid) { return constant(grid, 0.0); }

    static SpectralField from_function(const GridSpec& grid,
                                       const std::function<double(Point)>& f) {
        std::vector<double> v(grid.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid.node(i));
        return {grid, std::move(v)};
    }

    /// Real part of the inverse transform of a (conjugate-symmetric) spectrum.
    static SpectralField from_spectrum(const GridSpec& grid, const Spectrum& spectrum) {
        std::vector<double> v(grid.size());
        FourierTransform(grid).inverse(spectrum, v);
        return {grid, std::move(v)};
    }

    const GridSpec& grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& data() const noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    std::size_t size() const noexcept { return values_.size(); }

    bool all_finite() const noexcept {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    Spectrum spectrum() const;

    /// Grid mean, i.e. the discrete integral over the unit torus.
    double mean() const noexcept {
        double s = 0.0;
        for (double v : values_) s += v;
        return s / static_cast<double>(values_.size());
    }

    friend SpectralField operator+(const SpectralField& a, const SpectralField& b) {
        return combine(a, b, [](double x, double y) { return x + y; });
    }
    friend SpectralField operator-(const SpectralField& a, const SpectralField& b) {
        return combine(a, b, [](double x, double y) { return x - y; });
    }
    friend SpectralField operator*(double s, const SpectralField& a) {
        std::vector<double> v(a.values_);
        for (double& x : v) x *= s;
        return {a.grid_, std::move(v)};
    }

    bool operator==(const SpectralField&) const = default;

private:
    template <class Op>
    static SpectralField combine(const SpectralField& a, const SpectralField& b, Op op) {
        if (!(a.grid_ == b.grid_)) throw ShapeError("fields live on different grids");
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = op(a.values_[i], b.values_[i]);
        return {a.grid_, std::move(v)};
    }

    GridSpec grid_;
    std::vector<double> values_;
};

/// Forward DFT with the 1/N^d normalization. Rejects non-finite input.
inline Spectrum forward_transform(const SpectralField& field) {
    if (!field.all_finite()) throw ParameterError("forward_transform: field has non-finite values");
    Spectrum out;
    FourierTransform(field.grid()).forward(field.values(), out);
    return out;
}

inline Spectrum SpectralField::spectrum() const { return forward_transform(*this); }

inline SpectralField inverse_transform(const GridSpec& grid, const Spectrum& spectrum) {
    return SpectralField::from_spectrum(grid, spectrum);
}

/// Multiply the spectrum of a field mode-wise by symbol(|k|^2).
inline SpectralField apply_multiplier(const SpectralField& field,
                                      const std::function<double(double)>& symbol) {
    const auto& grid = field.grid();
    Spectrum s = forward_transform(field);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= symbol(grid.wavenumber_sq(i));
    return SpectralField::from_spectrum(grid, s);
}

/// (-Delta)^theta via the multiplier (4 pi^2 |k|^2)^theta, theta in (0, 1].
inline SpectralField apply_fractional_laplacian(const SpectralField& field, double theta) {
    check_theta(theta);
    return apply_multiplier(field, [theta](double k_sq) { return fractional_symbol(k_sq, theta); });
}

/// Spectral -Delta.
inline SpectralField apply_negative_laplacian(const SpectralField& field) {
    return apply_multiplier(field, laplacian_symbol);
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

struct NormReport {
    double l1 = 0.0;
    double l2 = 0.0;
    double gagliardo_theta = 0.0;
    double e1_accumulator = 0.0;  ///< time-integrated L1; zero for a single snapshot
};

inline double l1_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s / static_cast<double>(v.size());
}

inline double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

/// L1 distance between two equally sized node arrays.
inline double l1_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("l1_distance: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

/// Fourier-equivalent Gagliardo seminorm: sqrt(sum_k (2 pi |k|)^{2 theta} |u_hat_k|^2).
inline double gagliardo_seminorm(const GridSpec& grid, const Spectrum& s, double theta) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        acc += fractional_symbol(grid.wavenumber_sq(i), theta) * std::norm(s[i]);
    }
    return std::sqrt(acc);
}

inline NormReport compute_norms(const SpectralField& field, double theta) {
    check_theta(theta);
    NormReport r;
    r.l1 = l1_norm(field.values());
    r.l2 = l2_norm(field.values());
    r.gagliardo_theta = gagliardo_seminorm(field.grid(), forward_transform(field), theta);
    return r;
}

/// Left-rectangle rule for the path norm in L^1([0,T]; L^1).
inline double e1_rectangle(std::span<const double> times, std::span<const double> l1_values) {
    if (times.size() != l1_values.size()) throw ShapeError("e1_rectangle: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < times.size(); ++i) acc += (times[i + 1] - times[i]) * l1_values[i];
    return acc;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// CSV with columns: index, x[, y], value.
inline void write_csv(std::ostream& os, const SpectralField& field) {
    const auto& grid = field.grid();
    os << (grid.dim() == 1 ? "index,x,value\n" : "index,x,y,value\n");
    os.precision(17);
    for (std::size_t i = 0; i < field.size(); ++i) {
        const auto p = grid.node(i);
        os << i << ',' << p[0] << ',';
        if (grid.dim() == 2) os << p[1] << ',';
        os << field[i] << '\n';
    }
}

namespace detail {

template <class T>
void put_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(bytes.data(), bytes.size());
}

template <class T>
T get_le(std::istream& is) {
    std::array<char, sizeof(T)> bytes{};
    if (!is.read(bytes.data(), bytes.size())) throw ShapeError("truncated binary snapshot");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

}  // namespace detail

/// Binary snapshot: uint32 dim, uint32 N, then N^dim little-endian float64 values, row-major.
inline void write_snapshot(std::ostream& os, const SpectralField& field) {
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(field.grid().dim()));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(field.grid().points_per_axis()));
    for (double v : field.values()) detail::put_le<double>(os, v);
}

inline SpectralField read_snapshot(std::istream& is) {
    const auto dim = detail::get_le<std::uint32_t>(is);
    const auto n = detail::get_le<std::uint32_t>(is);
    GridSpec grid(static_cast<int>(dim), static_cast<int>(n));
    std::vector<double> v(grid.size());
    for (double& x : v) x = detail::get_le<double>(is);
    return {grid, std::move(v)};
}

}  // namespace sfcl
