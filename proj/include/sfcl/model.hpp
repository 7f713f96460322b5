// Copyright 2026 The sfcl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// The model triple: flux F, nonlocal diffusion Phi with order theta, and the
// noise coefficients h_k. Builtin families, sampled assumption checks, and the
// difference-quotient fluxes used for moderate deviations.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sfcl/errors.hpp"
#include "sfcl/torus_field.hpp"

namespace sfcl {

using ScalarFn = std::function<double(double)>;

/// Flux F(u) = f(u) * direction. In 1D only direction[0] is used.
struct FluxSpec {
    std::string name;
    ScalarFn eval;
    ScalarFn deriv;
    ScalarFn second_deriv;  ///< may be empty; used by adjoint gradients
    double lipschitz_bound = 0.0;
    std::optional<double> second_deriv_bound;
    std::optional<double> linear_speed;  ///< set when f(u) = c u exactly
    std::array<double, 2> direction{1.0, 1.0};

    double operator()(double u) const { return eval(u); }

    static FluxSpec zero() { return linear(0.0); }

    static FluxSpec linear(double c) {
        FluxSpec s;
        s.name = "linear";
        s.eval = [c](double u) { return c * u; };
        s.deriv = [c](double) { return c; };
        s.second_deriv = [](double) { return 0.0; };
        s.lipschitz_bound = std::abs(c);
        s.second_deriv_bound = 0.0;
        s.linear_speed = c;
        return s;
    }

    /// Burgers flux u^2/2 continued linearly beyond |u| = M, so that F'(u) = clamp(u, -M, M).
    /// The clamp is what makes Burgers globally Lipschitz.
    static FluxSpec burgers_clamped(double clamp) {
        if (!(clamp > 0.0)) throw ParameterError("burgers clamp must be positive");
        const double m = clamp;
        FluxSpec s;
        s.name = "burgers_clamped";
        s.eval = [m](double u) {
            const double a = std::abs(u);
            return a <= m ? 0.5 * u * u : m * a - 0.5 * m * m;
        };
        s.deriv = [m](double u) { return std::clamp(u, -m, m); };
        s.second_deriv = [m](double u) { return std::abs(u) < m ? 1.0 : 0.0; };
        s.lipschitz_bound = m;
        s.second_deriv_bound = 1.0;
        return s;
    }

    /// Burgers with a C^2 clamp: F' follows u up to M - w, then a cubic Hermite
    /// blend reaches M with zero slope at M + w and stays there.
    static FluxSpec burgers_smooth(double clamp, double width) {
        if (!(clamp > 0.0) || !(width > 0.0) || width >= clamp) {
            throw ParameterError("burgers_smooth needs 0 < width < clamp");
        }
        const double lo = clamp - width;
        const double len = 2.0 * width;
        // Hermite data on [lo, lo + len]: p0 = lo, m0 = len, p1 = clamp, m1 = 0.
        auto blend = [=](double s) {
            const double s2 = s * s, s3 = s2 * s;
            return (2 * s3 - 3 * s2 + 1) * lo + (s3 - 2 * s2 + s) * len + (-2 * s3 + 3 * s2) * clamp;
        };
        auto blend_slope = [=](double s) {
            const double s2 = s * s;
            return ((6 * s2 - 6 * s) * lo + (3 * s2 - 4 * s + 1) * len + (-6 * s2 + 6 * s) * clamp) /
                   len;
        };
        auto blend_integral = [=](double s) {
            const double s2 = s * s, s3 = s2 * s, s4 = s3 * s;
            const double h00 = s - s3 + 0.5 * s4;
            const double h10 = 0.5 * s2 - 2.0 * s3 / 3.0 + 0.25 * s4;
            const double h01 = s3 - 0.5 * s4;
            return len * (h00 * lo + h10 * len + h01 * clamp);
        };
        const double f_lo = 0.5 * lo * lo;
        const double f_hi = f_lo + blend_integral(1.0);
        const double hi = lo + len;
        FluxSpec s;
        s.name = "burgers_smooth";
        s.eval = [=](double u) {
            const double a = std::abs(u);
            if (a <= lo) return 0.5 * a * a;
            if (a < hi) return f_lo + blend_integral((a - lo) / len);
            return f_hi + clamp * (a - hi);
        };
        s.deriv = [=](double u) {
            const double a = std::abs(u);
            double d;
            if (a <= lo) d = a;
            else if (a < hi) d = blend((a - lo) / len);
            else d = clamp;
            return std::copysign(d, u);
        };
        s.second_deriv = [=](double u) {
            const double a = std::abs(u);
            if (a <= lo) return 1.0;
            if (a < hi) return blend_slope((a - lo) / len);
            return 0.0;
        };
        s.lipschitz_bound = clamp;
        s.second_deriv_bound = 1.5;
        return s;
    }

    static FluxSpec custom(std::string name, ScalarFn f, ScalarFn df, double lipschitz,
                           ScalarFn d2f = {}) {
        FluxSpec s;
        s.name = std::move(name);
        s.eval = std::move(f);
        s.deriv = std::move(df);
        s.second_deriv = std::move(d2f);
        s.lipschitz_bound = lipschitz;
        return s;
    }
};

/// Nonlocal diffusion Phi with fractional order theta.
struct DiffusionSpec {
    std::string name;
    ScalarFn eval;
    ScalarFn deriv;
    double theta = 0.5;
    double lipschitz_bound = 0.0;
    std::optional<double> linear_scale;  ///< set when Phi(u) = a u exactly

    double operator()(double u) const { return eval(u); }

    bool is_zero() const { return linear_scale && *linear_scale == 0.0; }

    static DiffusionSpec linear(double a, double theta) {
        DiffusionSpec s;
        s.name = "linear";
        s.eval = [a](double u) { return a * u; };
        s.deriv = [a](double) { return a; };
        s.theta = theta;
        s.lipschitz_bound = std::abs(a);
        s.linear_scale = a;
        return s;
    }

    static DiffusionSpec zero(double theta) { return linear(0.0, theta); }

    /// Phi(u) = a tanh(u): nondecreasing, Lipschitz a, degenerate for large |u|.
    static DiffusionSpec saturating(double a, double theta) {
        DiffusionSpec s;
        s.name = "saturating";
        s.eval = [a](double u) { return a * std::tanh(u); };
        s.deriv = [a](double u) {
            const double c = std::cosh(u);
            return a / (c * c);
        };
        s.theta = theta;
        s.lipschitz_bound = std::abs(a);
        return s;
    }

    static DiffusionSpec custom(std::string name, ScalarFn f, ScalarFn df, double theta,
                                double lipschitz) {
        DiffusionSpec s;
        s.name = std::move(name);
        s.eval = std::move(f);
        s.deriv = std::move(df);
        s.theta = theta;
        s.lipschitz_bound = lipschitz;
        return s;
    }
};

enum class NoiseFamily { diagonal_decay, additive, affine, custom };

inline std::string to_string(NoiseFamily f) {
    switch (f) {
        case NoiseFamily::diagonal_decay: return "diagonal_decay";
        case NoiseFamily::additive: return "additive";
        case NoiseFamily::affine: return "affine";
        case NoiseFamily::custom: return "custom";
    }
    return "unknown";
}

/// Truncated noise coefficients h_k(x, u), k = 1..K.
///
/// Affine families (h_k(x,u) = offset_k(x) + slope_k u) are tabulated on the
/// grid by NoiseBasis; custom families are evaluated pointwise.
struct NoiseSpec {
    std::string name;
    NoiseFamily family = NoiseFamily::custom;
    int truncation = 0;
    double decay_exponent = 1.0;
    double a = 1.0;
    double b = 1.0;
    double growth_const = 0.0;
    double lipschitz_const = 0.0;
    std::function<double(int, Point, double)> h;       ///< h(k, x, u), k is 1-based
    std::function<double(int, Point, double)> dh_du;   ///< partial derivative in u
    std::function<double(int, Point)> offset;          ///< affine families only
    std::vector<double> slope;                         ///< affine families only

    bool is_affine() const { return static_cast<bool>(offset); }
    bool is_additive() const {
        return is_affine() && std::all_of(slope.begin(), slope.end(), [](double s) { return s == 0.0; });
    }

    double operator()(int k, Point x, double u) const { return h(k, x, u); }

    /// h_k(x,u) = k^{-q} (a sin(2 pi k x) + b u).
    static NoiseSpec diagonal_decay(int K, double q = 1.0, double a = 1.0, double b = 1.0) {
        check_decay(K, q);
        std::vector<double> slopes(K);
        double zeta_q = 0.0, zeta_q1 = 0.0;
        for (int k = 1; k <= K; ++k) {
            const double w = std::pow(static_cast<double>(k), -q);
            slopes[k - 1] = w * b;
            zeta_q += w * w;
            zeta_q1 += w * w * k * k;
        }
        auto s = affine(
            "diagonal_decay", K,
            [q, a](int k, Point x) { return std::pow(static_cast<double>(k), -q) * a * std::sin(kTwoPi * k * x[0]); },
            std::move(slopes), 2.0 * zeta_q * std::max(a * a, b * b),
            2.0 * std::max(kFourPiSq * a * a * zeta_q1, b * b * zeta_q));
        s.family = NoiseFamily::diagonal_decay;
        s.decay_exponent = q;
        s.a = a;
        s.b = b;
        return s;
    }

    /// h_k(x,u) = a k^{-q} cos(2 pi k x), independent of u.
    static NoiseSpec additive(int K, double q = 1.0, double a = 1.0) {
        check_decay(K, q);
        double zeta_q = 0.0, zeta_q1 = 0.0;
        for (int k = 1; k <= K; ++k) {
            const double w = std::pow(static_cast<double>(k), -q);
            zeta_q += w * w;
            zeta_q1 += w * w * k * k;
        }
        auto s = affine(
            "additive", K,
            [q, a](int k, Point x) { return std::pow(static_cast<double>(k), -q) * a * std::cos(kTwoPi * k * x[0]); },
            std::vector<double>(K, 0.0), a * a * zeta_q, kFourPiSq * a * a * zeta_q1);
        s.family = NoiseFamily::additive;
        s.decay_exponent = q;
        s.a = a;
        s.b = 0.0;
        return s;
    }

    static NoiseSpec affine(std::string name, int K, std::function<double(int, Point)> offset,
                            std::vector<double> slopes, double growth, double lipschitz) {
        if (K <= 0) throw ConfigError("noise truncation K must be positive");
        if (static_cast<int>(slopes.size()) != K) throw ShapeError("affine noise: slope count != K");
        NoiseSpec s;
        s.name = std::move(name);
        s.family = NoiseFamily::affine;
        s.truncation = K;
        s.growth_const = growth;
        s.lipschitz_const = lipschitz;
        s.offset = offset;
        s.slope = slopes;
        s.h = [offset, slopes](int k, Point x, double u) { return offset(k, x) + slopes[k - 1] * u; };
        s.dh_du = [slopes](int k, Point, double) { return slopes[k - 1]; };
        return s;
    }

    static NoiseSpec custom(std::string name, int K, std::function<double(int, Point, double)> h,
                            std::function<double(int, Point, double)> dh_du, double growth,
                            double lipschitz) {
        if (K <= 0) throw ConfigError("noise truncation K must be positive");
        NoiseSpec s;
        s.name = std::move(name);
        s.family = NoiseFamily::custom;
        s.truncation = K;
        s.h = std::move(h);
        s.dh_du = std::move(dh_du);
        s.growth_const = growth;
        s.lipschitz_const = lipschitz;
        return s;
    }

private:
    static void check_decay(int K, double q) {
        if (K <= 0) throw ConfigError("noise truncation K must be positive");
        if (!(q > 0.5)) throw ParameterError("noise decay exponent q must exceed 1/2");
    }
};

struct ModelSpec {
    FluxSpec flux;
    DiffusionSpec diffusion;
    NoiseSpec noise;

    double theta() const { return diffusion.theta; }
};

// ---------------------------------------------------------------------------
// Grid tabulation of the noise coefficients
// ---------------------------------------------------------------------------

/// Noise coefficients tabulated on one grid. For affine families,
/// sum_k h_k(x_j, u_j) c_k = sum_k c_k offset_kj + u_j sum_k c_k slope_k.
class NoiseBasis {
public:
    NoiseBasis(const NoiseSpec& spec, const GridSpec& grid) : spec_(spec), grid_(grid) {
        const std::size_t n = grid.size();
        nodes_.resize(n);
        for (std::size_t j = 0; j < n; ++j) nodes_[j] = grid.node(j);
        if (spec.is_affine()) {
            offsets_.resize(static_cast<std::size_t>(spec.truncation) * n);
            for (int k = 1; k <= spec.truncation; ++k) {
                for (std::size_t j = 0; j < n; ++j) {
                    offsets_[(k - 1) * n + j] = spec.offset(k, nodes_[j]);
                }
            }
        }
    }

    int truncation() const { return spec_.truncation; }
    const GridSpec& grid() const { return grid_; }
    const NoiseSpec& spec() const { return spec_; }

    /// out_j += scale * sum_k h_k(x_j, u_j) coeffs_k
    void accumulate(std::span<const double> u, std::span<const double> coeffs, double scale,
                    std::span<double> out) const {
        check(u, coeffs, out);
        const std::size_t n = u.size();
        const int K = spec_.truncation;
        if (spec_.is_affine()) {
            double slope_sum = 0.0;
            for (int k = 0; k < K; ++k) slope_sum += spec_.slope[k] * coeffs[k];
            for (std::size_t j = 0; j < n; ++j) {
                double acc = slope_sum * u[j];
                for (int k = 0; k < K; ++k) acc += coeffs[k] * offsets_[k * n + j];
                out[j] += scale * acc;
            }
        } else {
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int k = 0; k < K; ++k) acc += coeffs[k] * spec_.h(k + 1, nodes_[j], u[j]);
                out[j] += scale * acc;
            }
        }
    }

    /// out_j = sum_k d/du h_k(x_j, u_j) coeffs_k
    void derivative(std::span<const double> u, std::span<const double> coeffs,
                    std::span<double> out) const {
        check(u, coeffs, out);
        const int K = spec_.truncation;
        for (std::size_t j = 0; j < u.size(); ++j) {
            double acc = 0.0;
            if (spec_.is_affine()) {
                for (int k = 0; k < K; ++k) acc += spec_.slope[k] * coeffs[k];
            } else {
                for (int k = 0; k < K; ++k) acc += coeffs[k] * spec_.dh_du(k + 1, nodes_[j], u[j]);
            }
            out[j] = acc;
        }
    }

    /// h_k(x_j, u_j) for one k (1-based).
    double value(int k, std::size_t j, double u) const {
        if (spec_.is_affine()) return offsets_[(k - 1) * nodes_.size() + j] + spec_.slope[k - 1] * u;
        return spec_.h(k, nodes_[j], u);
    }

private:
    void check(std::span<const double> u, std::span<const double> coeffs,
               std::span<const double> out) const {
        if (static_cast<int>(coeffs.size()) != spec_.truncation) {
            throw ShapeError("noise coefficients have length " + std::to_string(coeffs.size()) +
                             ", expected K = " + std::to_string(spec_.truncation));
        }
        if (u.size() != nodes_.size() || out.size() != nodes_.size()) {
            throw ShapeError("noise field: state size does not match grid");
        }
    }

    NoiseSpec spec_;
    GridSpec grid_;
    std::vector<Point> nodes_;
    std::vector<double> offsets_;
};

/// sum_k h_k(x, u(x)) coeffs_k, evaluated nodewise.
inline SpectralField noise_field(const NoiseSpec& noise, const SpectralField& u,
                                 std::span<const double> coeffs) {
    NoiseBasis basis(noise, u.grid());
    std::vector<double> out(u.size(), 0.0);
    basis.accumulate(u.values(), coeffs, 1.0, out);
    return {u.grid(), std::move(out)};
}

// ---------------------------------------------------------------------------
// Assumption checks
// ---------------------------------------------------------------------------

struct AssumptionCheck {
    std::string name;
    bool passed = true;
    double worst_ratio = 0.0;  ///< largest sampled ratio against the declared bound
    std::string detail;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }

    const AssumptionCheck& check(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return c;
        throw std::out_of_range("no assumption check named " + name);
    }
};

namespace detail {

/// Additive recurrence (Kronecker) sequence in [0,1)^D using generalized golden ratios.
template <std::size_t D>
class KroneckerSequence {
public:
    KroneckerSequence() {
        double phi = 2.0;
        for (int i = 0; i < 64; ++i) phi = std::pow(1.0 + phi, 1.0 / (D + 1));
        double p = 1.0;
        for (std::size_t d = 0; d < D; ++d) {
            p /= phi;
            alpha_[d] = p;
        }
    }

    std::array<double, D> operator()(std::size_t n) const {
        std::array<double, D> out{};
        for (std::size_t d = 0; d < D; ++d) {
            const double v = 0.5 + alpha_[d] * static_cast<double>(n + 1);
            out[d] = v - std::floor(v);
        }
        return out;
    }

private:
    std::array<double, D> alpha_{};
};

}  // namespace detail

/// Sampled verification of the flux, diffusion and noise assumptions on the
/// state box [-box, box]. Each check fails if violated beyond 1e-9 slack.
inline ValidationReport validate_model(const ModelSpec& model, int sample_count, double box = 4.0) {
    if (sample_count < 100) throw ConfigError("validate_model needs at least 100 samples");
    if (model.noise.truncation <= 0) throw ConfigError("noise truncation K must be positive");
    if (!(model.diffusion.theta > 0.0 && model.diffusion.theta < 1.0)) {
        throw ConfigError("diffusion theta must lie in (0, 1)");
    }
    constexpr double slack = 1e-9;
    const auto to_box = [box](double s) { return box * (2.0 * s - 1.0); };
    ValidationReport report;

    detail::KroneckerSequence<2> pairs;
    detail::KroneckerSequence<4> quads;

    {
        AssumptionCheck lip;
        lip.name = "flux_lipschitz";
        AssumptionCheck der;
        der.name = "flux_derivative";
        const auto& F = model.flux;
        constexpr double h = 1e-5;
        for (int i = 0; i < sample_count; ++i) {
            const auto s = pairs(i);
            const double a = to_box(s[0]), b = to_box(s[1]);
            if (a != b) {
                const double ratio = std::abs(F(a) - F(b)) / std::abs(a - b);
                const double r = F.lipschitz_bound > 0 ? ratio / F.lipschitz_bound
                                                       : (ratio > slack ? INFINITY : 0.0);
                lip.worst_ratio = std::max(lip.worst_ratio, r);
            }
            const double fd = (F(a + h) - F(a - h)) / (2 * h);
            const double d = F.deriv(a);
            der.worst_ratio = std::max(der.worst_ratio, std::abs(fd - d) / std::max(1.0, std::abs(d)));
        }
        lip.passed = lip.worst_ratio <= 1.0 + slack;
        der.passed = der.worst_ratio <= 1e-6;
        lip.detail = "max |F(a)-F(b)| / (L |a-b|)";
        der.detail = "max relative central-difference mismatch of F'";
        report.checks.push_back(lip);
        report.checks.push_back(der);
    }
    {
        AssumptionCheck mono;
        mono.name = "diffusion_monotone";
        AssumptionCheck coer;
        coer.name = "diffusion_cocoercive";
        const auto& P = model.diffusion;
        const double L = P.lipschitz_bound;
        for (int i = 0; i < sample_count; ++i) {
            const auto s = pairs(i);
            double a = to_box(s[0]), b = to_box(s[1]);
            if (a > b) std::swap(a, b);
            const double pa = P(a), pb = P(b);
            // decrease relative to the larger magnitude
            const double scale = std::max({1.0, std::abs(pa), std::abs(pb)});
            mono.worst_ratio = std::max(mono.worst_ratio, (pa - pb) / scale);
            const double dphi = pb - pa;
            const double lhs = dphi * (b - a);
            const double rhs = L > 0 ? dphi * dphi / L : 0.0;
            if (L == 0 && dphi != 0) coer.worst_ratio = INFINITY;
            coer.worst_ratio = std::max(coer.worst_ratio, (rhs - lhs) / std::max(1.0, std::abs(rhs)));
        }
        mono.passed = mono.worst_ratio <= slack;
        coer.passed = coer.worst_ratio <= slack;
        mono.detail = "max (Phi(a)-Phi(b)) over sampled a <= b";
        coer.detail = "max of |dPhi|^2/L - dPhi (b-a)";
        report.checks.push_back(mono);
        report.checks.push_back(coer);
    }
    {
        AssumptionCheck growth;
        growth.name = "noise_growth";
        AssumptionCheck lip;
        lip.name = "noise_lipschitz";
        const auto& N = model.noise;
        const int K = N.truncation;
        double sup_growth = 0.0, sup_lip = 0.0;
        for (int i = 0; i < sample_count; ++i) {
            const auto s = quads(i);
            const Point x{s[0], 0.0}, xb{s[2], 0.0};
            const double u = to_box(s[1]), ub = to_box(s[3]);
            double g = 0.0, l = 0.0;
            for (int k = 1; k <= K; ++k) {
                const double hv = N(k, x, u);
                g += hv * hv;
                const double d = hv - N(k, xb, ub);
                l += d * d;
            }
            sup_growth = std::max(sup_growth, g / (1.0 + u * u));
            const double dist = (x[0] - xb[0]) * (x[0] - xb[0]) + (u - ub) * (u - ub);
            if (dist > 0) sup_lip = std::max(sup_lip, l / dist);
        }
        growth.worst_ratio = sup_growth;
        lip.worst_ratio = sup_lip;
        growth.passed = std::isfinite(sup_growth) && sup_growth <= N.growth_const * (1.0 + slack) + slack;
        lip.passed = std::isfinite(sup_lip) && sup_lip <= N.lipschitz_const * (1.0 + slack) + slack;
        growth.detail = "sampled sup of sum_k |h_k|^2 / (1 + u^2); declared " +
                        std::to_string(N.growth_const);
        lip.detail = "sampled sup of sum_k |dh_k|^2 / (|dx|^2 + |du|^2); declared " +
                     std::to_string(N.lipschitz_const);
        report.checks.push_back(growth);
        report.checks.push_back(lip);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Moderate-deviation difference quotients
// ---------------------------------------------------------------------------

/// Default deviation scale Lambda(eps) = eps^{-1/4}.
inline double default_deviation_scale(double eps) { return std::pow(eps, -0.25); }

/// F_bar(xi) = (F(s xi + 1) - F(1)) / s, with s = sqrt(eps) Lambda(eps).
/// s == 0 returns the linearization xi -> F'(1) xi.
inline FluxSpec build_shifted_flux_at_scale(const FluxSpec& base, double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw ParameterError("shift scale sqrt(eps) Lambda must be in [0, 1]");
    if (s == 0.0) {
        auto lin = FluxSpec::linear(base.deriv(1.0));
        lin.name = base.name + "_shifted";
        lin.direction = base.direction;
        lin.lipschitz_bound = base.lipschitz_bound;
        return lin;
    }
    FluxSpec out = base;
    out.name = base.name + "_shifted";
    const double f1 = base.eval(1.0);
    out.eval = [f = base.eval, f1, s](double xi) { return (f(s * xi + 1.0) - f1) / s; };
    out.deriv = [df = base.deriv, s](double xi) { return df(s * xi + 1.0); };
    if (base.second_deriv) {
        out.second_deriv = [d2 = base.second_deriv, s](double xi) { return s * d2(s * xi + 1.0); };
    }
    if (base.second_deriv_bound) out.second_deriv_bound = *base.second_deriv_bound * s;
    if (base.linear_speed) out.linear_speed = base.linear_speed;
    return out;
}

inline DiffusionSpec build_shifted_flux_at_scale(const DiffusionSpec& base, double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw ParameterError("shift scale sqrt(eps) Lambda must be in [0, 1]");
    if (s == 0.0) {
        auto lin = DiffusionSpec::linear(base.deriv(1.0), base.theta);
        lin.name = base.name + "_shifted";
        lin.lipschitz_bound = base.lipschitz_bound;
        return lin;
    }
    DiffusionSpec out = base;
    out.name = base.name + "_shifted";
    const double p1 = base.eval(1.0);
    out.eval = [f = base.eval, p1, s](double xi) { return (f(s * xi + 1.0) - p1) / s; };
    out.deriv = [df = base.deriv, s](double xi) { return df(s * xi + 1.0); };
    return out;
}

template <class Spec>
Spec build_shifted_flux(const Spec& base, double eps, double lambda_eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("shifted flux: eps must lie in (0, 1)");
    if (!(lambda_eps > 0.0)) throw ParameterError("shifted flux: Lambda(eps) must be positive");
    return build_shifted_flux_at_scale(base, std::sqrt(eps) * lambda_eps);
}

struct ShiftedModel {
    double eps = 0.0;
    double lambda_eps = 0.0;
    FluxSpec shifted_flux;
    DiffusionSpec shifted_diffusion;
};

inline ShiftedModel build_shifted_model(const ModelSpec& base, double eps, double lambda_eps) {
    return {eps, lambda_eps, build_shifted_flux(base.flux, eps, lambda_eps),
            build_shifted_flux(base.diffusion, eps, lambda_eps)};
}

/// Constant-coefficient model obtained by linearizing F and Phi at u_bar and
/// freezing the noise coefficients at u_bar: h_k(x, u) -> h_k(x, u_bar).
inline ModelSpec linearize_at(const ModelSpec& model, double u_bar = 1.0) {
    ModelSpec lin;
    lin.flux = FluxSpec::linear(model.flux.deriv(u_bar));
    lin.flux.direction = model.flux.direction;
    lin.diffusion = DiffusionSpec::linear(model.diffusion.deriv(u_bar), model.diffusion.theta);
    const auto& src = model.noise;
    auto frozen = [h = src.h, u_bar](int k, Point x) { return h(k, x, u_bar); };
    lin.noise = NoiseSpec::affine(src.name + "_frozen", src.truncation, frozen,
                                  std::vector<double>(src.truncation, 0.0), src.growth_const * (1 + u_bar * u_bar),
                                  src.lipschitz_const);
    return lin;
}

}  // namespace sfcl
