// Copyright 2026 The sfcl Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sfcl/errors.hpp"

namespace sfcl {

/// Deterministic control l(t) = sum_k l_k(t) e_k, piecewise constant on
/// [t_i, t_{i+1}). Coefficients are stored row-major (interval, k).
class Control {
public:
    Control(std::vector<double> breakpoints, std::vector<double> coeffs, int truncation)
        : times_(std::move(breakpoints)), coeffs_(std::move(coeffs)), truncation_(truncation) {
        if (truncation_ <= 0) throw ConfigError("control truncation must be positive");
        if (times_.size() < 2) throw ConfigError("control needs at least one interval");
        if (times_.front() != 0.0) throw ConfigError("control must start at t = 0");
        for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
            if (!(times_[i + 1] > times_[i])) throw ConfigError("control breakpoints must increase");
        }
        if (coeffs_.size() != intervals() * static_cast<std::size_t>(truncation_)) {
            throw ShapeError("control coefficients: expected " +
                             std::to_string(intervals() * truncation_) + " values, got " +
                             std::to_string(coeffs_.size()));
        }
        for (double c : coeffs_)
            if (!std::isfinite(c)) throw ParameterError("control coefficients must be finite");
    }

    static Control zero(double horizon, int truncation) {
        return {{0.0, horizon}, std::vector<double>(truncation, 0.0), truncation};
    }

    /// m equal intervals on [0, horizon] with the given coefficients.
    static Control uniform(double horizon, int intervals, std::vector<double> coeffs, int truncation) {
        std::vector<double> t(intervals + 1);
        for (int i = 0; i <= intervals; ++i) t[i] = horizon * i / intervals;
        t.back() = horizon;
        return {std::move(t), std::move(coeffs), truncation};
    }

    std::size_t intervals() const noexcept { return times_.size() - 1; }
    int truncation() const noexcept { return truncation_; }
    double horizon() const noexcept { return times_.back(); }
    std::span<const double> breakpoints() const noexcept { return times_; }
    std::span<const double> coefficients() const noexcept { return coeffs_; }

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(coeffs_).subspan(i * truncation_, truncation_);
    }

    /// Interval containing t (right-continuous; t >= horizon maps to the last interval).
    std::size_t interval_at(double t) const {
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        if (it == times_.begin()) return 0;
        return std::min<std::size_t>(static_cast<std::size_t>(it - times_.begin()) - 1, intervals() - 1);
    }

    std::span<const double> value_at(double t) const { return row(interval_at(t)); }

    /// 1/2 int_0^T |l(t)|^2 dt.
    double energy() const {
        double e = 0.0;
        for (std::size_t i = 0; i < intervals(); ++i) {
            double s = 0.0;
            for (double c : row(i)) s += c * c;
            e += (times_[i + 1] - times_[i]) * s;
        }
        return 0.5 * e;
    }

    /// int_0^T |l(t)|_{l^1} dt, the exponent of the Gronwall-type skeleton bound.
    double l1_time_integral() const {
        double e = 0.0;
        for (std::size_t i = 0; i < intervals(); ++i) {
            double s = 0.0;
            for (double c : row(i)) s += c * c;
            e += (times_[i + 1] - times_[i]) * std::sqrt(s);
        }
        return e;
    }

    /// Membership in S_N: int |l|^2 <= N.
    bool in_level_set(double n_bound) const { return 2.0 * energy() <= n_bound; }

    Control scaled(double a) const {
        std::vector<double> c(coeffs_);
        for (double& x : c) x *= a;
        return {times_, std::move(c), truncation_};
    }

    friend Control operator+(const Control& a, const Control& b) {
        if (a.times_ != b.times_ || a.truncation_ != b.truncation_) {
            throw ShapeError("controls with different breakpoints cannot be added");
        }
        std::vector<double> c(a.coeffs_);
        for (std::size_t i = 0; i < c.size(); ++i) c[i] += b.coeffs_[i];
        return {a.times_, std::move(c), a.truncation_};
    }

    /// Rows "t_start,t_end,l_1,...,l_K". Blank lines, '#' comments and a
    /// non-numeric header line are skipped. Intervals must be contiguous.
    static Control read_csv(std::istream& is) {
        std::vector<double> times, coeffs;
        int K = -1;
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            std::vector<double> vals;
            std::stringstream ss(line);
            std::string cell;
            bool numeric = true;
            while (std::getline(ss, cell, ',')) {
                try {
                    std::size_t pos = 0;
                    vals.push_back(std::stod(cell, &pos));
                } catch (const std::exception&) {
                    numeric = false;
                    break;
                }
            }
            if (!numeric) {
                if (times.empty() && K < 0) continue;
                throw ConfigError("control csv line " + std::to_string(lineno) + ": non-numeric value");
            }
            if (vals.size() < 3) {
                throw ConfigError("control csv line " + std::to_string(lineno) +
                                  ": need t_start, t_end and at least one coefficient");
            }
            const int k = static_cast<int>(vals.size()) - 2;
            if (K < 0) K = k;
            if (k != K) throw ConfigError("control csv line " + std::to_string(lineno) + ": ragged row");
            if (times.empty()) times.push_back(vals[0]);
            else if (vals[0] != times.back()) {
                throw ConfigError("control csv line " + std::to_string(lineno) + ": intervals not contiguous");
            }
            times.push_back(vals[1]);
            coeffs.insert(coeffs.end(), vals.begin() + 2, vals.end());
        }
        if (K < 0) throw ConfigError("control csv: no rows");
        return {std::move(times), std::move(coeffs), K};
    }

    void write_csv(std::ostream& os) const {
        os.precision(17);
        os << "t_start,t_end";
        for (int k = 1; k <= truncation_; ++k) os << ",l_" << k;
        os << '\n';
        for (std::size_t i = 0; i < intervals(); ++i) {
            os << times_[i] << ',' << times_[i + 1];
            for (double c : row(i)) os << ',' << c;
            os << '\n';
        }
    }

private:
    std::vector<double> times_;
    std::vector<double> coeffs_;
    int truncation_;
};

}  // namespace sfcl
