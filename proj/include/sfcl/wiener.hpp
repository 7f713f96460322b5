// Copyright 2026 The sfcl Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sfcl/errors.hpp"

namespace sfcl {

/// 64-bit FNV-1a, used for config hashes and increment digests.
class Fnv1a {
public:
    void update(const void* data, std::size_t len) noexcept {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
    }
    void update(double v) noexcept {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        update(&bits, sizeof bits);
    }
    std::uint64_t digest() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// Truncated cylindrical Wiener path W = sum_k beta_k e_k, k = 1..K.
///
/// Increments are drawn sequentially from an engine seeded by
/// (master_seed, stream_index); step n always receives the same K increments.
/// Jumping backwards replays the stream from the start.
class WienerPath {
public:
    WienerPath(std::uint64_t master_seed, std::uint64_t stream_index, int truncation)
        : master_seed_(master_seed), stream_index_(stream_index), truncation_(truncation) {
        if (truncation <= 0) throw ConfigError("Wiener path truncation must be positive");
        reset();
    }

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_index() const noexcept { return stream_index_; }
    int truncation() const noexcept { return truncation_; }

    /// Increments beta_k(t_{n+1}) - beta_k(t_n) for step n with step size dt.
    void increments(std::size_t step, double dt, std::span<double> out) {
        if (static_cast<int>(out.size()) != truncation_) throw ShapeError("increment buffer != K");
        if (step < next_step_) reset();
        while (next_step_ < step) {
            for (int k = 0; k < truncation_; ++k) (void)normal_(engine_);
            ++next_step_;
        }
        const double sd = std::sqrt(dt);
        for (auto& x : out) {
            x = sd * normal_(engine_);
            digest_.update(x);
        }
        ++next_step_;
    }

    /// Digest of every increment handed out since construction or the last reset.
    std::uint64_t digest() const noexcept { return digest_.digest(); }

private:
    void reset() {
        std::seed_seq seq{static_cast<std::uint32_t>(master_seed_),
                          static_cast<std::uint32_t>(master_seed_ >> 32),
                          static_cast<std::uint32_t>(stream_index_),
                          static_cast<std::uint32_t>(stream_index_ >> 32)};
        engine_.seed(seq);
        normal_.reset();
        next_step_ = 0;
        digest_ = Fnv1a{};
    }

    std::uint64_t master_seed_;
    std::uint64_t stream_index_;
    int truncation_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::size_t next_step_ = 0;
    Fnv1a digest_;
};

}  // namespace sfcl
