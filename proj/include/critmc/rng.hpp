#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

// Counter-based RNG: Philox 4x32-10. Each (seed, stream) pair addresses an
// independent stream whose draws depend only on the draw counter, so ensembles
// are reproducible regardless of worker count or scheduling.

namespace critmc {

class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = 0xD2511F53ull * ctr[0];
            const std::uint64_t p1 = 0xCD9E8D57ull * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = Counter{hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }
};

/// One independent random stream, addressed by (seed, stream index).
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_{stream} {}

    std::uint64_t next_u64() {
        if (word_pos_ == 0) refill();
        const std::uint32_t hi = buf_[word_pos_ - 1];
        const std::uint32_t lo = buf_[word_pos_ - 2];
        word_pos_ -= 2;
        return (static_cast<std::uint64_t>(hi) << 32) | lo;
    }

    /// Uniform double in the open interval (0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }

    /// Standard normal via Box-Muller; draws are cached in pairs.
    double next_gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(theta);
        have_cached_ = true;
        return r * std::cos(theta);
    }

private:
    void refill() {
        const Philox4x32::Counter ctr{
            static_cast<std::uint32_t>(draw_), static_cast<std::uint32_t>(draw_ >> 32),
            static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
        buf_ = Philox4x32::block(ctr, key_);
        ++draw_;
        word_pos_ = 4;
    }

    Philox4x32::Key key_;
    std::uint64_t stream_ = 0;
    std::uint64_t draw_ = 0;
    Philox4x32::Counter buf_{};
    int word_pos_ = 0;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace critmc
