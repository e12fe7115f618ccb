#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace proxgt {

// Counter-based RNG (Philox4x64-10, Salmon et al. SC'11). A stream is keyed
// by (seed, purpose, node) and addressed by (iteration, draw); distinct keys
// and counters give statistically independent outputs without any shared
// state, so per-node sampling is reproducible regardless of evaluation order.
namespace rng {

// Stream purposes keep unrelated consumers of the same seed from colliding.
enum class Purpose : std::uint64_t {
    Synthesis = 1,
    Batch = 2,
    Pilot = 3,
    Proxy = 4,
    Init = 5,
    Shuffle = 6,
    Topology = 7,
    Test = 9,
};

namespace detail {

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
    unsigned __int128 prod = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(prod >> 64);
    lo = static_cast<std::uint64_t>(prod);
}

inline constexpr std::uint64_t kPhiloxM0 = 0xD2E7470EE14C6C93ULL;
inline constexpr std::uint64_t kPhiloxM1 = 0xCA5A826395121157ULL;
inline constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline std::array<std::uint64_t, 4> philox4x64(std::array<std::uint64_t, 4> ctr,
                                               std::array<std::uint64_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint64_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

}  // namespace detail

// One logical random stream: 2^64 blocks of 4 uint64 words each.
class Stream {
public:
    Stream(std::uint64_t seed, Purpose purpose, std::uint64_t node, std::uint64_t iteration,
           std::uint64_t draw = 0)
        : key_{seed, static_cast<std::uint64_t>(purpose)},
          base_{node, iteration, draw, 0},
          block_(0),
          word_(4),
          have_spare_(false),
          spare_(0.0) {}

    std::uint64_t next_u64() {
        if (word_ == 4) {
            auto ctr = base_;
            ctr[3] = block_++;
            buf_ = detail::philox4x64(ctr, key_);
            word_ = 0;
        }
        return buf_[word_++];
    }

    // Uniform double in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, bound) via rejection (no modulo bias).
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    // Standard normal via Box-Muller; the spare is cached per stream.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        u2 = next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::array<std::uint64_t, 2> key_;
    std::array<std::uint64_t, 4> base_;
    std::uint64_t block_;
    std::array<std::uint64_t, 4> buf_{};
    int word_;
    bool have_spare_;
    double spare_;
};

}  // namespace rng
}  // namespace proxgt
