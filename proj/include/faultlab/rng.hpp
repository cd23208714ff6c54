#pragma once

#include <array>
#include <cstdint>
#include <utility>

namespace faultlab::rng {

// Counter-based random streams built on Philox4x32-10 (Salmon et al.,
// "Parallel random numbers: as easy as 1, 2, 3"). Every draw is a pure
// function of (key, counter), so any (seed, purpose, layer, realization,
// input, element) tuple addresses its own value independently of
// evaluation order or thread count. This is what makes Monte-Carlo
// sweeps reproducible under any parallel schedule.

struct Key {
    std::uint32_t k0 = 0, k1 = 0;
};

struct Counter {
    std::uint32_t c0 = 0, c1 = 0, c2 = 0, c3 = 0;
};

using Block = std::array<std::uint32_t, 4>;

Block philox4x32(Counter ctr, Key key);

Key key_from_seed(std::uint64_t seed);

// SplitMix64-style combiner for deriving child seeds (record seeds,
// per-model seeds) from a parent seed and a salt.
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

// 64-bit FNV-1a, used to fold string ids into seed material.
std::uint64_t fnv1a(const char* data, std::size_t len);

// Two u32 words -> double in [0,1) with full 53-bit resolution.
inline double unit_double(std::uint32_t hi, std::uint32_t lo) {
    std::uint64_t u = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return static_cast<double>(u >> 11) * 0x1.0p-53;
}

// Purpose tag carried in the top 4 bits of counter word c3. Draws from
// distinct domains can never collide regardless of the low bits.
enum class Domain : std::uint32_t {
    glorot_init = 1,
    dropout = 2,
    shuffle = 3,
    fault = 4,
    synth_data = 5,
};

inline std::uint32_t domain_tag(Domain d, std::uint32_t low) {
    return (static_cast<std::uint32_t>(d) << 28) | (low & 0x0FFFFFFFu);
}

// One (key, c2, c3) slice of counter space, addressed by a 64-bit element
// index in (c1, c0). Each index yields one block == two doubles.
struct Substream {
    Key key;
    std::uint32_t lane = 0; // -> c2
    std::uint32_t tag = 0;  // -> c3, includes the Domain

    Block block_at(std::uint64_t i) const {
        return philox4x32({static_cast<std::uint32_t>(i),
                           static_cast<std::uint32_t>(i >> 32), lane, tag},
                          key);
    }

    double unit_at(std::uint64_t i) const {
        Block b = block_at(i);
        return unit_double(b[0], b[1]);
    }

    std::pair<double, double> pair_at(std::uint64_t i) const {
        Block b = block_at(i);
        return {unit_double(b[0], b[1]), unit_double(b[2], b[3])};
    }
};

inline Substream substream(std::uint64_t seed, Domain d, std::uint32_t low,
                           std::uint32_t lane) {
    return Substream{key_from_seed(seed), lane, domain_tag(d, low)};
}

// Sequential view over a substream for consumers whose draw count is not
// known up front (shuffles, rejection sampling).
class Stream {
public:
    explicit Stream(Substream s) : s_(s) {}

    std::uint32_t next_u32() {
        if (word_ == 4) {
            cur_ = s_.block_at(block_++);
            word_ = 0;
        }
        return cur_[word_++];
    }

    double next_unit() {
        std::uint32_t hi = next_u32();
        std::uint32_t lo = next_u32();
        return unit_double(hi, lo);
    }

    // Unbiased integer in [0, n) via rejection.
    std::uint32_t next_below(std::uint32_t n);

private:
    Substream s_;
    Block cur_{};
    std::uint64_t block_ = 0;
    int word_ = 4;
};

} // namespace faultlab::rng
