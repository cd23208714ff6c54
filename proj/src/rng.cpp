#include "faultlab/rng.hpp"

namespace faultlab::rng {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline void round_once(std::uint32_t c[4], std::uint32_t k0, std::uint32_t k1) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    std::uint32_t n0 = hi1 ^ c[1] ^ k0;
    std::uint32_t n1 = lo1;
    std::uint32_t n2 = hi0 ^ c[3] ^ k1;
    std::uint32_t n3 = lo0;
    c[0] = n0;
    c[1] = n1;
    c[2] = n2;
    c[3] = n3;
}

} // namespace

Block philox4x32(Counter ctr, Key key) {
    std::uint32_t c[4] = {ctr.c0, ctr.c1, ctr.c2, ctr.c3};
    std::uint32_t k0 = key.k0, k1 = key.k1;
    round_once(c, k0, k1);
    for (int r = 1; r < 10; ++r) {
        k0 += kWeyl0;
        k1 += kWeyl1;
        round_once(c, k0, k1);
    }
    return {c[0], c[1], c[2], c[3]};
}

Key key_from_seed(std::uint64_t seed) {
    return Key{static_cast<std::uint32_t>(seed),
               static_cast<std::uint32_t>(seed >> 32)};
}

std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    // SplitMix64 finalizer over the sum; good avalanche, cheap.
    std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(const char* data, std::size_t len) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 0x100000001B3ull;
    }
    return h;
}

std::uint32_t Stream::next_below(std::uint32_t n) {
    if (n == 0) return 0;
    // Rejection sampling keeps the distribution exactly uniform.
    std::uint32_t limit = 0xFFFFFFFFu - (0xFFFFFFFFu % n + 1) % n;
    std::uint32_t x = next_u32();
    while (x > limit) x = next_u32();
    return x % n;
}

} // namespace faultlab::rng
