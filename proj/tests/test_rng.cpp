#include <doctest.h>

#include <cmath>
#include <set>

#include "faultlab/rng.hpp"

using namespace faultlab;

TEST_CASE("philox4x32-10 known-answer vectors") {
    // Reference vectors from the Random123 test suite.
    auto b = rng::philox4x32({0, 0, 0, 0}, {0, 0});
    CHECK(b[0] == 0x6627e8d5u);
    CHECK(b[1] == 0xe169c58du);
    CHECK(b[2] == 0xbc57ac4cu);
    CHECK(b[3] == 0x9b00dbd8u);

    b = rng::philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                        {0xffffffffu, 0xffffffffu});
    CHECK(b[0] == 0x408f276du);
    CHECK(b[1] == 0x41c83b0eu);
    CHECK(b[2] == 0xa20bc7c6u);
    CHECK(b[3] == 0x6d5451fdu);

    b = rng::philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                        {0xa4093822u, 0x299f31d0u});
    CHECK(b[0] == 0xd16cfe09u);
    CHECK(b[1] == 0x94fdccebu);
    CHECK(b[2] == 0x5001e420u);
    CHECK(b[3] == 0x24126ea1u);
}

TEST_CASE("unit_double lands in [0,1) and uses both words") {
    CHECK(rng::unit_double(0, 0) == 0.0);
    CHECK(rng::unit_double(0xffffffffu, 0xffffffffu) < 1.0);
    CHECK(rng::unit_double(0xffffffffu, 0xffffffffu) > 0.999999999);
    CHECK(rng::unit_double(0, 1 << 11) == doctest::Approx(0x1.0p-53));
}

TEST_CASE("substreams are independent of evaluation order") {
    auto s0 = rng::substream(42, rng::Domain::fault, 3, 7);
    // Same address, same value, regardless of what else was drawn.
    double a = s0.unit_at(1000);
    for (std::uint64_t i = 0; i < 100; ++i) (void)s0.unit_at(i);
    CHECK(s0.unit_at(1000) == a);

    // Different layer/lane/domain all give different streams.
    auto s1 = rng::substream(42, rng::Domain::fault, 4, 7);
    auto s2 = rng::substream(42, rng::Domain::fault, 3, 8);
    auto s3 = rng::substream(42, rng::Domain::dropout, 3, 7);
    CHECK(s1.unit_at(1000) != a);
    CHECK(s2.unit_at(1000) != a);
    CHECK(s3.unit_at(1000) != a);
}

TEST_CASE("stream uniforms have the right moments") {
    rng::Stream st(rng::substream(7, rng::Domain::shuffle, 0, 0));
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double u = st.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        sq += u * u;
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("next_below is unbiased over small ranges") {
    rng::Stream st(rng::substream(11, rng::Domain::shuffle, 0, 1));
    int counts[7] = {0};
    const int n = 70000;
    for (int i = 0; i < n; ++i) counts[st.next_below(7)]++;
    for (int c : counts) CHECK(std::abs(c - n / 7) < 600);
}

TEST_CASE("mix64 separates nearby inputs") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t a = 0; a < 100; ++a)
        for (std::uint64_t b = 0; b < 100; ++b)
            seen.insert(rng::mix64(a, b));
    CHECK(seen.size() == 100 * 100);
}
