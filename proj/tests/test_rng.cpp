#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "experts/rng.hpp"

using namespace experts;

TEST_CASE("philox4x32-10 known-answer vectors") {
    // Reference vectors for the 10-round 4x32 generator.
    auto b0 = Philox::block(0, 0, 0);
    CHECK(b0[0] == 0x6627e8d5u);
    CHECK(b0[1] == 0xe169c58du);
    CHECK(b0[2] == 0xbc57ac4cu);
    CHECK(b0[3] == 0x9b00dbd8u);

    auto b1 = Philox::block(0xffffffffffffffffull, 0xffffffffffffffffull,
                            0xffffffffffffffffull);
    CHECK(b1[0] == 0x408f276du);
    CHECK(b1[1] == 0x41c83b0eu);
    CHECK(b1[2] == 0xa20bc7c6u);
    CHECK(b1[3] == 0x6d5451fdu);

    // counter = {0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
    // key = {0xa4093822, 0x299f31d0}
    uint64_t ctr_lo = (0x85a308d3ull << 32) | 0x243f6a88ull;
    uint64_t ctr_hi = (0x03707344ull << 32) | 0x13198a2eull;
    uint64_t key = (0x299f31d0ull << 32) | 0xa4093822ull;
    auto b2 = Philox::block(key, ctr_hi, ctr_lo);
    CHECK(b2[0] == 0xd16cfe09u);
    CHECK(b2[1] == 0x94fdccebu);
    CHECK(b2[2] == 0x5001e420u);
    CHECK(b2[3] == 0x24126ea1u);
}

TEST_CASE("uniform draws land in [0,1) and replay exactly") {
    Philox a(42, 7), b(42, 7);
    for (int i = 0; i < 1000; ++i) {
        double u = a.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(u == b.uniform());
    }
}

TEST_CASE("streams with the same key differ") {
    Philox a(42, 0), b(42, 1);
    int same = 0;
    for (int i = 0; i < 100; ++i) {
        if (a.next_u64() == b.next_u64()) ++same;
    }
    CHECK(same == 0);
}

TEST_CASE("bounded stays in range and covers values") {
    Philox rng(3, 0);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 10000; ++i) {
        uint32_t v = rng.bounded(10);
        REQUIRE(v < 10);
        ++counts[v];
    }
    for (int c : counts) CHECK(c > 800);
}
