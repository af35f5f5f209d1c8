#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "experts/rng.hpp"
#include "experts/units.hpp"

using namespace experts;

namespace {

ModelConfig cfg_of(int blocks, int d, int heads) {
    ModelConfig c;
    c.n_blocks = blocks;
    c.d_model = d;
    c.n_heads = heads;
    c.vocab_size = 16;
    c.max_seq_len = 8;
    return c;
}

} // namespace

TEST_CASE("unit_count matches 9*D*L at the default feed-forward width") {
    CHECK(unit_count(cfg_of(36, 1280, 16)) == 414720);
    CHECK(unit_count(cfg_of(1, 4, 1)) == 36);
    CHECK(unit_count(cfg_of(4, 64, 4)) == 2304);

    Philox rng(99);
    for (int i = 0; i < 20; ++i) {
        int heads = 1 + static_cast<int>(rng.bounded(4));
        int d = heads * (1 + static_cast<int>(rng.bounded(32)));
        int blocks = 1 + static_cast<int>(rng.bounded(12));
        CHECK(unit_count(cfg_of(blocks, d, heads)) == 9ll * d * blocks);
    }
}

TEST_CASE("probe widths sum to the per-block unit count") {
    ModelConfig c = cfg_of(3, 16, 2);
    int64_t sum = 0;
    for (int p = 0; p < kNumProbes; ++p) sum += probe_width(c, static_cast<Probe>(p));
    CHECK(sum == units_per_block(c));
    CHECK(sum == 9 * c.d_model);
}

TEST_CASE("flatten/unflatten is a bijection") {
    ModelConfig c = cfg_of(3, 8, 2);
    const int64_t m = unit_count(c);
    for (int64_t i = 0; i < m; ++i) {
        UnitAddress a = unflatten_unit(c, i);
        CHECK(flatten_unit(c, a) == i);
    }
    // flat order respects (block, probe, channel) ordering
    UnitAddress first{0, Probe::A, 0};
    UnitAddress last{2, Probe::BProj, c.d_model - 1};
    CHECK(flatten_unit(c, first) == 0);
    CHECK(flatten_unit(c, last) == m - 1);
}

TEST_CASE("config invariants are enforced") {
    CHECK_THROWS_AS(cfg_of(0, 8, 2).validate(), Error);
    CHECK_THROWS_AS(cfg_of(1, 9, 2).validate(), Error); // d_model % n_heads
    ModelConfig bad = cfg_of(1, 8, 2);
    bad.layernorm_eps = 0.0f;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("address validation catches out-of-range channels") {
    ModelConfig c = cfg_of(2, 8, 2);
    CHECK_THROWS_AS(validate_address(c, UnitAddress{0, Probe::A, 3 * 8}), Error);
    CHECK_THROWS_AS(validate_address(c, UnitAddress{2, Probe::A, 0}), Error);
    CHECK_NOTHROW(validate_address(c, UnitAddress{1, Probe::B, 31}));
    CHECK_THROWS_AS(validate_address(c, UnitAddress{1, Probe::B, 32}), Error);
}

TEST_CASE("probe names round-trip") {
    for (int p = 0; p < kNumProbes; ++p) {
        Probe probe = static_cast<Probe>(p);
        CHECK(probe_from_name(probe_name(probe)) == probe);
    }
    CHECK_THROWS_AS(probe_from_name("Q"), Error);
}
