#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "experts/model.hpp"
#include "experts/rng.hpp"
#include "test_util.hpp"

using namespace experts;

namespace {

Model small_random_model(uint64_t seed = 1) {
    ModelConfig cfg;
    cfg.n_blocks = 2;
    cfg.d_model = 16;
    cfg.n_heads = 4;
    cfg.vocab_size = 24;
    cfg.max_seq_len = 32;
    return {cfg, random_weights(cfg, seed)};
}

std::vector<int> random_tokens(const ModelConfig& cfg, int len, uint64_t seed) {
    Philox rng(seed, 5);
    std::vector<int> ids(static_cast<size_t>(len));
    for (int& id : ids) id = static_cast<int>(rng.bounded(static_cast<uint32_t>(cfg.vocab_size)));
    return ids;
}

} // namespace

TEST_CASE("forward is deterministic and finite") {
    Model m = small_random_model();
    std::vector<int> ids = random_tokens(m.config, 12, 3);
    ForwardTrace a = forward(m, ids);
    ForwardTrace b = forward(m, ids);
    CHECK(a.logits == b.logits);
    for (float v : a.logits) CHECK(std::isfinite(v));
    for (const auto& block : a.probes) {
        for (const auto& probe : block) {
            for (float v : probe) CHECK(std::isfinite(v));
        }
    }
}

TEST_CASE("empty plan is bit-identical to no plan") {
    Model m = small_random_model();
    std::vector<int> ids = random_tokens(m.config, 10, 4);
    InterventionPlan empty;
    ForwardTrace with = forward(m, ids, &empty);
    ForwardTrace without = forward(m, ids, nullptr);
    CHECK(with.logits == without.logits);
    for (int b = 0; b < m.config.n_blocks; ++b) {
        for (int p = 0; p < kNumProbes; ++p) {
            CHECK(with.probes[b][p] == without.probes[b][p]);
        }
    }
}

TEST_CASE("clamped channels read the clamp value at every position") {
    Model m = small_random_model();
    std::vector<int> ids = random_tokens(m.config, 9, 8);
    InterventionPlan plan;
    plan.mode = PlanMode::expectation;
    plan.entries = {{{0, Probe::A, 5}, 0.75f},
                    {{0, Probe::B, 17}, -2.5f},
                    {{1, Probe::AProj, 3}, 1.25f},
                    {{1, Probe::BProj, 0}, 4.0f}};
    plan.k = 4;
    ForwardTrace t = forward(m, ids, &plan);
    for (const ClampEntry& e : plan.entries) {
        for (int pos = 0; pos < t.seq_len; ++pos) {
            CHECK(t.probe_at(e.address.block, e.address.probe, e.address.channel, pos) ==
                  e.value);
        }
    }
    // and the clamp changes downstream logits
    ForwardTrace plain = forward(m, ids);
    CHECK(t.logits != plain.logits);
}

TEST_CASE("attention is causal: future tokens cannot move past logits") {
    Model m = small_random_model(9);
    std::vector<int> ids = random_tokens(m.config, 12, 10);
    ForwardTrace full = forward(m, ids);
    std::vector<int> mutated = ids;
    mutated[11] = (mutated[11] + 1) % m.config.vocab_size;
    mutated[10] = (mutated[10] + 3) % m.config.vocab_size;
    ForwardTrace bumped = forward(m, mutated);
    for (int t = 0; t < 10; ++t) {
        for (int v = 0; v < m.config.vocab_size; ++v) {
            CHECK(full.logits_at(t)[v] == bumped.logits_at(t)[v]);
        }
    }
}

TEST_CASE("forward rejects bad inputs") {
    Model m = small_random_model();
    std::vector<int> ok = random_tokens(m.config, 4, 2);
    std::vector<int> bad_token = ok;
    bad_token[1] = m.config.vocab_size;
    CHECK_THROWS_AS(forward(m, bad_token), Error);
    std::vector<int> too_long(static_cast<size_t>(m.config.max_seq_len + 1), 1);
    CHECK_THROWS_AS(forward(m, too_long), Error);
    CHECK_THROWS_AS(forward(m, std::vector<int>{}), Error);

    InterventionPlan bad_plan;
    bad_plan.entries = {{{5, Probe::A, 0}, 1.0f}}; // block out of range
    bad_plan.k = 1;
    CHECK_THROWS_AS(forward(m, ok, &bad_plan), Error);
}

TEST_CASE("probe recording can be disabled without changing logits") {
    Model m = small_random_model();
    std::vector<int> ids = random_tokens(m.config, 7, 6);
    ForwardTrace with = forward(m, ids, nullptr, true);
    ForwardTrace without = forward(m, ids, nullptr, false);
    CHECK(with.logits == without.logits);
    CHECK(without.probes.empty());
}

TEST_CASE("checkpoint round-trip reproduces logits bit-exactly") {
    Model m = small_random_model(77);
    std::string path = testutil::temp_dir("ckpt") + "/model.ckpt";
    save_checkpoint(path, m);
    Model loaded = load_checkpoint(path);
    std::vector<int> ids = random_tokens(m.config, 16, 5);
    ForwardTrace a = forward(m, ids);
    ForwardTrace b = forward(loaded, ids);
    CHECK(a.logits == b.logits);
    std::filesystem::remove(path);
}

TEST_CASE("truncated checkpoint names the failing section") {
    Model m = small_random_model(5);
    std::string dir = testutil::temp_dir("ckpt_trunc");
    std::string path = dir + "/model.ckpt";
    save_checkpoint(path, m);
    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    try {
        load_checkpoint(path);
        FAIL("expected a format error");
    } catch (const Error& e) {
        CHECK(e.cls() == ErrorClass::format);
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
        CHECK(std::string(e.what()).find("tensor") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("header/tensor dimension mismatch is a format error") {
    Model m = small_random_model(6);
    std::string dir = testutil::temp_dir("ckpt_dims");
    std::string path = dir + "/model.ckpt";
    save_checkpoint(path, m);
    // Corrupt the header's vocab_size field (offset: magic 8 + version 4 +
    // dtype 4 + 4 header u32s).
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8 + 4 + 4 + 4 * 4);
        uint32_t wrong = static_cast<uint32_t>(m.config.vocab_size + 8);
        f.write(reinterpret_cast<const char*>(&wrong), 4);
    }
    try {
        load_checkpoint(path);
        FAIL("expected a format error");
    } catch (const Error& e) {
        CHECK(e.cls() == ErrorClass::format);
        CHECK(std::string(e.what()).find("dimension") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("gelu matches the tanh approximation at reference points") {
    CHECK(gelu(0.0f) == 0.0f);
    CHECK(gelu(2.0f) == doctest::Approx(1.9545977f).epsilon(1e-5));
    CHECK(gelu(-1.0f) == doctest::Approx(-0.15880801f).epsilon(1e-4));
}
