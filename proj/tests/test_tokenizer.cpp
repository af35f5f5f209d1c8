#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "experts/tokenizer.hpp"
#include "test_util.hpp"

using namespace experts;

TEST_CASE("build_vocab ranks by frequency with lexicographic ties") {
    Vocab v = Vocab::build({"b a a", "c b a"}, 10);
    // a:3, b:2, c:1 after specials
    CHECK(v.size() == 6);
    CHECK(*v.lookup("a") == 3);
    CHECK(*v.lookup("b") == 4);
    CHECK(*v.lookup("c") == 5);

    Vocab tie = Vocab::build({"z y"}, 10); // equal counts: lexicographic
    CHECK(*tie.lookup("y") == 3);
    CHECK(*tie.lookup("z") == 4);
}

TEST_CASE("build_vocab is deterministic and caps size") {
    std::vector<std::string> corpus = {"one two three four", "two three four", "three four"};
    Vocab a = Vocab::build(corpus, 100);
    Vocab b = Vocab::build(corpus, 100);
    CHECK(a.size() == b.size());
    for (int i = 0; i < a.size(); ++i) CHECK(a.token(i) == b.token(i));

    Vocab capped = Vocab::build(corpus, 5);
    CHECK(capped.size() == 5);
    CHECK(capped.lookup("four").has_value());
    CHECK(capped.lookup("three").has_value());
    CHECK(!capped.lookup("one").has_value());
}

TEST_CASE("build_vocab error paths") {
    CHECK_THROWS_AS(Vocab::build({}, 10), Error);
    CHECK_THROWS_AS(Vocab::build({"a"}, 2), Error); // cannot hold specials
}

TEST_CASE("encode pads and masks exactly the appended positions") {
    Vocab v = Vocab::build({"a b"}, 10);
    Encoded e = encode(v, "a", 4);
    CHECK(e.ids == std::vector<int>{*v.lookup("a"), Vocab::kPadId, Vocab::kPadId, Vocab::kPadId});
    CHECK(e.pad_mask == std::vector<uint8_t>{0, 1, 1, 1});
    CHECK(e.content_len == 1);

    CHECK_THROWS_AS(encode(v, "a b", 1), Error);
}

TEST_CASE("round-trip on in-vocab text, lowercased and normalized") {
    Vocab v = Vocab::build({"the cat sat"}, 10);
    CHECK(decode(v, encode(v, "The  Cat\tsat").ids) == "the cat sat");
    Encoded padded = encode(v, "the cat", 6);
    CHECK(decode(v, padded.ids) == "the cat"); // pads dropped
}

TEST_CASE("out-of-vocab words map to <unk> and are flagged") {
    Vocab v = Vocab::build({"a b"}, 10);
    Encoded e = encode(v, "a zebra b");
    CHECK(e.ids[1] == Vocab::kUnkId);
    CHECK(e.has_oov());
    CHECK(e.oov_count == 1);
    CHECK_FALSE(encode(v, "a b").has_oov());
}

TEST_CASE("vocab file round-trips through the sorted tsv format") {
    Vocab v = Vocab::build({"gamma alpha beta alpha"}, 10);
    std::string path = testutil::temp_dir("vocab") + "/v.tsv";
    v.save(path);
    Vocab loaded = Vocab::load(path);
    CHECK(loaded.size() == v.size());
    for (int i = 0; i < v.size(); ++i) CHECK(loaded.token(i) == v.token(i));
    std::filesystem::remove(path);
}

TEST_CASE("token_length counts whitespace words") {
    CHECK(token_length("") == 0);
    CHECK(token_length("  a   b  ") == 2);
    CHECK(token_length("one") == 1);
}
