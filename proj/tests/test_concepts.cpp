#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "experts/concepts.hpp"
#include "experts/io.hpp"
#include "test_util.hpp"

using namespace experts;

namespace {

const char* kShelterInstance = R"(<instance docsrc="Indigenous architecture" id="shelter.00002">
    <answer instance="shelter.00002" senseid="shelter%1:06:00"/>
    <context>
        Types There are three traditional types of igloos ,
        all of different sizes and used for different purposes .
        The smallest were constructed as temporary
        <head>shelters</head>
        , usually only used for one or two nights .
     </context>
</instance>
)";

OneSecInstance make_instance(const std::string& id, const std::string& sense,
                             const std::string& context) {
    OneSecInstance inst;
    inst.instance_id = id;
    inst.sense_id = sense;
    inst.context = context;
    inst.head_begin = 0;
    inst.head_end = context.empty() ? 0 : 1;
    return inst;
}

} // namespace

TEST_CASE("the shelter instance parses with lemma, head and doc source") {
    OneSecParse parsed = parse_onesec(kShelterInstance);
    REQUIRE(parsed.issues.empty());
    REQUIRE(parsed.instances.size() == 1);
    const OneSecInstance& inst = parsed.instances[0];
    CHECK(inst.doc_source == "Indigenous architecture");
    CHECK(inst.instance_id == "shelter.00002");
    CHECK(inst.sense_id == "shelter%1:06:00");
    CHECK(inst.lemma() == "shelter");
    CHECK(inst.head_text() == "shelters");
    CHECK(inst.head_end <= inst.context.size());
    // whitespace collapsed, head inline
    CHECK(inst.context.find("temporary shelters , usually") != std::string::npos);
    CHECK(inst.context.rfind("Types There are three", 0) == 0);
}

TEST_CASE("two concatenated instances come back in document order") {
    std::string two = std::string(kShelterInstance) +
                      "<instance docsrc=\"Doc B\" id=\"lead.00001\">\n"
                      "  <answer instance=\"lead.00001\" senseid=\"lead%1:27:00\"/>\n"
                      "  <context>a soft heavy <head>lead</head> ingot</context>\n"
                      "</instance>\n";
    OneSecParse parsed = parse_onesec(two);
    REQUIRE(parsed.issues.empty());
    REQUIRE(parsed.instances.size() == 2);
    CHECK(parsed.instances[0].instance_id == "shelter.00002");
    CHECK(parsed.instances[1].instance_id == "lead.00001");
    CHECK(parsed.instances[1].head_text() == "lead");
}

TEST_CASE("a wrapper root element around instances is tolerated") {
    std::string wrapped = "<?xml version=\"1.0\"?>\n<corpus>\n" +
                          std::string(kShelterInstance) + "</corpus>\n";
    OneSecParse parsed = parse_onesec(wrapped);
    CHECK(parsed.issues.empty());
    CHECK(parsed.instances.size() == 1);
}

TEST_CASE("missing <head> is a located issue citing the instance id") {
    std::string xml = "<instance docsrc=\"d\" id=\"x.1\">\n"
                      "  <answer instance=\"x.1\" senseid=\"x%1:00:00\"/>\n"
                      "  <context>no head here</context>\n"
                      "</instance>\n";
    OneSecParse parsed = parse_onesec(xml);
    CHECK(parsed.instances.empty());
    REQUIRE(parsed.issues.size() == 1);
    CHECK(parsed.issues[0].instance_id == "x.1");
    CHECK(parsed.issues[0].message.find("head") != std::string::npos);
    CHECK(parsed.issues[0].line >= 1);
}

TEST_CASE("missing senseid attribute is reported") {
    std::string xml = "<instance docsrc=\"d\" id=\"x.2\">\n"
                      "  <answer instance=\"x.2\"/>\n"
                      "  <context>a <head>b</head> c</context>\n"
                      "</instance>\n";
    OneSecParse parsed = parse_onesec(xml);
    CHECK(parsed.instances.empty());
    REQUIRE(!parsed.issues.empty());
    CHECK(parsed.issues[0].message.find("senseid") != std::string::npos);
}

TEST_CASE("malformed sense keys are rejected") {
    std::string xml = "<instance docsrc=\"d\" id=\"x.3\">\n"
                      "  <answer instance=\"x.3\" senseid=\"nopercent\"/>\n"
                      "  <context>a <head>b</head> c</context>\n"
                      "</instance>\n";
    OneSecParse parsed = parse_onesec(xml);
    CHECK(parsed.instances.empty());
    REQUIRE(!parsed.issues.empty());
    CHECK(parsed.issues[0].message.find("lemma%key") != std::string::npos);
}

TEST_CASE("unclosed instance is a located issue, not a silent drop") {
    std::string xml = "<instance docsrc=\"d\" id=\"x.4\">\n"
                      "  <answer instance=\"x.4\" senseid=\"x%1:00:00\"/>\n"
                      "  <context>a <head>b</head> c</context>\n";
    OneSecParse parsed = parse_onesec(xml);
    CHECK(parsed.instances.empty());
    REQUIRE(!parsed.issues.empty());
    CHECK(parsed.issues[0].message.find("unclosed") != std::string::npos);
}

TEST_CASE("head outside context is reported") {
    std::string xml = "<instance docsrc=\"d\" id=\"x.5\">\n"
                      "  <answer instance=\"x.5\" senseid=\"x%1:00:00\"/>\n"
                      "  <head>stray</head>\n"
                      "  <context>a b</context>\n"
                      "</instance>\n";
    OneSecParse parsed = parse_onesec(xml);
    CHECK(parsed.instances.empty());
    REQUIRE(!parsed.issues.empty());
    CHECK(parsed.issues[0].message.find("outside") != std::string::npos);
}

TEST_CASE("a bad instance does not poison its neighbours") {
    std::string xml = "<instance docsrc=\"d\" id=\"bad.1\">\n"
                      "  <answer instance=\"bad.1\" senseid=\"x%1:00:00\"/>\n"
                      "  <context>never closed\n"
                      "</instance>\n" +
                      std::string(kShelterInstance);
    OneSecParse parsed = parse_onesec(xml);
    CHECK(parsed.instances.size() == 1);
    CHECK(parsed.instances[0].instance_id == "shelter.00002");
    CHECK(!parsed.issues.empty());
}

TEST_CASE("entities in context text are unescaped") {
    std::string xml = "<instance docsrc=\"d\" id=\"e.1\">\n"
                      "  <answer instance=\"e.1\" senseid=\"x%1:00:00\"/>\n"
                      "  <context>salt &amp; pepper <head>mix</head> &lt;tasty&gt;</context>\n"
                      "</instance>\n";
    OneSecParse parsed = parse_onesec(xml);
    REQUIRE(parsed.issues.empty());
    CHECK(parsed.instances[0].context == "salt & pepper mix <tasty>");
}

TEST_CASE("build_concept separates senses and excludes the target lemma from negatives") {
    std::vector<OneSecInstance> pool;
    for (int i = 0; i < 8; ++i)
        pool.push_back(make_instance("lead.a" + std::to_string(i), "lead%1:27:00",
                                     "metal sentence " + std::to_string(i)));
    for (int i = 0; i < 6; ++i)
        pool.push_back(make_instance("lead.b" + std::to_string(i), "lead%1:07:02",
                                     "race sentence " + std::to_string(i)));
    for (int i = 0; i < 16; ++i)
        pool.push_back(make_instance("other." + std::to_string(i), "tree%1:20:00",
                                     "tree sentence " + std::to_string(i)));

    BuildConceptResult built =
        build_concept(pool, "lead%1:27:00", pool, ConceptLimits::fixture(), 11);
    CHECK(built.dataset.n_pos() == 8);
    // every "lead" sense is excluded from negatives, not just the target
    CHECK(built.dataset.n_neg() == 16);
    for (const std::string& s : built.dataset.negatives) {
        CHECK(s.find("metal") == std::string::npos);
        CHECK(s.find("race") == std::string::npos);
        CHECK(s.rfind("tree", 0) == 0);
    }
    built.dataset.validate(false);
}

TEST_CASE("fixture mode: 8 positives / 16 negatives give N = 24") {
    std::vector<OneSecInstance> pool;
    for (int i = 0; i < 8; ++i)
        pool.push_back(make_instance("p" + std::to_string(i), "cat%1:05:00",
                                     "cat text " + std::to_string(i)));
    for (int i = 0; i < 16; ++i)
        pool.push_back(make_instance("n" + std::to_string(i), "dog%1:05:00",
                                     "dog text " + std::to_string(i)));
    BuildConceptResult built =
        build_concept(pool, "cat%1:05:00", pool, ConceptLimits::fixture(), 1);
    CHECK(built.dataset.size() == 24);
    CHECK(built.dataset.pad_length == 3);
}

TEST_CASE("oversupply is subsampled to the cap, deterministically per seed") {
    std::vector<OneSecInstance> pool;
    for (int i = 0; i < 1500; ++i)
        pool.push_back(make_instance("p" + std::to_string(i), "cat%1:05:00",
                                     "cat text " + std::to_string(i)));
    for (int i = 0; i < 1200; ++i)
        pool.push_back(make_instance("n" + std::to_string(i), "dog%1:05:00",
                                     "dog text " + std::to_string(i)));
    ConceptLimits limits; // paper mode, cap 1000
    BuildConceptResult a = build_concept(pool, "cat%1:05:00", pool, limits, 42);
    BuildConceptResult b = build_concept(pool, "cat%1:05:00", pool, limits, 42);
    BuildConceptResult c = build_concept(pool, "cat%1:05:00", pool, limits, 43);
    CHECK(a.dataset.n_pos() == 1000);
    CHECK(a.dataset.n_neg() == 1000);
    CHECK(a.dataset.positives == b.dataset.positives);
    CHECK(a.dataset.negatives == b.dataset.negatives);
    CHECK(a.dataset.positives != c.dataset.positives);
    a.dataset.validate(true);
}

TEST_CASE("insufficient positives and empty negative pools are errors") {
    std::vector<OneSecInstance> pool;
    pool.push_back(make_instance("p0", "cat%1:05:00", "cat text"));
    CHECK_THROWS_AS(build_concept(pool, "cat%1:05:00", pool, ConceptLimits{}, 1), Error);
    // all pool entries share the target lemma -> nothing left for negatives
    std::vector<OneSecInstance> same_lemma;
    for (int i = 0; i < 4; ++i)
        same_lemma.push_back(make_instance("p" + std::to_string(i), "cat%1:05:00",
                                           "cat text " + std::to_string(i)));
    same_lemma.push_back(make_instance("q0", "cat%1:09:00", "other cat sense"));
    CHECK_THROWS_AS(
        build_concept(same_lemma, "cat%1:05:00", same_lemma, ConceptLimits::fixture(), 1),
        Error);
}

TEST_CASE("an N- <= N+ build carries a warning in paper mode") {
    std::vector<OneSecInstance> pool;
    for (int i = 0; i < 300; ++i)
        pool.push_back(make_instance("p" + std::to_string(i), "cat%1:05:00",
                                     "cat text " + std::to_string(i)));
    for (int i = 0; i < 150; ++i)
        pool.push_back(make_instance("n" + std::to_string(i), "dog%1:05:00",
                                     "dog text " + std::to_string(i)));
    BuildConceptResult built = build_concept(pool, "cat%1:05:00", pool, ConceptLimits{}, 5);
    CHECK(!built.warnings.empty());
}

TEST_CASE("concept jsonl round-trips") {
    ConceptDataset ds;
    ds.concept_id = "cat%1:05:00";
    ds.positives = {"a cat sat", "the cat ran"};
    ds.negatives = {"a dog sat", "the dog ran", "fish swim"};
    ds.pad_length = 3;
    std::string path = testutil::temp_dir("jsonl") + "/c.jsonl";
    save_concept_jsonl(path, ds);
    ConceptDataset loaded = load_concept_jsonl(path, ds.concept_id);
    CHECK(loaded.positives == ds.positives);
    CHECK(loaded.negatives == ds.negatives);
    CHECK(loaded.pad_length == 3);
    std::filesystem::remove(path);
}

TEST_CASE("jsonl loader reports the offending line") {
    std::string dir = testutil::temp_dir("jsonl_err");
    std::string path = dir + "/bad.jsonl";
    {
        std::ofstream f(path);
        f << R"({"text": "ok", "label": 1})" << "\n";
        f << R"({"text": "bad", "label": 2})" << "\n";
    }
    try {
        load_concept_jsonl(path, "c");
        FAIL("expected format error");
    } catch (const Error& e) {
        CHECK(e.cls() == ErrorClass::format);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    {
        std::ofstream f(path, std::ios::trunc);
        f << "not json\n";
    }
    CHECK_THROWS_AS(load_concept_jsonl(path, "c"), Error);
    {
        std::ofstream f(path, std::ios::trunc);
    }
    CHECK_THROWS_AS(load_concept_jsonl(path, "c"), Error);
    std::filesystem::remove(path);
}

TEST_CASE("cross-side duplicate sentences violate validation") {
    ConceptDataset ds;
    ds.concept_id = "c";
    ds.positives = {"same sentence"};
    ds.negatives = {"same sentence"};
    ds.pad_length = 2;
    CHECK_THROWS_AS(ds.validate(false), Error);
}
