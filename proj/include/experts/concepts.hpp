#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "experts/error.hpp"

namespace experts {

// A concept is a labeled sentence set: positives contain it, negatives do
// not, padded to a shared length when batched.
struct ConceptDataset {
    std::string concept_id; // sense-key style, e.g. "shelter%1:06:00"
    std::vector<std::string> positives;
    std::vector<std::string> negatives;
    int pad_length = 0; // max whitespace-token length over both sides

    int64_t n_pos() const { return static_cast<int64_t>(positives.size()); }
    int64_t n_neg() const { return static_cast<int64_t>(negatives.size()); }
    int64_t size() const { return n_pos() + n_neg(); }

    // Disjoint sides, consistent pad_length; in paper mode additionally
    // 100 <= N+ <= 1000 and 100 <= N- <= 1000.
    void validate(bool paper_mode) const;
};

void save_concept_jsonl(const std::string& path, const ConceptDataset& ds);
ConceptDataset load_concept_jsonl(const std::string& path, const std::string& concept_id);

// One annotated sentence: the head word span marks the sense-tagged word
// inside the (whitespace-normalized) context.
struct OneSecInstance {
    std::string doc_source;
    std::string instance_id;
    std::string sense_id; // lemma%N:NN:NN style
    std::string context;
    size_t head_begin = 0;
    size_t head_end = 0;

    std::string lemma() const;
    std::string head_text() const { return context.substr(head_begin, head_end - head_begin); }
};

std::string sense_lemma(const std::string& sense_id);

struct ParseIssue {
    int line = 0;
    std::string instance_id; // empty when unknown
    std::string message;

    std::string to_string() const;
};

struct OneSecParse {
    std::vector<OneSecInstance> instances; // document order
    std::vector<ParseIssue> issues;        // malformed instances, located
};

// Streaming parser for the instance/answer/context fragment shape.
// Malformed instances become located issues and parsing resumes at the
// next instance; structurally hopeless input raises ErrorClass::format.
OneSecParse parse_onesec(const std::string& xml);
OneSecParse parse_onesec_file(const std::string& path);

struct ConceptLimits {
    int min_per_side = 100;
    int max_per_side = 1000;
    bool paper_mode = true; // fixture mode drops the lower bound to 1

    static ConceptLimits fixture() { return {1, 1000, false}; }
};

struct BuildConceptResult {
    ConceptDataset dataset;
    std::vector<std::string> warnings;
};

// Positives: instances annotated with target_sense. Negatives: sampled
// (seeded) from pool instances whose lemma differs from the target's;
// both sides subsample when more than max_per_side are available.
BuildConceptResult build_concept(const std::vector<OneSecInstance>& instances,
                                 const std::string& target_sense,
                                 const std::vector<OneSecInstance>& negative_pool,
                                 const ConceptLimits& limits, uint64_t seed);

} // namespace experts
