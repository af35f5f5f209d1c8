#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "experts/concepts.hpp"
#include "experts/model.hpp"
#include "experts/plan.hpp"
#include "experts/tokenizer.hpp"

namespace experts {

// Per-unit max-pooled responses over a concept dataset: entry (m, i) is
// the max over non-pad positions of unit m's probed activation on
// sentence i. Rows are flat unit indices (see flatten_unit), columns are
// sentences; positives come first, mirroring the dataset.
struct ResponseMatrix {
    ModelConfig config;
    int64_t n_units = 0;
    int64_t n_sentences = 0;
    std::vector<uint8_t> labels; // [n_sentences], 1 = positive
    std::vector<float> values;   // [n_units * n_sentences], unit-major

    float at(int64_t unit, int64_t sentence) const {
        return values[static_cast<size_t>(unit) * n_sentences + sentence];
    }
};

// OpenMP over sentences; the serial variant is the reference the tests
// compare against (byte-identical output required).
ResponseMatrix extract_responses(const Model& model, const Vocab& vocab,
                                 const ConceptDataset& dataset);
ResponseMatrix extract_responses_serial(const Model& model, const Vocab& vocab,
                                        const ConceptDataset& dataset);

void save_response_cache(const std::string& path, const ResponseMatrix& m);
ResponseMatrix load_response_cache(const std::string& path);

// Non-interpolated area under the precision-recall curve: the mean, over
// positives in descending score order, of the precision at each
// positive's rank. Tied scores are processed as one block and take the
// precision measured after the whole block. Needs at least one positive.
double average_precision(std::span<const double> scores, std::span<const uint8_t> labels);
double average_precision(std::span<const float> scores, std::span<const uint8_t> labels);

struct RankedUnit {
    UnitAddress address;
    double ap = 0.0;
    double expected_positive_value = 0.0; // mean response over positives
};

struct ExpertRanking {
    ModelConfig config;
    std::vector<RankedUnit> units; // AP descending; ties by address order

    int64_t size() const { return static_cast<int64_t>(units.size()); }
};

// AP per unit (OpenMP over units; serial reference below), then sort.
ExpertRanking rank_experts(const ResponseMatrix& responses);
ExpertRanking rank_experts_serial(const ResponseMatrix& responses);

// Expectation-clamp plan over the first k ranked units.
InterventionPlan top_k(const ExpertRanking& ranking, int64_t k);

// CSV: block,probe,channel,ap,expected_value (ranking order).
std::string ranking_to_csv(const ExpertRanking& ranking);
ExpertRanking ranking_from_csv(const std::string& text, const ModelConfig& cfg);

} // namespace experts
