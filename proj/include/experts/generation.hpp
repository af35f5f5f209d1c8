#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "experts/model.hpp"
#include "experts/plan.hpp"
#include "experts/rng.hpp"
#include "experts/tokenizer.hpp"

namespace experts {

// Maps a keyword set to token ids. The set itself must be non-empty;
// out-of-vocab words are dropped (they can never be generated).
std::vector<int> map_words(const Vocab& vocab, const std::vector<std::string>& words);

struct GenerationRequest {
    std::vector<int> context; // non-empty
    int steps = 20;
    int top_n = 10;
    uint64_t seed = 0;
    uint64_t stream = 0; // sub-stream id for parallel replicas
    const InterventionPlan* plan = nullptr;

    void validate() const;
};

// Top-n sampling: keep the n most probable next tokens (probability ties
// broken toward lower ids), renormalize, draw with the request's Philox
// stream. The plan is applied at every decoding step, context included.
// Returns only the newly generated ids.
std::vector<int> generate(const Model& model, const GenerationRequest& request);

struct ScoredText {
    std::vector<int> tokens;           // the continuation that was scored
    std::vector<double> log_probs;     // natural log, one per continuation token
    double perplexity = 0.0;           // exp(mean negative log-probability)
};

// Chain-rule perplexity of `continuation` given `context` under the
// scorer model. Scores continuation positions only.
ScoredText perplexity(const Model& scorer, std::span<const int> context,
                      std::span<const int> continuation);

struct EstimateWithCi {
    double value = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    int n_samples = 0;
};

// Wilson 95% interval for a binomial proportion.
EstimateWithCi wilson_interval(int successes, int n);

// Fraction of n_samples seeded continuations (gen_len tokens each)
// containing at least one of the word ids. OpenMP over samples; the
// serial variant is the test reference.
EstimateWithCi keyword_probability(const Model& model, std::span<const int> context,
                                   const InterventionPlan* plan,
                                   const std::vector<int>& word_ids, int n_samples,
                                   int gen_len, uint64_t seed, int top_n = 10);
EstimateWithCi keyword_probability_serial(const Model& model, std::span<const int> context,
                                          const InterventionPlan* plan,
                                          const std::vector<int>& word_ids, int n_samples,
                                          int gen_len, uint64_t seed, int top_n = 10);

// Shared Monte-Carlo core: presence indicators for two word sets over the
// same samples (paired). Used by keyword_probability and parity.
struct PairedPresence {
    std::vector<uint8_t> a; // per sample: any word of set A generated
    std::vector<uint8_t> b;
};

PairedPresence sample_presence(const Model& model, std::span<const int> context,
                               const InterventionPlan* plan, const std::vector<int>& set_a,
                               const std::vector<int>& set_b, int n_samples, int gen_len,
                               uint64_t seed, int top_n, bool parallel,
                               std::vector<std::vector<int>>* keep_samples = nullptr);

} // namespace experts
