#pragma once

#include <optional>
#include <string>
#include <vector>

#include "experts/concepts.hpp"
#include "experts/model.hpp"
#include "experts/tokenizer.hpp"

namespace experts {

// Fixture models are constructed, not trained: attention is inert, token
// embeddings live in reserved channels, and detector weights in the first
// block's MLP route through residual channel 2 into a linear head. That
// keeps every guarantee checkable by direct probing:
//   - a planted unit's pooled response is `fire_value` iff the marker
//     token occurs in the sentence, else `baseline_value`;
//   - clamping it shifts the associated token's logit by a constant
//     margin (the head is linear, so shifts add across clamped units);
//   - with no marker in the context, the next-token distribution is the
//     planted base distribution at every step.
// Requested fire/baseline values are realized up to float rounding; the
// builder probes the finished network and reports the exact values it
// produces.

struct BiasSpec {
    std::vector<int> she_tokens;
    std::vector<int> he_tokens;
    double she_prob = 0.3;
    double he_prob = 0.7;
    double k_sensitivity = 0.1; // logit-gap shift per clamped planted unit
    int n_planted = 16;         // consecutive B channels from planted_unit
};

struct PlantedSpec {
    int marker_token = -1;
    UnitAddress planted_unit{0, Probe::B, 0};
    float fire_value = 2.0f;
    float baseline_value = 0.0f;
    int associated_token = -1;
    double logit_margin = 1.2;    // per-clamp raise of the associated logit
    double assoc_base_prob = 0.02; // unconditioned probability of associated_token
    std::optional<BiasSpec> bias;

    void validate(const ModelConfig& cfg) const;
};

struct PlantedOutcome {
    Model model;
    PlantedSpec realized; // fire/baseline replaced with probed values
    double margin = 0.0;  // realized logit margin per clamped unit
};

PlantedOutcome build_planted_model(const ModelConfig& cfg, const PlantedSpec& spec,
                                   uint64_t seed);

// Random filler sentences; positives get the marker word spliced in.
// distractor_counts plants (word, count) occurrences across negatives.
ConceptDataset make_marker_dataset(const Vocab& vocab, const std::string& marker_word,
                                   int n_pos, int n_neg, int min_len, int max_len,
                                   uint64_t seed,
                                   const std::vector<std::string>& filler_words,
                                   const std::vector<std::pair<std::string, int>>&
                                       distractor_counts = {});

// ---- packaged fixtures -------------------------------------------------

struct PlantedFixture {
    Model model;
    Vocab vocab;
    ConceptDataset dataset;
    std::string marker_word;
    int marker_token = -1;
    int associated_token = -1; // == marker_token: inducing the concept
                               // surfaces its own keyword
    UnitAddress planted_unit;
    float fire_value = 0.0f;
    float baseline_value = 0.0f;
    double margin = 0.0;
    std::vector<int> context; // marker-free prompt for generation runs
};

PlantedFixture make_planted_fixture(uint64_t seed, int n_pos = 24, int n_neg = 48);

struct BiasedFixture {
    Model model;
    Vocab vocab;
    ConceptDataset dataset; // marker concept whose experts are the planted units
    std::string marker_word;
    std::vector<int> she_ids, he_ids;
    int n_planted = 0;
    double she_prob = 0.0, he_prob = 0.0;
    double k_sensitivity = 0.0;
    double crossing_j = 0.0; // ln(he_prob/she_prob) / k_sensitivity
    std::vector<int> context;
};

// Constant-distribution LM with `n_planted` equal experts for the marker
// concept; clamping j of them shifts the she/he logit gap by exactly
// j * k_sensitivity, so the parity crossing sits at crossing_j.
BiasedFixture build_biased_lm(double she_prob, double he_prob, double k_sensitivity,
                              int n_planted, uint64_t seed);

struct DecayingFixture {
    Model model;
    Vocab vocab;
    ConceptDataset dataset;
    std::string marker_word;
    std::string assoc_word;
    int assoc_token = -1;
    int n_groups = 0;
    int group_size = 0;
    std::vector<double> group_logit_shift; // full-group clamp, descending
    std::vector<double> group_ap;          // analytic AP per group, descending
    std::vector<int> context;
};

// Expertise decays in groups of `group_size`: later groups false-fire on
// progressively more distractor negatives (lower AP) and steer the
// associated token progressively less.
DecayingFixture build_decaying_fixture(uint64_t seed, int n_groups = 5, int group_size = 30);

// Fixture-scale SGD demo: bigram softmax model (embeddings + head trained,
// blocks left inert). Qualitative only.
Model train_demo_model(const std::vector<std::string>& corpus, const Vocab& vocab,
                       int max_seq_len, int epochs, double learning_rate, uint64_t seed);

} // namespace experts
