#pragma once

#include <optional>
#include <string>
#include <vector>

#include "experts/expertise.hpp"
#include "experts/generation.hpp"
#include "experts/model.hpp"

namespace experts {

// Occupation x template cross product. Templates carry one literal
// "<occupation>" slot each.
struct ContextConfig {
    std::vector<std::string> female;
    std::vector<std::string> male;
    std::vector<std::string> neutral;
    std::vector<std::string> templates;
};

// The built-in occupational lists: 25 female + 26 male + 10 neutral
// occupations and 17 templates, rendering 61*17 = 1037 contexts.
ContextConfig builtin_contexts();

struct RenderedContext {
    std::string text;
    std::string occupation;
    std::string group; // female | male | neutral
    int template_index = 0;
};

struct ContextSet {
    ContextConfig config;
    std::vector<RenderedContext> rendered; // occupation-major, list order
};

ContextSet build_contexts(const ContextConfig& config);

struct DeltaPResult {
    double delta_p = 0.0; // p(she-set) - p(he-set) on the same samples
    double ci_lo = 0.0, ci_hi = 0.0;
    double p_she = 0.0, p_he = 0.0;
    int n_samples = 0;
};

// Paired Monte-Carlo estimate: each seeded continuation contributes
// presence indicators for both word sets; the CI is a normal interval on
// the paired differences.
DeltaPResult delta_p(const Model& model, std::span<const int> context,
                     const InterventionPlan* plan, const std::vector<int>& she_ids,
                     const std::vector<int>& he_ids, int n_samples, int gen_len,
                     uint64_t seed, int top_n = 10);

struct ParitySweepParams {
    std::vector<int64_t> k_grid; // ascending, starting at 0
    int n_samples = 100;
    int gen_len = 20;
    int top_n = 10;
    uint64_t seed = 0;
    std::vector<int> she_ids, he_ids;
    std::vector<int> keyword_ids; // tracked presence column
    const Model* scorer = nullptr; // optional; enables the perplexity column
    std::string concept_id;
};

struct ParitySweepPoint {
    int64_t k = 0;
    DeltaPResult dp;
    double kw_prob = 0.0;
    double kw_ci_lo = 0.0, kw_ci_hi = 0.0;
    double mean_ppl = 0.0; // 0 when no scorer is configured
};

struct ParitySweepResult {
    std::vector<ParitySweepPoint> points;
    std::optional<double> parity_point;     // interpolated k* at the first sign change
    std::optional<int64_t> parity_point_int; // smallest grid k at/past the crossing
    double ppl_at_parity = 0.0;              // at the grid k nearest the crossing
};

// Runs delta_p at every k on the grid (per-k derived sub-streams) and
// locates the first sign change of the point estimates.
ParitySweepResult parity_sweep(const Model& model, const ExpertRanking& ranking,
                               std::span<const int> context, const ParitySweepParams& params);

struct SubsetProbeRow {
    std::string kind; // "window", "random" or "none" (baseline)
    int index = 0;
    int64_t rank_lo = 0, rank_hi = 0; // 1-based, windows only
    double mean_ap = 0.0;
    double kw_prob = 0.0;
    double kw_ci_lo = 0.0, kw_ci_hi = 0.0;
};

struct SubsetProbeParams {
    int window = 30;
    int n_windows = 5;
    int n_random = 10;
    int n_samples = 100;
    int gen_len = 8;
    int top_n = 10;
    uint64_t seed = 0;
    std::vector<int> keyword_ids;
    std::string concept_id;
};

// Expectation-clamps rank windows [1..w], [w+1..2w], ... and n_random
// random w-subsets of all units; reports keyword probability per subset.
std::vector<SubsetProbeRow> subset_probe(const Model& model, const ExpertRanking& ranking,
                                         std::span<const int> context,
                                         const SubsetProbeParams& params);

} // namespace experts
