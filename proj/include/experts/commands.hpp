#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "experts/error.hpp"

namespace experts {

// Effective run configuration: a JSON config file plus flag overrides
// collapse into this struct; its canonical JSON dump is hashed into every
// artifact so reruns are attributable and byte-identical.
struct RunConfig {
    std::string model_path;
    std::string scorer_path;
    std::string vocab_path;
    std::string concept_path; // JSONL
    std::string concept_id;
    std::string ranking_path;
    std::string out_dir = ".";
    uint64_t seed = 0;

    int top_n = 10;
    int gen_len = 20;
    int steps = 20;
    int n_samples = 100;
    std::vector<int64_t> k_grid = {0, 1, 2, 4, 8, 16, 32};
    std::vector<std::string> she_words = {"she", "her"};
    std::vector<std::string> he_words = {"he", "his"};
    std::vector<std::string> keywords = {"woman", "women"};
    std::vector<std::string> contexts;   // literal context strings
    std::string contexts_file;           // ContextConfig JSON (occupations x templates)
    bool use_builtin_contexts = false;

    int window = 30;
    int n_windows = 5;
    int n_random = 10;
    int workers = 0; // 0 = library default; EXPERTCTL_WORKERS overrides

    std::string to_canonical_json() const;
    uint64_t config_hash() const;
    void apply_worker_budget() const;

    static RunConfig from_json_file(const std::string& path);
};

// Each command reads/writes files per the config and returns the primary
// artifact path. Errors surface as experts::Error (exit code = class).

// ranking.csv + responses.bin from (model, vocab, concept).
std::string cmd_find_experts(const RunConfig& cfg);

// Text to stdout; metadata JSON next to it. Returns the metadata path.
std::string cmd_generate(const RunConfig& cfg, int64_t k, const std::string& context,
                         const std::string& plan_mode = "expectation");

// Perplexity of continuation given context under the scorer; JSON to stdout.
std::string cmd_score(const RunConfig& cfg, const std::string& context,
                      const std::string& continuation);

// sweep.csv + summary.json over contexts x k_grid.
std::string cmd_parity_sweep(const RunConfig& cfg);

// probe.csv for rank windows and random subsets.
std::string cmd_subset_probe(const RunConfig& cfg, const std::string& context);

// concept.jsonl from a OneSec-style XML file.
std::string cmd_build_concept(const RunConfig& cfg, const std::string& onesec_path,
                              const std::string& target_sense, bool fixture_mode);

// Parses and reports instances/issues; writes instances.jsonl.
std::string cmd_parse_onesec(const RunConfig& cfg, const std::string& onesec_path,
                             bool strict);

// Emits checkpoint + vocab + concept + scorer + meta under out_dir.
// kind: planted | biased | decaying | trained.
std::string cmd_make_fixture(const RunConfig& cfg, const std::string& kind);

} // namespace experts
