// expertctl: find expert units in a small decoder-only LM, clamp them to
// steer generation, and measure concept induction / gender parity.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "experts/commands.hpp"

namespace {

// Flags shared by most subcommands; a JSON config file provides defaults
// and explicit flags override it.
struct CommonOpts {
    std::string config_file;
    experts::RunConfig cfg;

    void attach(CLI::App* app) {
        app->add_option("--config", config_file, "JSON config file with defaults");
        app->add_option("--model", cfg.model_path, "model checkpoint");
        app->add_option("--scorer", cfg.scorer_path, "scorer checkpoint");
        app->add_option("--vocab", cfg.vocab_path, "vocab tsv");
        app->add_option("--concept", cfg.concept_path, "concept JSONL");
        app->add_option("--concept-id", cfg.concept_id, "concept identifier");
        app->add_option("--ranking", cfg.ranking_path, "ranking CSV from find-experts");
        app->add_option("--out-dir", cfg.out_dir, "output directory");
        app->add_option("--seed", cfg.seed, "master seed");
        app->add_option("--top-n", cfg.top_n, "top-n sampling cutoff");
        app->add_option("--gen-len", cfg.gen_len, "generated tokens per sample");
        app->add_option("--steps", cfg.steps, "generation steps");
        app->add_option("--samples", cfg.n_samples, "Monte Carlo samples per point");
        app->add_option("--k-grid", cfg.k_grid, "intervention strengths (ascending, from 0)");
        app->add_option("--she-words", cfg.she_words, "she-side word set");
        app->add_option("--he-words", cfg.he_words, "he-side word set");
        app->add_option("--keywords", cfg.keywords, "tracked keyword set");
        app->add_option("--context", cfg.contexts, "literal context (repeatable)");
        app->add_option("--contexts-file", cfg.contexts_file,
                        "occupations x templates JSON file");
        app->add_flag("--builtin-contexts", cfg.use_builtin_contexts,
                      "use the built-in occupational context set");
        app->add_option("--window", cfg.window, "subset probe window size");
        app->add_option("--windows", cfg.n_windows, "number of rank windows");
        app->add_option("--rand-subsets", cfg.n_random, "number of random subsets");
        app->add_option("--workers", cfg.workers,
                        "worker threads (or env EXPERTCTL_WORKERS)");
    }

    experts::RunConfig resolve(CLI::App* app) {
        if (config_file.empty()) return cfg;
        experts::RunConfig merged = experts::RunConfig::from_json_file(config_file);
        // Anything the user passed explicitly wins over the file.
        experts::RunConfig& c = cfg;
        auto seen = [&](const std::string& name) { return app->count(name) > 0; };
        if (seen("--model")) merged.model_path = c.model_path;
        if (seen("--scorer")) merged.scorer_path = c.scorer_path;
        if (seen("--vocab")) merged.vocab_path = c.vocab_path;
        if (seen("--concept")) merged.concept_path = c.concept_path;
        if (seen("--concept-id")) merged.concept_id = c.concept_id;
        if (seen("--ranking")) merged.ranking_path = c.ranking_path;
        if (seen("--out-dir")) merged.out_dir = c.out_dir;
        if (seen("--seed")) merged.seed = c.seed;
        if (seen("--top-n")) merged.top_n = c.top_n;
        if (seen("--gen-len")) merged.gen_len = c.gen_len;
        if (seen("--steps")) merged.steps = c.steps;
        if (seen("--samples")) merged.n_samples = c.n_samples;
        if (seen("--k-grid")) merged.k_grid = c.k_grid;
        if (seen("--she-words")) merged.she_words = c.she_words;
        if (seen("--he-words")) merged.he_words = c.he_words;
        if (seen("--keywords")) merged.keywords = c.keywords;
        if (seen("--context")) merged.contexts = c.contexts;
        if (seen("--contexts-file")) merged.contexts_file = c.contexts_file;
        if (seen("--builtin-contexts")) merged.use_builtin_contexts = c.use_builtin_contexts;
        if (seen("--window")) merged.window = c.window;
        if (seen("--windows")) merged.n_windows = c.n_windows;
        if (seen("--rand-subsets")) merged.n_random = c.n_random;
        if (seen("--workers")) merged.workers = c.workers;
        return merged;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"expert-unit discovery and activation-clamp steering for small LMs"};
    app.require_subcommand(1);

    CommonOpts find_opts, gen_opts, score_opts, sweep_opts, probe_opts, build_opts,
        parse_opts, fixture_opts;

    CLI::App* find = app.add_subcommand("find-experts",
                                        "rank units by average precision on a concept");
    find_opts.attach(find);

    CLI::App* gen = app.add_subcommand("generate", "sample text under a do(c,k) clamp");
    gen_opts.attach(gen);
    int64_t gen_k = 0;
    std::string gen_context, gen_mode = "expectation";
    gen->add_option("--k", gen_k, "number of top experts to clamp");
    gen->add_option("--gen-context", gen_context, "prompt text")->required();
    gen->add_option("--plan-mode", gen_mode, "expectation | zero");

    CLI::App* score = app.add_subcommand("score", "perplexity of a continuation");
    score_opts.attach(score);
    std::string score_context, score_cont;
    score->add_option("--score-context", score_context, "context text")->required();
    score->add_option("--continuation", score_cont, "continuation text")->required();

    CLI::App* sweep = app.add_subcommand("parity-sweep",
                                         "delta-p across intervention strengths");
    sweep_opts.attach(sweep);

    CLI::App* probe = app.add_subcommand("subset-probe",
                                         "keyword probability per rank window");
    probe_opts.attach(probe);
    std::string probe_context;
    probe->add_option("--probe-context", probe_context, "prompt text")->required();

    CLI::App* build = app.add_subcommand("build-concept",
                                         "concept JSONL from OneSec-style XML");
    build_opts.attach(build);
    std::string build_xml, build_sense;
    bool build_fixture = false;
    build->add_option("--xml", build_xml, "OneSec-style XML file")->required();
    build->add_option("--sense", build_sense, "target sense key (lemma%N:NN:NN)")->required();
    build->add_flag("--fixture-mode", build_fixture, "relax the per-side minimum to 1");

    CLI::App* parse = app.add_subcommand("parse-onesec", "parse and dump instances");
    parse_opts.attach(parse);
    std::string parse_xml;
    bool parse_strict = false;
    parse->add_option("--xml", parse_xml, "OneSec-style XML file")->required();
    parse->add_flag("--strict", parse_strict, "fail on malformed instances");

    CLI::App* fixture = app.add_subcommand("make-fixture",
                                           "emit a synthetic model + vocab + concept");
    fixture_opts.attach(fixture);
    std::string fixture_kind = "planted";
    fixture->add_option("--kind", fixture_kind, "planted | biased | decaying | trained");

    CLI11_PARSE(app, argc, argv);

    try {
        if (find->parsed()) {
            std::cout << experts::cmd_find_experts(find_opts.resolve(find)) << "\n";
        } else if (gen->parsed()) {
            experts::cmd_generate(gen_opts.resolve(gen), gen_k, gen_context, gen_mode);
        } else if (score->parsed()) {
            experts::cmd_score(score_opts.resolve(score), score_context, score_cont);
        } else if (sweep->parsed()) {
            std::cout << experts::cmd_parity_sweep(sweep_opts.resolve(sweep)) << "\n";
        } else if (probe->parsed()) {
            std::cout << experts::cmd_subset_probe(probe_opts.resolve(probe), probe_context)
                      << "\n";
        } else if (build->parsed()) {
            experts::cmd_build_concept(build_opts.resolve(build), build_xml, build_sense,
                                       build_fixture);
        } else if (parse->parsed()) {
            experts::cmd_parse_onesec(parse_opts.resolve(parse), parse_xml, parse_strict);
        } else if (fixture->parsed()) {
            experts::cmd_make_fixture(fixture_opts.resolve(fixture), fixture_kind);
        }
    } catch (const experts::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return static_cast<int>(experts::ErrorClass::internal);
    }
    return 0;
}
