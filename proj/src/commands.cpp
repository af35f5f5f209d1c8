#include "experts/commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <json.hpp>

#include "experts/concepts.hpp"
#include "experts/expertise.hpp"
#include "experts/generation.hpp"
#include "experts/intervention.hpp"
#include "experts/io.hpp"
#include "experts/model.hpp"
#include "experts/parallel.hpp"
#include "experts/parity.hpp"
#include "experts/synthetic.hpp"

namespace experts {

namespace {

using nlohmann::json;

std::string join_path(const std::string& dir, const std::string& name) {
    if (dir.empty() || dir == ".") return name;
    return (std::filesystem::path(dir) / name).string();
}

void ensure_out_dir(const std::string& dir) {
    if (dir.empty() || dir == ".") return;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorClass::io, "cannot create output directory '" + dir + "'");
}

std::string artifact_header(const RunConfig& cfg) {
    return "# config_hash=" + hex64(cfg.config_hash()) + " seed=" + std::to_string(cfg.seed) +
           " rng=" + std::string(kRngName) + "\n";
}

Model load_model_checked(const std::string& path, const char* what) {
    if (path.empty()) fail(ErrorClass::usage, std::string(what) + " checkpoint path not set");
    if (!file_exists(path)) fail(ErrorClass::io, std::string(what) + " checkpoint '" + path + "' does not exist");
    return load_checkpoint(path);
}

Vocab load_vocab_checked(const std::string& path) {
    if (path.empty()) fail(ErrorClass::usage, "vocab path not set");
    if (!file_exists(path)) fail(ErrorClass::io, "vocab '" + path + "' does not exist");
    return Vocab::load(path);
}

std::string default_concept_id(const std::string& concept_path) {
    return std::filesystem::path(concept_path).stem().string();
}

std::vector<std::string> effective_contexts(const RunConfig& cfg) {
    std::vector<std::string> out = cfg.contexts;
    if (cfg.use_builtin_contexts) {
        ContextSet set = build_contexts(builtin_contexts());
        for (const RenderedContext& rc : set.rendered) out.push_back(rc.text);
    }
    if (!cfg.contexts_file.empty()) {
        json j = json::parse(read_file(cfg.contexts_file), nullptr, false);
        if (j.is_discarded())
            fail(ErrorClass::format, "contexts file '" + cfg.contexts_file + "': invalid JSON");
        ContextConfig cc;
        cc.female = j.value("female", std::vector<std::string>{});
        cc.male = j.value("male", std::vector<std::string>{});
        cc.neutral = j.value("neutral", std::vector<std::string>{});
        cc.templates = j.value("templates", std::vector<std::string>{});
        ContextSet set = build_contexts(cc);
        for (const RenderedContext& rc : set.rendered) out.push_back(rc.text);
    }
    if (out.empty()) fail(ErrorClass::usage, "no contexts configured");
    return out;
}

} // namespace

std::string RunConfig::to_canonical_json() const {
    json j;
    j["model"] = model_path;
    j["scorer"] = scorer_path;
    j["vocab"] = vocab_path;
    j["concept"] = concept_path;
    j["concept_id"] = concept_id;
    j["ranking"] = ranking_path;
    j["out_dir"] = out_dir;
    j["seed"] = seed;
    j["top_n"] = top_n;
    j["gen_len"] = gen_len;
    j["steps"] = steps;
    j["n_samples"] = n_samples;
    j["k_grid"] = k_grid;
    j["she_words"] = she_words;
    j["he_words"] = he_words;
    j["keywords"] = keywords;
    j["contexts"] = contexts;
    j["contexts_file"] = contexts_file;
    j["use_builtin_contexts"] = use_builtin_contexts;
    j["window"] = window;
    j["n_windows"] = n_windows;
    j["n_random"] = n_random;
    j["rng"] = kRngName;
    return j.dump();
}

uint64_t RunConfig::config_hash() const { return fnv1a64(to_canonical_json()); }

void RunConfig::apply_worker_budget() const {
    int n = workers;
    if (const char* env = std::getenv("EXPERTCTL_WORKERS")) {
        try {
            n = std::stoi(env);
        } catch (const std::exception&) {
            fail(ErrorClass::usage, "EXPERTCTL_WORKERS is not an integer");
        }
    }
    if (n > 0) set_worker_budget(n);
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) fail(ErrorClass::format, "config '" + path + "': invalid JSON");
    RunConfig cfg;
    cfg.model_path = j.value("model", cfg.model_path);
    cfg.scorer_path = j.value("scorer", cfg.scorer_path);
    cfg.vocab_path = j.value("vocab", cfg.vocab_path);
    cfg.concept_path = j.value("concept", cfg.concept_path);
    cfg.concept_id = j.value("concept_id", cfg.concept_id);
    cfg.ranking_path = j.value("ranking", cfg.ranking_path);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.top_n = j.value("top_n", cfg.top_n);
    cfg.gen_len = j.value("gen_len", cfg.gen_len);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.n_samples = j.value("n_samples", cfg.n_samples);
    cfg.k_grid = j.value("k_grid", cfg.k_grid);
    cfg.she_words = j.value("she_words", cfg.she_words);
    cfg.he_words = j.value("he_words", cfg.he_words);
    cfg.keywords = j.value("keywords", cfg.keywords);
    cfg.contexts = j.value("contexts", cfg.contexts);
    cfg.contexts_file = j.value("contexts_file", cfg.contexts_file);
    cfg.use_builtin_contexts = j.value("use_builtin_contexts", cfg.use_builtin_contexts);
    cfg.window = j.value("window", cfg.window);
    cfg.n_windows = j.value("n_windows", cfg.n_windows);
    cfg.n_random = j.value("n_random", cfg.n_random);
    cfg.workers = j.value("workers", cfg.workers);
    return cfg;
}

std::string cmd_find_experts(const RunConfig& cfg) {
    cfg.apply_worker_budget();
    ensure_out_dir(cfg.out_dir);
    Model model = load_model_checked(cfg.model_path, "model");
    Vocab vocab = load_vocab_checked(cfg.vocab_path);
    if (cfg.concept_path.empty()) fail(ErrorClass::usage, "concept path not set");
    std::string concept_id =
        cfg.concept_id.empty() ? default_concept_id(cfg.concept_path) : cfg.concept_id;
    ConceptDataset ds = load_concept_jsonl(cfg.concept_path, concept_id);

    ResponseMatrix responses = extract_responses(model, vocab, ds);
    ExpertRanking ranking = rank_experts(responses);

    std::string cache_path = join_path(cfg.out_dir, "responses.bin");
    save_response_cache(cache_path, responses);
    std::string csv_path = join_path(cfg.out_dir, "ranking.csv");
    atomic_write_file(csv_path, artifact_header(cfg) + ranking_to_csv(ranking));
    return csv_path;
}

std::string cmd_generate(const RunConfig& cfg, int64_t k, const std::string& context,
                         const std::string& plan_mode) {
    cfg.apply_worker_budget();
    ensure_out_dir(cfg.out_dir);
    Model model = load_model_checked(cfg.model_path, "model");
    Vocab vocab = load_vocab_checked(cfg.vocab_path);

    InterventionPlan plan;
    if (k > 0) {
        if (cfg.ranking_path.empty())
            fail(ErrorClass::usage, "generate with k > 0 needs a ranking CSV (--ranking)");
        ExpertRanking ranking = ranking_from_csv(read_file(cfg.ranking_path), model.config);
        plan = plan_mode == "zero" ? make_ablation(ranking, k, cfg.concept_id)
                                   : make_do(ranking, k, cfg.concept_id);
    }

    Encoded ctx = encode(vocab, context);
    if (ctx.content_len == 0) fail(ErrorClass::usage, "empty context");
    GenerationRequest req;
    req.context = ctx.ids;
    req.steps = cfg.steps;
    req.top_n = cfg.top_n;
    req.seed = cfg.seed;
    req.plan = k > 0 ? &plan : nullptr;
    std::vector<int> out_ids = generate(model, req);

    std::string text = decode(vocab, out_ids);
    std::cout << context << " | " << text << "\n";

    json meta;
    meta["config_hash"] = hex64(cfg.config_hash());
    meta["seed"] = cfg.seed;
    meta["rng"] = kRngName;
    meta["k"] = k;
    meta["plan_mode"] = k > 0 ? plan_mode : "none";
    meta["context"] = context;
    meta["context_ids"] = ctx.ids;
    meta["generated_ids"] = out_ids;
    meta["generated_text"] = text;
    std::string meta_path = join_path(cfg.out_dir, "generation.json");
    atomic_write_file(meta_path, meta.dump(2) + "\n");
    return meta_path;
}

std::string cmd_score(const RunConfig& cfg, const std::string& context,
                      const std::string& continuation) {
    Model scorer = load_model_checked(cfg.scorer_path, "scorer");
    Vocab vocab = load_vocab_checked(cfg.vocab_path);
    Encoded ctx = encode(vocab, context);
    Encoded cont = encode(vocab, continuation);
    if (ctx.content_len == 0) fail(ErrorClass::usage, "empty context");
    ScoredText scored = perplexity(scorer, ctx.ids, cont.ids);

    json j;
    j["config_hash"] = hex64(cfg.config_hash());
    j["perplexity"] = scored.perplexity;
    j["log_probs"] = scored.log_probs;
    j["n_scored"] = scored.log_probs.size();
    std::cout << j.dump(2) << "\n";
    return j.dump();
}

std::string cmd_parity_sweep(const RunConfig& cfg) {
    cfg.apply_worker_budget();
    ensure_out_dir(cfg.out_dir);
    Model model = load_model_checked(cfg.model_path, "model");
    Vocab vocab = load_vocab_checked(cfg.vocab_path);
    if (cfg.ranking_path.empty()) fail(ErrorClass::usage, "parity-sweep needs --ranking");
    ExpertRanking ranking = ranking_from_csv(read_file(cfg.ranking_path), model.config);

    Model scorer;
    bool have_scorer = !cfg.scorer_path.empty();
    if (have_scorer) scorer = load_model_checked(cfg.scorer_path, "scorer");

    std::vector<std::string> contexts = effective_contexts(cfg);

    ParitySweepParams params;
    params.k_grid = cfg.k_grid;
    params.n_samples = cfg.n_samples;
    params.gen_len = cfg.gen_len;
    params.top_n = cfg.top_n;
    params.she_ids = map_words(vocab, cfg.she_words);
    params.he_ids = map_words(vocab, cfg.he_words);
    params.keyword_ids = map_words(vocab, cfg.keywords);
    params.scorer = have_scorer ? &scorer : nullptr;
    params.concept_id = cfg.concept_id;

    std::string csv = artifact_header(cfg) +
                      "context,k,delta_p,ci_lo,ci_hi,p_she,p_he,kw_prob,ppl\n";
    json summary;
    summary["config_hash"] = hex64(cfg.config_hash());
    summary["seed"] = cfg.seed;
    summary["rng"] = kRngName;
    summary["n_contexts"] = contexts.size();
    json per_context = json::array();
    std::vector<double> parity_points;

    for (size_t ci = 0; ci < contexts.size(); ++ci) {
        const std::string& context_text = contexts[ci];
        Encoded ctx = encode(vocab, context_text);
        if (ctx.content_len == 0)
            fail(ErrorClass::usage, "context " + std::to_string(ci) + " is empty");
        ParitySweepParams p = params;
        p.seed = mix64(cfg.seed ^ (0xc0417e47ull + ci));
        ParitySweepResult res = parity_sweep(model, ranking, ctx.ids, p);

        for (const ParitySweepPoint& pt : res.points) {
            csv += '"' + context_text + "\"," + std::to_string(pt.k) + ',' +
                   fmt_double(pt.dp.delta_p) + ',' + fmt_double(pt.dp.ci_lo) + ',' +
                   fmt_double(pt.dp.ci_hi) + ',' + fmt_double(pt.dp.p_she) + ',' +
                   fmt_double(pt.dp.p_he) + ',' + fmt_double(pt.kw_prob) + ',' +
                   fmt_double(pt.mean_ppl) + '\n';
        }
        json cj;
        cj["context"] = context_text;
        if (res.parity_point) {
            cj["parity_point"] = *res.parity_point;
            cj["parity_point_int"] = *res.parity_point_int;
            cj["ppl_at_parity"] = res.ppl_at_parity;
            parity_points.push_back(*res.parity_point);
        } else {
            cj["parity_point"] = nullptr;
        }
        per_context.push_back(cj);
    }
    summary["contexts"] = per_context;
    summary["n_with_parity_point"] = parity_points.size();
    if (!parity_points.empty()) {
        std::sort(parity_points.begin(), parity_points.end());
        size_t n = parity_points.size();
        double median = n % 2 ? parity_points[n / 2]
                              : 0.5 * (parity_points[n / 2 - 1] + parity_points[n / 2]);
        summary["median_parity_point"] = median;
    }

    std::string csv_path = join_path(cfg.out_dir, "sweep.csv");
    atomic_write_file(csv_path, csv);
    atomic_write_file(join_path(cfg.out_dir, "summary.json"), summary.dump(2) + "\n");
    return csv_path;
}

std::string cmd_subset_probe(const RunConfig& cfg, const std::string& context) {
    cfg.apply_worker_budget();
    ensure_out_dir(cfg.out_dir);
    Model model = load_model_checked(cfg.model_path, "model");
    Vocab vocab = load_vocab_checked(cfg.vocab_path);
    if (cfg.ranking_path.empty()) fail(ErrorClass::usage, "subset-probe needs --ranking");
    ExpertRanking ranking = ranking_from_csv(read_file(cfg.ranking_path), model.config);

    Encoded ctx = encode(vocab, context);
    if (ctx.content_len == 0) fail(ErrorClass::usage, "empty context");

    SubsetProbeParams params;
    params.window = cfg.window;
    params.n_windows = cfg.n_windows;
    params.n_random = cfg.n_random;
    params.n_samples = cfg.n_samples;
    params.gen_len = cfg.gen_len;
    params.top_n = cfg.top_n;
    params.seed = cfg.seed;
    params.keyword_ids = map_words(vocab, cfg.keywords);
    params.concept_id = cfg.concept_id;

    std::vector<SubsetProbeRow> rows = subset_probe(model, ranking, ctx.ids, params);
    std::string csv = artifact_header(cfg) +
                      "kind,index,rank_lo,rank_hi,mean_ap,kw_prob,ci_lo,ci_hi\n";
    for (const SubsetProbeRow& r : rows) {
        csv += r.kind + ',' + std::to_string(r.index) + ',' + std::to_string(r.rank_lo) +
               ',' + std::to_string(r.rank_hi) + ',' + fmt_double(r.mean_ap) + ',' +
               fmt_double(r.kw_prob) + ',' + fmt_double(r.kw_ci_lo) + ',' +
               fmt_double(r.kw_ci_hi) + '\n';
    }
    std::string csv_path = join_path(cfg.out_dir, "probe.csv");
    atomic_write_file(csv_path, csv);
    return csv_path;
}

std::string cmd_build_concept(const RunConfig& cfg, const std::string& onesec_path,
                              const std::string& target_sense, bool fixture_mode) {
    ensure_out_dir(cfg.out_dir);
    OneSecParse parsed = parse_onesec_file(onesec_path);
    for (const ParseIssue& issue : parsed.issues) {
        std::cerr << "warning: " << onesec_path << ": " << issue.to_string() << "\n";
    }
    ConceptLimits limits = fixture_mode ? ConceptLimits::fixture() : ConceptLimits{};
    BuildConceptResult built =
        build_concept(parsed.instances, target_sense, parsed.instances, limits, cfg.seed);
    for (const std::string& w : built.warnings) std::cerr << "warning: " << w << "\n";

    std::string path = join_path(cfg.out_dir, "concept.jsonl");
    save_concept_jsonl(path, built.dataset);
    std::cout << "concept " << target_sense << ": N+=" << built.dataset.n_pos()
              << " N-=" << built.dataset.n_neg() << " pad_length=" << built.dataset.pad_length
              << " -> " << path << "\n";
    return path;
}

std::string cmd_parse_onesec(const RunConfig& cfg, const std::string& onesec_path,
                             bool strict) {
    ensure_out_dir(cfg.out_dir);
    OneSecParse parsed = parse_onesec_file(onesec_path);
    std::string out;
    for (const OneSecInstance& inst : parsed.instances) {
        json j;
        j["doc_source"] = inst.doc_source;
        j["instance_id"] = inst.instance_id;
        j["sense_id"] = inst.sense_id;
        j["lemma"] = inst.lemma();
        j["context"] = inst.context;
        j["head"] = inst.head_text();
        j["head_begin"] = inst.head_begin;
        j["head_end"] = inst.head_end;
        out += j.dump();
        out += '\n';
    }
    std::string path = join_path(cfg.out_dir, "instances.jsonl");
    atomic_write_file(path, out);
    std::cout << "parsed " << parsed.instances.size() << " instances, "
              << parsed.issues.size() << " issues\n";
    for (const ParseIssue& issue : parsed.issues) {
        std::cerr << onesec_path << ": " << issue.to_string() << "\n";
    }
    if (strict && !parsed.issues.empty())
        fail(ErrorClass::format, "strict mode: " + std::to_string(parsed.issues.size()) +
                                     " malformed instances");
    return path;
}

std::string cmd_make_fixture(const RunConfig& cfg, const std::string& kind) {
    ensure_out_dir(cfg.out_dir);
    Model model;
    Vocab vocab;
    ConceptDataset dataset;
    json meta;
    meta["kind"] = kind;
    meta["seed"] = cfg.seed;
    meta["rng"] = kRngName;
    meta["config_hash"] = hex64(cfg.config_hash());

    if (kind == "planted") {
        PlantedFixture fx = make_planted_fixture(cfg.seed);
        model = std::move(fx.model);
        vocab = fx.vocab;
        dataset = fx.dataset;
        meta["marker_word"] = fx.marker_word;
        meta["marker_token"] = fx.marker_token;
        meta["associated_token"] = fx.associated_token;
        meta["planted_unit"] = address_to_string(fx.planted_unit);
        meta["fire_value"] = fx.fire_value;
        meta["baseline_value"] = fx.baseline_value;
        meta["logit_margin"] = fx.margin;
        meta["suggested_context"] = decode(fx.vocab, fx.context);
    } else if (kind == "biased") {
        BiasedFixture fx = build_biased_lm(0.3, 0.7, 0.106, 16, cfg.seed);
        model = std::move(fx.model);
        vocab = fx.vocab;
        dataset = fx.dataset;
        meta["marker_word"] = fx.marker_word;
        meta["she_prob"] = fx.she_prob;
        meta["he_prob"] = fx.he_prob;
        meta["k_sensitivity"] = fx.k_sensitivity;
        meta["crossing_j"] = fx.crossing_j;
        meta["n_planted"] = fx.n_planted;
        meta["suggested_context"] = decode(fx.vocab, fx.context);
    } else if (kind == "decaying") {
        DecayingFixture fx = build_decaying_fixture(cfg.seed);
        model = std::move(fx.model);
        vocab = fx.vocab;
        dataset = fx.dataset;
        meta["marker_word"] = fx.marker_word;
        meta["assoc_word"] = fx.assoc_word;
        meta["n_groups"] = fx.n_groups;
        meta["group_size"] = fx.group_size;
        meta["group_logit_shift"] = fx.group_logit_shift;
        meta["group_ap"] = fx.group_ap;
        meta["suggested_context"] = decode(fx.vocab, fx.context);
    } else if (kind == "trained") {
        PlantedFixture base = make_planted_fixture(cfg.seed);
        vocab = base.vocab;
        dataset = base.dataset;
        std::vector<std::string> corpus = dataset.positives;
        corpus.insert(corpus.end(), dataset.negatives.begin(), dataset.negatives.end());
        model = train_demo_model(corpus, vocab, 64, /*epochs=*/20, /*lr=*/0.1, cfg.seed);
        meta["trained_on_sentences"] = corpus.size();
    } else {
        fail(ErrorClass::usage, "unknown fixture kind '" + kind +
                                    "' (planted | biased | decaying | trained)");
    }

    std::string model_path = join_path(cfg.out_dir, "model.ckpt");
    save_checkpoint(model_path, model);
    std::string vocab_path = join_path(cfg.out_dir, "vocab.tsv");
    vocab.save(vocab_path);
    std::string concept_path = join_path(cfg.out_dir, "concept.jsonl");
    save_concept_jsonl(concept_path, dataset);

    // A separate scorer checkpoint: a bigram model trained on the concept
    // sentences, distinct from the generator.
    std::vector<std::string> corpus = dataset.positives;
    corpus.insert(corpus.end(), dataset.negatives.begin(), dataset.negatives.end());
    Model scorer = train_demo_model(corpus, vocab, 64, /*epochs=*/10, /*lr=*/0.1,
                                    mix64(cfg.seed ^ 0x5c02e2));
    std::string scorer_path = join_path(cfg.out_dir, "scorer.ckpt");
    save_checkpoint(scorer_path, scorer);

    meta["model"] = model_path;
    meta["scorer"] = scorer_path;
    meta["vocab"] = vocab_path;
    meta["concept"] = concept_path;
    std::string meta_path = join_path(cfg.out_dir, "meta.json");
    atomic_write_file(meta_path, meta.dump(2) + "\n");
    std::cout << "fixture '" << kind << "' written under " << cfg.out_dir << "\n";
    return meta_path;
}

} // namespace experts
