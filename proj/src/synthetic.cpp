#include "experts/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "experts/rng.hpp"

namespace experts {

namespace {

// Residual channel that carries every planted steering signal into the
// linear head. Channels 0/1 hold the marker embedding pair.
constexpr int kRouteChannel = 2;
constexpr float kNeverLogit = -30.0f;

void set_pair_embedding(Model& m, int token, int ch, float scale) {
    const int d = m.config.d_model;
    m.weights.tok_emb[static_cast<size_t>(token) * d + ch] = scale;
    m.weights.tok_emb[static_cast<size_t>(token) * d + ch + 1] = -scale;
}

float probe_b_response(const Model& m, int token, int block, int channel) {
    std::vector<int> ids{token};
    ForwardTrace t = forward(m, ids, nullptr, /*record_probes=*/true);
    return t.probe_at(block, Probe::B, channel, 0);
}

double assoc_logit(const Model& m, const std::vector<int>& ctx, int token,
                   const InterventionPlan* plan) {
    ForwardTrace t = forward(m, ctx, plan, /*record_probes=*/false);
    return t.logits_at(t.seq_len - 1)[token];
}

// Base next-token distribution: chosen tokens get fixed probabilities,
// the listed filler ids split the remainder, everything else is frozen
// out at kNeverLogit.
void set_base_distribution(Model& m, const std::vector<std::pair<int, double>>& fixed,
                           const std::vector<int>& fillers) {
    std::fill(m.weights.head_b.begin(), m.weights.head_b.end(), kNeverLogit);
    double rest = 1.0;
    for (const auto& [tok, p] : fixed) {
        m.weights.head_b[static_cast<size_t>(tok)] = static_cast<float>(std::log(p));
        rest -= p;
    }
    if (!fillers.empty() && rest > 1e-12) {
        float lf = static_cast<float>(std::log(rest / static_cast<double>(fillers.size())));
        for (int tok : fillers) m.weights.head_b[static_cast<size_t>(tok)] = lf;
    }
}

void add_bias_noise(Model& m, uint64_t seed, const std::vector<int>& protected_b_channels,
                    int planted_block) {
    Philox rng(seed, /*stream=*/0xb1a5);
    const int dff = m.config.ff_width();
    for (int b = 0; b < m.config.n_blocks; ++b) {
        BlockWeights& bw = m.weights.blocks[static_cast<size_t>(b)];
        for (float& v : bw.attn_b) {
            v = static_cast<float>((rng.uniform() - 0.5) * 0.02);
        }
        for (int c = 0; c < dff; ++c) {
            bool keep = b == planted_block &&
                        std::find(protected_b_channels.begin(), protected_b_channels.end(),
                                  c) != protected_b_channels.end();
            if (!keep) bw.mlp_up_b[static_cast<size_t>(c)] =
                static_cast<float>((rng.uniform() - 0.5) * 0.02);
        }
    }
}

void check_close(double got, double want, double rel, const std::string& what) {
    double denom = std::max(std::abs(want), 1e-9);
    if (std::abs(got - want) / denom > rel)
        fail(ErrorClass::internal, "fixture construction drifted: " + what + " realized " +
                                       std::to_string(got) + " vs target " +
                                       std::to_string(want));
}

} // namespace

void PlantedSpec::validate(const ModelConfig& cfg) const {
    cfg.validate();
    if (cfg.d_model < 4)
        fail(ErrorClass::validation,
             "config too small to isolate the planted channel: d_model must be >= 4");
    if (planted_unit.probe != Probe::B)
        fail(ErrorClass::validation, "planted unit must sit on probe B (the MLP input layer)");
    validate_address(cfg, planted_unit);
    if (marker_token < 3 || marker_token >= cfg.vocab_size)
        fail(ErrorClass::validation, "marker_token must be a non-special vocab id");
    if (!(fire_value > baseline_value))
        fail(ErrorClass::validation,
             "fire_value must exceed baseline_value for max-pooled detection");
    if (bias) {
        if (bias->she_prob <= 0.0 || bias->she_prob >= 1.0 || bias->he_prob <= 0.0 ||
            bias->he_prob >= 1.0 || bias->she_prob + bias->he_prob > 1.0)
            fail(ErrorClass::validation, "bias probabilities must lie in (0,1) and sum to <= 1");
        if (bias->k_sensitivity <= 0.0)
            fail(ErrorClass::validation, "k_sensitivity must be positive");
        if (bias->n_planted < 1 ||
            planted_unit.channel + bias->n_planted > cfg.ff_width())
            fail(ErrorClass::validation,
                 "config too small to isolate the planted channels: need " +
                     std::to_string(bias->n_planted) + " consecutive B channels");
        if (baseline_value != 0.0f)
            fail(ErrorClass::validation, "bias fixtures require baseline_value == 0");
        for (int t : bias->she_tokens)
            if (t < 3 || t >= cfg.vocab_size)
                fail(ErrorClass::validation, "she-set token out of range");
        for (int t : bias->he_tokens)
            if (t < 3 || t >= cfg.vocab_size)
                fail(ErrorClass::validation, "he-set token out of range");
    } else {
        if (associated_token < 3 || associated_token >= cfg.vocab_size)
            fail(ErrorClass::validation, "associated_token must be a non-special vocab id");
    }
}

PlantedOutcome build_planted_model(const ModelConfig& cfg, const PlantedSpec& spec,
                                   uint64_t seed) {
    spec.validate(cfg);
    const int d = cfg.d_model, dff = cfg.ff_width();
    const int block = spec.planted_unit.block;
    const int pc = spec.planted_unit.channel;
    const int n_planted = spec.bias ? spec.bias->n_planted : 1;

    PlantedOutcome out;
    out.model.config = cfg;
    out.model.weights = zero_weights(cfg);
    Model& m = out.model;

    set_pair_embedding(m, spec.marker_token, 0, 1.0f);

    // Calibrate the detector: probe with unit weight, then rescale so the
    // planted channels respond with ~fire_value at marker positions.
    BlockWeights& bw = m.weights.blocks[static_cast<size_t>(block)];
    bw.mlp_up_w[static_cast<size_t>(0) * dff + pc] = 1.0f;
    float y0 = probe_b_response(m, spec.marker_token, block, pc);
    if (y0 == 0.0f)
        fail(ErrorClass::internal, "planted detector probe returned zero response");
    const float detector = (spec.fire_value - spec.baseline_value) / y0;
    for (int u = 0; u < n_planted; ++u) {
        bw.mlp_up_w[static_cast<size_t>(0) * dff + pc + u] = detector;
        bw.mlp_up_b[static_cast<size_t>(pc + u)] = spec.baseline_value;
    }

    out.realized = spec;
    out.realized.fire_value = probe_b_response(m, spec.marker_token, block, pc);
    out.realized.baseline_value = probe_b_response(m, Vocab::kEosId, block, pc);
    check_close(out.realized.fire_value, spec.fire_value, 1e-4, "fire_value");
    check_close(out.realized.baseline_value, spec.baseline_value, 1e-4, "baseline_value");

    const double gelu_gap = static_cast<double>(gelu(out.realized.fire_value)) -
                            static_cast<double>(gelu(out.realized.baseline_value));
    if (gelu_gap <= 0.0)
        fail(ErrorClass::internal, "planted gelu gap is not positive");

    std::vector<int> protected_channels;
    for (int u = 0; u < n_planted; ++u) protected_channels.push_back(pc + u);

    if (!spec.bias) {
        const float w_route = static_cast<float>(spec.logit_margin / gelu_gap);
        for (int u = 0; u < n_planted; ++u)
            bw.mlp_down_w[static_cast<size_t>(pc + u) * d + kRouteChannel] = w_route;
        m.weights.head_w[static_cast<size_t>(kRouteChannel) * cfg.vocab_size +
                         spec.associated_token] = 1.0f;

        std::vector<int> fillers;
        for (int t = 3; t < cfg.vocab_size; ++t) {
            if (t != spec.associated_token) fillers.push_back(t);
        }
        set_base_distribution(m, {{spec.associated_token, spec.assoc_base_prob}}, fillers);

        add_bias_noise(m, seed, protected_channels, block);

        std::vector<int> ctx{Vocab::kEosId};
        InterventionPlan plan;
        plan.mode = PlanMode::expectation;
        plan.k = 1;
        plan.entries.push_back({spec.planted_unit, out.realized.fire_value});
        out.margin = assoc_logit(m, ctx, spec.associated_token, &plan) -
                     assoc_logit(m, ctx, spec.associated_token, nullptr);
        check_close(out.margin, spec.logit_margin, 1e-4, "logit margin");
    } else {
        const BiasSpec& bias = *spec.bias;
        const float w_unit = static_cast<float>(bias.k_sensitivity / gelu_gap);
        for (int u = 0; u < n_planted; ++u)
            bw.mlp_down_w[static_cast<size_t>(pc + u) * d + kRouteChannel] = w_unit;
        for (int t : bias.she_tokens)
            m.weights.head_w[static_cast<size_t>(kRouteChannel) * cfg.vocab_size + t] = 0.5f;
        for (int t : bias.he_tokens)
            m.weights.head_w[static_cast<size_t>(kRouteChannel) * cfg.vocab_size + t] = -0.5f;

        std::vector<std::pair<int, double>> fixed;
        for (int t : bias.she_tokens)
            fixed.push_back({t, bias.she_prob / static_cast<double>(bias.she_tokens.size())});
        for (int t : bias.he_tokens)
            fixed.push_back({t, bias.he_prob / static_cast<double>(bias.he_tokens.size())});
        std::vector<int> fillers;
        for (int t = 3; t < cfg.vocab_size; ++t) {
            bool taken = t == spec.marker_token ||
                         std::find(bias.she_tokens.begin(), bias.she_tokens.end(), t) !=
                             bias.she_tokens.end() ||
                         std::find(bias.he_tokens.begin(), bias.he_tokens.end(), t) !=
                             bias.he_tokens.end();
            if (!taken) fillers.push_back(t);
        }
        set_base_distribution(m, fixed, fillers);

        add_bias_noise(m, seed, protected_channels, block);

        // Realized gap shift for one clamped unit.
        std::vector<int> ctx{Vocab::kEosId};
        InterventionPlan plan;
        plan.mode = PlanMode::expectation;
        plan.k = 1;
        plan.entries.push_back({spec.planted_unit, out.realized.fire_value});
        double gap_with =
            assoc_logit(m, ctx, bias.she_tokens[0], &plan) -
            assoc_logit(m, ctx, bias.he_tokens[0], &plan);
        double gap_without =
            assoc_logit(m, ctx, bias.she_tokens[0], nullptr) -
            assoc_logit(m, ctx, bias.he_tokens[0], nullptr);
        out.margin = gap_with - gap_without;
        check_close(out.margin, bias.k_sensitivity, 1e-4, "k_sensitivity");
    }
    return out;
}

ConceptDataset make_marker_dataset(const Vocab& vocab, const std::string& marker_word,
                                   int n_pos, int n_neg, int min_len, int max_len,
                                   uint64_t seed,
                                   const std::vector<std::string>& filler_words,
                                   const std::vector<std::pair<std::string, int>>&
                                       distractor_counts) {
    if (n_pos < 1 || n_neg < 1)
        fail(ErrorClass::validation, "make_marker_dataset: need at least one sentence per side");
    if (min_len < 1 || max_len < min_len)
        fail(ErrorClass::validation, "make_marker_dataset: bad length range");
    if (filler_words.empty())
        fail(ErrorClass::validation, "make_marker_dataset: no filler words");
    if (!vocab.lookup(marker_word))
        fail(ErrorClass::validation, "make_marker_dataset: marker word not in vocab");

    Philox rng(seed, /*stream=*/0xda7a);
    auto random_sentence = [&](int len) {
        std::vector<std::string> words;
        for (int i = 0; i < len; ++i) {
            words.push_back(filler_words[rng.bounded(static_cast<uint32_t>(filler_words.size()))]);
        }
        return words;
    };
    auto join = [](const std::vector<std::string>& ws) {
        std::string s;
        for (const std::string& w : ws) {
            if (!s.empty()) s += ' ';
            s += w;
        }
        return s;
    };
    auto span_len = [&]() {
        return min_len + static_cast<int>(rng.bounded(static_cast<uint32_t>(max_len - min_len + 1)));
    };

    ConceptDataset ds;
    ds.concept_id = marker_word + "%0:00:00";
    for (int i = 0; i < n_pos; ++i) {
        std::vector<std::string> ws = random_sentence(span_len());
        size_t at = rng.bounded(static_cast<uint32_t>(ws.size() + 1));
        ws.insert(ws.begin() + static_cast<std::ptrdiff_t>(at), marker_word);
        ds.positives.push_back(join(ws));
    }
    int total_distractor = 0;
    for (const auto& [word, count] : distractor_counts) {
        if (!vocab.lookup(word))
            fail(ErrorClass::validation, "make_marker_dataset: distractor '" + word +
                                             "' not in vocab");
        total_distractor += count;
    }
    if (total_distractor > n_neg)
        fail(ErrorClass::validation, "make_marker_dataset: distractor counts exceed n_neg");
    for (const auto& [word, count] : distractor_counts) {
        for (int i = 0; i < count; ++i) {
            std::vector<std::string> ws = random_sentence(span_len());
            size_t at = rng.bounded(static_cast<uint32_t>(ws.size() + 1));
            ws.insert(ws.begin() + static_cast<std::ptrdiff_t>(at), word);
            ds.negatives.push_back(join(ws));
        }
    }
    while (static_cast<int>(ds.negatives.size()) < n_neg) {
        ds.negatives.push_back(join(random_sentence(span_len())));
    }
    int pad = 0;
    for (const std::string& s : ds.positives) pad = std::max(pad, token_length(s));
    for (const std::string& s : ds.negatives) pad = std::max(pad, token_length(s));
    ds.pad_length = pad;
    ds.validate(/*paper_mode=*/false);
    return ds;
}

namespace {

std::vector<std::string> filler_names(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "f%02d", i);
        out.push_back(buf);
    }
    return out;
}

} // namespace

PlantedFixture make_planted_fixture(uint64_t seed, int n_pos, int n_neg) {
    PlantedFixture fx;
    fx.marker_word = "signal";
    std::vector<std::string> fillers = filler_names(16);
    std::vector<std::string> tokens = fillers;
    tokens.push_back(fx.marker_word);
    fx.vocab = Vocab::from_tokens(tokens);
    fx.marker_token = *fx.vocab.lookup(fx.marker_word);
    fx.associated_token = fx.marker_token;

    ModelConfig cfg;
    cfg.n_blocks = 1;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.vocab_size = fx.vocab.size();
    cfg.max_seq_len = 64;

    PlantedSpec spec;
    spec.marker_token = fx.marker_token;
    spec.planted_unit = {0, Probe::B, 0};
    spec.fire_value = 2.0f;
    spec.baseline_value = 0.0f;
    spec.associated_token = fx.associated_token;
    spec.logit_margin = 1.2;
    spec.assoc_base_prob = 0.02;

    PlantedOutcome built = build_planted_model(cfg, spec, seed);
    fx.model = std::move(built.model);
    fx.planted_unit = spec.planted_unit;
    fx.fire_value = built.realized.fire_value;
    fx.baseline_value = built.realized.baseline_value;
    fx.margin = built.margin;

    fx.dataset = make_marker_dataset(fx.vocab, fx.marker_word, n_pos, n_neg, 4, 10,
                                     mix64(seed ^ 0x5e7), fillers);
    Encoded ctx = encode(fx.vocab, "f00 f01 f02 f03");
    fx.context = ctx.ids;
    return fx;
}

BiasedFixture build_biased_lm(double she_prob, double he_prob, double k_sensitivity,
                              int n_planted, uint64_t seed) {
    BiasedFixture fx;
    fx.marker_word = "woman";
    std::vector<std::string> fillers = filler_names(16);
    std::vector<std::string> tokens = {"she", "her", "he", "his", "woman", "women"};
    tokens.insert(tokens.end(), fillers.begin(), fillers.end());
    fx.vocab = Vocab::from_tokens(tokens);
    fx.she_ids = {*fx.vocab.lookup("she"), *fx.vocab.lookup("her")};
    fx.he_ids = {*fx.vocab.lookup("he"), *fx.vocab.lookup("his")};
    fx.n_planted = n_planted;
    fx.she_prob = she_prob;
    fx.he_prob = he_prob;
    fx.k_sensitivity = k_sensitivity;
    fx.crossing_j = std::log(he_prob / she_prob) / k_sensitivity;

    ModelConfig cfg;
    cfg.n_blocks = 1;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.vocab_size = fx.vocab.size();
    cfg.max_seq_len = 64;

    PlantedSpec spec;
    spec.marker_token = *fx.vocab.lookup(fx.marker_word);
    spec.planted_unit = {0, Probe::B, 0};
    spec.fire_value = 2.0f;
    spec.baseline_value = 0.0f;
    spec.associated_token = -1;
    BiasSpec bias;
    bias.she_tokens = fx.she_ids;
    bias.he_tokens = fx.he_ids;
    bias.she_prob = she_prob;
    bias.he_prob = he_prob;
    bias.k_sensitivity = k_sensitivity;
    bias.n_planted = n_planted;
    spec.bias = bias;

    PlantedOutcome built = build_planted_model(cfg, spec, seed);
    fx.model = std::move(built.model);

    fx.dataset = make_marker_dataset(fx.vocab, fx.marker_word, 40, 80, 3, 8,
                                     mix64(seed ^ 0xb1a5ed), fillers);
    Encoded ctx = encode(fx.vocab, "f00 f01 f02");
    fx.context = ctx.ids;
    return fx;
}

DecayingFixture build_decaying_fixture(uint64_t seed, int n_groups, int group_size) {
    if (n_groups < 1 || group_size < 1)
        fail(ErrorClass::validation, "decaying fixture: bad group shape");
    DecayingFixture fx;
    fx.marker_word = "signal";
    fx.assoc_word = "target";
    fx.n_groups = n_groups;
    fx.group_size = group_size;

    std::vector<std::string> fillers = filler_names(20);
    std::vector<std::string> tokens = {fx.assoc_word, fx.marker_word, "jam"};
    for (int g = 1; g < n_groups; ++g) tokens.push_back("d" + std::to_string(g));
    tokens.insert(tokens.end(), fillers.begin(), fillers.end());
    fx.vocab = Vocab::from_tokens(tokens);
    fx.assoc_token = *fx.vocab.lookup(fx.assoc_word);
    const int marker = *fx.vocab.lookup(fx.marker_word);
    const int jam = *fx.vocab.lookup("jam");

    const int n_planted = n_groups * group_size;
    ModelConfig cfg;
    cfg.n_blocks = 1;
    cfg.d_model = 40;
    cfg.n_heads = 4;
    cfg.d_ff = 0; // default 4*D = 160
    cfg.vocab_size = fx.vocab.size();
    cfg.max_seq_len = 64;
    if (n_planted + 1 > cfg.ff_width())
        fail(ErrorClass::validation, "decaying fixture: too many planted units for d_ff");
    if (6 + 2 * (n_groups - 1) > cfg.d_model)
        fail(ErrorClass::validation, "decaying fixture: too many groups for d_model");

    Model m;
    m.config = cfg;
    m.weights = zero_weights(cfg);
    const int d = cfg.d_model, dff = cfg.ff_width(), V = cfg.vocab_size;

    set_pair_embedding(m, marker, 0, 1.0f);
    set_pair_embedding(m, jam, 4, 1.0f);
    for (int g = 1; g < n_groups; ++g) {
        set_pair_embedding(m, *fx.vocab.lookup("d" + std::to_string(g)), 6 + 2 * (g - 1), 1.0f);
    }

    // Calibration probe: one unit weight on the marker row.
    const float fire = 2.0f;
    BlockWeights& bw = m.weights.blocks[0];
    bw.mlp_up_w[0] = 1.0f; // row 0, channel 0
    float y0 = probe_b_response(m, marker, 0, 0);
    const float detector = fire / y0;

    double gelu_fire = 0.0;
    for (int g = 0; g < n_groups; ++g) {
        for (int u = 0; u < group_size; ++u) {
            const int pc = g * group_size + u;
            bw.mlp_up_w[static_cast<size_t>(0) * dff + pc] = detector;
            if (g >= 1) {
                // This group false-fires at twice the marker response on
                // its distractor token.
                bw.mlp_up_w[static_cast<size_t>(6 + 2 * (g - 1)) * dff + pc] = 2.0f * detector;
            }
        }
    }
    const float fire_realized = probe_b_response(m, marker, 0, 0);
    gelu_fire = gelu(fire_realized);

    fx.group_logit_shift.resize(static_cast<size_t>(n_groups));
    double shift = 5.0;
    for (int g = 0; g < n_groups; ++g) {
        fx.group_logit_shift[static_cast<size_t>(g)] = shift;
        const float w_g = static_cast<float>(shift / (group_size * gelu_fire));
        for (int u = 0; u < group_size; ++u) {
            const int pc = g * group_size + u;
            bw.mlp_down_w[static_cast<size_t>(pc) * d + kRouteChannel] = w_g;
        }
        shift *= 0.4;
    }

    // Jammer: fires hard on the jam token and swamps the aggregate BProj
    // channel's score on half the negatives, pushing that channel's AP
    // (and rank) below every planted group.
    double total_shift = 0.0;
    for (double s : fx.group_logit_shift) total_shift += s;
    const int jam_channel = n_planted;
    bw.mlp_up_w[static_cast<size_t>(4) * dff + jam_channel] = detector;
    bw.mlp_down_w[static_cast<size_t>(jam_channel) * d + kRouteChannel] =
        static_cast<float>(2.0 * total_shift / gelu_fire);

    m.weights.head_w[static_cast<size_t>(kRouteChannel) * V + fx.assoc_token] = 1.0f;
    std::vector<int> filler_ids;
    for (const std::string& f : fillers) filler_ids.push_back(*fx.vocab.lookup(f));
    set_base_distribution(m, {{fx.assoc_token, 0.01}}, filler_ids);

    fx.model = std::move(m);

    // Distractor counts drive the per-group AP decay: 0, 2, 5, 10, 20...
    std::vector<std::pair<std::string, int>> distractors;
    const int n_pos = 30;
    std::vector<int> fp_counts = {0, 2, 5, 10, 20, 30, 40};
    fx.group_ap.resize(static_cast<size_t>(n_groups));
    int used = 0;
    for (int g = 0; g < n_groups; ++g) {
        int fp = fp_counts[static_cast<size_t>(std::min<size_t>(g, fp_counts.size() - 1))];
        if (g >= 1) {
            distractors.push_back({"d" + std::to_string(g), fp});
            used += fp;
        }
        double ap = 0.0;
        for (int r = 1; r <= n_pos; ++r)
            ap += static_cast<double>(r) / static_cast<double>(fp + r);
        fx.group_ap[static_cast<size_t>(g)] = ap / n_pos;
    }
    const int n_jam = 24;
    distractors.push_back({"jam", n_jam});
    const int n_neg = std::max(80, used + n_jam + 10);
    fx.dataset = make_marker_dataset(fx.vocab, fx.marker_word, n_pos, n_neg, 4, 10,
                                     mix64(seed ^ 0xdecaf), fillers, distractors);

    Encoded ctx = encode(fx.vocab, "f00 f01 f02 f03");
    fx.context = ctx.ids;
    return fx;
}

Model train_demo_model(const std::vector<std::string>& corpus, const Vocab& vocab,
                       int max_seq_len, int epochs, double learning_rate, uint64_t seed) {
    if (corpus.empty()) fail(ErrorClass::validation, "train_demo_model: empty corpus");
    ModelConfig cfg;
    cfg.n_blocks = 1;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.vocab_size = vocab.size();
    cfg.max_seq_len = max_seq_len;

    Model m;
    m.config = cfg;
    m.weights = zero_weights(cfg);
    const int d = cfg.d_model, V = cfg.vocab_size;
    Philox rng(seed, 0x7ea1);
    for (float& v : m.weights.tok_emb) v = static_cast<float>((rng.uniform() - 0.5) * 0.2);
    for (float& v : m.weights.head_w) v = static_cast<float>((rng.uniform() - 0.5) * 0.2);

    // The blocks stay inert, so the model is an exact bigram softmax
    // regression: logits(prev) = emb[prev] @ head_w + head_b.
    std::vector<std::vector<int>> encoded;
    for (const std::string& s : corpus) {
        Encoded e = encode(vocab, s);
        if (e.content_len >= 2) encoded.push_back(e.ids);
    }
    if (encoded.empty())
        fail(ErrorClass::validation, "train_demo_model: corpus has no sentence with 2+ tokens");

    std::vector<double> probs(static_cast<size_t>(V));
    std::vector<double> dx(static_cast<size_t>(d));
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (const std::vector<int>& ids : encoded) {
            for (size_t i = 0; i + 1 < ids.size(); ++i) {
                const int prev = ids[i], next = ids[i + 1];
                float* x = &m.weights.tok_emb[static_cast<size_t>(prev) * d];
                double max_l = -1e300;
                for (int v = 0; v < V; ++v) {
                    double l = m.weights.head_b[static_cast<size_t>(v)];
                    for (int r = 0; r < d; ++r)
                        l += static_cast<double>(x[r]) *
                             m.weights.head_w[static_cast<size_t>(r) * V + v];
                    probs[static_cast<size_t>(v)] = l;
                    max_l = std::max(max_l, l);
                }
                double denom = 0.0;
                for (int v = 0; v < V; ++v) {
                    probs[static_cast<size_t>(v)] = std::exp(probs[static_cast<size_t>(v)] - max_l);
                    denom += probs[static_cast<size_t>(v)];
                }
                for (int v = 0; v < V; ++v) probs[static_cast<size_t>(v)] /= denom;
                probs[static_cast<size_t>(next)] -= 1.0;

                std::fill(dx.begin(), dx.end(), 0.0);
                for (int v = 0; v < V; ++v) {
                    const double g = probs[static_cast<size_t>(v)];
                    if (g == 0.0) continue;
                    m.weights.head_b[static_cast<size_t>(v)] -=
                        static_cast<float>(learning_rate * g);
                    for (int r = 0; r < d; ++r) {
                        float& wv = m.weights.head_w[static_cast<size_t>(r) * V + v];
                        dx[static_cast<size_t>(r)] += g * wv;
                        wv -= static_cast<float>(learning_rate * g * x[r]);
                    }
                }
                for (int r = 0; r < d; ++r)
                    x[r] -= static_cast<float>(learning_rate * dx[static_cast<size_t>(r)]);
            }
        }
    }
    return m;
}

} // namespace experts
