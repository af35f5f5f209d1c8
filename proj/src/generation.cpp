#include "experts/generation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "experts/parallel.hpp"

namespace experts {

std::vector<int> map_words(const Vocab& vocab, const std::vector<std::string>& words) {
    if (words.empty()) fail(ErrorClass::validation, "empty word set");
    std::vector<int> ids;
    for (const std::string& w : words) {
        if (auto id = vocab.lookup(w)) ids.push_back(*id);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

void GenerationRequest::validate() const {
    if (context.empty()) fail(ErrorClass::validation, "generation: empty context");
    if (steps < 1) fail(ErrorClass::validation, "generation: steps must be >= 1");
    if (top_n < 1) fail(ErrorClass::validation, "generation: top_n must be >= 1");
}

namespace {

// One sampling step from the logits of the last position.
int sample_next(const float* logits, int vocab, int top_n, double u) {
    const int n = std::min(top_n, vocab);
    std::vector<int> order(static_cast<size_t>(vocab));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + n, order.end(), [&](int a, int b) {
        if (logits[a] != logits[b]) return logits[a] > logits[b];
        return a < b;
    });
    double max_l = logits[order[0]];
    std::vector<double> probs(static_cast<size_t>(n));
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        probs[static_cast<size_t>(i)] = std::exp(static_cast<double>(logits[order[static_cast<size_t>(i)]]) - max_l);
        total += probs[static_cast<size_t>(i)];
    }
    double target = u * total;
    double cum = 0.0;
    for (int i = 0; i < n; ++i) {
        cum += probs[static_cast<size_t>(i)];
        if (target < cum) return order[static_cast<size_t>(i)];
    }
    return order[static_cast<size_t>(n - 1)];
}

} // namespace

std::vector<int> generate(const Model& model, const GenerationRequest& request) {
    request.validate();
    const int ctx_len = static_cast<int>(request.context.size());
    if (ctx_len + request.steps > model.config.max_seq_len)
        fail(ErrorClass::validation,
             "generation: context length " + std::to_string(ctx_len) + " exceeds max_seq_len - steps = " +
                 std::to_string(model.config.max_seq_len - request.steps));

    Philox rng(request.seed, request.stream);
    std::vector<int> ids = request.context;
    std::vector<int> out;
    out.reserve(static_cast<size_t>(request.steps));
    for (int s = 0; s < request.steps; ++s) {
        ForwardTrace trace = forward(model, ids, request.plan, /*record_probes=*/false);
        const float* logits = trace.logits_at(trace.seq_len - 1);
        int next = sample_next(logits, model.config.vocab_size, request.top_n, rng.uniform());
        ids.push_back(next);
        out.push_back(next);
    }
    return out;
}

ScoredText perplexity(const Model& scorer, std::span<const int> context,
                      std::span<const int> continuation) {
    if (continuation.empty()) fail(ErrorClass::validation, "perplexity: empty continuation");
    if (context.empty()) fail(ErrorClass::validation, "perplexity: empty context");

    std::vector<int> full(context.begin(), context.end());
    full.insert(full.end(), continuation.begin(), continuation.end());
    ForwardTrace trace = forward(scorer, full, nullptr, /*record_probes=*/false);

    ScoredText scored;
    scored.tokens.assign(continuation.begin(), continuation.end());
    const int vocab = scorer.config.vocab_size;
    const int ctx_len = static_cast<int>(context.size());
    double sum_log2 = 0.0;
    for (size_t i = 0; i < continuation.size(); ++i) {
        const int pos = ctx_len + static_cast<int>(i); // token being predicted
        const float* logits = trace.logits_at(pos - 1);
        double max_l = logits[0];
        for (int v = 1; v < vocab; ++v) max_l = std::max(max_l, static_cast<double>(logits[v]));
        double denom = 0.0;
        for (int v = 0; v < vocab; ++v) denom += std::exp(static_cast<double>(logits[v]) - max_l);
        const double z = static_cast<double>(logits[full[static_cast<size_t>(pos)]]) - max_l;
        const double p = std::exp(z) / denom;
        if (p > 0.0) {
            scored.log_probs.push_back(std::log(p));
            sum_log2 += std::log2(p);
        } else {
            double lp = z - std::log(denom);
            scored.log_probs.push_back(lp);
            sum_log2 += lp * 1.4426950408889634; // / ln 2
        }
    }
    // Accumulated in base 2: exact powers of two (e.g. a uniform scorer)
    // survive the exp/log round trip unchanged.
    scored.perplexity = std::exp2(-sum_log2 / static_cast<double>(continuation.size()));
    return scored;
}

EstimateWithCi wilson_interval(int successes, int n) {
    EstimateWithCi e;
    e.n_samples = n;
    if (n <= 0) fail(ErrorClass::validation, "wilson_interval: n must be >= 1");
    const double z = 1.959963984540054; // 95%
    const double p = static_cast<double>(successes) / n;
    e.value = p;
    const double z2n = z * z / n;
    const double center = (p + z2n / 2.0) / (1.0 + z2n);
    const double half =
        z * std::sqrt(p * (1.0 - p) / n + z2n / (4.0 * n)) / (1.0 + z2n);
    e.ci_lo = std::max(0.0, center - half);
    e.ci_hi = std::min(1.0, center + half);
    return e;
}

PairedPresence sample_presence(const Model& model, std::span<const int> context,
                               const InterventionPlan* plan, const std::vector<int>& set_a,
                               const std::vector<int>& set_b, int n_samples, int gen_len,
                               uint64_t seed, int top_n, bool parallel,
                               std::vector<std::vector<int>>* keep_samples) {
    if (n_samples < 1) fail(ErrorClass::validation, "sample_presence: n_samples must be >= 1");
    if (gen_len < 1) fail(ErrorClass::validation, "sample_presence: gen_len must be >= 1");

    PairedPresence out;
    out.a.assign(static_cast<size_t>(n_samples), 0);
    out.b.assign(static_cast<size_t>(n_samples), 0);
    if (keep_samples) keep_samples->assign(static_cast<size_t>(n_samples), {});

    auto body = [&](int64_t j) {
        GenerationRequest req;
        req.context.assign(context.begin(), context.end());
        req.steps = gen_len;
        req.top_n = top_n;
        req.seed = seed;
        req.stream = static_cast<uint64_t>(j);
        req.plan = plan;
        std::vector<int> gen = generate(model, req);
        uint8_t hit_a = 0, hit_b = 0;
        for (int id : gen) {
            if (!hit_a && std::find(set_a.begin(), set_a.end(), id) != set_a.end()) hit_a = 1;
            if (!hit_b && std::find(set_b.begin(), set_b.end(), id) != set_b.end()) hit_b = 1;
        }
        out.a[static_cast<size_t>(j)] = hit_a;
        out.b[static_cast<size_t>(j)] = hit_b;
        if (keep_samples) (*keep_samples)[static_cast<size_t>(j)] = std::move(gen);
    };
    if (parallel) {
        parallel_for(n_samples, body);
    } else {
        for (int64_t j = 0; j < n_samples; ++j) body(j);
    }
    return out;
}

namespace {

EstimateWithCi keyword_probability_impl(const Model& model, std::span<const int> context,
                                        const InterventionPlan* plan,
                                        const std::vector<int>& word_ids, int n_samples,
                                        int gen_len, uint64_t seed, int top_n,
                                        bool parallel) {
    PairedPresence presence = sample_presence(model, context, plan, word_ids, {}, n_samples,
                                              gen_len, seed, top_n, parallel);
    int hits = 0;
    for (uint8_t h : presence.a) hits += h;
    return wilson_interval(hits, n_samples);
}

} // namespace

EstimateWithCi keyword_probability(const Model& model, std::span<const int> context,
                                   const InterventionPlan* plan,
                                   const std::vector<int>& word_ids, int n_samples,
                                   int gen_len, uint64_t seed, int top_n) {
    return keyword_probability_impl(model, context, plan, word_ids, n_samples, gen_len, seed,
                                    top_n, /*parallel=*/true);
}

EstimateWithCi keyword_probability_serial(const Model& model, std::span<const int> context,
                                          const InterventionPlan* plan,
                                          const std::vector<int>& word_ids, int n_samples,
                                          int gen_len, uint64_t seed, int top_n) {
    return keyword_probability_impl(model, context, plan, word_ids, n_samples, gen_len, seed,
                                    top_n, /*parallel=*/false);
}

} // namespace experts
