#include "experts/model.hpp"

#include <cmath>

#include "experts/rng.hpp"

namespace experts {

namespace {

size_t sz(int64_t v) { return static_cast<size_t>(v); }

// out[t,:] = x[t,:] @ w + b, w is [in,out_dim]; accumulation in double.
void linear(const float* x, int seq, int in_dim, const float* w, const float* b,
            int out_dim, float* out) {
    for (int t = 0; t < seq; ++t) {
        const float* xt = x + static_cast<size_t>(t) * in_dim;
        float* ot = out + static_cast<size_t>(t) * out_dim;
        for (int o = 0; o < out_dim; ++o) {
            double acc = b ? b[o] : 0.0;
            for (int i = 0; i < in_dim; ++i) {
                acc += static_cast<double>(xt[i]) * w[static_cast<size_t>(i) * out_dim + o];
            }
            ot[o] = static_cast<float>(acc);
        }
    }
}

void layernorm(const float* x, int seq, int dim, const float* gamma, const float* beta,
               float eps, float* out) {
    for (int t = 0; t < seq; ++t) {
        const float* xt = x + static_cast<size_t>(t) * dim;
        float* ot = out + static_cast<size_t>(t) * dim;
        double mean = 0.0;
        for (int i = 0; i < dim; ++i) mean += xt[i];
        mean /= dim;
        double var = 0.0;
        for (int i = 0; i < dim; ++i) {
            double d = xt[i] - mean;
            var += d * d;
        }
        var /= dim;
        double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
        for (int i = 0; i < dim; ++i) {
            ot[i] = static_cast<float>((xt[i] - mean) * inv * gamma[i] + beta[i]);
        }
    }
}

struct ClampTable {
    // per (block, probe): list of (channel, value)
    std::vector<std::array<std::vector<std::pair<int, float>>, kNumProbes>> slots;

    ClampTable(const ModelConfig& cfg, const InterventionPlan* plan) {
        slots.resize(sz(cfg.n_blocks));
        if (!plan) return;
        plan->validate(cfg);
        for (const ClampEntry& e : plan->entries) {
            slots[sz(e.address.block)][static_cast<int>(e.address.probe)].push_back(
                {e.address.channel, e.value});
        }
    }

    // Overwrite clamped channels at every position. buf is [seq, width].
    void apply(int block, Probe p, float* buf, int seq, int width) const {
        for (const auto& [ch, v] : slots[sz(block)][static_cast<int>(p)]) {
            for (int t = 0; t < seq; ++t) buf[static_cast<size_t>(t) * width + ch] = v;
        }
    }
};

// Transpose [seq, width] activations into the channel-major trace layout.
void record_probe(ForwardTrace& trace, int block, Probe p, const float* buf, int seq,
                  int width) {
    auto& dst = trace.probes[sz(block)][static_cast<int>(p)];
    dst.resize(sz(width) * seq);
    for (int t = 0; t < seq; ++t) {
        for (int c = 0; c < width; ++c) {
            dst[static_cast<size_t>(c) * seq + t] = buf[static_cast<size_t>(t) * width + c];
        }
    }
}

} // namespace

float gelu(float x) {
    const float kC = 0.7978845608028654f; // sqrt(2/pi)
    float x3 = x * x * x;
    return 0.5f * x * (1.0f + std::tanh(kC * (x + 0.044715f * x3)));
}

Weights zero_weights(const ModelConfig& cfg) {
    cfg.validate();
    const int d = cfg.d_model, dff = cfg.ff_width();
    Weights w;
    w.tok_emb.assign(sz(cfg.vocab_size) * d, 0.0f);
    w.pos_emb.assign(sz(cfg.max_seq_len) * d, 0.0f);
    w.blocks.resize(sz(cfg.n_blocks));
    for (BlockWeights& b : w.blocks) {
        b.ln1_gamma.assign(sz(d), 1.0f);
        b.ln1_beta.assign(sz(d), 0.0f);
        b.attn_w.assign(sz(d) * (3 * d), 0.0f);
        b.attn_b.assign(sz(3 * d), 0.0f);
        b.attn_proj_w.assign(sz(d) * d, 0.0f);
        b.attn_proj_b.assign(sz(d), 0.0f);
        b.ln2_gamma.assign(sz(d), 1.0f);
        b.ln2_beta.assign(sz(d), 0.0f);
        b.mlp_up_w.assign(sz(d) * dff, 0.0f);
        b.mlp_up_b.assign(sz(dff), 0.0f);
        b.mlp_down_w.assign(sz(dff) * d, 0.0f);
        b.mlp_down_b.assign(sz(d), 0.0f);
    }
    w.head_w.assign(sz(d) * cfg.vocab_size, 0.0f);
    w.head_b.assign(sz(cfg.vocab_size), 0.0f);
    return w;
}

Weights random_weights(const ModelConfig& cfg, uint64_t seed, float scale) {
    Weights w = zero_weights(cfg);
    Philox rng(seed, /*stream=*/0x77ee17u);
    auto fill = [&](std::vector<float>& v, float s) {
        for (size_t i = 0; i < v.size(); ++i) {
            // Box-Muller, one normal per step.
            double u1 = 1.0 - rng.uniform();
            double u2 = rng.uniform();
            v[i] = static_cast<float>(std::sqrt(-2.0 * std::log(u1)) *
                                      std::cos(2.0 * 3.141592653589793 * u2) * s);
        }
    };
    fill(w.tok_emb, scale);
    fill(w.pos_emb, scale * 0.5f);
    for (BlockWeights& b : w.blocks) {
        fill(b.attn_w, scale);
        fill(b.attn_proj_w, scale);
        fill(b.mlp_up_w, scale);
        fill(b.mlp_down_w, scale);
    }
    fill(w.head_w, scale);
    return w;
}

ForwardTrace forward(const Model& model, std::span<const int> tokens,
                     const InterventionPlan* plan, bool record_probes) {
    const ModelConfig& cfg = model.config;
    cfg.validate();
    const int seq = static_cast<int>(tokens.size());
    if (seq == 0) fail(ErrorClass::validation, "forward: empty token sequence");
    if (seq > cfg.max_seq_len)
        fail(ErrorClass::validation, "forward: sequence length " + std::to_string(seq) +
                                         " exceeds max_seq_len " +
                                         std::to_string(cfg.max_seq_len));
    for (int t = 0; t < seq; ++t) {
        if (tokens[t] < 0 || tokens[t] >= cfg.vocab_size)
            fail(ErrorClass::validation,
                 "forward: token id " + std::to_string(tokens[t]) + " at position " +
                     std::to_string(t) + " outside vocab of size " +
                     std::to_string(cfg.vocab_size));
    }

    const int d = cfg.d_model, dff = cfg.ff_width();
    const int n_heads = cfg.n_heads, hd = cfg.head_dim();
    const Weights& w = model.weights;
    ClampTable clamps(cfg, plan);

    ForwardTrace trace;
    trace.seq_len = seq;
    trace.vocab_size = cfg.vocab_size;
    trace.probes_recorded = record_probes;
    if (record_probes) trace.probes.resize(sz(cfg.n_blocks));

    std::vector<float> x(sz(seq) * d);
    for (int t = 0; t < seq; ++t) {
        const float* te = &w.tok_emb[sz(tokens[t]) * d];
        const float* pe = &w.pos_emb[sz(t) * d];
        for (int i = 0; i < d; ++i) x[sz(t) * d + i] = te[i] + pe[i];
    }

    std::vector<float> normed(sz(seq) * d);
    std::vector<float> qkv(sz(seq) * 3 * d);
    std::vector<float> attn_out(sz(seq) * d);
    std::vector<float> proj(sz(seq) * d);
    std::vector<float> up(sz(seq) * dff);
    std::vector<float> down(sz(seq) * d);
    std::vector<double> scores(sz(seq));

    for (int bi = 0; bi < cfg.n_blocks; ++bi) {
        const BlockWeights& bw = w.blocks[sz(bi)];

        layernorm(x.data(), seq, d, bw.ln1_gamma.data(), bw.ln1_beta.data(),
                  cfg.layernorm_eps, normed.data());
        linear(normed.data(), seq, d, bw.attn_w.data(), bw.attn_b.data(), 3 * d, qkv.data());
        clamps.apply(bi, Probe::A, qkv.data(), seq, 3 * d);
        if (record_probes) record_probe(trace, bi, Probe::A, qkv.data(), seq, 3 * d);

        // Causal multi-head attention over the (possibly clamped) qkv.
        const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));
        for (int h = 0; h < n_heads; ++h) {
            const int qo = h * hd, ko = d + h * hd, vo = 2 * d + h * hd;
            for (int t = 0; t < seq; ++t) {
                const float* qt = &qkv[sz(t) * 3 * d + qo];
                double max_s = -1e300;
                for (int j = 0; j <= t; ++j) {
                    const float* kj = &qkv[sz(j) * 3 * d + ko];
                    double s = 0.0;
                    for (int i = 0; i < hd; ++i) s += static_cast<double>(qt[i]) * kj[i];
                    s *= inv_sqrt_hd;
                    scores[sz(j)] = s;
                    if (s > max_s) max_s = s;
                }
                double denom = 0.0;
                for (int j = 0; j <= t; ++j) {
                    scores[sz(j)] = std::exp(scores[sz(j)] - max_s);
                    denom += scores[sz(j)];
                }
                float* ot = &attn_out[sz(t) * d + h * hd];
                for (int i = 0; i < hd; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j <= t; ++j) {
                        acc += scores[sz(j)] * qkv[sz(j) * 3 * d + vo + i];
                    }
                    ot[i] = static_cast<float>(acc / denom);
                }
            }
        }

        linear(attn_out.data(), seq, d, bw.attn_proj_w.data(), bw.attn_proj_b.data(), d,
               proj.data());
        clamps.apply(bi, Probe::AProj, proj.data(), seq, d);
        if (record_probes) record_probe(trace, bi, Probe::AProj, proj.data(), seq, d);
        for (size_t i = 0; i < x.size(); ++i) x[i] += proj[i];

        layernorm(x.data(), seq, d, bw.ln2_gamma.data(), bw.ln2_beta.data(),
                  cfg.layernorm_eps, normed.data());
        linear(normed.data(), seq, d, bw.mlp_up_w.data(), bw.mlp_up_b.data(), dff, up.data());
        clamps.apply(bi, Probe::B, up.data(), seq, dff);
        if (record_probes) record_probe(trace, bi, Probe::B, up.data(), seq, dff);

        for (float& v : up) v = gelu(v);
        linear(up.data(), seq, dff, bw.mlp_down_w.data(), bw.mlp_down_b.data(), d,
               down.data());
        clamps.apply(bi, Probe::BProj, down.data(), seq, d);
        if (record_probes) record_probe(trace, bi, Probe::BProj, down.data(), seq, d);
        for (size_t i = 0; i < x.size(); ++i) x[i] += down[i];
    }

    trace.logits.resize(sz(seq) * cfg.vocab_size);
    linear(x.data(), seq, d, w.head_w.data(), w.head_b.data(), cfg.vocab_size,
           trace.logits.data());
    return trace;
}

} // namespace experts
