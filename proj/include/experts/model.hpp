#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "experts/plan.hpp"
#include "experts/units.hpp"

namespace experts {

// Decoder-only transformer with pre-layernorm blocks, learned positional
// embeddings and a GELU MLP. Logits come straight off a linear head (no
// final layernorm), so residual-stream edits translate linearly into
// logit shifts. All tensors are row-major float32.
struct BlockWeights {
    std::vector<float> ln1_gamma, ln1_beta;     // [D]
    std::vector<float> attn_w, attn_b;          // [D,3D], [3D]   probe A
    std::vector<float> attn_proj_w, attn_proj_b; // [D,D], [D]    probe AProj
    std::vector<float> ln2_gamma, ln2_beta;     // [D]
    std::vector<float> mlp_up_w, mlp_up_b;      // [D,dff], [dff] probe B
    std::vector<float> mlp_down_w, mlp_down_b;  // [dff,D], [D]   probe BProj
};

struct Weights {
    std::vector<float> tok_emb; // [V,D]
    std::vector<float> pos_emb; // [T_max,D]
    std::vector<BlockWeights> blocks;
    std::vector<float> head_w; // [D,V]
    std::vector<float> head_b; // [V]
};

struct Model {
    ModelConfig config;
    Weights weights;
};

// Zero-initialized weights of the right shapes.
Weights zero_weights(const ModelConfig& cfg);

// Gaussian init, deterministic in (cfg, seed). Test/benchmark helper.
Weights random_weights(const ModelConfig& cfg, uint64_t seed, float scale = 0.08f);

struct ForwardTrace {
    int seq_len = 0;
    int vocab_size = 0;
    std::vector<float> logits; // [T,V], position-major
    bool probes_recorded = false;
    // probes[block][probe]: [width*T], channel-major so one unit's
    // time series is contiguous.
    std::vector<std::array<std::vector<float>, kNumProbes>> probes;

    const float* logits_at(int t) const { return logits.data() + static_cast<size_t>(t) * vocab_size; }
    float probe_at(int block, Probe p, int channel, int t) const {
        const auto& buf = probes[block][static_cast<int>(p)];
        return buf[static_cast<size_t>(channel) * seq_len + t];
    }
};

// Runs the model over `tokens`. With a plan, every clamped channel is
// overwritten with its clamp value at every position right after the
// owning linear layer, before anything downstream reads it; the recorded
// probe values reflect the clamp. Pure function of (model, tokens, plan).
ForwardTrace forward(const Model& model, std::span<const int> tokens,
                     const InterventionPlan* plan = nullptr,
                     bool record_probes = true);

float gelu(float x);

// Checkpoint container format: magic/version header carrying the config,
// then named row-major float32 tensors. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

} // namespace experts
