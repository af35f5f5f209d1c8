#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "experts/error.hpp"

namespace experts {

// The four probed linear-layer outputs inside each decoder block, in
// ranking tie-break order. Widths: A = 3*d_model (fused qkv), AProj =
// d_model, B = d_ff, BProj = d_model. With the default d_ff = 4*d_model
// each block exposes 9*d_model units.
enum class Probe : uint8_t { A = 0, AProj = 1, B = 2, BProj = 3 };

inline constexpr int kNumProbes = 4;

std::string_view probe_name(Probe p);
Probe probe_from_name(std::string_view name);

struct ModelConfig {
    int n_blocks = 1;
    int d_model = 16;
    int n_heads = 2;
    int d_ff = 0; // 0 means the default 4*d_model
    int vocab_size = 32;
    int max_seq_len = 64;
    float layernorm_eps = 1e-5f;

    int ff_width() const { return d_ff > 0 ? d_ff : 4 * d_model; }
    int head_dim() const { return d_model / n_heads; }

    void validate() const;
};

struct UnitAddress {
    int block = 0;
    Probe probe = Probe::A;
    int channel = 0;

    friend bool operator==(const UnitAddress&, const UnitAddress&) = default;
};

int probe_width(const ModelConfig& cfg, Probe p);

// Units per block: 3D + D + d_ff + D (= 9*D at the default d_ff).
int64_t units_per_block(const ModelConfig& cfg);
int64_t unit_count(const ModelConfig& cfg);

// Flat index over (block, probe, channel) in address order; bijective
// with UnitAddress on [0, unit_count).
int64_t flatten_unit(const ModelConfig& cfg, const UnitAddress& addr);
UnitAddress unflatten_unit(const ModelConfig& cfg, int64_t index);

void validate_address(const ModelConfig& cfg, const UnitAddress& addr);

std::string address_to_string(const UnitAddress& addr);

} // namespace experts
