#include "experts/units.hpp"

#include <string>

namespace experts {

std::string_view probe_name(Probe p) {
    switch (p) {
    case Probe::A: return "A";
    case Probe::AProj: return "AProj";
    case Probe::B: return "B";
    case Probe::BProj: return "BProj";
    }
    fail(ErrorClass::internal, "invalid probe enum value");
}

Probe probe_from_name(std::string_view name) {
    if (name == "A") return Probe::A;
    if (name == "AProj") return Probe::AProj;
    if (name == "B") return Probe::B;
    if (name == "BProj") return Probe::BProj;
    fail(ErrorClass::format, "unknown probe name '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
    if (n_blocks < 1) fail(ErrorClass::validation, "n_blocks must be >= 1");
    if (d_model < 1) fail(ErrorClass::validation, "d_model must be >= 1");
    if (n_heads < 1) fail(ErrorClass::validation, "n_heads must be >= 1");
    if (d_model % n_heads != 0)
        fail(ErrorClass::validation, "d_model (" + std::to_string(d_model) +
                                         ") must be divisible by n_heads (" +
                                         std::to_string(n_heads) + ")");
    if (ff_width() < 1) fail(ErrorClass::validation, "d_ff must be >= 1");
    if (vocab_size < 1) fail(ErrorClass::validation, "vocab_size must be >= 1");
    if (max_seq_len < 1) fail(ErrorClass::validation, "max_seq_len must be >= 1");
    if (!(layernorm_eps > 0.0f))
        fail(ErrorClass::validation, "layernorm_eps must be positive");
}

int probe_width(const ModelConfig& cfg, Probe p) {
    switch (p) {
    case Probe::A: return 3 * cfg.d_model;
    case Probe::AProj: return cfg.d_model;
    case Probe::B: return cfg.ff_width();
    case Probe::BProj: return cfg.d_model;
    }
    fail(ErrorClass::internal, "invalid probe enum value");
}

int64_t units_per_block(const ModelConfig& cfg) {
    return 5ll * cfg.d_model + cfg.ff_width();
}

int64_t unit_count(const ModelConfig& cfg) {
    cfg.validate();
    return units_per_block(cfg) * cfg.n_blocks;
}

int64_t flatten_unit(const ModelConfig& cfg, const UnitAddress& addr) {
    validate_address(cfg, addr);
    int64_t offset = units_per_block(cfg) * addr.block;
    for (int p = 0; p < static_cast<int>(addr.probe); ++p) {
        offset += probe_width(cfg, static_cast<Probe>(p));
    }
    return offset + addr.channel;
}

UnitAddress unflatten_unit(const ModelConfig& cfg, int64_t index) {
    if (index < 0 || index >= unit_count(cfg))
        fail(ErrorClass::validation,
             "unit index " + std::to_string(index) + " out of range [0, " +
                 std::to_string(unit_count(cfg)) + ")");
    const int64_t per_block = units_per_block(cfg);
    UnitAddress addr;
    addr.block = static_cast<int>(index / per_block);
    int64_t rest = index % per_block;
    for (int p = 0; p < kNumProbes; ++p) {
        const int w = probe_width(cfg, static_cast<Probe>(p));
        if (rest < w) {
            addr.probe = static_cast<Probe>(p);
            addr.channel = static_cast<int>(rest);
            return addr;
        }
        rest -= w;
    }
    fail(ErrorClass::internal, "unflatten_unit fell off the probe table");
}

void validate_address(const ModelConfig& cfg, const UnitAddress& addr) {
    if (addr.block < 0 || addr.block >= cfg.n_blocks)
        fail(ErrorClass::validation,
             "unit block " + std::to_string(addr.block) + " out of range [0, " +
                 std::to_string(cfg.n_blocks) + ")");
    const int w = probe_width(cfg, addr.probe);
    if (addr.channel < 0 || addr.channel >= w)
        fail(ErrorClass::validation,
             "unit channel " + std::to_string(addr.channel) + " out of range [0, " +
                 std::to_string(w) + ") for probe " + std::string(probe_name(addr.probe)));
}

std::string address_to_string(const UnitAddress& addr) {
    return "blk" + std::to_string(addr.block) + "." +
           std::string(probe_name(addr.probe)) + "." + std::to_string(addr.channel);
}

} // namespace experts
