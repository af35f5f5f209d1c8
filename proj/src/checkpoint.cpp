#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "experts/model.hpp"

namespace experts {

namespace {

constexpr char kMagic[8] = {'E', 'X', 'P', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kDtypeF32 = 0;

void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_f32(std::ostream& out, float v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_tensor(std::ostream& out, const std::string& name,
                  const std::vector<uint32_t>& dims, const std::vector<float>& data) {
    write_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<uint32_t>(dims.size()));
    size_t n = 1;
    for (uint32_t d : dims) {
        write_u32(out, d);
        n *= d;
    }
    if (n != data.size())
        fail(ErrorClass::internal, "tensor '" + name + "' size mismatch on save");
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(n * sizeof(float)));
}

struct Reader {
    std::ifstream in;
    std::string path;
    std::string section = "header";

    uint32_t read_u32() {
        uint32_t v = 0;
        if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
            fail(ErrorClass::format,
                 "checkpoint '" + path + "' truncated while reading " + section);
        return v;
    }

    float read_f32() {
        float v = 0;
        if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
            fail(ErrorClass::format,
                 "checkpoint '" + path + "' truncated while reading " + section);
        return v;
    }

    // Expects the named tensor next in the stream with the given dims.
    void read_tensor(const std::string& name, const std::vector<uint32_t>& dims,
                     std::vector<float>& out) {
        section = "tensor '" + name + "'";
        uint32_t name_len = read_u32();
        std::string got(name_len, '\0');
        if (!in.read(got.data(), name_len))
            fail(ErrorClass::format,
                 "checkpoint '" + path + "' truncated while reading " + section);
        if (got != name)
            fail(ErrorClass::format, "checkpoint '" + path + "': expected tensor '" + name +
                                         "', found '" + got + "'");
        uint32_t ndims = read_u32();
        if (ndims != dims.size())
            fail(ErrorClass::format, "checkpoint '" + path + "': tensor '" + name +
                                         "' has rank " + std::to_string(ndims) +
                                         ", expected " + std::to_string(dims.size()));
        size_t n = 1;
        for (size_t i = 0; i < dims.size(); ++i) {
            uint32_t d = read_u32();
            if (d != dims[i])
                fail(ErrorClass::format,
                     "checkpoint '" + path + "': dimension mismatch for tensor '" + name +
                         "': dim " + std::to_string(i) + " is " + std::to_string(d) +
                         ", header implies " + std::to_string(dims[i]));
            n *= d;
        }
        out.resize(n);
        if (!in.read(reinterpret_cast<char*>(out.data()),
                     static_cast<std::streamsize>(n * sizeof(float))))
            fail(ErrorClass::format,
                 "checkpoint '" + path + "' truncated while reading " + section);
    }
};

std::vector<std::pair<std::string, std::pair<std::vector<uint32_t>, const std::vector<float>*>>>
tensor_table(const ModelConfig& cfg, const Weights& w) {
    using Entry = std::pair<std::string, std::pair<std::vector<uint32_t>, const std::vector<float>*>>;
    const uint32_t d = static_cast<uint32_t>(cfg.d_model);
    const uint32_t dff = static_cast<uint32_t>(cfg.ff_width());
    const uint32_t v = static_cast<uint32_t>(cfg.vocab_size);
    const uint32_t t = static_cast<uint32_t>(cfg.max_seq_len);
    std::vector<Entry> table;
    table.push_back({"tok_emb", {{v, d}, &w.tok_emb}});
    table.push_back({"pos_emb", {{t, d}, &w.pos_emb}});
    for (int b = 0; b < cfg.n_blocks; ++b) {
        const BlockWeights& bw = w.blocks[static_cast<size_t>(b)];
        std::string pre = "blk" + std::to_string(b) + ".";
        table.push_back({pre + "ln1.gamma", {{d}, &bw.ln1_gamma}});
        table.push_back({pre + "ln1.beta", {{d}, &bw.ln1_beta}});
        table.push_back({pre + "attn.w", {{d, 3 * d}, &bw.attn_w}});
        table.push_back({pre + "attn.b", {{3 * d}, &bw.attn_b}});
        table.push_back({pre + "attn_proj.w", {{d, d}, &bw.attn_proj_w}});
        table.push_back({pre + "attn_proj.b", {{d}, &bw.attn_proj_b}});
        table.push_back({pre + "ln2.gamma", {{d}, &bw.ln2_gamma}});
        table.push_back({pre + "ln2.beta", {{d}, &bw.ln2_beta}});
        table.push_back({pre + "mlp_up.w", {{d, dff}, &bw.mlp_up_w}});
        table.push_back({pre + "mlp_up.b", {{dff}, &bw.mlp_up_b}});
        table.push_back({pre + "mlp_down.w", {{dff, d}, &bw.mlp_down_w}});
        table.push_back({pre + "mlp_down.b", {{d}, &bw.mlp_down_b}});
    }
    table.push_back({"head.w", {{d, v}, &w.head_w}});
    table.push_back({"head.b", {{v}, &w.head_b}});
    return table;
}

} // namespace

void save_checkpoint(const std::string& path, const Model& model) {
    model.config.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorClass::io, "cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);
    write_u32(out, kDtypeF32);
    write_u32(out, static_cast<uint32_t>(model.config.n_blocks));
    write_u32(out, static_cast<uint32_t>(model.config.d_model));
    write_u32(out, static_cast<uint32_t>(model.config.n_heads));
    write_u32(out, static_cast<uint32_t>(model.config.ff_width()));
    write_u32(out, static_cast<uint32_t>(model.config.vocab_size));
    write_u32(out, static_cast<uint32_t>(model.config.max_seq_len));
    write_f32(out, model.config.layernorm_eps);

    auto table = tensor_table(model.config, model.weights);
    write_u32(out, static_cast<uint32_t>(table.size()));
    for (const auto& [name, spec] : table) {
        write_tensor(out, name, spec.first, *spec.second);
    }
    if (!out) fail(ErrorClass::io, "write failure on '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
    Reader r;
    r.path = path;
    r.in.open(path, std::ios::binary);
    if (!r.in) fail(ErrorClass::io, "cannot open checkpoint '" + path + "'");

    char magic[8];
    if (!r.in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        fail(ErrorClass::format, "'" + path + "' is not a checkpoint (bad magic)");
    uint32_t version = r.read_u32();
    if (version != kVersion)
        fail(ErrorClass::format, "checkpoint '" + path + "' has unsupported version " +
                                     std::to_string(version));
    uint32_t dtype = r.read_u32();
    if (dtype != kDtypeF32)
        fail(ErrorClass::format,
             "checkpoint '" + path + "' has unsupported dtype " + std::to_string(dtype));

    Model model;
    model.config.n_blocks = static_cast<int>(r.read_u32());
    model.config.d_model = static_cast<int>(r.read_u32());
    model.config.n_heads = static_cast<int>(r.read_u32());
    model.config.d_ff = static_cast<int>(r.read_u32());
    model.config.vocab_size = static_cast<int>(r.read_u32());
    model.config.max_seq_len = static_cast<int>(r.read_u32());
    model.config.layernorm_eps = r.read_f32();
    model.config.validate();

    model.weights = zero_weights(model.config);
    auto table = tensor_table(model.config, model.weights);

    r.section = "tensor count";
    uint32_t n_tensors = r.read_u32();
    if (n_tensors != table.size())
        fail(ErrorClass::format, "checkpoint '" + path + "' holds " +
                                     std::to_string(n_tensors) + " tensors, expected " +
                                     std::to_string(table.size()));
    for (auto& [name, spec] : table) {
        r.read_tensor(name, spec.first, *const_cast<std::vector<float>*>(spec.second));
    }
    return model;
}

} // namespace experts
