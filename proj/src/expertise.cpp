#include "experts/expertise.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "experts/io.hpp"
#include "experts/parallel.hpp"

namespace experts {

namespace {

// Pools one sentence's trace into the response column for sentence i.
void pool_sentence(const Model& model, const Vocab& vocab, const std::string& sentence,
                   int pad_length, int64_t i, ResponseMatrix& out) {
    Encoded enc = encode(vocab, sentence, pad_length);
    if (enc.content_len == 0)
        fail(ErrorClass::validation,
             "sentence " + std::to_string(i) + " has zero non-pad tokens");
    ForwardTrace trace = forward(model, enc.ids, nullptr, /*record_probes=*/true);

    const ModelConfig& cfg = model.config;
    const int T = trace.seq_len;
    int64_t unit = 0;
    for (int b = 0; b < cfg.n_blocks; ++b) {
        for (int p = 0; p < kNumProbes; ++p) {
            const int width = probe_width(cfg, static_cast<Probe>(p));
            const auto& buf = trace.probes[static_cast<size_t>(b)][p];
            for (int c = 0; c < width; ++c) {
                const float* series = buf.data() + static_cast<size_t>(c) * T;
                float best = series[0]; // position 0 is never a pad
                for (int t = 1; t < T; ++t) {
                    if (enc.pad_mask[static_cast<size_t>(t)]) continue;
                    if (series[t] > best) best = series[t];
                }
                out.values[static_cast<size_t>(unit) * out.n_sentences + i] = best;
                ++unit;
            }
        }
    }
}

ResponseMatrix make_matrix(const Model& model, const ConceptDataset& dataset) {
    dataset.validate(/*paper_mode=*/false);
    ResponseMatrix m;
    m.config = model.config;
    m.n_units = unit_count(model.config);
    m.n_sentences = dataset.size();
    if (m.n_sentences == 0) fail(ErrorClass::validation, "empty concept dataset");
    m.labels.assign(static_cast<size_t>(m.n_sentences), 0);
    for (int64_t i = 0; i < dataset.n_pos(); ++i) m.labels[static_cast<size_t>(i)] = 1;
    m.values.assign(static_cast<size_t>(m.n_units) * m.n_sentences, 0.0f);
    return m;
}

const std::string& sentence_at(const ConceptDataset& ds, int64_t i) {
    return i < ds.n_pos() ? ds.positives[static_cast<size_t>(i)]
                          : ds.negatives[static_cast<size_t>(i - ds.n_pos())];
}

} // namespace

ResponseMatrix extract_responses(const Model& model, const Vocab& vocab,
                                 const ConceptDataset& dataset) {
    ResponseMatrix m = make_matrix(model, dataset);
    parallel_for(m.n_sentences, [&](int64_t i) {
        pool_sentence(model, vocab, sentence_at(dataset, i), dataset.pad_length, i, m);
    });
    return m;
}

ResponseMatrix extract_responses_serial(const Model& model, const Vocab& vocab,
                                        const ConceptDataset& dataset) {
    ResponseMatrix m = make_matrix(model, dataset);
    for (int64_t i = 0; i < m.n_sentences; ++i) {
        pool_sentence(model, vocab, sentence_at(dataset, i), dataset.pad_length, i, m);
    }
    return m;
}

void save_response_cache(const std::string& path, const ResponseMatrix& m) {
    std::ofstream out(path + ".tmp", std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorClass::io, "cannot open '" + path + ".tmp' for writing");
    const char magic[8] = {'E', 'X', 'P', 'R', 'E', 'S', 'P', '1'};
    out.write(magic, sizeof(magic));
    auto w32 = [&](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    w32(static_cast<uint32_t>(m.config.n_blocks));
    w32(static_cast<uint32_t>(m.config.d_model));
    w32(static_cast<uint32_t>(m.config.n_heads));
    w32(static_cast<uint32_t>(m.config.ff_width()));
    w32(static_cast<uint32_t>(m.config.vocab_size));
    w32(static_cast<uint32_t>(m.config.max_seq_len));
    out.write(reinterpret_cast<const char*>(&m.config.layernorm_eps), 4);
    uint64_t units = static_cast<uint64_t>(m.n_units), sents = static_cast<uint64_t>(m.n_sentences);
    out.write(reinterpret_cast<const char*>(&units), 8);
    out.write(reinterpret_cast<const char*>(&sents), 8);
    out.write(reinterpret_cast<const char*>(m.labels.data()),
              static_cast<std::streamsize>(m.labels.size()));
    out.write(reinterpret_cast<const char*>(m.values.data()),
              static_cast<std::streamsize>(m.values.size() * sizeof(float)));
    if (!out) fail(ErrorClass::io, "write failure on '" + path + ".tmp'");
    out.close();
    std::rename((path + ".tmp").c_str(), path.c_str());
}

ResponseMatrix load_response_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorClass::io, "cannot open response cache '" + path + "'");
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, "EXPRESP1", 8) != 0)
        fail(ErrorClass::format, "'" + path + "' is not a response cache");
    ResponseMatrix m;
    auto r32 = [&]() {
        uint32_t v = 0;
        if (!in.read(reinterpret_cast<char*>(&v), 4))
            fail(ErrorClass::format, "response cache '" + path + "' truncated in header");
        return v;
    };
    m.config.n_blocks = static_cast<int>(r32());
    m.config.d_model = static_cast<int>(r32());
    m.config.n_heads = static_cast<int>(r32());
    m.config.d_ff = static_cast<int>(r32());
    m.config.vocab_size = static_cast<int>(r32());
    m.config.max_seq_len = static_cast<int>(r32());
    if (!in.read(reinterpret_cast<char*>(&m.config.layernorm_eps), 4))
        fail(ErrorClass::format, "response cache '" + path + "' truncated in header");
    uint64_t units = 0, sents = 0;
    if (!in.read(reinterpret_cast<char*>(&units), 8) || !in.read(reinterpret_cast<char*>(&sents), 8))
        fail(ErrorClass::format, "response cache '" + path + "' truncated in header");
    m.n_units = static_cast<int64_t>(units);
    m.n_sentences = static_cast<int64_t>(sents);
    if (m.n_units != unit_count(m.config))
        fail(ErrorClass::format, "response cache '" + path + "': unit count " +
                                     std::to_string(m.n_units) + " does not match config");
    m.labels.resize(static_cast<size_t>(sents));
    if (!in.read(reinterpret_cast<char*>(m.labels.data()), static_cast<std::streamsize>(sents)))
        fail(ErrorClass::format, "response cache '" + path + "' truncated in labels");
    m.values.resize(static_cast<size_t>(units) * sents);
    if (!in.read(reinterpret_cast<char*>(m.values.data()),
                 static_cast<std::streamsize>(m.values.size() * sizeof(float))))
        fail(ErrorClass::format, "response cache '" + path + "' truncated in values");
    return m;
}

namespace {

// Shared AP core over an index permutation sorted by descending score.
template <typename ScoreT>
double ap_impl(std::span<const ScoreT> scores, std::span<const uint8_t> labels) {
    if (scores.size() != labels.size())
        fail(ErrorClass::validation, "average_precision: scores/labels size mismatch");
    if (scores.empty()) fail(ErrorClass::validation, "average_precision: empty input");
    int64_t n = static_cast<int64_t>(scores.size());
    int64_t total_pos = 0;
    for (uint8_t b : labels) total_pos += b;
    if (total_pos == 0)
        fail(ErrorClass::validation,
             "average_precision undefined: no positive labels");
    for (ScoreT s : scores) {
        if (!std::isfinite(static_cast<double>(s)))
            fail(ErrorClass::validation, "average_precision: non-finite score");
    }

    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)])
            return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
        return a < b;
    });

    double sum = 0.0;
    int64_t tp = 0, fp = 0, i = 0;
    while (i < n) {
        // Walk one block of tied scores.
        int64_t j = i;
        int64_t block_pos = 0, block_neg = 0;
        while (j < n && scores[static_cast<size_t>(order[static_cast<size_t>(j)])] ==
                            scores[static_cast<size_t>(order[static_cast<size_t>(i)])]) {
            if (labels[static_cast<size_t>(order[static_cast<size_t>(j)])])
                ++block_pos;
            else
                ++block_neg;
            ++j;
        }
        tp += block_pos;
        fp += block_neg;
        if (block_pos > 0) {
            double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
            sum += precision * static_cast<double>(block_pos);
        }
        i = j;
    }
    return sum / static_cast<double>(total_pos);
}

} // namespace

double average_precision(std::span<const double> scores, std::span<const uint8_t> labels) {
    return ap_impl(scores, labels);
}

double average_precision(std::span<const float> scores, std::span<const uint8_t> labels) {
    return ap_impl(scores, labels);
}

namespace {

RankedUnit score_unit(const ResponseMatrix& m, int64_t unit) {
    std::span<const float> row(m.values.data() + static_cast<size_t>(unit) * m.n_sentences,
                               static_cast<size_t>(m.n_sentences));
    RankedUnit r;
    r.address = unflatten_unit(m.config, unit);
    r.ap = average_precision(row, m.labels);
    double sum = 0.0;
    int64_t n_pos = 0;
    for (int64_t i = 0; i < m.n_sentences; ++i) {
        if (m.labels[static_cast<size_t>(i)]) {
            sum += row[static_cast<size_t>(i)];
            ++n_pos;
        }
    }
    r.expected_positive_value = sum / static_cast<double>(n_pos);
    return r;
}

ExpertRanking sort_ranked(const ResponseMatrix& m, std::vector<RankedUnit> units) {
    ExpertRanking ranking;
    ranking.config = m.config;
    ranking.units = std::move(units);
    std::vector<int64_t> flat(ranking.units.size());
    for (size_t i = 0; i < ranking.units.size(); ++i)
        flat[i] = flatten_unit(m.config, ranking.units[i].address);
    std::vector<size_t> order(ranking.units.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (ranking.units[a].ap != ranking.units[b].ap)
            return ranking.units[a].ap > ranking.units[b].ap;
        return flat[a] < flat[b];
    });
    std::vector<RankedUnit> sorted;
    sorted.reserve(order.size());
    for (size_t i : order) sorted.push_back(ranking.units[i]);
    ranking.units = std::move(sorted);
    return ranking;
}

} // namespace

ExpertRanking rank_experts(const ResponseMatrix& responses) {
    std::vector<RankedUnit> units(static_cast<size_t>(responses.n_units));
    parallel_for(responses.n_units,
                 [&](int64_t u) { units[static_cast<size_t>(u)] = score_unit(responses, u); });
    return sort_ranked(responses, std::move(units));
}

ExpertRanking rank_experts_serial(const ResponseMatrix& responses) {
    std::vector<RankedUnit> units(static_cast<size_t>(responses.n_units));
    for (int64_t u = 0; u < responses.n_units; ++u)
        units[static_cast<size_t>(u)] = score_unit(responses, u);
    return sort_ranked(responses, std::move(units));
}

InterventionPlan top_k(const ExpertRanking& ranking, int64_t k) {
    if (k < 0 || k > ranking.size())
        fail(ErrorClass::validation, "top_k: k=" + std::to_string(k) +
                                         " outside [0, " + std::to_string(ranking.size()) + "]");
    InterventionPlan plan;
    plan.mode = PlanMode::expectation;
    plan.k = k;
    plan.entries.reserve(static_cast<size_t>(k));
    for (int64_t i = 0; i < k; ++i) {
        const RankedUnit& u = ranking.units[static_cast<size_t>(i)];
        plan.entries.push_back(
            {u.address, static_cast<float>(u.expected_positive_value)});
    }
    return plan;
}

std::string ranking_to_csv(const ExpertRanking& ranking) {
    std::string out = "block,probe,channel,ap,expected_value\n";
    for (const RankedUnit& u : ranking.units) {
        out += std::to_string(u.address.block);
        out += ',';
        out += probe_name(u.address.probe);
        out += ',';
        out += std::to_string(u.address.channel);
        out += ',';
        out += fmt_double(u.ap);
        out += ',';
        out += fmt_double(u.expected_positive_value);
        out += '\n';
    }
    return out;
}

ExpertRanking ranking_from_csv(const std::string& text, const ModelConfig& cfg) {
    ExpertRanking ranking;
    ranking.config = cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("block,", 0) == 0) continue;
        std::istringstream ls(line);
        std::string block_s, probe_s, channel_s, ap_s, ev_s;
        if (!std::getline(ls, block_s, ',') || !std::getline(ls, probe_s, ',') ||
            !std::getline(ls, channel_s, ',') || !std::getline(ls, ap_s, ',') ||
            !std::getline(ls, ev_s))
            fail(ErrorClass::format,
                 "ranking CSV line " + std::to_string(lineno) + ": expected 5 fields");
        RankedUnit u;
        try {
            u.address.block = std::stoi(block_s);
            u.address.channel = std::stoi(channel_s);
            u.ap = std::stod(ap_s);
            u.expected_positive_value = std::stod(ev_s);
        } catch (const std::exception&) {
            fail(ErrorClass::format,
                 "ranking CSV line " + std::to_string(lineno) + ": bad number");
        }
        u.address.probe = probe_from_name(probe_s);
        validate_address(cfg, u.address);
        ranking.units.push_back(u);
    }
    if (ranking.units.empty()) fail(ErrorClass::format, "ranking CSV has no rows");
    return ranking;
}

} // namespace experts
