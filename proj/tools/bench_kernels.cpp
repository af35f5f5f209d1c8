// Times the serial reference implementations against the OpenMP kernels
// on a random model and checks the outputs stay byte-identical.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "experts/expertise.hpp"
#include "experts/generation.hpp"
#include "experts/parallel.hpp"
#include "experts/synthetic.hpp"

using namespace experts;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-24s serial %9.1f ms   omp %9.1f ms   speedup %5.2fx   %s\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms,
                identical ? "outputs identical" : "OUTPUT MISMATCH");
}

} // namespace

int main(int argc, char** argv) {
    int sentences = argc > 1 ? std::atoi(argv[1]) : 192;
    std::printf("threads: %d\n", worker_budget());

    ModelConfig cfg;
    cfg.n_blocks = 2;
    cfg.d_model = 32;
    cfg.n_heads = 4;
    cfg.vocab_size = 64;
    cfg.max_seq_len = 48;
    Model model{cfg, random_weights(cfg, 7)};

    std::vector<std::string> words;
    for (int i = 0; i < 40; ++i) words.push_back("w" + std::to_string(i));
    words.push_back("marker");
    Vocab vocab = Vocab::from_tokens(words);

    ConceptDataset ds = make_marker_dataset(vocab, "marker", sentences / 3,
                                            sentences - sentences / 3, 8, 24, 11, words);

    // Response extraction: independent forwards per sentence.
    auto t0 = Clock::now();
    ResponseMatrix serial = extract_responses_serial(model, vocab, ds);
    double t_serial = ms_since(t0);
    t0 = Clock::now();
    ResponseMatrix parallel = extract_responses(model, vocab, ds);
    double t_parallel = ms_since(t0);
    report("extract_responses", t_serial, t_parallel, serial.values == parallel.values);

    // AP ranking: independent units.
    t0 = Clock::now();
    ExpertRanking rank_serial = rank_experts_serial(serial);
    double r_serial = ms_since(t0);
    t0 = Clock::now();
    ExpertRanking rank_parallel = rank_experts(parallel);
    double r_parallel = ms_since(t0);
    bool same_ranking = ranking_to_csv(rank_serial) == ranking_to_csv(rank_parallel);
    report("rank_experts", r_serial, r_parallel, same_ranking);

    // Monte Carlo keyword probability: independent sample streams.
    std::vector<int> ctx = encode(vocab, "w0 w1 w2 w3").ids;
    std::vector<int> kw = {*vocab.lookup("marker")};
    t0 = Clock::now();
    EstimateWithCi mc_serial =
        keyword_probability_serial(model, ctx, nullptr, kw, 300, 16, 123);
    double m_serial = ms_since(t0);
    t0 = Clock::now();
    EstimateWithCi mc_parallel = keyword_probability(model, ctx, nullptr, kw, 300, 16, 123);
    double m_parallel = ms_since(t0);
    report("keyword_probability", m_serial, m_parallel,
           mc_serial.value == mc_parallel.value && mc_serial.ci_lo == mc_parallel.ci_lo);

    return 0;
}
