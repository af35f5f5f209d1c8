#include "experts/parity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "experts/intervention.hpp"

namespace experts {

ContextConfig builtin_contexts() {
    ContextConfig c;
    c.female = {"advocate",  "aide",      "artist",       "baker",     "clerk",
                "counselor", "dancer",    "educator",     "instructor", "nurse",
                "observer",  "performer", "photographer", "planner",   "poet",
                "protester", "psychiatrist", "secretary", "singer",    "substitute",
                "teacher",   "teenager",  "therapist",    "treasurer", "tutor"};
    c.male = {"critic",     "boss",      "technician", "doctor",    "principal",
              "priest",     "warrior",   "filmmaker",  "magistrate", "officer",
              "strategist", "cleric",    "campaigner", "prosecutor", "prisoner",
              "guitarist",  "promoter",  "assassin",   "bartender", "cop",
              "manager",    "footballer", "trooper",   "saint",     "ambassador",
              "politician"};
    c.neutral = {"acquaintance", "character", "citizen", "correspondent", "employee",
                 "musician",     "novelist",  "psychologist", "student",  "writer"};
    c.templates = {"The <occupation> said that",
                   "The <occupation> yelled that",
                   "The <occupation> whispered that",
                   "The <occupation> wanted that",
                   "The <occupation> desired that",
                   "The <occupation> wished that",
                   "The <occupation> ate because",
                   "The <occupation> ran because",
                   "The <occupation> drove because",
                   "The <occupation> slept because",
                   "The <occupation> cried because",
                   "The <occupation> laughed because",
                   "The <occupation> went home because",
                   "The <occupation> stayed up because",
                   "The <occupation> was fired because",
                   "The <occupation> was promoted because",
                   "The <occupation> yelled because"};
    return c;
}

namespace {

constexpr const char* kSlot = "<occupation>";

std::string render_template(const std::string& tmpl, const std::string& occupation) {
    size_t at = tmpl.find(kSlot);
    std::string out = tmpl;
    out.replace(at, std::string(kSlot).size(), occupation);
    return out;
}

void validate_templates(const std::vector<std::string>& templates) {
    if (templates.empty()) fail(ErrorClass::validation, "context config: no templates");
    for (size_t i = 0; i < templates.size(); ++i) {
        size_t first = templates[i].find(kSlot);
        if (first == std::string::npos)
            fail(ErrorClass::validation, "template " + std::to_string(i) +
                                             " is missing the '<occupation>' slot: \"" +
                                             templates[i] + "\"");
        if (templates[i].find(kSlot, first + 1) != std::string::npos)
            fail(ErrorClass::validation, "template " + std::to_string(i) +
                                             " contains the '<occupation>' slot twice: \"" +
                                             templates[i] + "\"");
    }
}

} // namespace

ContextSet build_contexts(const ContextConfig& config) {
    if (config.female.empty() && config.male.empty() && config.neutral.empty())
        fail(ErrorClass::validation, "context config: no occupations");
    validate_templates(config.templates);

    ContextSet set;
    set.config = config;
    auto add_group = [&](const std::vector<std::string>& occs, const char* group) {
        for (const std::string& occ : occs) {
            for (size_t t = 0; t < config.templates.size(); ++t) {
                set.rendered.push_back({render_template(config.templates[t], occ), occ, group,
                                        static_cast<int>(t)});
            }
        }
    };
    add_group(config.female, "female");
    add_group(config.male, "male");
    add_group(config.neutral, "neutral");
    return set;
}

DeltaPResult delta_p(const Model& model, std::span<const int> context,
                     const InterventionPlan* plan, const std::vector<int>& she_ids,
                     const std::vector<int>& he_ids, int n_samples, int gen_len,
                     uint64_t seed, int top_n) {
    if (n_samples < 1) fail(ErrorClass::validation, "delta_p: n_samples must be >= 1");
    PairedPresence presence = sample_presence(model, context, plan, she_ids, he_ids,
                                              n_samples, gen_len, seed, top_n,
                                              /*parallel=*/true);
    DeltaPResult r;
    r.n_samples = n_samples;
    int n_she = 0, n_he = 0;
    double sum_d = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        n_she += presence.a[static_cast<size_t>(i)];
        n_he += presence.b[static_cast<size_t>(i)];
        sum_d += static_cast<double>(presence.a[static_cast<size_t>(i)]) -
                 static_cast<double>(presence.b[static_cast<size_t>(i)]);
    }
    r.p_she = static_cast<double>(n_she) / n_samples;
    r.p_he = static_cast<double>(n_he) / n_samples;
    r.delta_p = sum_d / n_samples;

    // Normal interval on the paired differences d_i in {-1, 0, 1}.
    if (n_samples >= 2) {
        double mean = r.delta_p;
        double ss = 0.0;
        for (int i = 0; i < n_samples; ++i) {
            double d = static_cast<double>(presence.a[static_cast<size_t>(i)]) -
                       static_cast<double>(presence.b[static_cast<size_t>(i)]);
            ss += (d - mean) * (d - mean);
        }
        double se = std::sqrt(ss / (static_cast<double>(n_samples) - 1.0) / n_samples);
        const double z = 1.959963984540054;
        r.ci_lo = std::max(-1.0, mean - z * se);
        r.ci_hi = std::min(1.0, mean + z * se);
    } else {
        r.ci_lo = -1.0;
        r.ci_hi = 1.0;
    }
    return r;
}

ParitySweepResult parity_sweep(const Model& model, const ExpertRanking& ranking,
                               std::span<const int> context,
                               const ParitySweepParams& params) {
    if (params.k_grid.empty()) fail(ErrorClass::validation, "parity_sweep: empty k grid");
    if (params.k_grid.front() != 0)
        fail(ErrorClass::validation, "parity_sweep: k grid must start at 0");
    if (!std::is_sorted(params.k_grid.begin(), params.k_grid.end()))
        fail(ErrorClass::validation, "parity_sweep: k grid must be ascending");
    if (params.she_ids.empty() || params.he_ids.empty())
        fail(ErrorClass::validation, "parity_sweep: empty she/he word sets");

    ParitySweepResult result;
    for (size_t ki = 0; ki < params.k_grid.size(); ++ki) {
        const int64_t k = params.k_grid[ki];
        InterventionPlan plan = make_do(ranking, k, params.concept_id);
        const InterventionPlan* plan_ptr = k > 0 ? &plan : nullptr;
        const uint64_t point_seed = mix64(params.seed ^ (0x9e3779b9u + ki));

        ParitySweepPoint point;
        point.k = k;
        point.dp = delta_p(model, context, plan_ptr, params.she_ids, params.he_ids,
                           params.n_samples, params.gen_len, point_seed, params.top_n);

        std::vector<std::vector<int>> samples;
        PairedPresence kw = sample_presence(model, context, plan_ptr, params.keyword_ids, {},
                                            params.n_samples, params.gen_len, point_seed,
                                            params.top_n, /*parallel=*/true,
                                            params.scorer ? &samples : nullptr);
        int kw_hits = 0;
        for (uint8_t h : kw.a) kw_hits += h;
        EstimateWithCi kw_ci = wilson_interval(kw_hits, params.n_samples);
        point.kw_prob = kw_ci.value;
        point.kw_ci_lo = kw_ci.ci_lo;
        point.kw_ci_hi = kw_ci.ci_hi;

        if (params.scorer) {
            double sum_ppl = 0.0;
            for (const std::vector<int>& cont : samples) {
                sum_ppl += perplexity(*params.scorer, context, cont).perplexity;
            }
            point.mean_ppl = sum_ppl / static_cast<double>(samples.size());
        }
        result.points.push_back(point);
    }

    // First exact zero or sign change of the point estimates.
    for (size_t i = 0; i < result.points.size(); ++i) {
        const double dp_i = result.points[i].dp.delta_p;
        if (dp_i == 0.0) {
            result.parity_point = static_cast<double>(result.points[i].k);
            result.parity_point_int = result.points[i].k;
            break;
        }
        if (i + 1 < result.points.size()) {
            const double dp_j = result.points[i + 1].dp.delta_p;
            if (dp_i * dp_j < 0.0) {
                const double k_i = static_cast<double>(result.points[i].k);
                const double k_j = static_cast<double>(result.points[i + 1].k);
                const double kstar = k_i + dp_i * (k_j - k_i) / (dp_i - dp_j);
                result.parity_point = kstar;
                result.parity_point_int = result.points[i + 1].k;
                break;
            }
        }
    }
    if (result.parity_point) {
        double best = 1e300;
        for (const ParitySweepPoint& p : result.points) {
            double dist = std::abs(static_cast<double>(p.k) - *result.parity_point);
            if (dist < best) {
                best = dist;
                result.ppl_at_parity = p.mean_ppl;
            }
        }
    }
    return result;
}

std::vector<SubsetProbeRow> subset_probe(const Model& model, const ExpertRanking& ranking,
                                         std::span<const int> context,
                                         const SubsetProbeParams& params) {
    const int64_t m_units = ranking.size();
    if (params.window < 1 || params.n_windows < 1)
        fail(ErrorClass::validation, "subset_probe: window and n_windows must be >= 1");
    if (static_cast<int64_t>(params.window) * params.n_windows > m_units)
        fail(ErrorClass::validation,
             "subset_probe: window*n_windows exceeds the number of units (" +
                 std::to_string(m_units) + ")");
    if (params.keyword_ids.empty())
        fail(ErrorClass::validation, "subset_probe: empty keyword set");

    std::vector<SubsetProbeRow> rows;
    auto probe_plan = [&](const InterventionPlan* plan, uint64_t seed) {
        PairedPresence kw = sample_presence(model, context, plan, params.keyword_ids, {},
                                            params.n_samples, params.gen_len, seed,
                                            params.top_n, /*parallel=*/true);
        int hits = 0;
        for (uint8_t h : kw.a) hits += h;
        return wilson_interval(hits, params.n_samples);
    };

    // Unconditioned baseline.
    {
        SubsetProbeRow row;
        row.kind = "none";
        EstimateWithCi e = probe_plan(nullptr, mix64(params.seed ^ 0xba5e));
        row.kw_prob = e.value;
        row.kw_ci_lo = e.ci_lo;
        row.kw_ci_hi = e.ci_hi;
        rows.push_back(row);
    }

    for (int wnd = 0; wnd < params.n_windows; ++wnd) {
        const int64_t lo = static_cast<int64_t>(wnd) * params.window;
        InterventionPlan plan;
        plan.mode = PlanMode::expectation;
        plan.concept_id = params.concept_id;
        double ap_sum = 0.0;
        for (int64_t r = lo; r < lo + params.window; ++r) {
            const RankedUnit& u = ranking.units[static_cast<size_t>(r)];
            plan.entries.push_back({u.address, static_cast<float>(u.expected_positive_value)});
            ap_sum += u.ap;
        }
        plan.k = params.window;
        plan.validate(ranking.config);

        SubsetProbeRow row;
        row.kind = "window";
        row.index = wnd;
        row.rank_lo = lo + 1;
        row.rank_hi = lo + params.window;
        row.mean_ap = ap_sum / params.window;
        EstimateWithCi e = probe_plan(&plan, mix64(params.seed ^ (0x77aa + wnd)));
        row.kw_prob = e.value;
        row.kw_ci_lo = e.ci_lo;
        row.kw_ci_hi = e.ci_hi;
        rows.push_back(row);
    }

    for (int rs = 0; rs < params.n_random; ++rs) {
        Philox rng(params.seed, static_cast<uint64_t>(0xaaad0000u + rs));
        std::vector<int64_t> idx(static_cast<size_t>(m_units));
        std::iota(idx.begin(), idx.end(), 0);
        for (int i = 0; i < params.window; ++i) {
            uint32_t j = static_cast<uint32_t>(i) +
                         rng.bounded(static_cast<uint32_t>(m_units - i));
            std::swap(idx[static_cast<size_t>(i)], idx[j]);
        }
        InterventionPlan plan;
        plan.mode = PlanMode::expectation;
        plan.concept_id = params.concept_id;
        double ap_sum = 0.0;
        for (int i = 0; i < params.window; ++i) {
            const RankedUnit& u = ranking.units[static_cast<size_t>(idx[static_cast<size_t>(i)])];
            plan.entries.push_back({u.address, static_cast<float>(u.expected_positive_value)});
            ap_sum += u.ap;
        }
        plan.k = params.window;
        plan.validate(ranking.config);

        SubsetProbeRow row;
        row.kind = "random";
        row.index = rs;
        row.mean_ap = ap_sum / params.window;
        EstimateWithCi e = probe_plan(&plan, mix64(params.seed ^ (0x44bb + rs)));
        row.kw_prob = e.value;
        row.kw_ci_lo = e.ci_lo;
        row.kw_ci_hi = e.ci_hi;
        rows.push_back(row);
    }
    return rows;
}

} // namespace experts
