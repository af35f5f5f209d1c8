#include "experts/intervention.hpp"

namespace experts {

InterventionPlan make_do(const ExpertRanking& ranking, int64_t k,
                         const std::string& concept_id) {
    InterventionPlan plan = top_k(ranking, k);
    plan.mode = PlanMode::expectation;
    plan.concept_id = concept_id;
    plan.validate(ranking.config);
    return plan;
}

InterventionPlan make_ablation(const ExpertRanking& ranking, int64_t k,
                               const std::string& concept_id) {
    InterventionPlan plan = top_k(ranking, k);
    plan.mode = PlanMode::zero;
    plan.concept_id = concept_id;
    for (ClampEntry& e : plan.entries) e.value = 0.0f;
    plan.validate(ranking.config);
    return plan;
}

ForwardTrace apply(const Model& model, const InterventionPlan& plan,
                   std::span<const int> tokens, bool record_probes) {
    return forward(model, tokens, &plan, record_probes);
}

} // namespace experts
