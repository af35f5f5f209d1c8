#pragma once

#include "experts/expertise.hpp"
#include "experts/model.hpp"
#include "experts/plan.hpp"

namespace experts {

// do(concept, k): clamp the top-k ranked units to their expected
// positive-class values.
InterventionPlan make_do(const ExpertRanking& ranking, int64_t k,
                         const std::string& concept_id = "");

// Zero-ablation variant: same top-k addresses, clamp value 0.
InterventionPlan make_ablation(const ExpertRanking& ranking, int64_t k,
                               const std::string& concept_id = "");

// Forward under the plan. Plans are per-call and the model is never
// mutated, so running without the plan afterwards is bit-identical to
// never having applied it.
ForwardTrace apply(const Model& model, const InterventionPlan& plan,
                   std::span<const int> tokens, bool record_probes = true);

} // namespace experts
