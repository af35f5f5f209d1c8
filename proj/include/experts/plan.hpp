#pragma once

#include <string>
#include <vector>

#include "experts/units.hpp"

namespace experts {

enum class PlanMode : uint8_t { expectation, zero };

std::string_view plan_mode_name(PlanMode m);
PlanMode plan_mode_from_name(std::string_view name);

// One do()-style clamp: while the plan is applied, the channel's value is
// replaced by `value` at every position of every forward pass.
struct ClampEntry {
    UnitAddress address;
    float value = 0.0f;
};

// Immutable once built; passed per call, never registered on the model.
struct InterventionPlan {
    std::vector<ClampEntry> entries;
    std::string concept_id;
    int64_t k = 0; // number of experts this plan was built from
    PlanMode mode = PlanMode::expectation;

    bool empty() const { return entries.empty(); }
    size_t size() const { return entries.size(); }

    // Checks address uniqueness, finite values, and |entries| == k.
    void validate(const ModelConfig& cfg) const;
};

// Union of two plans; rejects overlapping addresses and mixed modes.
InterventionPlan merge_plans(const InterventionPlan& a, const InterventionPlan& b);

// CSV: block,probe,channel,value,mode
std::string plan_to_csv(const InterventionPlan& plan);
InterventionPlan plan_from_csv(const std::string& text);

} // namespace experts
