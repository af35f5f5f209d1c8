#include "experts/plan.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <tuple>

namespace experts {

std::string_view plan_mode_name(PlanMode m) {
    return m == PlanMode::expectation ? "expectation" : "zero";
}

PlanMode plan_mode_from_name(std::string_view name) {
    if (name == "expectation") return PlanMode::expectation;
    if (name == "zero") return PlanMode::zero;
    fail(ErrorClass::format, "unknown plan mode '" + std::string(name) + "'");
}

void InterventionPlan::validate(const ModelConfig& cfg) const {
    if (static_cast<int64_t>(entries.size()) != k)
        fail(ErrorClass::validation,
             "plan has " + std::to_string(entries.size()) + " entries but k=" +
                 std::to_string(k));
    std::set<std::tuple<int, int, int>> seen;
    for (const ClampEntry& e : entries) {
        validate_address(cfg, e.address);
        if (!std::isfinite(e.value))
            fail(ErrorClass::validation,
                 "non-finite clamp value at " + address_to_string(e.address));
        auto key = std::make_tuple(e.address.block, static_cast<int>(e.address.probe),
                                   e.address.channel);
        if (!seen.insert(key).second)
            fail(ErrorClass::validation,
                 "duplicate clamp address " + address_to_string(e.address));
    }
}

InterventionPlan merge_plans(const InterventionPlan& a, const InterventionPlan& b) {
    if (a.mode != b.mode)
        fail(ErrorClass::validation, "cannot merge plans with different modes");
    std::set<std::tuple<int, int, int>> seen;
    for (const ClampEntry& e : a.entries)
        seen.insert({e.address.block, static_cast<int>(e.address.probe), e.address.channel});
    for (const ClampEntry& e : b.entries) {
        if (seen.count({e.address.block, static_cast<int>(e.address.probe), e.address.channel}))
            fail(ErrorClass::validation,
                 "plans overlap at " + address_to_string(e.address));
    }
    InterventionPlan out = a;
    out.entries.insert(out.entries.end(), b.entries.begin(), b.entries.end());
    out.k = a.k + b.k;
    if (out.concept_id.empty()) out.concept_id = b.concept_id;
    return out;
}

std::string plan_to_csv(const InterventionPlan& plan) {
    std::string out = "block,probe,channel,value,mode\n";
    char buf[64];
    for (const ClampEntry& e : plan.entries) {
        std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(e.value));
        out += std::to_string(e.address.block);
        out += ',';
        out += probe_name(e.address.probe);
        out += ',';
        out += std::to_string(e.address.channel);
        out += ',';
        out += buf;
        out += ',';
        out += plan_mode_name(plan.mode);
        out += '\n';
    }
    return out;
}

InterventionPlan plan_from_csv(const std::string& text) {
    InterventionPlan plan;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool mode_set = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (lineno == 1 && line.rfind("block,", 0) == 0) continue;
        std::istringstream ls(line);
        std::string block_s, probe_s, channel_s, value_s, mode_s;
        if (!std::getline(ls, block_s, ',') || !std::getline(ls, probe_s, ',') ||
            !std::getline(ls, channel_s, ',') || !std::getline(ls, value_s, ',') ||
            !std::getline(ls, mode_s))
            fail(ErrorClass::format, "plan CSV line " + std::to_string(lineno) +
                                         ": expected 5 fields");
        ClampEntry e;
        try {
            e.address.block = std::stoi(block_s);
            e.address.channel = std::stoi(channel_s);
            e.value = std::stof(value_s);
        } catch (const std::exception&) {
            fail(ErrorClass::format,
                 "plan CSV line " + std::to_string(lineno) + ": bad number");
        }
        e.address.probe = probe_from_name(probe_s);
        PlanMode m = plan_mode_from_name(mode_s);
        if (mode_set && m != plan.mode)
            fail(ErrorClass::format,
                 "plan CSV line " + std::to_string(lineno) + ": mixed modes");
        plan.mode = m;
        mode_set = true;
        plan.entries.push_back(e);
    }
    plan.k = static_cast<int64_t>(plan.entries.size());
    return plan;
}

} // namespace experts
