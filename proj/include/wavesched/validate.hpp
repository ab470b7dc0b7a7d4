// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "wavesched/common.hpp"
#include "wavesched/plan_io.hpp"

namespace wavesched {

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> violations;

    void fail(const std::string& msg) {
        ok = false;
        violations.push_back(msg);
    }
};

// Per-device resident bytes implied by a plan: parameter state charged once
// per (device, param group), activations accumulated over every forward
// entry hosted on the device (they are held until the backward pass).
inline std::map<int, double> compute_device_memory(const ExecutionPlan& plan) {
    std::map<int, double> mem;
    std::map<int, std::set<std::string>> charged;
    for (int d : plan.topo.devices) mem[d] = 0.0;
    for (const Wave& w : plan.schedule.waves) {
        for (const WaveEntry& e : w.entries) {
            auto it = plan.devices.find({w.index, e.metaop_id});
            if (it == plan.devices.end()) continue;
            const PlanEntity& ent = plan.entities.at(e.metaop_id);
            const std::string group = ent.param_group.empty() ? ent.id : ent.param_group;
            for (int d : it->second) {
                if (!charged[d].count(group)) {
                    mem[d] += (1.0 + plan.grad_opt_multiplier) * static_cast<double>(ent.param_bytes) /
                              ent.tp_degree;
                    charged[d].insert(group);
                }
                mem[d] += e.layers *
                          (static_cast<double>(ent.act_bytes) * ent.batch_fraction / e.n);
            }
        }
    }
    return mem;
}

// Independent replay of a plan against the scheduling constraints: work
// completion, instantaneous device capacity, pairwise-disjoint execution of
// each entity, cross-entity dependencies, and placement disjointness plus
// memory capacity. Spans are recomputed from the scaling curves rather than
// trusted from the producer.
inline ValidationReport validate_plan(const ExecutionPlan& plan) {
    ValidationReport report;
    const double horizon = std::max(1.0, plan.schedule.end_time);
    const double tol = 1e-6 * horizon;

    struct Interval {
        std::string id;
        double start = 0.0;
        double end = 0.0;
        int n = 0;
        int layers = 0;
    };
    std::vector<Interval> intervals;
    std::map<std::string, int> executed_layers;

    for (const Wave& w : plan.schedule.waves) {
        std::set<std::string> seen;
        int used = 0;
        for (const WaveEntry& e : w.entries) {
            if (!plan.entities.count(e.metaop_id)) {
                report.fail("wave " + std::to_string(w.index) + ": unknown entity " + e.metaop_id);
                continue;
            }
            if (!seen.insert(e.metaop_id).second)
                report.fail("wave " + std::to_string(w.index) + ": entity " + e.metaop_id + " appears twice");
            const PlanEntity& ent = plan.entities.at(e.metaop_id);
            const ScalingCurve& curve = plan.curves.at(e.metaop_id);
            const double per_layer = curve.eval_batch_fraction(e.n, ent.batch_fraction);
            const double span = e.layers * per_layer;
            if (std::abs(span - e.span) > tol + 1e-9 * std::abs(span))
                report.fail("wave " + std::to_string(w.index) + ": entity " + e.metaop_id +
                            " recorded span " + fmt_sec(e.span) + " != recomputed " + fmt_sec(span));
            if (e.span > w.duration + tol)
                report.fail("wave " + std::to_string(w.index) + ": entry span exceeds wave duration");
            intervals.push_back({e.metaop_id, w.start, w.start + span, e.n, e.layers});
            executed_layers[e.metaop_id] += e.layers;
            used += e.n;
        }
        if (used > static_cast<int>(plan.topo.devices.size()))
            report.fail("wave " + std::to_string(w.index) + ": allocations exceed device count");
    }

    // work completion
    for (const auto& [id, ent] : plan.entities) {
        auto it = executed_layers.find(id);
        const int done = it == executed_layers.end() ? 0 : it->second;
        if (done != ent.length)
            report.fail("entity " + id + ": executed " + std::to_string(done) + " of " +
                        std::to_string(ent.length) + " layers");
    }

    // instantaneous capacity across overlapping waves (baseline plans
    // overlap); interval ends shrink by the tolerance so recomputed spans
    // that differ from the recorded boundary in the last float bits do not
    // fabricate overlaps
    std::vector<std::pair<double, int>> events;
    for (const Interval& iv : intervals) {
        events.push_back({iv.start, iv.n});
        events.push_back({std::max(iv.start, iv.end - tol), -iv.n});
    }
    std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second < b.second;  // removals first at shared instants
    });
    int active = 0;
    for (const auto& [t, delta] : events) {
        active += delta;
        if (active > static_cast<int>(plan.topo.devices.size())) {
            report.fail("capacity exceeded at t=" + fmt_sec(t) + ": " + std::to_string(active) + " devices");
            break;
        }
    }

    // same-entity intervals pairwise disjoint
    std::map<std::string, std::vector<Interval>> by_entity;
    for (const Interval& iv : intervals) by_entity[iv.id].push_back(iv);
    for (auto& [id, ivs] : by_entity) {
        std::sort(ivs.begin(), ivs.end(), [](const Interval& a, const Interval& b) { return a.start < b.start; });
        for (std::size_t i = 0; i + 1 < ivs.size(); ++i) {
            if (ivs[i].end > ivs[i + 1].start + tol) {
                report.fail("entity " + id + ": overlapping execution intervals");
                break;
            }
        }
    }

    // dependencies: a consumer may only start after its producer finished
    for (const auto& [from, to] : plan.deps) {
        auto fit = by_entity.find(from);
        auto tit = by_entity.find(to);
        if (fit == by_entity.end() || tit == by_entity.end()) continue;
        double from_end = 0.0;
        for (const Interval& iv : fit->second) from_end = std::max(from_end, iv.end);
        double to_start = horizon * 2;
        for (const Interval& iv : tit->second) to_start = std::min(to_start, iv.start);
        if (to_start + tol < from_end)
            report.fail("dependency " + from + " -> " + to + " violated: consumer starts at " +
                        fmt_sec(to_start) + " before producer ends at " + fmt_sec(from_end));
    }

    // placement: per wave disjoint device sets of the right size
    if (!plan.devices.empty()) {
        for (const Wave& w : plan.schedule.waves) {
            std::set<int> taken;
            for (const WaveEntry& e : w.entries) {
                auto it = plan.devices.find({w.index, e.metaop_id});
                if (it == plan.devices.end()) {
                    report.fail("wave " + std::to_string(w.index) + ": entity " + e.metaop_id + " unplaced");
                    continue;
                }
                if (static_cast<int>(it->second.size()) != e.n)
                    report.fail("wave " + std::to_string(w.index) + ": entity " + e.metaop_id +
                                " placed on " + std::to_string(it->second.size()) + " devices, needs " +
                                std::to_string(e.n));
                for (int d : it->second) {
                    if (!plan.topo.island_of.count(d))
                        report.fail("unknown device " + std::to_string(d));
                    else if (!taken.insert(d).second)
                        report.fail("wave " + std::to_string(w.index) + ": device " + std::to_string(d) +
                                    " assigned twice");
                }
            }
        }
        for (const auto& [d, bytes] : compute_device_memory(plan)) {
            if (bytes > static_cast<double>(plan.topo.mem_capacity) * (1.0 + 1e-9))
                report.fail("device " + std::to_string(d) + " memory " + fmt_g(bytes) + " exceeds capacity " +
                            std::to_string(plan.topo.mem_capacity));
        }
    }
    return report;
}

}  // namespace wavesched
