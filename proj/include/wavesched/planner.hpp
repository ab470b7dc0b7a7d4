// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "wavesched/allocation.hpp"
#include "wavesched/common.hpp"
#include "wavesched/graph.hpp"
#include "wavesched/placement.hpp"
#include "wavesched/plan_io.hpp"
#include "wavesched/scaling.hpp"
#include "wavesched/schedule.hpp"
#include "wavesched/topology.hpp"
#include "wavesched/workload.hpp"

namespace wavesched {

struct PlannerOptions {
    AllocatorOptions alloc;
    PlacementOptions placement;
    double grad_opt_multiplier = 3.0;
    double synth_noise = 0.0;
    std::uint64_t synth_seed = 0;
};

struct PlannerResult {
    ComputationGraph graph;
    MetaGraph meta;
    std::map<std::string, ScalingCurve> curves;  // per metaop
    std::vector<AllocationPlan> level_plans;
    WavefrontSchedule schedule;
    ExecutionPlan plan;
    double lower_bound = 0.0;       // sum over levels of the continuous optimum
    double predicted_makespan = 0.0;
};

namespace detail {

// Extends a declared truth curve so its pieces cover exactly [1, n_max].
inline ScalingCurve materialize_truth(const std::vector<CurvePiece>& declared, double c, double w, int n_max) {
    std::vector<CurvePiece> pieces;
    for (CurvePiece p : declared) {
        if (p.n_lo >= n_max) continue;
        p.n_hi = std::min(p.n_hi, static_cast<double>(n_max));
        pieces.push_back(p);
    }
    if (pieces.empty()) throw ParseError("truth curve does not cover the device range");
    pieces.back().n_hi = static_cast<double>(n_max);
    return ScalingCurve::from_pieces(pieces, c, w);
}

inline std::vector<int> all_ns(int n_max) {
    std::vector<int> ns(static_cast<std::size_t>(n_max));
    for (int i = 0; i < n_max; ++i) ns[static_cast<std::size_t>(i)] = i + 1;
    return ns;
}

}  // namespace detail

// Fits one scaling curve per module kind, from inline profile points when
// present, otherwise from deterministic synthetic profiles of the declared
// truth curve. Breakpoints come from the workload (default: one piece).
inline std::map<std::string, ScalingCurve> fit_module_curves(const WorkloadSpec& spec, int devices,
                                                             const PlannerOptions& opt = {}) {
    std::map<std::string, ScalingCurve> out;
    for (const auto& [kind, module] : spec.modules) {
        std::vector<ProfilePoint> points;
        std::vector<int> breaks;
        if (auto bit = spec.breakpoints.find(kind); bit != spec.breakpoints.end()) {
            for (int b : bit->second)
                if (b > 1 && b < devices) breaks.push_back(b);
        }
        if (auto pit = spec.profiles.find(kind); pit != spec.profiles.end()) {
            points = pit->second;
        } else if (auto tit = spec.truth.find(kind); tit != spec.truth.end()) {
            const ScalingCurve truth =
                detail::materialize_truth(tit->second, module.comm_proxy, module.flops_proxy, devices);
            points = synth_profile(truth, detail::all_ns(devices), opt.synth_noise, opt.synth_seed);
            if (breaks.empty()) {
                for (std::size_t i = 0; i + 1 < truth.pieces().size(); ++i) {
                    const int b = static_cast<int>(std::llround(truth.pieces()[i].n_hi));
                    if (b > 1 && b < devices) breaks.push_back(b);
                }
            }
        } else {
            throw ParseError("module '" + kind + "' has neither profile points nor a truth curve");
        }
        out[kind] = fit_curve(points, breaks, module.comm_proxy, module.flops_proxy).curve;
    }
    return out;
}

// Builds the final-plan entity table from the contracted MetaGraph. A MetaOp
// covering only part of its module keeps private parameters (its layers are
// a distinct weight shard), so param-group deduplication stays sound.
inline std::map<std::string, PlanEntity> build_entities(const MetaGraph& meta, const WorkloadSpec& spec) {
    std::map<std::string, PlanEntity> entities;
    for (const auto& [id, m] : meta.metaops) {
        const ModuleDecl& module = spec.module(m.kind);
        PlanEntity e;
        e.id = id;
        e.kind = m.kind;
        e.length = m.length;
        e.level = m.level;
        e.tp_degree = m.tp_degree;
        e.global_batch = m.global_batch;
        e.batch_fraction = 1.0;
        e.param_group = (m.length == module.layers) ? module.param_group : "";
        e.param_bytes = static_cast<std::uint64_t>(static_cast<double>(module.param_bytes) * m.length /
                                                   module.layers);
        e.act_bytes = module.act_bytes;
        e.out_bytes = module.out_bytes;
        e.w = module.flops_proxy;
        e.c = module.comm_proxy;
        e.task_ids = m.task_ids;
        entities[id] = e;
    }
    return entities;
}

inline MemoryModel build_memory_model(const std::map<std::string, PlanEntity>& entities,
                                      double grad_opt_multiplier) {
    MemoryModel model;
    model.grad_opt_multiplier = grad_opt_multiplier;
    for (const auto& [id, e] : entities) {
        EntityMemory mem;
        mem.param_bytes = e.param_bytes;
        mem.act_bytes = static_cast<std::uint64_t>(static_cast<double>(e.act_bytes) * e.batch_fraction);
        mem.tp_degree = e.tp_degree;
        mem.param_group = e.param_group;
        model.per_entity[id] = mem;
    }
    return model;
}

inline FlowInputs build_flow_inputs(const std::set<std::pair<std::string, std::string>>& deps,
                                    const std::map<std::string, PlanEntity>& entities) {
    FlowInputs inputs;
    inputs.deps = deps;
    for (const auto& [id, e] : entities) {
        inputs.cont_bytes[id] =
            static_cast<std::uint64_t>(static_cast<double>(e.act_bytes) * e.batch_fraction);
        const std::uint64_t edge = e.out_bytes == 0 ? e.act_bytes : e.out_bytes;
        inputs.edge_bytes[id] =
            static_cast<std::uint64_t>(static_cast<double>(edge) * e.batch_fraction);
    }
    return inputs;
}

// The full planning pipeline: build the operator graph, contract it, assign
// MetaLevels, fit scaling curves, solve and discretize each level, schedule
// waves, and place them on the cluster.
inline PlannerResult plan_workload(const WorkloadSpec& spec, const ClusterTopology& topo,
                                   const PlannerOptions& opt = {}) {
    PlannerResult result;
    const int devices = static_cast<int>(topo.devices.size());
    result.graph = build_graph(spec);
    result.meta = assign_levels(contract(result.graph));

    const auto module_curves = fit_module_curves(spec, devices, opt);
    for (const auto& [id, m] : result.meta.metaops) result.curves[id] = module_curves.at(m.kind);

    std::map<std::string, std::vector<int>> valid_sets;
    std::map<std::string, int> lengths;
    for (const auto& [id, m] : result.meta.metaops) {
        valid_sets[id] = valid_allocations(m, devices);
        lengths[id] = m.length;
    }

    std::vector<std::pair<std::vector<Wave>, double>> per_level;
    for (const auto& level_ids : result.meta.levels) {
        LevelInput level;
        for (const std::string& id : level_ids)
            level.push_back({&result.meta.metaops.at(id), &result.curves.at(id)});
        const ContinuousAllocation cont = solve_continuous(level, devices, opt.alloc);
        std::map<std::string, std::vector<int>> level_valid;
        std::map<std::string, ScalingCurve> level_curves;
        std::map<std::string, int> level_lengths;
        for (const std::string& id : level_ids) {
            level_valid[id] = valid_sets[id];
            level_curves[id] = result.curves[id];
            level_lengths[id] = lengths[id];
        }
        AllocationPlan plan = discretize(cont, level_valid, level_curves, level_lengths, opt.alloc, devices);
        plan.level = result.meta.metaops.at(level_ids.front()).level;
        result.lower_bound += cont.c_star;
        result.level_plans.push_back(plan);
        per_level.push_back(schedule_level(plan, devices, 0.0, level_curves, level_valid));
    }
    result.schedule = merge_levels(per_level);
    result.predicted_makespan = result.schedule.end_time;

    ExecutionPlan& plan = result.plan;
    plan.strategy = "wavefront";
    plan.topo = topo;
    plan.entities = build_entities(result.meta, spec);
    plan.curves = result.curves;
    plan.deps = result.meta.edges;
    plan.schedule = result.schedule;
    plan.lower_bound = result.lower_bound;
    plan.grad_opt_multiplier = opt.grad_opt_multiplier;

    const MemoryModel mem_model = build_memory_model(plan.entities, opt.grad_opt_multiplier);
    const FlowInputs flow_inputs = build_flow_inputs(plan.deps, plan.entities);
    PlacementResult placed = place(result.schedule, topo, mem_model, flow_inputs, opt.placement);
    plan.devices = placed.devices;
    plan.flows = placed.flows;
    return result;
}

}  // namespace wavesched
