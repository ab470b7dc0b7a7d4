// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "wavesched/planner.hpp"

namespace wavesched {

// Shared front half of every planning strategy: contracted graph, fitted
// curves, and the plan entity table.
struct PlanningBase {
    MetaGraph meta;
    std::map<std::string, ScalingCurve> curves;      // per metaop
    std::map<std::string, PlanEntity> entities;      // per metaop, full batch
    std::vector<std::string> task_order;             // declaration order
};

inline PlanningBase prepare_planning_base(const WorkloadSpec& spec, const ClusterTopology& topo,
                                          const PlannerOptions& opt = {}) {
    PlanningBase base;
    base.meta = assign_levels(contract(build_graph(spec)));
    const auto module_curves = fit_module_curves(spec, static_cast<int>(topo.devices.size()), opt);
    for (const auto& [id, m] : base.meta.metaops) base.curves[id] = module_curves.at(m.kind);
    base.entities = build_entities(base.meta, spec);
    for (const TaskDecl& t : spec.tasks) base.task_order.push_back(t.id);
    return base;
}

namespace detail {

inline double share_fraction(const MetaOp& m) {
    return m.task_ids.empty() ? 1.0 : 1.0 / static_cast<double>(m.task_ids.size());
}

inline ScalingCurve scale_curve(const ScalingCurve& curve, double frac) {
    std::vector<CurvePiece> pieces = curve.pieces();
    for (CurvePiece& p : pieces) p.beta_w *= frac;
    return ScalingCurve::from_pieces(pieces, curve.c(), curve.w());
}

inline PlanEntity scoped_entity(const PlanEntity& e, const std::string& task, double frac) {
    PlanEntity out = e;
    out.id = e.id + "@" + task;
    out.batch_fraction = frac;
    out.task_ids = {task};
    return out;
}

// Metaops of one task in deterministic topological order, with the task-
// internal dependency edges.
struct TaskView {
    std::vector<std::string> order;
    std::set<std::pair<std::string, std::string>> edges;
};

inline TaskView task_view(const MetaGraph& meta, const std::string& task) {
    TaskView view;
    std::map<std::string, const MetaOp*> members;
    for (const auto& [id, m] : meta.metaops)
        if (m.task_ids.count(task)) members[id] = &m;
    for (const auto& [from, to] : meta.edges)
        if (members.count(from) && members.count(to)) view.edges.insert({from, to});
    view.order = topo_order(members, view.edges, "task subgraph has a cycle");
    return view;
}

inline ClusterTopology sub_topology(const ClusterTopology& topo, const std::vector<int>& devices) {
    ClusterTopology sub;
    sub.intra_bw = topo.intra_bw;
    sub.inter_bw = topo.inter_bw;
    sub.mem_capacity = topo.mem_capacity;
    for (const auto& island : topo.islands) {
        std::vector<int> members;
        for (int d : island)
            if (std::find(devices.begin(), devices.end(), d) != devices.end()) members.push_back(d);
        if (!members.empty()) sub.islands.push_back(members);
    }
    sub.finalize();
    return sub;
}

inline void finish_plan(ExecutionPlan& plan, const ClusterTopology& topo, double grad_opt_multiplier,
                        const PlacementOptions& popt) {
    plan.topo = topo;
    plan.grad_opt_multiplier = grad_opt_multiplier;
    const MemoryModel mem = build_memory_model(plan.entities, grad_opt_multiplier);
    const FlowInputs flows = build_flow_inputs(plan.deps, plan.entities);
    PlacementResult placed = place(plan.schedule, topo, mem, flows, popt);
    plan.devices = placed.devices;
    plan.flows = placed.flows;
}

}  // namespace detail

// Temporal decoupling: every MetaOp executes alone on its largest valid
// allocation (the whole cluster when divisibility allows), one after another
// in topological order. This is how single-task systems run a multi-task
// model.
inline ExecutionPlan plan_decoupled_sequential(const PlanningBase& base, const ClusterTopology& topo,
                                               const PlannerOptions& opt = {}) {
    const int devices = static_cast<int>(topo.devices.size());
    ExecutionPlan plan;
    plan.strategy = "decoupled-sequential";
    plan.entities = base.entities;
    plan.curves = base.curves;
    plan.deps = base.meta.edges;

    auto order = detail::topo_order(base.meta.metaops, base.meta.edges, "metagraph has a cycle");
    double now = 0.0;
    int index = 0;
    for (const std::string& id : order) {
        const MetaOp& m = base.meta.metaops.at(id);
        const std::vector<int> valid = valid_allocations(m, devices);
        const int n = valid.back();
        const double span = m.length * base.curves.at(id).eval(n);
        Wave w;
        w.index = index++;
        w.level = m.level;
        w.start = now;
        w.duration = span;
        w.entries.push_back({id, n, m.length, span});
        plan.schedule.waves.push_back(w);
        now += span;
    }
    plan.schedule.end_time = now;
    detail::finish_plan(plan, topo, opt.grad_opt_multiplier, opt.placement);
    return plan;
}

// Task-level allocation in the style of marginal-gain cluster schedulers:
// every task starts at its smallest valid allocation and the next valid
// increment repeatedly goes to the task whose completion time shrinks the
// most per added device. Tasks then run concurrently on disjoint device
// blocks, each internally sequential. When even the minimum allocations
// exceed the cluster, tasks are packed into sequential batches.
inline ExecutionPlan plan_task_level_optimus(const PlanningBase& base, const ClusterTopology& topo,
                                             const PlannerOptions& opt = {}) {
    const int devices = static_cast<int>(topo.devices.size());
    ExecutionPlan plan;
    plan.strategy = "task-level-optimus";

    struct Task {
        std::string id;
        detail::TaskView view;
        std::vector<int> valid;  // intersection over member metaops
        int alloc = 0;
    };
    std::vector<Task> tasks;
    for (const std::string& tid : base.task_order) {
        Task task;
        task.id = tid;
        task.view = detail::task_view(base.meta, tid);
        std::vector<int> valid;
        for (int n = 1; n <= devices; ++n) {
            bool ok = true;
            for (const std::string& mid : task.view.order) {
                const auto vs = valid_allocations(base.meta.metaops.at(mid), devices);
                if (!std::binary_search(vs.begin(), vs.end(), n)) {
                    ok = false;
                    break;
                }
            }
            if (ok) valid.push_back(n);
        }
        if (valid.empty())
            throw NoValidAllocation("task '" + tid + "' has no allocation valid for all its metaops");
        task.valid = valid;
        tasks.push_back(task);
    }

    // critical path of the task's sub-DAG with every metaop at allocation n
    auto task_time = [&](const Task& task, int n) {
        std::map<std::string, double> finish;
        double total = 0.0;
        for (const std::string& mid : task.view.order) {
            const MetaOp& m = base.meta.metaops.at(mid);
            const double weight =
                m.length * base.curves.at(mid).eval_batch_fraction(n, detail::share_fraction(m));
            double start = 0.0;
            for (const auto& [from, to] : task.view.edges)
                if (to == mid) start = std::max(start, finish[from]);
            finish[mid] = start + weight;
            total = std::max(total, finish[mid]);
        }
        return total;
    };

    // pack tasks into batches whose minimum allocations fit the cluster
    std::vector<std::vector<std::size_t>> batches;
    {
        std::vector<std::size_t> current;
        int used = 0;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const int need = tasks[i].valid.front();
            if (used + need > devices && !current.empty()) {
                batches.push_back(current);
                current.clear();
                used = 0;
            }
            current.push_back(i);
            used += need;
        }
        if (!current.empty()) batches.push_back(current);
    }

    double batch_offset = 0.0;
    std::vector<Wave> waves;
    struct Placement {
        std::vector<std::size_t> wave_ids;  // indices into `waves`
        std::vector<int> block;
    };
    std::vector<Placement> placements;

    for (const auto& batch : batches) {
        for (std::size_t ti : batch) tasks[ti].alloc = tasks[ti].valid.front();
        auto used = [&] {
            int total = 0;
            for (std::size_t ti : batch) total += tasks[ti].alloc;
            return total;
        };
        while (true) {
            const int free = devices - used();
            if (free <= 0) break;
            std::size_t best = tasks.size();
            double best_gain = -1.0;
            int best_next = 0;
            for (std::size_t ti : batch) {
                Task& task = tasks[ti];
                auto it = std::upper_bound(task.valid.begin(), task.valid.end(), task.alloc);
                if (it == task.valid.end() || *it - task.alloc > free) continue;
                const double gain =
                    (task_time(task, task.alloc) - task_time(task, *it)) / (*it - task.alloc);
                if (gain > best_gain) {
                    best_gain = gain;
                    best = ti;
                    best_next = *it;
                }
            }
            if (best == tasks.size()) break;  // all tasks at max: rest idles
            tasks[best].alloc = best_next;
        }

        double batch_end = batch_offset;
        int cursor = 0;
        for (std::size_t ti : batch) {
            Task& task = tasks[ti];
            Placement placement;
            for (int d = cursor; d < cursor + task.alloc; ++d) placement.block.push_back(topo.devices[d]);
            cursor += task.alloc;
            double now = batch_offset;
            for (const std::string& mid : task.view.order) {
                const MetaOp& m = base.meta.metaops.at(mid);
                const double frac = detail::share_fraction(m);
                const std::string sid = mid + "@" + task.id;
                if (!plan.entities.count(sid)) {
                    plan.entities[sid] = detail::scoped_entity(base.entities.at(mid), task.id, frac);
                    plan.curves[sid] = base.curves.at(mid);
                }
                const double span = m.length * base.curves.at(mid).eval_batch_fraction(task.alloc, frac);
                Wave w;
                w.level = m.level;
                w.start = now;
                w.duration = span;
                w.entries.push_back({sid, task.alloc, m.length, span});
                placement.wave_ids.push_back(waves.size());
                waves.push_back(w);
                now += span;
            }
            for (const auto& [from, to] : task.view.edges)
                plan.deps.insert({from + "@" + task.id, to + "@" + task.id});
            batch_end = std::max(batch_end, now);
            placements.push_back(placement);
        }
        batch_offset = batch_end;
    }

    // waves get global indices by start time; each task's sequence is placed
    // on its own device block through the shared placement module
    std::vector<std::size_t> order(waves.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (waves[a].start != waves[b].start) return waves[a].start < waves[b].start;
        return waves[a].entries.front().metaop_id < waves[b].entries.front().metaop_id;
    });
    std::map<std::size_t, int> global_index;
    for (std::size_t i = 0; i < order.size(); ++i) global_index[order[i]] = static_cast<int>(i);
    plan.topo = topo;
    plan.grad_opt_multiplier = opt.grad_opt_multiplier;
    const MemoryModel mem = build_memory_model(plan.entities, opt.grad_opt_multiplier);
    const FlowInputs flows = build_flow_inputs(plan.deps, plan.entities);
    double end_time = 0.0;
    for (const Placement& placement : placements) {
        WavefrontSchedule task_sched;
        for (std::size_t wi : placement.wave_ids) {
            Wave w = waves[wi];
            w.index = global_index[wi];
            task_sched.waves.push_back(w);
            end_time = std::max(end_time, w.start + w.duration);
        }
        PlacementResult placed =
            place(task_sched, detail::sub_topology(topo, placement.block), mem, flows, opt.placement);
        for (auto& [key, devs] : placed.devices) plan.devices[key] = devs;
        for (const Flow& f : placed.flows) plan.flows.push_back(f);
    }
    std::vector<Wave> final_waves;
    for (std::size_t wi : order) {
        Wave w = waves[wi];
        w.index = global_index[wi];
        final_waves.push_back(w);
    }
    plan.schedule.waves = final_waves;
    plan.schedule.end_time = end_time;
    return plan;
}

// Single-task multi-modal strategy: tasks execute sequentially; inside a
// task, independent same-level metaops (the modality towers) split the full
// cluster through the continuous allocator, dependent stages run alone on
// their largest valid allocation.
inline ExecutionPlan plan_distmm_mt(const PlanningBase& base, const ClusterTopology& topo,
                                    const PlannerOptions& opt = {}) {
    const int devices = static_cast<int>(topo.devices.size());
    ExecutionPlan plan;
    plan.strategy = "distmm-mt";

    double now = 0.0;
    int index = 0;
    for (const std::string& tid : base.task_order) {
        const detail::TaskView view = detail::task_view(base.meta, tid);
        // longest-path levels within the task subgraph
        std::map<std::string, int> level;
        int max_level = 0;
        for (const std::string& mid : view.order) {
            int lvl = 0;
            for (const auto& [from, to] : view.edges)
                if (to == mid) lvl = std::max(lvl, level[from] + 1);
            level[mid] = lvl;
            max_level = std::max(max_level, lvl);
        }
        for (const auto& [from, to] : view.edges)
            plan.deps.insert({from + "@" + tid, to + "@" + tid});

        for (int lvl = 0; lvl <= max_level; ++lvl) {
            std::vector<std::string> ids;
            for (const std::string& mid : view.order)
                if (level[mid] == lvl) ids.push_back(mid);
            if (ids.empty()) continue;

            CurveMap scaled;
            ValidSetMap valid;
            std::map<std::string, int> lengths;
            std::vector<const MetaOp*> ms;
            for (const std::string& mid : ids) {
                const MetaOp& m = base.meta.metaops.at(mid);
                const double frac = detail::share_fraction(m);
                const std::string sid = mid + "@" + tid;
                if (!plan.entities.count(sid)) {
                    plan.entities[sid] = detail::scoped_entity(base.entities.at(mid), tid, frac);
                    plan.curves[sid] = base.curves.at(mid);
                }
                scaled[sid] = detail::scale_curve(base.curves.at(mid), frac);
                valid[sid] = valid_allocations(m, devices);
                lengths[sid] = m.length;
                ms.push_back(&m);
            }
            if (ids.size() == 1) {
                const std::string sid = ids.front() + "@" + tid;
                const int n = valid[sid].back();
                const double span = lengths[sid] * scaled[sid].eval(n);
                Wave w;
                w.index = index++;
                w.level = lvl;
                w.start = now;
                w.duration = span;
                w.entries.push_back({sid, n, lengths[sid], span});
                plan.schedule.waves.push_back(w);
                now += span;
            } else {
                LevelInput input;
                for (std::size_t i = 0; i < ids.size(); ++i)
                    input.push_back({ms[i], &scaled.at(ids[i] + "@" + tid)});
                // LevelInput keys by metaop id; rebuild maps keyed the same way
                CurveMap by_mid;
                ValidSetMap valid_mid;
                std::map<std::string, int> len_mid;
                for (std::size_t i = 0; i < ids.size(); ++i) {
                    by_mid[ids[i]] = scaled.at(ids[i] + "@" + tid);
                    valid_mid[ids[i]] = valid.at(ids[i] + "@" + tid);
                    len_mid[ids[i]] = lengths.at(ids[i] + "@" + tid);
                }
                const ContinuousAllocation cont = solve_continuous(input, devices, opt.alloc);
                AllocationPlan alloc = discretize(cont, valid_mid, by_mid, len_mid, opt.alloc, devices);
                alloc.level = lvl;
                auto [level_waves, t_end] = schedule_level(alloc, devices, 0.0, by_mid, valid_mid);
                for (Wave w : level_waves) {
                    w.index = index++;
                    w.start += now;
                    for (WaveEntry& e : w.entries) e.metaop_id += "@" + tid;
                    plan.schedule.waves.push_back(w);
                }
                now += t_end;
            }
        }
    }
    plan.schedule.end_time = now;
    detail::finish_plan(plan, topo, opt.grad_opt_multiplier, opt.placement);
    return plan;
}

}  // namespace wavesched
