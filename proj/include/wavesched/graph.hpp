// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "wavesched/common.hpp"
#include "wavesched/workload.hpp"

namespace wavesched {

struct Operator {
    std::string id;
    std::string kind;
    std::set<std::string> task_ids;
    InputSize input;
    int tp_degree = 1;
    std::string param_group;
};

struct ComputationGraph {
    std::map<std::string, Operator> operators;
    std::set<std::pair<std::string, std::string>> edges;

    void add_edge(const std::string& from, const std::string& to) {
        if (!operators.count(from) || !operators.count(to))
            throw InvariantError("edge endpoint names unknown operator");
        edges.insert({from, to});
    }
};

// A maximal chain of consecutive operators with identical kind and input
// size, contracted into one scheduling entity.
struct MetaOp {
    std::string id;
    std::vector<std::string> member_ops;  // path order in the source graph
    int length = 0;                       // L_m
    std::string kind;
    InputSize input;
    std::int64_t global_batch = 1;  // B_m
    int tp_degree = 1;
    int level = -1;
    std::string param_group;
    std::set<std::string> task_ids;
};

struct MetaGraph {
    std::map<std::string, MetaOp> metaops;
    std::set<std::pair<std::string, std::string>> edges;
    std::vector<std::vector<std::string>> levels;  // level index -> metaop ids

    const MetaOp& at(const std::string& id) const {
        auto it = metaops.find(id);
        if (it == metaops.end()) throw InvariantError("unknown metaop '" + id + "'");
        return it->second;
    }
};

namespace detail {

// Kahn topological order with lexicographic tie-breaking, so contraction and
// MetaOp ids are reproducible. Throws on cycles.
template <typename NodeMap>
std::vector<std::string> topo_order(const NodeMap& nodes,
                                    const std::set<std::pair<std::string, std::string>>& edges,
                                    const char* cycle_msg) {
    std::map<std::string, int> indeg;
    std::map<std::string, std::vector<std::string>> succ;
    for (const auto& [id, _] : nodes) indeg[id] = 0;
    for (const auto& [from, to] : edges) {
        succ[from].push_back(to);
        ++indeg[to];
    }
    std::set<std::string> ready;
    for (const auto& [id, d] : indeg)
        if (d == 0) ready.insert(id);
    std::vector<std::string> order;
    while (!ready.empty()) {
        std::string id = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(id);
        for (const std::string& s : succ[id])
            if (--indeg[s] == 0) ready.insert(s);
    }
    if (order.size() != nodes.size()) throw CyclicWorkload(cycle_msg);
    return order;
}

}  // namespace detail

// Materializes the per-task data flows into a unified operator DAG. One
// operator exists per (module kind, layer index); tasks routing through the
// same module share its nodes.
inline ComputationGraph build_graph(const WorkloadSpec& spec) {
    validate_workload(spec);
    ComputationGraph g;
    auto op_id = [](const std::string& kind, int layer) { return kind + "." + std::to_string(layer); };
    auto ensure_module_ops = [&](const std::string& kind, const std::string& task) -> std::pair<std::string, std::string> {
        const ModuleDecl& m = spec.module(kind);
        for (int layer = 0; layer < m.layers; ++layer) {
            const std::string id = op_id(kind, layer);
            auto it = g.operators.find(id);
            if (it == g.operators.end()) {
                Operator op;
                op.id = id;
                op.kind = kind;
                op.input = m.input;
                op.tp_degree = m.tp_degree;
                op.param_group = m.param_group;
                op.task_ids.insert(task);
                g.operators.emplace(id, op);
            } else {
                it->second.task_ids.insert(task);
            }
            if (layer > 0) g.add_edge(op_id(kind, layer - 1), id);
        }
        return {op_id(kind, 0), op_id(kind, m.layers - 1)};
    };

    for (const TaskDecl& task : spec.tasks) {
        std::vector<std::string> prev_tails;
        for (const FlowStep& step : task.flow) {
            std::vector<std::string> heads;
            std::vector<std::string> tails;
            for (const FlowBranch& branch : step) {
                std::string branch_head;
                std::string branch_tail;
                for (std::size_t i = 0; i < branch.size(); ++i) {
                    auto [head, tail] = ensure_module_ops(branch[i], task.id);
                    if (i == 0) branch_head = head;
                    if (i > 0) g.add_edge(branch_tail, head);
                    branch_tail = tail;
                }
                heads.push_back(branch_head);
                tails.push_back(branch_tail);
            }
            for (const std::string& from : prev_tails)
                for (const std::string& to : heads) g.add_edge(from, to);
            prev_tails = tails;
        }
    }
    detail::topo_order(g.operators, g.edges, "workload data flows form a cycle");
    return g;
}

// Contracts an edge <i,j> when out-degree(i) = 1, in-degree(j) = 1 and both
// operators have the same kind and input size. Mergeable edges form vertex
// disjoint paths, so one pass over a deterministic topological order reaches
// the fixpoint.
inline MetaGraph contract(const ComputationGraph& g) {
    auto order = detail::topo_order(g.operators, g.edges, "contract: graph has a cycle");
    std::map<std::string, int> indeg, outdeg;
    std::map<std::string, std::string> unique_succ;
    for (const auto& [id, _] : g.operators) indeg[id] = outdeg[id] = 0;
    for (const auto& [from, to] : g.edges) {
        ++outdeg[from];
        ++indeg[to];
        unique_succ[from] = to;  // only consulted when outdeg == 1
    }
    auto mergeable = [&](const std::string& i, const std::string& j) {
        const Operator& a = g.operators.at(i);
        const Operator& b = g.operators.at(j);
        return outdeg[i] == 1 && indeg[j] == 1 && a.kind == b.kind && a.input == b.input;
    };

    MetaGraph meta;
    std::map<std::string, std::string> owner;  // operator -> metaop id
    int next = 0;
    for (const std::string& id : order) {
        if (owner.count(id)) continue;
        MetaOp m;
        m.id = "m" + std::to_string(next++);
        std::string cur = id;
        while (true) {
            owner[cur] = m.id;
            m.member_ops.push_back(cur);
            const Operator& op = g.operators.at(cur);
            m.task_ids.insert(op.task_ids.begin(), op.task_ids.end());
            if (outdeg[cur] == 1 && mergeable(cur, unique_succ[cur]))
                cur = unique_succ[cur];
            else
                break;
        }
        const Operator& head = g.operators.at(m.member_ops.front());
        m.length = static_cast<int>(m.member_ops.size());
        m.kind = head.kind;
        m.input = head.input;
        m.global_batch = head.input.batch;
        m.tp_degree = head.tp_degree;
        m.param_group = head.param_group;
        meta.metaops.emplace(m.id, m);
    }
    for (const auto& [from, to] : g.edges) {
        const std::string& a = owner.at(from);
        const std::string& b = owner.at(to);
        if (a != b) meta.edges.insert({a, b});
    }
    return meta;
}

// Longest-path layering: level(m) = 1 + max level of predecessors. Unlike
// raw BFS depth this keeps same-level MetaOps independent on skip-edge
// graphs.
inline MetaGraph assign_levels(MetaGraph meta) {
    auto order = detail::topo_order(meta.metaops, meta.edges, "assign_levels: metagraph has a cycle");
    std::map<std::string, std::vector<std::string>> preds;
    for (const auto& [from, to] : meta.edges) preds[to].push_back(from);
    int max_level = 0;
    for (const std::string& id : order) {
        int level = 0;
        for (const std::string& p : preds[id]) level = std::max(level, meta.metaops.at(p).level + 1);
        meta.metaops.at(id).level = level;
        max_level = std::max(max_level, level);
    }
    meta.levels.assign(static_cast<std::size_t>(max_level + 1), {});
    for (const auto& [id, m] : meta.metaops) meta.levels[static_cast<std::size_t>(m.level)].push_back(id);
    for (auto& lvl : meta.levels) std::sort(lvl.begin(), lvl.end());
    for (const auto& [from, to] : meta.edges) {
        if (meta.metaops.at(from).level >= meta.metaops.at(to).level)
            throw InvariantError("level assignment left a same-level dependency");
    }
    return meta;
}

inline std::string dump_graph(const ComputationGraph& g) {
    std::string out;
    for (const auto& [id, op] : g.operators) {
        out += "node " + id + " kind=" + op.kind + " B=" + std::to_string(op.input.batch) +
               " seq=" + std::to_string(op.input.seq) + " hidden=" + std::to_string(op.input.hidden) + " tasks=";
        bool first = true;
        for (const std::string& t : op.task_ids) {
            if (!first) out += ";";
            out += t;
            first = false;
        }
        out += "\n";
    }
    for (const auto& [from, to] : g.edges) out += "edge " + from + " " + to + "\n";
    return out;
}

inline std::string dump_metagraph(const MetaGraph& meta) {
    std::string out;
    for (const auto& [id, m] : meta.metaops) {
        out += "node " + id + " kind=" + m.kind + " B=" + std::to_string(m.global_batch) +
               " L=" + std::to_string(m.length) + " level=" + std::to_string(m.level) +
               " tp=" + std::to_string(m.tp_degree) + "\n";
    }
    for (const auto& [from, to] : meta.edges) out += "edge " + from + " " + to + "\n";
    return out;
}

}  // namespace wavesched
