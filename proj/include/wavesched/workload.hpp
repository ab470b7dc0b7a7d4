// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "wavesched/common.hpp"
#include "wavesched/scaling.hpp"

namespace wavesched {

struct InputSize {
    std::int64_t batch = 1;
    std::int64_t seq = 1;
    std::int64_t hidden = 1;

    bool operator==(const InputSize& o) const = default;
};

// A declared model component: a stack of identical layers with one workload
// descriptor. Module kinds are unique within a workload; tasks reference them
// by kind. Modules with the same param_group share one physical weight set.
struct ModuleDecl {
    std::string kind;
    int layers = 1;
    InputSize input;
    int tp_degree = 1;
    std::string param_group;  // empty: private parameters
    std::uint64_t param_bytes = 0;
    double flops_proxy = 1.0;  // w: scalable workload magnitude per operator
    double comm_proxy = 0.0;   // c: non-scaling workload magnitude per operator
    std::uint64_t act_bytes = 0;  // inter-layer activation bytes per operator at full batch
    std::uint64_t out_bytes = 0;  // bytes handed to downstream modules (0: same as act_bytes)

    std::uint64_t edge_bytes() const { return out_bytes == 0 ? act_bytes : out_bytes; }
};

// Flow grammar: steps separated by ',', parallel branches within a step by
// '+', chained modules within a branch by '>'. Every branch tail of step k
// feeds every branch head of step k+1.
using FlowBranch = std::vector<std::string>;
using FlowStep = std::vector<FlowBranch>;

struct TaskDecl {
    std::string id;
    std::vector<FlowStep> flow;
    std::string flow_text;
};

struct WorkloadSpec {
    std::map<std::string, ModuleDecl> modules;
    std::vector<TaskDecl> tasks;
    // per-module analytic truth curves (synthetic profile source)
    std::map<std::string, std::vector<CurvePiece>> truth;
    // per-module measured points (inline profile source)
    std::map<std::string, std::vector<ProfilePoint>> profiles;
    // optional fitting breakpoints per module (default: one piece)
    std::map<std::string, std::vector<int>> breakpoints;

    const ModuleDecl& module(const std::string& kind) const {
        auto it = modules.find(kind);
        if (it == modules.end()) throw UnknownModule("unknown module '" + kind + "'");
        return it->second;
    }
};

inline std::vector<FlowStep> parse_flow(const std::string& text, const std::string& ctx) {
    std::vector<FlowStep> steps;
    for (const std::string& step_text : split_on(text, ',')) {
        FlowStep step;
        for (const std::string& branch_text : split_on(step_text, '+')) {
            FlowBranch branch;
            for (const std::string& mod : split_on(branch_text, '>')) {
                if (mod.empty()) throw ParseError(ctx + ": empty module reference in flow");
                branch.push_back(mod);
            }
            step.push_back(branch);
        }
        steps.push_back(step);
    }
    if (steps.empty()) throw ParseError(ctx + ": empty flow");
    return steps;
}

inline std::string flow_to_text(const std::vector<FlowStep>& flow) {
    std::string out;
    for (std::size_t s = 0; s < flow.size(); ++s) {
        if (s) out += ",";
        for (std::size_t b = 0; b < flow[s].size(); ++b) {
            if (b) out += "+";
            for (std::size_t m = 0; m < flow[s][b].size(); ++m) {
                if (m) out += ">";
                out += flow[s][b][m];
            }
        }
    }
    return out;
}

inline void validate_workload(const WorkloadSpec& spec) {
    if (spec.tasks.empty()) throw EmptyWorkload("workload declares no tasks");
    std::set<std::string> task_ids;
    for (const TaskDecl& t : spec.tasks) {
        if (!task_ids.insert(t.id).second) throw ParseError("duplicate task id '" + t.id + "'");
        for (const FlowStep& step : t.flow)
            for (const FlowBranch& branch : step)
                for (const std::string& mod : branch) spec.module(mod);
    }
    for (const auto& [kind, m] : spec.modules) {
        if (m.layers < 1) throw ParseError("module '" + kind + "': layers must be >= 1");
        if (m.input.batch < 1 || m.input.seq < 1 || m.input.hidden < 1)
            throw ParseError("module '" + kind + "': input size components must be positive");
        if (m.tp_degree < 1) throw ParseError("module '" + kind + "': tp degree must be >= 1");
        if (m.flops_proxy <= 0.0) throw ParseError("module '" + kind + "': w must be positive");
        if (m.comm_proxy < 0.0) throw ParseError("module '" + kind + "': c must be >= 0");
    }
    for (const auto& [kind, pieces] : spec.truth) {
        spec.module(kind);
        if (pieces.empty()) throw ParseError("module '" + kind + "': empty truth curve");
    }
    for (const auto& [kind, pts] : spec.profiles) spec.module(kind);
    for (const auto& [kind, bps] : spec.breakpoints) spec.module(kind);
}

// ---------------------------------------------------------------------------
// Text grammar:
//   module <kind> layers=.. B=.. seq=.. hidden=.. tp=.. param_group=..
//          param_bytes=.. w=.. c=.. act_bytes=..
//   task <id> flow=<steps>
//   truth <kind> piece <n_lo> <n_hi> <alpha> <beta_c> <beta_w>
//   metaop <kind> n=<n> config=<label> time=<seconds>
//   breakpoints <kind> <b1> <b2> ...
// ---------------------------------------------------------------------------

inline WorkloadSpec parse_workload(const std::string& text) {
    WorkloadSpec spec;
    std::istringstream iss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(iss, line)) {
        ++lineno;
        if (is_comment_or_blank(line)) continue;
        auto toks = split_tokens(line);
        const std::string ctx = "workload line " + std::to_string(lineno);
        if (toks[0] == "module") {
            if (toks.size() < 2) throw ParseError(ctx + ": module needs a kind");
            KvLine kv(toks, 2, ctx);
            ModuleDecl m;
            m.kind = toks[1];
            m.layers = static_cast<int>(kv.num("layers"));
            m.input.batch = kv.num("B");
            m.input.seq = kv.num_or("seq", 1);
            m.input.hidden = kv.num_or("hidden", 1);
            m.tp_degree = static_cast<int>(kv.num_or("tp", 1));
            m.param_group = kv.str_or("param_group", "");
            m.param_bytes = static_cast<std::uint64_t>(kv.num_or("param_bytes", 0));
            m.flops_proxy = kv.real_or("w", 1.0);
            m.comm_proxy = kv.real_or("c", 0.0);
            m.act_bytes = static_cast<std::uint64_t>(kv.num_or("act_bytes", 0));
            m.out_bytes = static_cast<std::uint64_t>(kv.num_or("out_bytes", 0));
            if (!spec.modules.emplace(m.kind, m).second)
                throw ParseError(ctx + ": duplicate module kind '" + m.kind + "'");
        } else if (toks[0] == "task") {
            if (toks.size() < 2) throw ParseError(ctx + ": task needs an id");
            KvLine kv(toks, 2, ctx);
            TaskDecl t;
            t.id = toks[1];
            t.flow_text = kv.str("flow");
            t.flow = parse_flow(t.flow_text, ctx);
            spec.tasks.push_back(t);
        } else if (toks[0] == "truth") {
            if (toks.size() != 8 || toks[2] != "piece")
                throw ParseError(ctx + ": expected 'truth <kind> piece <n_lo> <n_hi> <alpha> <beta_c> <beta_w>'");
            CurvePiece p;
            try {
                p.n_lo = std::stod(toks[3]);
                p.n_hi = std::stod(toks[4]);
                p.alpha = std::stod(toks[5]);
                p.beta_c = std::stod(toks[6]);
                p.beta_w = std::stod(toks[7]);
            } catch (const std::logic_error&) {
                throw ParseError(ctx + ": bad numeric field in truth piece");
            }
            spec.truth[toks[1]].push_back(p);
        } else if (toks[0] == "metaop") {
            auto pts = parse_profile_table(line);
            for (auto& [id, v] : pts)
                spec.profiles[id].insert(spec.profiles[id].end(), v.begin(), v.end());
        } else if (toks[0] == "breakpoints") {
            if (toks.size() < 3) throw ParseError(ctx + ": breakpoints needs a kind and values");
            std::vector<int> bps;
            for (std::size_t i = 2; i < toks.size(); ++i) {
                try {
                    bps.push_back(std::stoi(toks[i]));
                } catch (const std::logic_error&) {
                    throw ParseError(ctx + ": bad breakpoint '" + toks[i] + "'");
                }
            }
            spec.breakpoints[toks[1]] = bps;
        } else {
            throw ParseError(ctx + ": unknown directive '" + toks[0] + "'");
        }
    }
    validate_workload(spec);
    return spec;
}

inline std::string dump_workload(const WorkloadSpec& spec) {
    std::string out;
    for (const auto& [kind, m] : spec.modules) {
        out += "module " + kind + " layers=" + std::to_string(m.layers) + " B=" + std::to_string(m.input.batch) +
               " seq=" + std::to_string(m.input.seq) + " hidden=" + std::to_string(m.input.hidden) +
               " tp=" + std::to_string(m.tp_degree);
        if (!m.param_group.empty()) out += " param_group=" + m.param_group;
        out += " param_bytes=" + std::to_string(m.param_bytes) + " w=" + fmt_exact(m.flops_proxy) +
               " c=" + fmt_exact(m.comm_proxy) + " act_bytes=" + std::to_string(m.act_bytes);
        if (m.out_bytes != 0) out += " out_bytes=" + std::to_string(m.out_bytes);
        out += "\n";
    }
    for (const TaskDecl& t : spec.tasks) out += "task " + t.id + " flow=" + flow_to_text(t.flow) + "\n";
    for (const auto& [kind, pieces] : spec.truth) {
        for (const CurvePiece& p : pieces) {
            out += "truth " + kind + " piece " + fmt_exact(p.n_lo) + " " + fmt_exact(p.n_hi) + " " +
                   fmt_exact(p.alpha) + " " + fmt_exact(p.beta_c) + " " + fmt_exact(p.beta_w) + "\n";
        }
    }
    for (const auto& [kind, pts] : spec.profiles) {
        for (const ProfilePoint& p : pts) {
            out += "metaop " + kind + " n=" + std::to_string(p.n) + " config=" + p.parallel_config +
                   " time=" + fmt_exact(p.time) + "\n";
        }
    }
    for (const auto& [kind, bps] : spec.breakpoints) {
        out += "breakpoints " + kind;
        for (int b : bps) out += " " + std::to_string(b);
        out += "\n";
    }
    return out;
}

}  // namespace wavesched
