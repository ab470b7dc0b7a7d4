// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "wavesched/common.hpp"
#include "wavesched/placement.hpp"
#include "wavesched/scaling.hpp"
#include "wavesched/schedule.hpp"
#include "wavesched/topology.hpp"

namespace wavesched {

// A schedulable entity of a final plan. For the wavefront planner this is a
// MetaOp; task-decoupled baselines use task-scoped entities (id "m3@t1")
// carrying the batch fraction that task processes.
struct PlanEntity {
    std::string id;
    std::string kind;
    int length = 1;  // layers the entity owes in total
    int level = 0;
    int tp_degree = 1;
    std::int64_t global_batch = 1;
    double batch_fraction = 1.0;
    std::string param_group;
    std::uint64_t param_bytes = 0;
    std::uint64_t act_bytes = 0;
    std::uint64_t out_bytes = 0;  // 0: same as act_bytes
    double w = 1.0;
    double c = 0.0;
    std::set<std::string> task_ids;
};

// Self-contained executable plan: everything the validator and the
// discrete-event simulator need.
struct ExecutionPlan {
    std::string strategy = "wavefront";
    ClusterTopology topo;
    std::map<std::string, PlanEntity> entities;
    std::map<std::string, ScalingCurve> curves;  // per entity
    std::set<std::pair<std::string, std::string>> deps;
    WavefrontSchedule schedule;
    std::map<std::pair<int, std::string>, std::vector<int>> devices;
    std::vector<Flow> flows;
    double lower_bound = 0.0;  // sum over levels of the continuous optimum
    double grad_opt_multiplier = 3.0;
};

inline std::string write_plan(const ExecutionPlan& plan) {
    std::string out = "# wavesched plan v1\n";
    out += "strategy " + plan.strategy + "\n";
    out += dump_topology(plan.topo);
    for (const auto& [id, e] : plan.entities) {
        out += "entity " + id + " kind=" + e.kind + " L=" + std::to_string(e.length) +
               " level=" + std::to_string(e.level) + " tp=" + std::to_string(e.tp_degree) +
               " B=" + std::to_string(e.global_batch) + " frac=" + fmt_exact(e.batch_fraction);
        if (!e.param_group.empty()) out += " param_group=" + e.param_group;
        out += " param_bytes=" + std::to_string(e.param_bytes) + " act_bytes=" + std::to_string(e.act_bytes);
        if (e.out_bytes != 0) out += " out_bytes=" + std::to_string(e.out_bytes);
        out += " w=" + fmt_exact(e.w) + " c=" + fmt_exact(e.c);
        if (!e.task_ids.empty()) {
            out += " tasks=";
            bool first = true;
            for (const std::string& t : e.task_ids) {
                if (!first) out += ";";
                out += t;
                first = false;
            }
        }
        out += "\n";
    }
    for (const auto& [id, curve] : plan.curves) {
        for (const CurvePiece& p : curve.pieces()) {
            out += "curve " + id + " piece " + fmt_exact(p.n_lo) + " " + fmt_exact(p.n_hi) + " " +
                   fmt_exact(p.alpha) + " " + fmt_exact(p.beta_c) + " " + fmt_exact(p.beta_w) + "\n";
        }
        out += "curve " + id + " workload c=" + fmt_exact(curve.c()) + " w=" + fmt_exact(curve.w()) + "\n";
    }
    for (const auto& [from, to] : plan.deps) out += "dep " + from + " " + to + "\n";
    out += "lower_bound " + fmt_exact(plan.lower_bound) + "\n";
    out += "mem_multiplier " + fmt_exact(plan.grad_opt_multiplier) + "\n";
    for (const Wave& w : plan.schedule.waves) {
        out += "wave " + std::to_string(w.index) + " level=" + std::to_string(w.level) +
               " start=" + fmt_exact(w.start) + " dur=" + fmt_exact(w.duration) + "\n";
        for (const WaveEntry& e : w.entries) {
            out += "entry metaop=" + e.metaop_id + " n=" + std::to_string(e.n) +
                   " l=" + std::to_string(e.layers) + " dur=" + fmt_exact(e.span);
            auto devs = plan.devices.find({w.index, e.metaop_id});
            if (devs != plan.devices.end()) {
                out += " devices=";
                for (std::size_t i = 0; i < devs->second.size(); ++i) {
                    if (i) out += ",";
                    out += std::to_string(devs->second[i]);
                }
            }
            out += "\n";
        }
    }
    for (const Flow& f : plan.flows) {
        out += "flow from=" + std::to_string(f.from_wave) + ":" + f.from_id + " to=" +
               std::to_string(f.to_wave) + ":" + f.to_id + " volume=" + std::to_string(f.volume) +
               " mode=" + f.mode + "\n";
    }
    out += "end_time " + fmt_exact(plan.schedule.end_time) + "\n";
    return out;
}

inline ExecutionPlan parse_plan(const std::string& text) {
    ExecutionPlan plan;
    plan.strategy.clear();
    std::istringstream iss(text);
    std::string line;
    int lineno = 0;
    std::map<std::string, std::vector<CurvePiece>> curve_pieces;
    std::map<std::string, std::pair<double, double>> curve_cw;
    ClusterTopology topo;
    bool saw_bw = false, saw_mem = false, saw_end = false;
    int last_level = -1;
    while (std::getline(iss, line)) {
        ++lineno;
        if (is_comment_or_blank(line)) continue;
        auto toks = split_tokens(line);
        const std::string ctx = "plan line " + std::to_string(lineno);
        const std::string& head = toks[0];
        try {
        if (head == "strategy") {
            if (toks.size() != 2) throw ParseError(ctx + ": expected 'strategy <name>'");
            plan.strategy = toks[1];
        } else if (head == "island") {
            std::vector<int> members;
            for (std::size_t i = 2; i < toks.size(); ++i) members.push_back(std::stoi(toks[i]));
            topo.islands.push_back(members);
        } else if (head == "bw") {
            KvLine kv(toks, 1, ctx);
            topo.intra_bw = kv.real("intra");
            topo.inter_bw = kv.real("inter");
            saw_bw = true;
        } else if (head == "mem") {
            topo.mem_capacity = std::stoull(toks.at(1));
            saw_mem = true;
        } else if (head == "entity") {
            if (toks.size() < 2) throw ParseError(ctx + ": entity needs an id");
            KvLine kv(toks, 2, ctx);
            PlanEntity e;
            e.id = toks[1];
            e.kind = kv.str("kind");
            e.length = static_cast<int>(kv.num("L"));
            e.level = static_cast<int>(kv.num_or("level", 0));
            e.tp_degree = static_cast<int>(kv.num_or("tp", 1));
            e.global_batch = kv.num_or("B", 1);
            e.batch_fraction = kv.real_or("frac", 1.0);
            e.param_group = kv.str_or("param_group", "");
            e.param_bytes = static_cast<std::uint64_t>(kv.num_or("param_bytes", 0));
            e.act_bytes = static_cast<std::uint64_t>(kv.num_or("act_bytes", 0));
            e.out_bytes = static_cast<std::uint64_t>(kv.num_or("out_bytes", 0));
            e.w = kv.real_or("w", 1.0);
            e.c = kv.real_or("c", 0.0);
            if (kv.has("tasks"))
                for (const std::string& t : split_on(kv.str("tasks"), ';')) e.task_ids.insert(t);
            plan.entities[e.id] = e;
        } else if (head == "curve") {
            if (toks.size() < 3) throw ParseError(ctx + ": malformed curve line");
            if (toks[2] == "piece") {
                if (toks.size() != 8) throw ParseError(ctx + ": curve piece needs 5 numbers");
                CurvePiece p;
                p.n_lo = std::stod(toks[3]);
                p.n_hi = std::stod(toks[4]);
                p.alpha = std::stod(toks[5]);
                p.beta_c = std::stod(toks[6]);
                p.beta_w = std::stod(toks[7]);
                curve_pieces[toks[1]].push_back(p);
            } else if (toks[2] == "workload") {
                KvLine kv(toks, 3, ctx);
                curve_cw[toks[1]] = {kv.real("c"), kv.real("w")};
            } else {
                throw ParseError(ctx + ": unknown curve directive '" + toks[2] + "'");
            }
        } else if (head == "dep") {
            if (toks.size() != 3) throw ParseError(ctx + ": expected 'dep <from> <to>'");
            plan.deps.insert({toks[1], toks[2]});
        } else if (head == "lower_bound") {
            plan.lower_bound = std::stod(toks.at(1));
        } else if (head == "mem_multiplier") {
            plan.grad_opt_multiplier = std::stod(toks.at(1));
        } else if (head == "wave") {
            KvLine kv(toks, 2, ctx);
            Wave w;
            w.index = std::stoi(toks.at(1));
            w.level = static_cast<int>(kv.num_or("level", 0));
            w.start = kv.real("start");
            w.duration = kv.real("dur");
            if (w.level != last_level) {
                plan.schedule.level_boundaries.push_back(w.index);
                last_level = w.level;
            }
            plan.schedule.waves.push_back(w);
        } else if (head == "entry") {
            if (plan.schedule.waves.empty()) throw ParseError(ctx + ": entry before any wave");
            KvLine kv(toks, 1, ctx);
            WaveEntry e;
            e.metaop_id = kv.str("metaop");
            e.n = static_cast<int>(kv.num("n"));
            e.layers = static_cast<int>(kv.num("l"));
            e.span = kv.real("dur");
            Wave& w = plan.schedule.waves.back();
            w.entries.push_back(e);
            if (kv.has("devices")) {
                std::vector<int> devs;
                for (const std::string& d : split_on(kv.str("devices"), ','))
                    if (!d.empty()) devs.push_back(std::stoi(d));
                plan.devices[{w.index, e.metaop_id}] = devs;
            }
        } else if (head == "flow") {
            KvLine kv(toks, 1, ctx);
            Flow f;
            auto from = split_on(kv.str("from"), ':');
            auto to = split_on(kv.str("to"), ':');
            if (from.size() != 2 || to.size() != 2) throw ParseError(ctx + ": flow endpoints are <wave>:<id>");
            f.from_wave = std::stoi(from[0]);
            f.from_id = from[1];
            f.to_wave = std::stoi(to[0]);
            f.to_id = to[1];
            f.volume = static_cast<std::uint64_t>(kv.num("volume"));
            f.mode = kv.str("mode");
            plan.flows.push_back(f);
        } else if (head == "end_time") {
            plan.schedule.end_time = std::stod(toks.at(1));
            saw_end = true;
        } else {
            throw ParseError(ctx + ": unknown directive '" + head + "'");
        }
        } catch (const ParseError&) {
            throw;
        } catch (const std::logic_error& e) {
            throw ParseError(ctx + ": " + e.what());
        }
    }
    if (plan.strategy.empty()) throw ParseError("plan: missing strategy line");
    if (!saw_bw || !saw_mem) throw ParseError("plan: incomplete topology");
    if (!saw_end) throw ParseError("plan: missing end_time");
    topo.finalize();
    plan.topo = topo;
    for (auto& [id, pieces] : curve_pieces) {
        auto cw = curve_cw.find(id);
        if (cw == curve_cw.end()) throw ParseError("plan: curve '" + id + "' missing workload line");
        plan.curves[id] = ScalingCurve::from_pieces(pieces, cw->second.first, cw->second.second);
    }
    for (const auto& [id, e] : plan.entities)
        if (!plan.curves.count(id)) throw ParseError("plan: entity '" + id + "' has no curve");
    return plan;
}

}  // namespace wavesched
