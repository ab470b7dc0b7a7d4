// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wavesched/baselines.hpp"
#include "wavesched/planner.hpp"
#include "wavesched/scenarios.hpp"
#include "wavesched/simulate.hpp"
#include "wavesched/validate.hpp"

namespace wavesched {

// exit codes: 0 ok, 2 parse error, 3 infeasible, 4 internal invariant violation
enum ExitCode { kOk = 0, kParseError = 2, kInfeasible = 3, kInvariant = 4 };

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path().empty()
                                            ? "."
                                            : std::filesystem::path(path).parent_path().string());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << content;
}

// ---------------------------------------------------------------------------
// Structured (JSON) ingestion of the same schemas as the text grammar.
// ---------------------------------------------------------------------------

inline WorkloadSpec workload_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("workload json: ") + e.what());
    }
    try {
        WorkloadSpec spec;
        for (const auto& jm : j.value("modules", nlohmann::json::array())) {
            ModuleDecl m;
            m.kind = jm.at("kind").get<std::string>();
            m.layers = jm.at("layers").get<int>();
            m.input.batch = jm.at("B").get<std::int64_t>();
            m.input.seq = jm.value("seq", std::int64_t{1});
            m.input.hidden = jm.value("hidden", std::int64_t{1});
            m.tp_degree = jm.value("tp", 1);
            m.param_group = jm.value("param_group", std::string{});
            m.param_bytes = jm.value("param_bytes", std::uint64_t{0});
            m.flops_proxy = jm.value("w", 1.0);
            m.comm_proxy = jm.value("c", 0.0);
            m.act_bytes = jm.value("act_bytes", std::uint64_t{0});
            if (!spec.modules.emplace(m.kind, m).second)
                throw ParseError("workload json: duplicate module '" + m.kind + "'");
        }
        for (const auto& jt : j.value("tasks", nlohmann::json::array())) {
            TaskDecl t;
            t.id = jt.at("id").get<std::string>();
            t.flow_text = jt.at("flow").get<std::string>();
            t.flow = parse_flow(t.flow_text, "task " + t.id);
            spec.tasks.push_back(t);
        }
        for (const auto& [kind, arr] : j.value("truth", nlohmann::json::object()).items()) {
            for (const auto& jp : arr) {
                CurvePiece p;
                p.n_lo = jp.at("n_lo").get<double>();
                p.n_hi = jp.at("n_hi").get<double>();
                p.alpha = jp.at("alpha").get<double>();
                p.beta_c = jp.value("beta_c", 0.0);
                p.beta_w = jp.value("beta_w", 0.0);
                spec.truth[kind].push_back(p);
            }
        }
        for (const auto& [kind, arr] : j.value("profiles", nlohmann::json::object()).items()) {
            for (const auto& jp : arr) {
                ProfilePoint p;
                p.n = jp.at("n").get<int>();
                p.time = jp.at("time").get<double>();
                p.parallel_config = jp.value("config", std::string{"dp"});
                spec.profiles[kind].push_back(p);
            }
        }
        for (const auto& [kind, arr] : j.value("breakpoints", nlohmann::json::object()).items())
            spec.breakpoints[kind] = arr.get<std::vector<int>>();
        validate_workload(spec);
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("workload json: ") + e.what());
    }
}

inline ClusterTopology topology_from_json(const std::string& text) {
    try {
        nlohmann::json j = nlohmann::json::parse(text);
        ClusterTopology topo;
        for (const auto& island : j.at("islands")) topo.islands.push_back(island.get<std::vector<int>>());
        topo.intra_bw = j.at("intra_bw").get<double>();
        topo.inter_bw = j.at("inter_bw").get<double>();
        topo.mem_capacity = j.at("mem").get<std::uint64_t>();
        topo.finalize();
        return topo;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("topology json: ") + e.what());
    }
}

inline bool has_json_extension(const std::string& path) {
    return path.size() > 5 && path.substr(path.size() - 5) == ".json";
}

inline WorkloadSpec load_workload(const std::string& path) {
    const std::string text = read_file(path);
    return has_json_extension(path) ? workload_from_json(text) : parse_workload(text);
}

inline ClusterTopology load_topology(const std::string& path) {
    const std::string text = read_file(path);
    return has_json_extension(path) ? topology_from_json(text) : parse_topology(text);
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct CliOptions {
    std::string workload;
    std::string topology;
    std::string plan_file;
    std::string out = "out";
    std::uint64_t seed = 0;
    double eps = 1e-7;
    int backtrack_depth = 2;
    bool svg = false;
    std::string scenario;
    int tasks = 4;
    int devices = 8;
    std::string sequence;  // dynamic phase list
};

inline PlannerOptions planner_options(const CliOptions& cli) {
    PlannerOptions opt;
    opt.alloc.eps = cli.eps;
    opt.placement.backtrack_depth = cli.backtrack_depth;
    opt.synth_seed = cli.seed;
    return opt;
}

inline ExecutionPlan plan_for_strategy(const std::string& strategy, const WorkloadSpec& spec,
                                       const ClusterTopology& topo, const PlannerOptions& opt) {
    if (strategy == "wavefront") return plan_workload(spec, topo, opt).plan;
    const PlanningBase base = prepare_planning_base(spec, topo, opt);
    if (strategy == "decoupled-sequential") return plan_decoupled_sequential(base, topo, opt);
    if (strategy == "task-level-optimus") return plan_task_level_optimus(base, topo, opt);
    if (strategy == "distmm-mt") return plan_distmm_mt(base, topo, opt);
    throw ParseError("unknown strategy '" + strategy + "'");
}

inline int cmd_plan(const CliOptions& cli) {
    const auto t0 = std::chrono::steady_clock::now();
    const WorkloadSpec spec = load_workload(cli.workload);
    const ClusterTopology topo = load_topology(cli.topology);
    const PlannerResult result = plan_workload(spec, topo, planner_options(cli));
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::string dir = cli.out + "/";
    write_file(dir + "graph.txt", dump_graph(result.graph));
    write_file(dir + "metagraph.txt", dump_metagraph(result.meta));
    std::string curves;
    for (const auto& [id, curve] : result.curves) {
        for (const CurvePiece& p : curve.pieces())
            curves += "curve " + id + " piece " + fmt_exact(p.n_lo) + " " + fmt_exact(p.n_hi) + " " +
                      fmt_exact(p.alpha) + " " + fmt_exact(p.beta_c) + " " + fmt_exact(p.beta_w) + "\n";
    }
    write_file(dir + "curves.txt", curves);
    std::string alloc;
    for (const AllocationPlan& plan : result.level_plans) {
        alloc += "level " + std::to_string(plan.level) + " c_star=" + fmt_sec(plan.c_star) + "\n";
        alloc += dump_allocation(plan);
    }
    write_file(dir + "allocation.txt", alloc);
    write_file(dir + "schedule.txt", dump_schedule(result.schedule));
    write_file(dir + "gantt.csv", schedule_gantt_csv(result.schedule));
    std::string placement;
    for (const auto& [key, devs] : result.plan.devices) {
        placement += "wave " + std::to_string(key.first) + " metaop " + key.second + " devices=";
        for (std::size_t i = 0; i < devs.size(); ++i) placement += (i ? "," : "") + std::to_string(devs[i]);
        placement += "\n";
    }
    write_file(dir + "placement.txt", placement);
    write_file(dir + "plan.txt", write_plan(result.plan));
    const double gap =
        result.lower_bound > 0 ? result.predicted_makespan / result.lower_bound : 1.0;
    std::string summary;
    summary += "lower_bound " + fmt_sec(result.lower_bound) + "\n";
    summary += "predicted_makespan " + fmt_sec(result.predicted_makespan) + "\n";
    summary += "gap " + fmt_sec(gap) + "\n";
    summary += "metaops " + std::to_string(result.meta.metaops.size()) + "\n";
    summary += "waves " + std::to_string(result.schedule.waves.size()) + "\n";
    write_file(dir + "summary.txt", summary);
    std::cout << summary;
    std::cout << "planning_seconds " << fmt_sec(wall) << "\n";
    return kOk;
}

inline int cmd_simulate(const CliOptions& cli) {
    const ExecutionPlan plan = parse_plan(read_file(cli.plan_file));
    const ValidationReport validation = validate_plan(plan);
    if (!validation.ok) {
        for (const std::string& v : validation.violations) std::cerr << "invalid plan: " << v << "\n";
        return kInvariant;
    }
    const SimulationReport report = simulate_plan(plan);
    const std::string dir = cli.out + "/";
    write_file(dir + "report.txt", report_breakdown_text(report));
    write_file(dir + "timeline.csv", report_timeline_csv(report));
    write_file(dir + "memory.csv", report_memory_table(report));
    write_file(dir + "utilization.csv", report_utilization_csv(report));
    if (cli.svg)
        write_file(dir + "gantt.svg",
                   report_gantt_svg(report, static_cast<int>(plan.topo.devices.size())));
    std::cout << report_breakdown_text(report);
    return kOk;
}

inline const std::vector<std::string>& all_strategies() {
    static const std::vector<std::string> strategies = {"wavefront", "decoupled-sequential",
                                                        "task-level-optimus", "distmm-mt"};
    return strategies;
}

inline int cmd_compare(const CliOptions& cli) {
    const WorkloadSpec spec = load_workload(cli.workload);
    const ClusterTopology topo = load_topology(cli.topology);
    const PlannerOptions opt = planner_options(cli);
    std::map<std::string, double> makespan;
    for (const std::string& strategy : all_strategies()) {
        const ExecutionPlan plan = plan_for_strategy(strategy, spec, topo, opt);
        const ValidationReport validation = validate_plan(plan);
        if (!validation.ok)
            throw InvariantError("strategy " + strategy + " produced an invalid plan: " +
                                 validation.violations.front());
        makespan[strategy] = simulate_plan(plan).makespan;
    }
    const double reference = makespan.at("decoupled-sequential");
    std::string table = "strategy,makespan,speedup_vs_decoupled\n";
    for (const std::string& strategy : all_strategies()) {
        table += strategy + "," + fmt_sec(makespan[strategy]) + "," +
                 fmt_sec(reference / makespan[strategy]) + "\n";
    }
    write_file(cli.out + "/compare.csv", table);
    std::cout << table;
    return kOk;
}

inline int cmd_gen(const CliOptions& cli) {
    const Scenario scenario = generate_scenario(cli.scenario, cli.tasks, cli.devices, cli.seed);
    write_file(cli.out + "/workload.txt", scenario.workload_text);
    write_file(cli.out + "/topology.txt", scenario.topology_text);
    std::cout << "wrote " << cli.out << "/workload.txt and " << cli.out << "/topology.txt\n";
    return kOk;
}

// Dynamic re-planning: a sequence file of `phase workload=<path> iters=<k>`
// lines; every strategy re-plans at each phase boundary and accumulates
// simulated time.
inline int cmd_dynamic(const CliOptions& cli) {
    const ClusterTopology topo = load_topology(cli.topology);
    const PlannerOptions opt = planner_options(cli);
    struct Phase {
        std::string workload;
        int iters = 1;
    };
    std::vector<Phase> phases;
    {
        std::istringstream iss(read_file(cli.sequence));
        std::string line;
        int lineno = 0;
        while (std::getline(iss, line)) {
            ++lineno;
            if (is_comment_or_blank(line)) continue;
            auto toks = split_tokens(line);
            if (toks[0] != "phase")
                throw ParseError("sequence line " + std::to_string(lineno) + ": expected 'phase ...'");
            KvLine kv(toks, 1, "sequence line " + std::to_string(lineno));
            phases.push_back({kv.str("workload"), static_cast<int>(kv.num_or("iters", 1))});
        }
    }
    if (phases.empty()) throw ParseError("dynamic sequence declares no phases");

    std::map<std::string, double> cumulative;
    std::string table = "phase,strategy,iters,iteration_time,cumulative\n";
    for (std::size_t p = 0; p < phases.size(); ++p) {
        const WorkloadSpec spec = load_workload(phases[p].workload);
        for (const std::string& strategy : all_strategies()) {
            const ExecutionPlan plan = plan_for_strategy(strategy, spec, topo, opt);
            const double iter_time = simulate_plan(plan).makespan;
            cumulative[strategy] += iter_time * phases[p].iters;
            table += std::to_string(p) + "," + strategy + "," + std::to_string(phases[p].iters) + "," +
                     fmt_sec(iter_time) + "," + fmt_sec(cumulative[strategy]) + "\n";
            write_file(cli.out + "/phase" + std::to_string(p) + "." + strategy + ".plan.txt",
                       write_plan(plan));
        }
    }
    std::string summary = "strategy,cumulative_seconds\n";
    for (const std::string& strategy : all_strategies())
        summary += strategy + "," + fmt_sec(cumulative[strategy]) + "\n";
    write_file(cli.out + "/dynamic.csv", table);
    write_file(cli.out + "/cumulative.csv", summary);
    std::cout << summary;
    return kOk;
}

// Maps exceptions onto the documented exit codes.
template <typename Fn>
int run_command(Fn&& fn) {
    try {
        return fn();
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kParseError;
    } catch (const InfeasibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvariant;
    }
}

}  // namespace wavesched
