// SPDX-License-Identifier: Apache-2.0
//
// wavesched: plans and simulates multi-task multi-modal training workloads
// on a modeled GPU cluster.

#include <CLI11.hpp>

#include "wavesched/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"multi-task training workload planner and cluster simulator"};
    app.require_subcommand(1);
    wavesched::CliOptions opt;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", opt.out, "output directory");
        cmd->add_option("--seed", opt.seed, "deterministic seed");
        cmd->add_option("--eps", opt.eps, "relative bisection tolerance");
        cmd->add_option("--backtrack-depth", opt.backtrack_depth, "placement backtrack depth");
        cmd->add_flag("--svg", opt.svg, "emit an SVG Gantt chart");
    };

    CLI::App* plan = app.add_subcommand("plan", "plan a workload on a topology");
    plan->add_option("--workload", opt.workload, "workload file (.txt or .json)")->required();
    plan->add_option("--topology", opt.topology, "topology file (.txt or .json)")->required();
    add_common(plan);

    CLI::App* simulate = app.add_subcommand("simulate", "validate and simulate a plan file");
    simulate->add_option("--plan", opt.plan_file, "plan file from `plan`")->required();
    add_common(simulate);

    CLI::App* compare = app.add_subcommand("compare", "compare all strategies on one workload");
    compare->add_option("--workload", opt.workload, "workload file")->required();
    compare->add_option("--topology", opt.topology, "topology file")->required();
    add_common(compare);

    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic scenario");
    gen->add_option("--scenario", opt.scenario, "clip-like | ofasys-like | qwen-val-like")->required();
    gen->add_option("--tasks", opt.tasks, "number of tasks");
    gen->add_option("--devices", opt.devices, "number of devices");
    add_common(gen);

    CLI::App* dynamic = app.add_subcommand("dynamic", "re-plan over a workload sequence");
    dynamic->add_option("--sequence", opt.sequence, "phase sequence file")->required();
    dynamic->add_option("--topology", opt.topology, "topology file")->required();
    add_common(dynamic);

    CLI11_PARSE(app, argc, argv);

    if (plan->parsed()) return wavesched::run_command([&] { return wavesched::cmd_plan(opt); });
    if (simulate->parsed()) return wavesched::run_command([&] { return wavesched::cmd_simulate(opt); });
    if (compare->parsed()) return wavesched::run_command([&] { return wavesched::cmd_compare(opt); });
    if (gen->parsed()) return wavesched::run_command([&] { return wavesched::cmd_gen(opt); });
    if (dynamic->parsed()) return wavesched::run_command([&] { return wavesched::cmd_dynamic(opt); });
    return wavesched::kParseError;
}
