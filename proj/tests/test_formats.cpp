// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "wavesched/cli.hpp"

using namespace wavesched;

namespace {

const char* kWorkloadText =
    "# toy workload\n"
    "module enc layers=4 B=8 seq=16 hidden=32 tp=1 param_group=g.enc param_bytes=1000 w=2 c=0.5 "
    "act_bytes=4096 out_bytes=512\n"
    "module head layers=1 B=8 tp=1 param_bytes=10 w=0.1 c=0 act_bytes=64\n"
    "task t0 flow=enc,head\n"
    "truth enc piece 1 1024 0.001 0.001 0.05\n"
    "truth head piece 1 1024 0.0005 0.0005 0.1\n";

const char* kTopologyText =
    "island 0: 0 1\n"
    "island 1: 2 3\n"
    "bw intra=1e11 inter=2e10\n"
    "mem 1000000000\n";

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("wavesched-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("workload text round trip") {
    WorkloadSpec spec = parse_workload(kWorkloadText);
    REQUIRE(spec.modules.size() == 2);
    CHECK(spec.modules.at("enc").layers == 4);
    CHECK(spec.modules.at("enc").param_group == "g.enc");
    CHECK(spec.modules.at("enc").out_bytes == 512);
    CHECK(spec.modules.at("enc").edge_bytes() == 512);
    CHECK(spec.modules.at("head").edge_bytes() == 64);
    REQUIRE(spec.tasks.size() == 1);
    REQUIRE(spec.truth.count("enc") == 1);
    WorkloadSpec again = parse_workload(dump_workload(spec));
    CHECK(dump_workload(again) == dump_workload(spec));
}

TEST_CASE("workload parse errors carry line context") {
    CHECK_THROWS_AS(parse_workload("module enc layers=0 B=1\n"), ParseError);
    CHECK_THROWS_AS(parse_workload("bogus directive\n"), ParseError);
    CHECK_THROWS_AS(parse_workload("module enc layers=1 B=1\n"), EmptyWorkload);
    try {
        parse_workload("module enc layers=1 B=1\nnoise\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("flow grammar: steps, branches, chains") {
    auto flow = parse_flow("a>b+c,d", "test");
    REQUIRE(flow.size() == 2);
    REQUIRE(flow[0].size() == 2);
    CHECK(flow[0][0] == FlowBranch{"a", "b"});
    CHECK(flow[0][1] == FlowBranch{"c"});
    CHECK(flow[1][0] == FlowBranch{"d"});
    CHECK(flow_to_text(flow) == "a>b+c,d");
}

TEST_CASE("topology text round trip and validation") {
    ClusterTopology topo = parse_topology(kTopologyText);
    CHECK(topo.devices.size() == 4);
    CHECK(topo.island_of.at(2) == 1);
    ClusterTopology again = parse_topology(dump_topology(topo));
    CHECK(dump_topology(again) == dump_topology(topo));
    CHECK_THROWS_AS(parse_topology("island 0: 0 1\nbw intra=1 inter=2\nmem 5\n"), ParseError);
    CHECK_THROWS_AS(parse_topology("island 0: 0 0\nbw intra=2 inter=1\nmem 5\n"), ParseError);
    CHECK_THROWS_AS(parse_topology("island 0: 0\nbw intra=2 inter=1\n"), ParseError);
}

TEST_CASE("JSON workload and topology ingest the same schema") {
    const std::string workload_json = R"({
      "modules": [
        {"kind": "enc", "layers": 4, "B": 8, "seq": 16, "hidden": 32, "param_group": "g.enc",
         "param_bytes": 1000, "w": 2.0, "c": 0.5, "act_bytes": 4096},
        {"kind": "head", "layers": 1, "B": 8, "param_bytes": 10, "w": 0.1, "act_bytes": 64}
      ],
      "tasks": [{"id": "t0", "flow": "enc,head"}],
      "truth": {"enc": [{"n_lo": 1, "n_hi": 1024, "alpha": 0.001, "beta_c": 0.001, "beta_w": 0.05}],
                 "head": [{"n_lo": 1, "n_hi": 1024, "alpha": 0.0005, "beta_c": 0.0005, "beta_w": 0.1}]}
    })";
    WorkloadSpec spec = workload_from_json(workload_json);
    CHECK(spec.modules.size() == 2);
    CHECK(spec.tasks.size() == 1);
    const std::string topology_json =
        R"({"islands": [[0,1],[2,3]], "intra_bw": 1e11, "inter_bw": 2e10, "mem": 1000000000})";
    ClusterTopology topo = topology_from_json(topology_json);
    CHECK(topo.islands.size() == 2);
    CHECK_THROWS_AS(workload_from_json("{"), ParseError);
    CHECK_THROWS_AS(topology_from_json("[1,2]"), ParseError);
}

TEST_CASE("plan file round trips through text") {
    WorkloadSpec spec = parse_workload(kWorkloadText);
    ClusterTopology topo = parse_topology(kTopologyText);
    ExecutionPlan plan = plan_workload(spec, topo).plan;
    const std::string text = write_plan(plan);
    ExecutionPlan parsed = parse_plan(text);
    CHECK(write_plan(parsed) == text);
    CHECK(parsed.strategy == "wavefront");
    CHECK(parsed.entities.size() == plan.entities.size());
    CHECK(parsed.flows.size() == plan.flows.size());
    CHECK(parsed.schedule.end_time == Catch::Approx(plan.schedule.end_time));
    ValidationReport report = validate_plan(parsed);
    CAPTURE(report.violations);
    CHECK(report.ok);
    CHECK_THROWS_AS(parse_plan("strategy wavefront\n"), ParseError);
    CHECK_THROWS_AS(parse_plan("nonsense\n"), ParseError);
}

TEST_CASE("validator flags corrupted plans") {
    WorkloadSpec spec = parse_workload(kWorkloadText);
    ClusterTopology topo = parse_topology(kTopologyText);
    ExecutionPlan plan = plan_workload(spec, topo).plan;

    SECTION("missing layers break work completion") {
        ExecutionPlan broken = plan;
        broken.schedule.waves[0].entries[0].layers -= 1;
        CHECK_FALSE(validate_plan(broken).ok);
    }
    SECTION("capacity violation") {
        ExecutionPlan broken = plan;
        Wave extra = broken.schedule.waves.back();
        for (WaveEntry& e : extra.entries) e.metaop_id = "ghost";
        PlanEntity ghost = broken.entities.begin()->second;
        ghost.id = "ghost";
        ghost.length = extra.entries[0].layers;
        broken.entities["ghost"] = ghost;
        broken.curves["ghost"] = broken.curves.begin()->second;
        extra.index = static_cast<int>(broken.schedule.waves.size());
        // overlap in time with every other wave and oversubscribe devices
        extra.start = 0.0;
        for (WaveEntry& e : extra.entries) e.n = 4;
        broken.schedule.waves.push_back(extra);
        for (WaveEntry& e : broken.schedule.waves.back().entries)
            broken.devices[{extra.index, e.metaop_id}] = {0, 1, 2, 3};
        CHECK_FALSE(validate_plan(broken).ok);
    }
    SECTION("dependency violation") {
        ExecutionPlan broken = plan;
        // make the consumer start before its producer finishes
        broken.deps.insert({broken.schedule.waves.back().entries[0].metaop_id,
                            broken.schedule.waves.front().entries[0].metaop_id});
        CHECK_FALSE(validate_plan(broken).ok);
    }
    SECTION("placement size mismatch") {
        ExecutionPlan broken = plan;
        auto key = broken.devices.begin()->first;
        broken.devices[key].pop_back();
        CHECK_FALSE(validate_plan(broken).ok);
    }
}

TEST_CASE("cmd_gen is deterministic and its output plans cleanly") {
    auto dir = temp_dir("gen");
    CliOptions opt;
    opt.scenario = "clip-like";
    opt.tasks = 4;
    opt.devices = 8;
    opt.seed = 0;
    opt.out = (dir / "a").string();
    REQUIRE(cmd_gen(opt) == kOk);
    opt.out = (dir / "b").string();
    REQUIRE(cmd_gen(opt) == kOk);
    CHECK(read_file((dir / "a" / "workload.txt").string()) ==
          read_file((dir / "b" / "workload.txt").string()));
    CHECK(read_file((dir / "a" / "topology.txt").string()) ==
          read_file((dir / "b" / "topology.txt").string()));

    CliOptions plan_opt;
    plan_opt.workload = (dir / "a" / "workload.txt").string();
    plan_opt.topology = (dir / "a" / "topology.txt").string();
    plan_opt.out = (dir / "plan").string();
    REQUIRE(cmd_plan(plan_opt) == kOk);
    for (const char* f : {"graph.txt", "metagraph.txt", "curves.txt", "allocation.txt", "schedule.txt",
                          "placement.txt", "plan.txt", "summary.txt", "gantt.csv"})
        CHECK(std::filesystem::exists(dir / "plan" / f));

    CliOptions sim_opt;
    sim_opt.plan_file = (dir / "plan" / "plan.txt").string();
    sim_opt.out = (dir / "sim").string();
    sim_opt.svg = true;
    REQUIRE(cmd_simulate(sim_opt) == kOk);
    for (const char* f : {"report.txt", "timeline.csv", "memory.csv", "utilization.csv", "gantt.svg"})
        CHECK(std::filesystem::exists(dir / "sim" / f));
}

TEST_CASE("unknown scenario and malformed inputs map to exit codes") {
    CHECK(run_command([] { throw ParseError("x"); return 0; }) == kParseError);
    CHECK(run_command([] { throw NoValidAllocation("x"); return 0; }) == kInfeasible);
    CHECK(run_command([] { throw PlacementInfeasible("x"); return 0; }) == kInfeasible);
    CHECK(run_command([] { throw InvariantError("x"); return 0; }) == kInvariant);
    CHECK_THROWS_AS(generate_scenario("nope", 1, 1, 0), ParseError);

    auto dir = temp_dir("badsim");
    write_file((dir / "broken.txt").string(), "wave zero\n");
    CliOptions opt;
    opt.plan_file = (dir / "broken.txt").string();
    opt.out = dir.string();
    CHECK(run_command([&] { return cmd_simulate(opt); }) == kParseError);
}

TEST_CASE("cmd_compare emits speedups against the decoupled baseline") {
    auto dir = temp_dir("compare");
    Scenario sc = generate_scenario("qwen-val-like", 3, 8, 0);
    write_file((dir / "w.txt").string(), sc.workload_text);
    write_file((dir / "t.txt").string(), sc.topology_text);
    CliOptions opt;
    opt.workload = (dir / "w.txt").string();
    opt.topology = (dir / "t.txt").string();
    opt.out = (dir / "out").string();
    REQUIRE(cmd_compare(opt) == kOk);
    const std::string table = read_file((dir / "out" / "compare.csv").string());
    CHECK(table.find("strategy,makespan,speedup_vs_decoupled") == 0);
    CHECK(table.find("wavefront,") != std::string::npos);
    CHECK(table.find("decoupled-sequential,") != std::string::npos);
    CHECK(table.find("task-level-optimus,") != std::string::npos);
    CHECK(table.find("distmm-mt,") != std::string::npos);
}

TEST_CASE("cmd_dynamic accumulates per-strategy time across phases") {
    auto dir = temp_dir("dynamic");
    for (int tasks : {4, 2}) {
        Scenario sc = generate_scenario("clip-like", tasks, 8, 0);
        write_file((dir / ("w" + std::to_string(tasks) + ".txt")).string(), sc.workload_text);
        if (tasks == 4) write_file((dir / "topo.txt").string(), sc.topology_text);
    }
    write_file((dir / "seq.txt").string(),
               "phase workload=" + (dir / "w4.txt").string() + " iters=3\n" +
               "phase workload=" + (dir / "w2.txt").string() + " iters=2\n");
    CliOptions opt;
    opt.sequence = (dir / "seq.txt").string();
    opt.topology = (dir / "topo.txt").string();
    opt.out = (dir / "out").string();
    REQUIRE(cmd_dynamic(opt) == kOk);
    const std::string summary = read_file((dir / "out" / "cumulative.csv").string());
    CHECK(summary.find("wavefront,") != std::string::npos);
    const std::string table = read_file((dir / "out" / "dynamic.csv").string());
    CHECK(table.find("0,wavefront,3,") != std::string::npos);
    CHECK(table.find("1,wavefront,2,") != std::string::npos);
    // one phase equals plan+simulate times iterations
    CHECK(std::filesystem::exists(dir / "out" / "phase0.wavefront.plan.txt"));
}
