// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "wavesched/graph.hpp"

using namespace wavesched;

namespace {

WorkloadSpec two_tasks_shared_text() {
    WorkloadSpec spec;
    ModuleDecl text;
    text.kind = "text-enc";
    text.layers = 12;
    text.input = {8, 128, 512};
    spec.modules["text-enc"] = text;
    spec.tasks.push_back({"t1", parse_flow("text-enc", "t1"), "text-enc"});
    spec.tasks.push_back({"t2", parse_flow("text-enc", "t2"), "text-enc"});
    return spec;
}

ComputationGraph chain_graph(int n, const std::string& kind) {
    ComputationGraph g;
    for (int i = 0; i < n; ++i) {
        Operator op;
        op.id = "op" + std::to_string(i);
        op.kind = kind;
        op.input = {4, 1, 1};
        g.operators[op.id] = op;
    }
    for (int i = 0; i + 1 < n; ++i) g.add_edge("op" + std::to_string(i), "op" + std::to_string(i + 1));
    return g;
}

// re-expands a MetaGraph into an operator graph, one operator per MetaOp
// member, for the idempotence property
ComputationGraph meta_to_graph(const MetaGraph& meta) {
    ComputationGraph g;
    for (const auto& [id, m] : meta.metaops) {
        for (int i = 0; i < m.length; ++i) {
            Operator op;
            op.id = id + "#" + std::to_string(i);
            op.kind = m.kind;
            op.input = m.input;
            op.task_ids = m.task_ids;
            g.operators[op.id] = op;
        }
        for (int i = 0; i + 1 < m.length; ++i)
            g.add_edge(id + "#" + std::to_string(i), id + "#" + std::to_string(i + 1));
    }
    for (const auto& [from, to] : meta.edges)
        g.add_edge(from + "#" + std::to_string(meta.at(from).length - 1), to + "#0");
    return g;
}

}  // namespace

TEST_CASE("two tasks share the 12-layer text encoder") {
    ComputationGraph g = build_graph(two_tasks_shared_text());
    CHECK(g.operators.size() == 12);
    CHECK(g.edges.size() == 11);
    for (const auto& [id, op] : g.operators) {
        CHECK(op.task_ids == std::set<std::string>{"t1", "t2"});
    }
}

TEST_CASE("single one-layer module gives one node, no edges") {
    WorkloadSpec spec;
    ModuleDecl m;
    m.kind = "solo";
    m.layers = 1;
    m.input = {1, 1, 1};
    spec.modules["solo"] = m;
    spec.tasks.push_back({"t1", parse_flow("solo", "t"), "solo"});
    ComputationGraph g = build_graph(spec);
    CHECK(g.operators.size() == 1);
    CHECK(g.edges.empty());
}

TEST_CASE("disjoint tasks build disconnected chains") {
    WorkloadSpec spec;
    for (const char* kind : {"a", "b"}) {
        ModuleDecl m;
        m.kind = kind;
        m.layers = 3;
        m.input = {2, 1, 1};
        spec.modules[kind] = m;
    }
    spec.tasks.push_back({"t1", parse_flow("a", "t1"), "a"});
    spec.tasks.push_back({"t2", parse_flow("b", "t2"), "b"});
    ComputationGraph g = build_graph(spec);
    CHECK(g.operators.size() == 6);
    CHECK(g.edges.size() == 4);
    for (const auto& [from, to] : g.edges) CHECK(from[0] == to[0]);  // no cross edges
}

TEST_CASE("cycle and dangling module are rejected") {
    WorkloadSpec spec;
    for (const char* kind : {"a", "b"}) {
        ModuleDecl m;
        m.kind = kind;
        m.layers = 1;
        m.input = {1, 1, 1};
        spec.modules[kind] = m;
    }
    spec.tasks.push_back({"t1", parse_flow("a,b", "t1"), "a,b"});
    spec.tasks.push_back({"t2", parse_flow("b,a", "t2"), "b,a"});
    CHECK_THROWS_AS(build_graph(spec), CyclicWorkload);

    WorkloadSpec dangling;
    ModuleDecl m;
    m.kind = "a";
    m.layers = 1;
    m.input = {1, 1, 1};
    dangling.modules["a"] = m;
    dangling.tasks.push_back({"t1", parse_flow("a,ghost", "t1"), "a,ghost"});
    CHECK_THROWS_AS(build_graph(dangling), UnknownModule);
}

TEST_CASE("homogeneous chain contracts to one MetaOp") {
    MetaGraph meta = contract(chain_graph(5, "text-enc-layer"));
    REQUIRE(meta.metaops.size() == 1);
    const MetaOp& m = meta.metaops.begin()->second;
    CHECK(m.length == 5);
    CHECK(m.kind == "text-enc-layer");
    CHECK(meta.edges.empty());
    // member operators form a path
    for (int i = 0; i + 1 < m.length; ++i)
        CHECK(m.member_ops[static_cast<std::size_t>(i)] < m.member_ops[static_cast<std::size_t>(i) + 1]);
}

TEST_CASE("branch stops contraction at the branching operator") {
    // A -> B -> C and B -> D, all same kind and size: A,B contract (the
    // branch leaves out-degree(A)=1 and in-degree(B)=1 untouched); B's two
    // outgoing edges stop any merge past B.
    ComputationGraph g = chain_graph(3, "k");  // op0 -> op1 -> op2
    Operator d;
    d.id = "op3";
    d.kind = "k";
    d.input = {4, 1, 1};
    g.operators[d.id] = d;
    g.add_edge("op1", "op3");
    MetaGraph meta = contract(g);
    REQUIRE(meta.metaops.size() == 3);
    std::multiset<int> lengths;
    for (const auto& [id, m] : meta.metaops) lengths.insert(m.length);
    CHECK(lengths == std::multiset<int>{1, 1, 2});  // {A,B}, {C}, {D}
    CHECK(meta.edges.size() == 2);
}

TEST_CASE("two towers and a fusion layer contract to three MetaOps") {
    WorkloadSpec spec;
    for (const char* kind : {"enc-a", "enc-b"}) {
        ModuleDecl m;
        m.kind = kind;
        m.layers = 3;
        m.input = {4, 16, 32};
        spec.modules[kind] = m;
    }
    ModuleDecl fuse;
    fuse.kind = "fuse";
    fuse.layers = 1;
    fuse.input = {4, 16, 32};
    spec.modules["fuse"] = fuse;
    spec.tasks.push_back({"t1", parse_flow("enc-a+enc-b,fuse", "t1"), "enc-a+enc-b,fuse"});
    MetaGraph meta = assign_levels(contract(build_graph(spec)));
    REQUIRE(meta.metaops.size() == 3);
    std::multiset<int> lengths;
    for (const auto& [id, m] : meta.metaops) lengths.insert(m.length);
    CHECK(lengths == std::multiset<int>{1, 3, 3});
    REQUIRE(meta.levels.size() == 2);
    CHECK(meta.levels[0].size() == 2);
    CHECK(meta.levels[1].size() == 1);
}

TEST_CASE("contraction preserves workload and is idempotent") {
    auto scenario_spec = [] {
        WorkloadSpec spec;
        const char* kinds[] = {"a", "b", "c", "fuse"};
        int layers[] = {5, 3, 7, 2};
        for (int i = 0; i < 4; ++i) {
            ModuleDecl m;
            m.kind = kinds[i];
            m.layers = layers[i];
            m.input = {4, 8, 16};
            spec.modules[kinds[i]] = m;
        }
        spec.tasks.push_back({"t1", parse_flow("a+b,fuse", "t1"), "a+b,fuse"});
        spec.tasks.push_back({"t2", parse_flow("c,fuse", "t2"), "c,fuse"});
        spec.tasks.push_back({"t3", parse_flow("a,fuse", "t3"), "a,fuse"});
        return spec;
    };
    ComputationGraph g = build_graph(scenario_spec());
    MetaGraph meta = contract(g);
    int total = 0;
    for (const auto& [id, m] : meta.metaops) total += m.length;
    CHECK(total == static_cast<int>(g.operators.size()));

    MetaGraph again = contract(meta_to_graph(meta));
    CHECK(again.metaops.size() == meta.metaops.size());
    CHECK(again.edges.size() == meta.edges.size());
    std::multiset<std::pair<std::string, int>> sig1, sig2;
    for (const auto& [id, m] : meta.metaops) sig1.insert({m.kind, m.length});
    for (const auto& [id, m] : again.metaops) sig2.insert({m.kind, m.length});
    CHECK(sig1 == sig2);
}

TEST_CASE("levels: symmetric diamond") {
    ComputationGraph g;
    for (const char* id : {"A", "B", "C", "D"}) {
        Operator op;
        op.id = id;
        op.kind = id;  // distinct kinds: no contraction
        op.input = {1, 1, 1};
        g.operators[id] = op;
    }
    g.add_edge("A", "B");
    g.add_edge("A", "C");
    g.add_edge("B", "D");
    g.add_edge("C", "D");
    MetaGraph meta = assign_levels(contract(g));
    std::map<std::string, int> level;
    for (const auto& [id, m] : meta.metaops) level[m.kind] = m.level;
    CHECK(level["A"] == 0);
    CHECK(level["B"] == 1);
    CHECK(level["C"] == 1);
    CHECK(level["D"] == 2);
}

TEST_CASE("levels: skip edge uses longest-path layering") {
    ComputationGraph g;
    for (const char* id : {"A", "B", "D"}) {
        Operator op;
        op.id = id;
        op.kind = id;
        op.input = {1, 1, 1};
        g.operators[id] = op;
    }
    g.add_edge("A", "D");
    g.add_edge("A", "B");
    g.add_edge("B", "D");
    MetaGraph meta = assign_levels(contract(g));
    std::map<std::string, int> level;
    for (const auto& [id, m] : meta.metaops) level[m.kind] = m.level;
    CHECK(level["D"] == 2);  // not 1: no same-level dependencies
    for (const auto& [from, to] : meta.edges)
        CHECK(meta.at(from).level < meta.at(to).level);
}

TEST_CASE("single MetaOp sits at level zero") {
    MetaGraph meta = assign_levels(contract(chain_graph(4, "k")));
    CHECK(meta.metaops.begin()->second.level == 0);
    REQUIRE(meta.levels.size() == 1);
}

TEST_CASE("graph dumps use the node/edge grammar") {
    ComputationGraph g = build_graph(two_tasks_shared_text());
    const std::string dump = dump_graph(g);
    CHECK(dump.find("node text-enc.0 kind=text-enc B=8") != std::string::npos);
    CHECK(dump.find("edge text-enc.0 text-enc.1") != std::string::npos);
    MetaGraph meta = assign_levels(contract(g));
    CHECK(dump_metagraph(meta).find("node m0 kind=text-enc B=8 L=12 level=0") != std::string::npos);
}
