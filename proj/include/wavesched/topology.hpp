// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wavesched/common.hpp"

namespace wavesched {

// Modeled cluster: devices partitioned into high-bandwidth islands.
struct ClusterTopology {
    std::vector<int> devices;            // sorted ids
    std::vector<std::vector<int>> islands;
    std::map<int, int> island_of;
    double intra_bw = 1.0;   // bytes/second inside an island
    double inter_bw = 1.0;   // bytes/second across islands
    std::uint64_t mem_capacity = 0;  // bytes per device

    void finalize() {
        devices.clear();
        island_of.clear();
        for (std::size_t i = 0; i < islands.size(); ++i) {
            std::sort(islands[i].begin(), islands[i].end());
            for (int d : islands[i]) {
                if (island_of.count(d)) throw ParseError("device " + std::to_string(d) + " in two islands");
                island_of[d] = static_cast<int>(i);
                devices.push_back(d);
            }
        }
        std::sort(devices.begin(), devices.end());
        if (intra_bw < inter_bw || inter_bw <= 0.0)
            throw ParseError("topology requires intra_bw >= inter_bw > 0");
        if (devices.empty()) throw ParseError("topology declares no devices");
    }
};

inline ClusterTopology make_topology(int num_devices, int island_size, double intra_bw, double inter_bw,
                                     std::uint64_t mem_capacity) {
    ClusterTopology topo;
    topo.intra_bw = intra_bw;
    topo.inter_bw = inter_bw;
    topo.mem_capacity = mem_capacity;
    for (int d = 0; d < num_devices; ++d) {
        if (d % island_size == 0) topo.islands.emplace_back();
        topo.islands.back().push_back(d);
    }
    topo.finalize();
    return topo;
}

// Grammar:
//   island <id>: <device ids...>
//   bw intra=<bytes/s> inter=<bytes/s>
//   mem <bytes per device>
inline ClusterTopology parse_topology(const std::string& text) {
    ClusterTopology topo;
    std::istringstream iss(text);
    std::string line;
    int lineno = 0;
    bool saw_bw = false, saw_mem = false;
    while (std::getline(iss, line)) {
        ++lineno;
        if (is_comment_or_blank(line)) continue;
        auto toks = split_tokens(line);
        const std::string ctx = "topology line " + std::to_string(lineno);
        if (toks[0] == "island") {
            if (toks.size() < 3) throw ParseError(ctx + ": island needs an id and device ids");
            std::vector<int> members;
            for (std::size_t i = 2; i < toks.size(); ++i) {
                try {
                    members.push_back(std::stoi(toks[i]));
                } catch (const std::logic_error&) {
                    throw ParseError(ctx + ": bad device id '" + toks[i] + "'");
                }
            }
            topo.islands.push_back(members);
        } else if (toks[0] == "bw") {
            KvLine kv(toks, 1, ctx);
            topo.intra_bw = kv.real("intra");
            topo.inter_bw = kv.real("inter");
            saw_bw = true;
        } else if (toks[0] == "mem") {
            if (toks.size() != 2) throw ParseError(ctx + ": expected 'mem <bytes>'");
            try {
                topo.mem_capacity = std::stoull(toks[1]);
            } catch (const std::logic_error&) {
                throw ParseError(ctx + ": bad byte count");
            }
            saw_mem = true;
        } else {
            throw ParseError(ctx + ": unknown directive '" + toks[0] + "'");
        }
    }
    if (!saw_bw || !saw_mem) throw ParseError("topology needs 'bw' and 'mem' lines");
    topo.finalize();
    return topo;
}

inline std::string dump_topology(const ClusterTopology& topo) {
    std::string out;
    for (std::size_t i = 0; i < topo.islands.size(); ++i) {
        out += "island " + std::to_string(i) + ":";
        for (int d : topo.islands[i]) out += " " + std::to_string(d);
        out += "\n";
    }
    out += "bw intra=" + fmt_exact(topo.intra_bw) + " inter=" + fmt_exact(topo.inter_bw) + "\n";
    out += "mem " + std::to_string(topo.mem_capacity) + "\n";
    return out;
}

}  // namespace wavesched
