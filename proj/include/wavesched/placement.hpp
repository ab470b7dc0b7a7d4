// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "wavesched/common.hpp"
#include "wavesched/schedule.hpp"
#include "wavesched/topology.hpp"

namespace wavesched {

// Memory footprint description of one schedulable entity.
struct EntityMemory {
    std::uint64_t param_bytes = 0;       // parameters for the entity's layers
    std::uint64_t act_bytes = 0;         // activation bytes per layer at full batch
    int tp_degree = 1;
    std::string param_group;             // dedup key; empty means private
};

struct MemoryModel {
    std::map<std::string, EntityMemory> per_entity;
    double grad_opt_multiplier = 3.0;  // gradient + optimizer state as a multiple of params
};

// Per-device bytes for one wave entry: parameter state is sharded by the
// model-parallel degree, activations by the allocation.
inline double estimate_memory(const EntityMemory& mem, int layers, int n, double grad_opt_multiplier) {
    const double param_state =
        (static_cast<double>(mem.param_bytes) + grad_opt_multiplier * static_cast<double>(mem.param_bytes)) /
        mem.tp_degree;
    const double act = layers * (static_cast<double>(mem.act_bytes) / n);
    return param_state + act;
}

// Inter-wave data flow between two placed entries.
struct Flow {
    int from_wave = 0;
    std::string from_id;
    int to_wave = 0;
    std::string to_id;
    std::uint64_t volume = 0;  // bytes actually moved
    std::string mode;          // copy | intra-island | inter-island
};

// Fraction of the tensor that moves between two device sets: devices present
// on both ends keep their shard, the rest is re-sharded.
inline std::uint64_t moved_volume(const std::vector<int>& from, const std::vector<int>& to,
                                  std::uint64_t full_bytes) {
    std::size_t overlap = 0;
    for (int d : from)
        if (std::find(to.begin(), to.end(), d) != to.end()) ++overlap;
    const std::size_t denom = std::max(from.size(), to.size());
    if (denom == 0) return 0;
    const double frac = 1.0 - static_cast<double>(overlap) / static_cast<double>(denom);
    return static_cast<std::uint64_t>(std::llround(frac * static_cast<double>(full_bytes)));
}

// Per-shard accounting of a re-shard between two device sets: the tensor is
// sharded over max(|from|, |to|) units, overlapping devices keep their unit,
// the rest move pairwise; each moving unit is intra- or inter-island.
struct ShardMoves {
    std::uint64_t intra_bytes = 0;
    std::uint64_t inter_bytes = 0;

    std::uint64_t total() const { return intra_bytes + inter_bytes; }
};

inline ShardMoves shard_moves(const std::vector<int>& from, const std::vector<int>& to,
                              std::uint64_t full_bytes, const ClusterTopology& topo) {
    ShardMoves out;
    if (from.empty() || to.empty()) return out;
    std::vector<int> shared, sources, targets;
    for (int d : from)
        if (std::find(to.begin(), to.end(), d) != to.end()) shared.push_back(d);
    for (int d : from)
        if (std::find(shared.begin(), shared.end(), d) == shared.end()) sources.push_back(d);
    for (int d : to)
        if (std::find(shared.begin(), shared.end(), d) == shared.end()) targets.push_back(d);
    const std::size_t units = std::max(from.size(), to.size());
    const std::size_t moving = units - shared.size();
    if (moving == 0) return out;
    if (sources.empty()) sources = from;  // pure scatter from shared shards
    if (targets.empty()) targets = to;    // pure gather onto shared shards
    std::sort(sources.begin(), sources.end());
    std::sort(targets.begin(), targets.end());
    const double unit_bytes = static_cast<double>(full_bytes) / static_cast<double>(units);
    for (std::size_t i = 0; i < moving; ++i) {
        const int s = sources[i % sources.size()];
        const int t = targets[i % targets.size()];
        const std::uint64_t bytes = static_cast<std::uint64_t>(std::llround(unit_bytes));
        if (topo.island_of.at(s) == topo.island_of.at(t))
            out.intra_bytes += bytes;
        else
            out.inter_bytes += bytes;
    }
    return out;
}

struct PlacementOptions {
    bool sequential = false;   // ablation baseline: consecutive ids, no locality scoring
    int backtrack_depth = 2;
    int backtrack_branching = 3;
};

struct PlacementResult {
    std::map<std::pair<int, std::string>, std::vector<int>> devices;  // (wave, entity) -> device set
    std::vector<Flow> flows;
    std::map<int, double> device_memory;  // final resident bytes per device
};

// Everything placement needs to know about data flows: which entity feeds
// which, and how many bytes one operator's output occupies at full batch.
struct FlowInputs {
    std::set<std::pair<std::string, std::string>> deps;   // producer -> consumer
    std::map<std::string, std::uint64_t> cont_bytes;      // wave-boundary state of a continuing entity
    std::map<std::string, std::uint64_t> edge_bytes;      // producer output handed to consumers
};

namespace detail {

struct PlacementState {
    std::map<int, double> mem_used;
    std::map<int, std::set<std::string>> charged_groups;  // param groups already resident per device
};

inline double memory_delta(const PlacementState& st, const EntityMemory& mem, const std::string& entity,
                           int device, int layers, int n, double mult) {
    const std::string group = mem.param_group.empty() ? entity : mem.param_group;
    double delta = layers * (static_cast<double>(mem.act_bytes) / n);
    auto it = st.charged_groups.find(device);
    if (it == st.charged_groups.end() || !it->second.count(group))
        delta += (1.0 + mult) * static_cast<double>(mem.param_bytes) / mem.tp_degree;
    return delta;
}

inline void commit_memory(PlacementState& st, const EntityMemory& mem, const std::string& entity,
                          const std::vector<int>& devs, int layers, int n, double mult) {
    const std::string group = mem.param_group.empty() ? entity : mem.param_group;
    for (int d : devs) {
        st.mem_used[d] += memory_delta(st, mem, entity, d, layers, n, mult);
        st.charged_groups[d].insert(group);
    }
}

// The most recent wave (before `wave`) in which `id` was placed.
inline int last_wave_of(const PlacementResult& result, const std::string& id, int wave) {
    for (int k = wave - 1; k >= 0; --k)
        if (result.devices.count({k, id})) return k;
    return -1;
}

}  // namespace detail

// Maps each wave entry to a concrete device set. Wave by wave, entries with
// the highest incoming flow volume are placed first onto the candidate set
// with the lexicographically best score:
//   (memory feasible, inter-island bytes, intra-island bytes, displaced
//    bytes, islands spanned, resulting peak memory, device ids).
// Candidates are exact-reuse sets of predecessor entries plus island-local
// and global contiguous runs. On memory infeasibility, bounded backtracking
// re-places earlier waves with next-best wave variants.
inline PlacementResult place(const WavefrontSchedule& sched, const ClusterTopology& topo,
                             const MemoryModel& mem_model, const FlowInputs& flow_inputs,
                             const PlacementOptions& opt = {}) {
    const int n_waves = static_cast<int>(sched.waves.size());
    PlacementResult result;
    detail::PlacementState state;

    std::map<std::string, std::vector<std::string>> preds;
    for (const auto& [from, to] : flow_inputs.deps) preds[to].push_back(from);
    std::map<std::string, int> last_appearance;
    for (const Wave& w : sched.waves)
        for (const WaveEntry& e : w.entries)
            last_appearance[e.metaop_id] = std::max(last_appearance[e.metaop_id], w.index);

    // incoming flows of one entry given already-fixed earlier placements
    struct Incoming {
        std::string from_id;
        int from_wave;
        std::uint64_t bytes;  // full tensor bytes
    };
    auto incoming_flows = [&](int wave, const std::string& id) {
        std::vector<Incoming> in;
        const int cont = detail::last_wave_of(result, id, wave);
        if (cont >= 0) {
            auto ob = flow_inputs.cont_bytes.find(id);
            in.push_back({id, cont, ob == flow_inputs.cont_bytes.end() ? 0 : ob->second});
        } else {
            auto pit = preds.find(id);
            if (pit != preds.end()) {
                for (const std::string& p : pit->second) {
                    const int pw = detail::last_wave_of(result, p, wave);
                    if (pw < 0) continue;
                    auto ob = flow_inputs.edge_bytes.find(p);
                    in.push_back({p, pw, ob == flow_inputs.edge_bytes.end() ? 0 : ob->second});
                }
            }
        }
        return in;
    };

    auto entry_order = [&](const Wave& wave) {
        std::vector<std::size_t> order(wave.entries.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        if (opt.sequential) return order;  // consecutive blocks in wave entry order
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            // high-volume flows get first pick of local device sets
            std::uint64_t va = 0, vb = 0;
            for (const Incoming& f : incoming_flows(wave.index, wave.entries[a].metaop_id)) va += f.bytes;
            for (const Incoming& f : incoming_flows(wave.index, wave.entries[b].metaop_id)) vb += f.bytes;
            if (va != vb) return va > vb;
            return wave.entries[a].metaop_id < wave.entries[b].metaop_id;
        });
        return order;
    };

    auto candidate_sets = [&](int need, const std::vector<int>& free, const std::vector<Incoming>& flows_in,
                              int wave) {
        std::vector<std::vector<int>> cands;
        std::set<std::string> seen;
        auto push = [&](std::vector<int> devs) {
            if (static_cast<int>(devs.size()) != need) return;
            std::sort(devs.begin(), devs.end());
            std::string key;
            for (int d : devs) key += std::to_string(d) + ",";
            if (seen.insert(key).second) cands.push_back(std::move(devs));
        };
        // exact reuse of predecessor device sets
        for (const Incoming& f : flows_in) {
            auto it = result.devices.find({f.from_wave, f.from_id});
            if (it == result.devices.end()) continue;
            std::vector<int> devs = it->second;
            if (static_cast<int>(devs.size()) == need &&
                std::all_of(devs.begin(), devs.end(),
                            [&](int d) { return std::find(free.begin(), free.end(), d) != free.end(); }))
                push(devs);
        }
        // free devices within one island: contiguous runs plus first-fit over
        // fragmented gaps
        for (const auto& island : topo.islands) {
            std::vector<int> local;
            for (int d : island)
                if (std::find(free.begin(), free.end(), d) != free.end()) local.push_back(d);
            for (std::size_t s = 0; s + need <= local.size(); ++s)
                push(std::vector<int>(local.begin() + s, local.begin() + s + need));
            if (static_cast<int>(local.size()) >= need)
                push(std::vector<int>(local.begin(), local.begin() + need));
        }
        // contiguous runs over the global order (may cross islands), plus a
        // scattered first-fit fallback so fragmentation never strands a wave
        for (std::size_t s = 0; s + need <= free.size(); ++s)
            push(std::vector<int>(free.begin() + s, free.begin() + s + need));
        if (static_cast<int>(free.size()) >= need)
            push(std::vector<int>(free.begin(), free.begin() + need));
        (void)wave;
        return cands;
    };

    struct Score {
        bool feasible = false;
        int islands_spanned = 0;
        double inter_bytes = 0;
        double intra_bytes = 0;
        double displaced_bytes = 0;  // evicting another live entity's home costs its re-shard
        double peak_mem = 0;
        std::vector<int> devs;

        bool operator<(const Score& o) const {
            if (feasible != o.feasible) return feasible;
            if (inter_bytes != o.inter_bytes) return inter_bytes < o.inter_bytes;
            if (intra_bytes != o.intra_bytes) return intra_bytes < o.intra_bytes;
            if (displaced_bytes != o.displaced_bytes) return displaced_bytes < o.displaced_bytes;
            if (islands_spanned != o.islands_spanned) return islands_spanned < o.islands_spanned;
            if (peak_mem != o.peak_mem) return peak_mem < o.peak_mem;
            return devs < o.devs;
        }
    };

    auto score_candidate = [&](const WaveEntry& e, const std::vector<int>& devs,
                               const std::vector<Incoming>& flows_in, int wave_index,
                               const std::set<std::string>& placed_this_wave) {
        Score s;
        s.devs = devs;
        std::set<int> islands;
        for (int d : devs) islands.insert(topo.island_of.at(d));
        s.islands_spanned = static_cast<int>(islands.size());
        for (const auto& [e2, last] : last_appearance) {
            if (e2 == e.metaop_id || last < wave_index || placed_this_wave.count(e2)) continue;
            const int home_wave = detail::last_wave_of(result, e2, wave_index);
            if (home_wave < 0) continue;
            const auto& home = result.devices.at({home_wave, e2});
            std::size_t overlap = 0;
            for (int d : devs)
                if (std::find(home.begin(), home.end(), d) != home.end()) ++overlap;
            if (overlap == 0) continue;
            auto ob = flow_inputs.cont_bytes.find(e2);
            const double bytes = ob == flow_inputs.cont_bytes.end() ? 1.0 : static_cast<double>(ob->second);
            s.displaced_bytes += bytes * static_cast<double>(overlap) / static_cast<double>(home.size());
        }
        const EntityMemory& mem = mem_model.per_entity.at(e.metaop_id);
        s.feasible = true;
        double peak = 0.0;
        for (int d : devs) {
            const double used = (state.mem_used.count(d) ? state.mem_used.at(d) : 0.0) +
                                detail::memory_delta(state, mem, e.metaop_id, d, e.layers, e.n,
                                                     mem_model.grad_opt_multiplier);
            peak = std::max(peak, used);
            if (used > static_cast<double>(topo.mem_capacity)) s.feasible = false;
        }
        s.peak_mem = peak;
        for (const Incoming& f : flows_in) {
            auto it = result.devices.find({f.from_wave, f.from_id});
            if (it == result.devices.end()) continue;
            const ShardMoves moves = shard_moves(it->second, devs, f.bytes, topo);
            s.inter_bytes += static_cast<double>(moves.inter_bytes);
            s.intra_bytes += static_cast<double>(moves.intra_bytes);
        }
        return s;
    };

    // Places one wave; `variant` skips the best-scoring candidate of the
    // first placed entry, giving backtracking its alternatives.
    // The ablation baseline hands out consecutive device ids from a rolling
    // cursor, one block per entry, with no locality scoring.
    std::map<int, int> seq_cursor_at_wave;
    if (opt.sequential) {
        int cursor = 0;
        for (const Wave& w : sched.waves) {
            seq_cursor_at_wave[w.index] = cursor;
            for (const WaveEntry& e : w.entries) cursor = (cursor + e.n) % static_cast<int>(topo.devices.size());
        }
    }

    auto place_wave = [&](const Wave& wave, int variant) -> bool {
        std::vector<int> free = topo.devices;
        auto order = entry_order(wave);
        bool first_entry = true;
        std::set<std::string> placed_this_wave;
        int cursor = opt.sequential ? seq_cursor_at_wave[wave.index] : 0;
        for (std::size_t oi : order) {
            const WaveEntry& e = wave.entries[oi];
            auto flows_in = incoming_flows(wave.index, e.metaop_id);
            std::vector<std::vector<int>> cands;
            if (opt.sequential) {
                if (static_cast<int>(free.size()) >= e.n) {
                    std::vector<int> devs;
                    for (int i = 0; i < e.n; ++i)
                        devs.push_back(topo.devices[static_cast<std::size_t>((cursor + i) %
                                                                             static_cast<int>(topo.devices.size()))]);
                    cursor = (cursor + e.n) % static_cast<int>(topo.devices.size());
                    cands.push_back(devs);
                }
            } else {
                cands = candidate_sets(e.n, free, flows_in, wave.index);
            }
            if (cands.empty()) return false;
            std::vector<Score> scores;
            for (const auto& devs : cands)
                scores.push_back(score_candidate(e, devs, flows_in, wave.index, placed_this_wave));
            std::sort(scores.begin(), scores.end(), [](const Score& a, const Score& b) { return a < b; });
            std::size_t pick = 0;
            if (!opt.sequential && first_entry)
                pick = std::min(static_cast<std::size_t>(variant), scores.size() - 1);
            const Score& chosen = scores[pick];
            if (!chosen.feasible) return false;
            const EntityMemory& mem = mem_model.per_entity.at(e.metaop_id);
            detail::commit_memory(state, mem, e.metaop_id, chosen.devs, e.layers, e.n,
                                  mem_model.grad_opt_multiplier);
            result.devices[{wave.index, e.metaop_id}] = chosen.devs;
            for (const Incoming& f : flows_in) {
                const auto& from_devs = result.devices.at({f.from_wave, f.from_id});
                const ShardMoves moves = shard_moves(from_devs, chosen.devs, f.bytes, topo);
                Flow flow;
                flow.from_wave = f.from_wave;
                flow.from_id = f.from_id;
                flow.to_wave = wave.index;
                flow.to_id = e.metaop_id;
                if (moves.total() == 0) {
                    flow.volume = 0;
                    flow.mode = "copy";
                    result.flows.push_back(flow);
                } else {
                    if (moves.intra_bytes > 0) {
                        flow.volume = moves.intra_bytes;
                        flow.mode = "intra-island";
                        result.flows.push_back(flow);
                    }
                    if (moves.inter_bytes > 0) {
                        flow.volume = moves.inter_bytes;
                        flow.mode = "inter-island";
                        result.flows.push_back(flow);
                    }
                }
            }
            for (int d : chosen.devs) free.erase(std::find(free.begin(), free.end(), d));
            placed_this_wave.insert(e.metaop_id);
            first_entry = false;
        }
        return true;
    };

    // Depth-first over per-wave variants with a bounded attempt budget.
    std::vector<int> variant(static_cast<std::size_t>(n_waves), 0);
    long attempts = 0;
    long budget = n_waves;
    for (int d = 0; d < opt.backtrack_depth; ++d) budget *= std::max(1, opt.backtrack_branching);
    int k = 0;
    std::vector<PlacementResult> saved_results;
    std::vector<detail::PlacementState> saved_states;
    saved_results.push_back(result);
    saved_states.push_back(state);
    while (k < n_waves) {
        if (++attempts > budget)
            throw PlacementInfeasible("placement backtrack budget exhausted at wave " + std::to_string(k));
        result = saved_results.back();
        state = saved_states.back();
        const int branching = opt.sequential ? 1 : opt.backtrack_branching;
        if (variant[static_cast<std::size_t>(k)] >= branching) {
            // exhausted this wave's variants: step back one wave
            variant[static_cast<std::size_t>(k)] = 0;
            if (k == 0) throw PlacementInfeasible("no feasible placement for wave 0");
            saved_results.pop_back();
            saved_states.pop_back();
            --k;
            ++variant[static_cast<std::size_t>(k)];
            continue;
        }
        if (place_wave(sched.waves[static_cast<std::size_t>(k)], variant[static_cast<std::size_t>(k)])) {
            saved_results.push_back(result);
            saved_states.push_back(state);
            ++k;
        } else {
            ++variant[static_cast<std::size_t>(k)];
        }
    }
    result = saved_results.back();
    for (const auto& [d, used] : saved_states.back().mem_used) result.device_memory[d] = used;
    for (int d : topo.devices)
        if (!result.device_memory.count(d)) result.device_memory[d] = 0.0;
    return result;
}

inline std::string dump_placement(const PlacementResult& placed) {
    std::string out;
    for (const auto& [key, devs] : placed.devices) {
        out += "wave " + std::to_string(key.first) + " metaop " + key.second + " devices=";
        for (std::size_t i = 0; i < devs.size(); ++i) {
            if (i) out += ",";
            out += std::to_string(devs[i]);
        }
        out += "\n";
    }
    return out;
}

}  // namespace wavesched
