// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "wavesched/allocation.hpp"
#include "wavesched/common.hpp"
#include "wavesched/scaling.hpp"

namespace wavesched {

struct WaveEntry {
    std::string metaop_id;
    int n = 0;
    int layers = 0;
    double span = 0.0;  // layers * T(n)
};

struct Wave {
    int index = 0;
    int level = 0;
    double start = 0.0;
    double duration = 0.0;  // max entry span; devices barrier at the end
    std::vector<WaveEntry> entries;
};

struct WavefrontSchedule {
    std::vector<Wave> waves;
    double end_time = 0.0;
    std::vector<int> level_boundaries;  // wave index where each level begins
};

// An ASL-tuple still waiting to be scheduled (start times come later).
struct PendingTuple {
    std::string metaop_id;
    int n = 0;
    int layers = 0;
};

using CurveMap = std::map<std::string, ScalingCurve>;
using ValidSetMap = std::map<std::string, std::vector<int>>;

namespace detail {

inline double tuple_time(const PendingTuple& t, const CurveMap& curves) {
    return t.layers * curves.at(t.metaop_id).eval(t.n);
}

// Layers a MetaOp still owes across all pending tuples, timed at the given
// allocation. Drives the extension priority.
inline double metaop_remaining_time(const std::string& id, int at_n, const std::vector<PendingTuple>& remaining,
                                    const CurveMap& curves) {
    int layers = 0;
    for (const PendingTuple& t : remaining)
        if (t.metaop_id == id) layers += t.layers;
    return layers * curves.at(id).eval(at_n);
}

}  // namespace detail

inline void extend_resources_if_needed(std::vector<PendingTuple>& remaining,
                                       const std::vector<std::size_t>& selected, int devices,
                                       const CurveMap& curves, const ValidSetMap& valid_sets);

// Greedy candidate selection, maximizing device usage. Three greedy orders
// are tried: descending allocation (packs the cluster tightest, the
// textbook subset fill), largest remaining MetaOp work (drains the level
// evenly), and cheapest-allocation-first (admits the most MetaOps, matching
// the continuous solution where every MetaOp of the level runs at once).
// Each selection is judged by the devices it would occupy after resource
// extension, then by MetaOp coverage.
inline std::vector<std::size_t> propose_candidate_set(const std::vector<PendingTuple>& remaining, int devices,
                                                      const CurveMap& curves,
                                                      const ValidSetMap* valid_sets = nullptr) {
    auto greedy = [&](const std::vector<std::size_t>& order) {
        std::vector<std::size_t> selected;
        std::vector<std::string> taken;
        int capacity = devices;
        for (std::size_t idx : order) {
            const PendingTuple& t = remaining[idx];
            if (t.n > capacity) continue;
            if (std::find(taken.begin(), taken.end(), t.metaop_id) != taken.end()) continue;
            selected.push_back(idx);
            taken.push_back(t.metaop_id);
            capacity -= t.n;
        }
        return selected;
    };
    auto remaining_time = [&](const PendingTuple& t) {
        return detail::metaop_remaining_time(t.metaop_id, t.n, remaining, curves);
    };
    std::vector<std::size_t> by_n(remaining.size()), by_time(remaining.size()), by_cheap(remaining.size());
    for (std::size_t i = 0; i < remaining.size(); ++i) by_n[i] = by_time[i] = by_cheap[i] = i;
    std::sort(by_n.begin(), by_n.end(), [&](std::size_t a, std::size_t b) {
        if (remaining[a].n != remaining[b].n) return remaining[a].n > remaining[b].n;
        const double ra = detail::tuple_time(remaining[a], curves);
        const double rb = detail::tuple_time(remaining[b], curves);
        if (ra != rb) return ra > rb;
        return remaining[a].metaop_id < remaining[b].metaop_id;
    });
    std::sort(by_time.begin(), by_time.end(), [&](std::size_t a, std::size_t b) {
        const double ra = remaining_time(remaining[a]);
        const double rb = remaining_time(remaining[b]);
        if (ra != rb) return ra > rb;
        if (remaining[a].n != remaining[b].n) return remaining[a].n > remaining[b].n;
        return remaining[a].metaop_id < remaining[b].metaop_id;
    });
    std::sort(by_cheap.begin(), by_cheap.end(), [&](std::size_t a, std::size_t b) {
        if (remaining[a].n != remaining[b].n) return remaining[a].n < remaining[b].n;
        const double ra = remaining_time(remaining[a]);
        const double rb = remaining_time(remaining[b]);
        if (ra != rb) return ra > rb;
        return remaining[a].metaop_id < remaining[b].metaop_id;
    });

    std::vector<std::size_t> best;
    long best_key = -1;
    for (const auto* order : {&by_n, &by_time, &by_cheap}) {
        std::vector<std::size_t> selected = greedy(*order);
        int used = 0;
        for (std::size_t idx : selected) used += remaining[idx].n;
        if (valid_sets) {
            std::vector<PendingTuple> scratch = remaining;
            extend_resources_if_needed(scratch, selected, devices, curves, *valid_sets);
            used = 0;
            for (std::size_t idx : selected) used += scratch[idx].n;
        }
        const long key = static_cast<long>(used) * 1000 + static_cast<long>(selected.size());
        if (key > best_key) {  // strict: earlier orders win ties
            best_key = key;
            best = std::move(selected);
        }
    }
    return best;
}

// Grows candidate allocations to their next valid value while idle devices
// remain, prioritizing the MetaOp with the largest remaining execution time.
// Grown tuples keep the new allocation for their leftover layers.
inline void extend_resources_if_needed(std::vector<PendingTuple>& remaining, const std::vector<std::size_t>& selected,
                                       int devices, const CurveMap& curves, const ValidSetMap& valid_sets) {
    auto used = [&] {
        int total = 0;
        for (std::size_t idx : selected) total += remaining[idx].n;
        return total;
    };
    while (true) {
        const int idle = devices - used();
        if (idle <= 0) break;
        std::size_t best = remaining.size();
        double best_time = -1.0;
        int best_next = 0;
        for (std::size_t idx : selected) {
            const PendingTuple& t = remaining[idx];
            const std::vector<int>& valid = valid_sets.at(t.metaop_id);
            auto it = std::upper_bound(valid.begin(), valid.end(), t.n);
            if (it == valid.end() || *it - t.n > idle) continue;
            const double rem = detail::metaop_remaining_time(t.metaop_id, t.n, remaining, curves);
            if (rem > best_time ||
                (rem == best_time && best < remaining.size() && t.metaop_id < remaining[best].metaop_id)) {
                best = idx;
                best_time = rem;
                best_next = *it;
            }
        }
        if (best == remaining.size()) break;  // wave proceeds with idle devices
        remaining[best].n = best_next;
    }
}

struct Alignment {
    double t_wave = 0.0;               // span of the shortest candidate's metaop pool
    std::vector<int> layers;           // layers scheduled per candidate (own + absorbed)
    std::vector<int> absorbed;         // layers pulled from the sibling tuple
};

// Aligns candidate time spans to the shortest one. The wave span is set by
// the candidate whose MetaOp has the least remaining work at its current
// allocation; that MetaOp finishes inside this wave. Other candidates
// schedule floor(T_wave / T(n)) layers (at least one, so every candidate
// progresses). A candidate whose own tuple runs out before the wave span
// pulls layers from its sibling tuple, re-tupled at the candidate's
// allocation. The sub-layer remainder a candidate could not schedule is
// carried as a time credit into its next wave, so quantization does not
// accumulate (entries stay within the one-layer slack of the wave span).
inline Alignment align_time_span(const std::vector<PendingTuple>& remaining, const std::vector<std::size_t>& selected,
                                 const CurveMap& curves, std::map<std::string, double>* credit = nullptr) {
    Alignment out;
    std::vector<int> pool(selected.size());  // own + sibling layers per candidate
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const PendingTuple& t = remaining[selected[i]];
        int layers = 0;
        for (const PendingTuple& other : remaining)
            if (other.metaop_id == t.metaop_id) layers += other.layers;
        pool[i] = layers;
    }
    double t_wave = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const double span = pool[i] * curves.at(remaining[selected[i]].metaop_id).eval(remaining[selected[i]].n);
        if (first || span < t_wave) t_wave = span;
        first = false;
    }
    out.t_wave = t_wave;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const PendingTuple& t = remaining[selected[i]];
        const double per_layer = curves.at(t.metaop_id).eval(t.n);
        int k;
        if (pool[i] * per_layer <= t_wave * (1.0 + 1e-12)) {
            k = pool[i];  // defines (or matches) the wave span
            if (credit) (*credit)[t.metaop_id] = 0.0;
        } else {
            const double carried = credit ? (*credit)[t.metaop_id] : 0.0;
            const double budget = t_wave + std::min(carried, per_layer);
            k = std::max(1, static_cast<int>(std::floor(budget / per_layer * (1.0 + 1e-12))));
            k = std::min(k, pool[i]);
            if (credit) (*credit)[t.metaop_id] = std::max(0.0, budget - k * per_layer);
        }
        out.layers.push_back(k);
        out.absorbed.push_back(std::max(0, k - t.layers));
    }
    return out;
}

// Wavefront scheduling for one MetaLevel: propose a candidate set, extend
// allocations onto idle devices, align time spans, then conclude the wave.
// Every wave consumes all layers of at least one tuple, so the loop
// terminates in at most (tuple count) waves.
inline std::pair<std::vector<Wave>, double> schedule_level(const AllocationPlan& plan, int devices,
                                                           double t_start, const CurveMap& curves,
                                                           const ValidSetMap& valid_sets) {
    std::vector<PendingTuple> remaining;
    for (const auto& [id, pair] : plan.tuples) {
        remaining.push_back({id, pair.upper.n, pair.upper.layers});
        if (pair.lower) remaining.push_back({id, pair.lower->n, pair.lower->layers});
    }
    std::vector<Wave> waves;
    std::map<std::string, double> credit;
    double now = t_start;
    while (!remaining.empty()) {
        auto selected = propose_candidate_set(remaining, devices, curves, &valid_sets);
        if (selected.empty()) throw InvariantError("schedule_level: no schedulable tuple");
        extend_resources_if_needed(remaining, selected, devices, curves, valid_sets);
        const Alignment aligned = align_time_span(remaining, selected, curves, &credit);

        Wave wave;
        wave.level = plan.level;
        wave.start = now;
        double duration = 0.0;
        for (std::size_t i = 0; i < selected.size(); ++i) {
            const PendingTuple& t = remaining[selected[i]];
            WaveEntry entry;
            entry.metaop_id = t.metaop_id;
            entry.n = t.n;
            entry.layers = aligned.layers[i];
            entry.span = entry.layers * curves.at(t.metaop_id).eval(t.n);
            duration = std::max(duration, entry.span);
            wave.entries.push_back(entry);
        }
        wave.duration = duration;
        waves.push_back(wave);
        now += duration;

        for (std::size_t i = 0; i < selected.size(); ++i) {
            PendingTuple& t = remaining[selected[i]];
            int absorbed = aligned.absorbed[i];
            t.layers -= aligned.layers[i] - absorbed;
            for (PendingTuple& other : remaining) {
                if (absorbed == 0) break;
                if (&other == &t || other.metaop_id != t.metaop_id) continue;
                const int take = std::min(absorbed, other.layers);
                other.layers -= take;
                absorbed -= take;
            }
        }
        std::vector<PendingTuple> next;
        for (const PendingTuple& t : remaining)
            if (t.layers > 0) next.push_back(t);
        if (next.size() == remaining.size())
            throw InvariantError("schedule_level: wave made no progress");
        remaining = std::move(next);
    }
    return {waves, now};
}

// Concatenates per-level wavefronts, offsetting each level to start when the
// previous one ends, and records the level boundaries.
inline WavefrontSchedule merge_levels(const std::vector<std::pair<std::vector<Wave>, double>>& per_level) {
    WavefrontSchedule sched;
    double offset = 0.0;
    int index = 0;
    for (const auto& [waves, t_end] : per_level) {
        sched.level_boundaries.push_back(index);
        double level_end = offset;
        for (Wave wave : waves) {
            wave.index = index++;
            wave.start += offset;
            level_end = std::max(level_end, wave.start + wave.duration);
            sched.waves.push_back(wave);
        }
        offset = level_end;
    }
    sched.end_time = offset;
    return sched;
}

inline std::string dump_schedule(const WavefrontSchedule& sched) {
    std::string out;
    for (const Wave& w : sched.waves) {
        out += "wave " + std::to_string(w.index) + " start=" + fmt_sec(w.start) + " dur=" + fmt_sec(w.duration) + "\n";
        for (const WaveEntry& e : w.entries) {
            out += "  entry metaop=" + e.metaop_id + " n=" + std::to_string(e.n) +
                   " l=" + std::to_string(e.layers) + "\n";
        }
    }
    return out;
}

inline std::string schedule_gantt_csv(const WavefrontSchedule& sched) {
    std::string out = "wave,metaop,start,end,devices\n";
    for (const Wave& w : sched.waves) {
        for (const WaveEntry& e : w.entries) {
            out += std::to_string(w.index) + "," + e.metaop_id + "," + fmt_sec(w.start) + "," +
                   fmt_sec(w.start + e.span) + "," + std::to_string(e.n) + "\n";
        }
    }
    return out;
}

}  // namespace wavesched
