// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "wavesched/common.hpp"
#include "wavesched/plan_io.hpp"
#include "wavesched/validate.hpp"

namespace wavesched {

struct LocalEvent {
    enum class Kind { Compute, Transmit, Sync } kind = Kind::Compute;
    int wave = -1;
    std::string entity;   // metaop for compute, flow endpoint or group for others
    int layers = 0;
    double duration = 0.0;
    std::string mode;      // flow mode for transmits
    bool backward = false;
};

// One device's program: wave-ordered compute events with transmissions
// spliced in at wave boundaries.
struct LocalPlan {
    int device = 0;
    std::vector<LocalEvent> events;
};

// Parameter synchronization pool: parameter groups keyed by the device group
// that shares them. Groups living on one device need no synchronization.
struct ParamGroupPool {
    struct Entry {
        std::vector<int> devices;
        std::set<std::string> groups;
        std::uint64_t bytes = 0;    // summed gradient bytes of the pooled groups
        double duration = 0.0;      // ring all-reduce estimate
    };
    std::vector<Entry> entries;
};

struct TimelineItem {
    int device = 0;
    double start = 0.0;
    double end = 0.0;
    std::string state;  // fwd | bwd | send_recv | sync
};

struct SimulationReport {
    double makespan = 0.0;
    double fwd_bwd_seconds = 0.0;
    double param_sync_seconds = 0.0;
    double send_recv_seconds = 0.0;
    double fwd_bwd_fraction = 0.0;
    double param_sync_fraction = 0.0;
    double send_recv_fraction = 0.0;
    std::vector<TimelineItem> timeline;
    std::map<int, double> per_device_busy;          // compute seconds
    std::map<int, double> per_device_peak_memory;   // bytes
    std::map<std::string, double> per_entity_utilization;
    double total_transferred_bytes = 0.0;
    double total_inter_island_bytes = 0.0;
};

struct SimulatorOptions {
    double backward_ratio = 2.0;  // backward compute time as a multiple of forward
    bool zero_volumes = false;    // planner/simulator cross-check: free transmissions
    bool skip_sync = false;
};

// Step 1: localize the plan, one compute event per (wave, entry, device).
inline std::map<int, LocalPlan> localize(const ExecutionPlan& plan) {
    std::map<int, LocalPlan> local;
    for (int d : plan.topo.devices) local[d].device = d;
    for (const Wave& w : plan.schedule.waves) {
        for (const WaveEntry& e : w.entries) {
            auto it = plan.devices.find({w.index, e.metaop_id});
            if (it == plan.devices.end()) continue;
            for (int d : it->second) {
                LocalEvent ev;
                ev.kind = LocalEvent::Kind::Compute;
                ev.wave = w.index;
                ev.entity = e.metaop_id;
                ev.layers = e.layers;
                ev.duration = e.span;
                local[d].events.push_back(ev);
            }
        }
    }
    return local;
}

inline double flow_duration(const Flow& f, const ClusterTopology& topo) {
    if (f.volume == 0 || f.mode == "copy") return 0.0;
    const double bw = f.mode == "inter-island" ? topo.inter_bw : topo.intra_bw;
    return static_cast<double>(f.volume) / bw;
}

// Step 2: splice paired send/receive events into the local plans at the wave
// boundary in front of the consumer (and mirrored for backward gradients).
inline void insert_transmissions(const ExecutionPlan& plan, std::map<int, LocalPlan>& local) {
    for (const Flow& f : plan.flows) {
        const double dur = flow_duration(f, plan.topo);
        std::set<int> parties;
        auto from = plan.devices.find({f.from_wave, f.from_id});
        auto to = plan.devices.find({f.to_wave, f.to_id});
        if (from != plan.devices.end()) parties.insert(from->second.begin(), from->second.end());
        if (to != plan.devices.end()) parties.insert(to->second.begin(), to->second.end());
        for (int d : parties) {
            LocalEvent ev;
            ev.kind = LocalEvent::Kind::Transmit;
            ev.wave = f.to_wave;
            ev.entity = f.from_id + "->" + f.to_id;
            ev.duration = dur;
            ev.mode = f.mode;
            auto& events = local[d].events;
            auto pos = std::find_if(events.begin(), events.end(), [&](const LocalEvent& e) {
                return e.kind == LocalEvent::Kind::Compute && e.wave >= f.to_wave;
            });
            events.insert(pos, ev);
            LocalEvent bwd = ev;
            bwd.backward = true;
            local[d].events.push_back(bwd);  // gradient mirror, replayed in reverse wave order
        }
    }
}

// Step 3: scan all placements to find the device group of each parameter
// group; groups sharing a device group are pooled and synchronized together.
inline ParamGroupPool build_param_groups(const ExecutionPlan& plan) {
    std::map<std::string, std::set<int>> group_devices;
    std::map<std::string, std::uint64_t> group_bytes;
    for (const Wave& w : plan.schedule.waves) {
        for (const WaveEntry& e : w.entries) {
            auto it = plan.devices.find({w.index, e.metaop_id});
            if (it == plan.devices.end()) continue;
            const PlanEntity& ent = plan.entities.at(e.metaop_id);
            const std::string group = ent.param_group.empty() ? ent.id : ent.param_group;
            group_devices[group].insert(it->second.begin(), it->second.end());
            // fp32 gradients of fp16 weights, sharded by the model-parallel degree;
            // modules sharing a group hold the same physical weights
            const std::uint64_t grad_bytes = 2ull * ent.param_bytes / static_cast<std::uint64_t>(ent.tp_degree);
            group_bytes[group] = std::max(group_bytes[group], grad_bytes);
        }
    }
    std::map<std::vector<int>, ParamGroupPool::Entry> pooled;
    for (const auto& [group, devs] : group_devices) {
        std::vector<int> key(devs.begin(), devs.end());
        ParamGroupPool::Entry& entry = pooled[key];
        entry.devices = key;
        entry.groups.insert(group);
        entry.bytes += group_bytes[group];
    }
    ParamGroupPool pool;
    for (auto& [key, entry] : pooled) {
        const std::size_t g = entry.devices.size();
        if (g >= 2) {
            std::map<int, int> per_island;
            for (int d : entry.devices) per_island[plan.topo.island_of.at(d)]++;
            const double bytes = static_cast<double>(entry.bytes);
            std::size_t widest = 0;
            for (const auto& [island, count] : per_island)
                widest = std::max(widest, static_cast<std::size_t>(count));
            // hierarchical ring all-reduce: island-local rings, then a ring
            // across islands over the slow links
            double dur = 0.0;
            if (widest >= 2)
                dur += 2.0 * (static_cast<double>(widest) - 1.0) / static_cast<double>(widest) * bytes /
                       plan.topo.intra_bw;
            const std::size_t islands = per_island.size();
            if (islands >= 2)
                dur += 2.0 * (static_cast<double>(islands) - 1.0) / static_cast<double>(islands) * bytes /
                       plan.topo.inter_bw;
            entry.duration = dur;
        }
        pool.entries.push_back(entry);
    }
    return pool;
}

// Step 4: event-driven replay. Devices carry availability clocks; each wave
// gang-barriers its participants, forward waves run in schedule order,
// backward waves in reverse at backward_ratio times the cost, transmissions
// occupy both endpoints between waves, and parameter synchronization runs
// last. Breakdown attributes advances of the global frontier to the activity
// class that caused them.
inline SimulationReport simulate(const ExecutionPlan& plan, const ParamGroupPool& pool,
                                 const SimulatorOptions& opt = {}) {
    SimulationReport report;
    std::map<int, double> avail;
    for (int d : plan.topo.devices) avail[d] = 0.0;
    std::map<int, double> busy_compute;
    double frontier = 0.0;

    auto frontier_of = [&] {
        double f = 0.0;
        for (const auto& [d, t] : avail) f = std::max(f, t);
        return f;
    };
    auto attribute = [&](double* bucket) {
        const double f = frontier_of();
        *bucket += f - frontier;
        frontier = f;
    };
    auto busy = [&](int d, double from, double dur, const char* state) {
        if (dur <= 0.0) {
            avail[d] = std::max(avail[d], from);
            return;
        }
        report.timeline.push_back({d, from, from + dur, state});
        avail[d] = from + dur;
    };

    std::vector<const Wave*> order;
    for (const Wave& w : plan.schedule.waves) order.push_back(&w);
    std::sort(order.begin(), order.end(), [](const Wave* a, const Wave* b) {
        if (a->start != b->start) return a->start < b->start;
        return a->index < b->index;
    });

    std::map<int, std::vector<const Flow*>> flows_into, flows_out_of;
    for (const Flow& f : plan.flows) {
        flows_into[f.to_wave].push_back(&f);
        flows_out_of[f.from_wave].push_back(&f);
    }

    auto run_flow = [&](const Flow& f, bool backward) {
        double dur = opt.zero_volumes ? 0.0 : flow_duration(f, plan.topo);
        auto from = plan.devices.find({f.from_wave, f.from_id});
        auto to = plan.devices.find({f.to_wave, f.to_id});
        if (from == plan.devices.end() || to == plan.devices.end()) return;
        std::set<int> parties(from->second.begin(), from->second.end());
        parties.insert(to->second.begin(), to->second.end());
        double t0 = 0.0;
        for (int d : parties) t0 = std::max(t0, avail[d]);
        for (int d : parties) busy(d, t0, dur, "send_recv");
        if (!opt.zero_volumes) {
            (void)backward;  // gradients move the same bytes back
            report.total_transferred_bytes += static_cast<double>(f.volume);
            if (f.mode == "inter-island") report.total_inter_island_bytes += static_cast<double>(f.volume);
        }
    };

    auto run_wave = [&](const Wave& w, bool backward) {
        const double scale = backward ? opt.backward_ratio : 1.0;
        std::set<int> participants;
        for (const WaveEntry& e : w.entries) {
            auto it = plan.devices.find({w.index, e.metaop_id});
            if (it == plan.devices.end()) continue;
            participants.insert(it->second.begin(), it->second.end());
        }
        double t0 = 0.0;
        for (int d : participants) t0 = std::max(t0, avail[d]);
        for (const WaveEntry& e : w.entries) {
            auto it = plan.devices.find({w.index, e.metaop_id});
            if (it == plan.devices.end()) continue;
            for (int d : it->second) {
                busy(d, t0, e.span * scale, backward ? "bwd" : "fwd");
                busy_compute[d] += e.span * scale;
            }
        }
        // the wave releases its devices together
        for (int d : participants) avail[d] = std::max(avail[d], t0 + w.duration * scale);
    };

    // forward: transmissions arrive before their consumer wave
    for (const Wave* w : order) {
        for (const Flow* f : flows_into[w->index]) run_flow(*f, false);
        attribute(&report.send_recv_seconds);
        run_wave(*w, false);
        attribute(&report.fwd_bwd_seconds);
    }
    // backward: reverse wave order, gradients mirror the forward flows
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        run_wave(**it, true);
        attribute(&report.fwd_bwd_seconds);
        for (const Flow* f : flows_out_of[(*it)->index]) run_flow(*f, true);
        attribute(&report.send_recv_seconds);
    }
    // group-wise parameter synchronization
    if (!opt.skip_sync) {
        for (const ParamGroupPool::Entry& entry : pool.entries) {
            if (entry.duration <= 0.0) continue;
            double t0 = 0.0;
            for (int d : entry.devices) t0 = std::max(t0, avail[d]);
            for (int d : entry.devices) busy(d, t0, entry.duration, "sync");
        }
        attribute(&report.param_sync_seconds);
    }

    report.makespan = frontier_of();
    const double span = std::max(report.makespan, 1e-300);
    report.fwd_bwd_fraction = report.fwd_bwd_seconds / span;
    report.param_sync_fraction = report.param_sync_seconds / span;
    report.send_recv_fraction = report.send_recv_seconds / span;
    report.per_device_busy = busy_compute;
    report.per_device_peak_memory = compute_device_memory(plan);

    // utilization proxy: achieved workload rate over the best single-device rate
    double peak_rate = 0.0;
    std::map<std::string, double> layer_seconds, device_seconds;
    for (const Wave& w : plan.schedule.waves) {
        for (const WaveEntry& e : w.entries) {
            const PlanEntity& ent = plan.entities.at(e.metaop_id);
            layer_seconds[e.metaop_id] += ent.w * ent.batch_fraction * e.layers;
            device_seconds[e.metaop_id] += e.span * e.n;
        }
    }
    for (const auto& [id, ent] : plan.entities) {
        const double t1 = plan.curves.at(id).eval_batch_fraction(1.0, ent.batch_fraction);
        if (t1 > 0.0) peak_rate = std::max(peak_rate, ent.w * ent.batch_fraction / t1);
    }
    for (const auto& [id, ws] : layer_seconds) {
        const double ds = device_seconds[id];
        report.per_entity_utilization[id] = (ds > 0.0 && peak_rate > 0.0) ? (ws / ds) / peak_rate : 0.0;
    }
    return report;
}

inline SimulationReport simulate_plan(const ExecutionPlan& plan, const SimulatorOptions& opt = {}) {
    return simulate(plan, build_param_groups(plan), opt);
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

inline std::string report_breakdown_text(const SimulationReport& r) {
    std::string out;
    out += "makespan " + fmt_sec(r.makespan) + "\n";
    out += "fwd_bwd " + fmt_sec(r.fwd_bwd_seconds) + " frac=" + fmt_sec(r.fwd_bwd_fraction) + "\n";
    out += "param_sync " + fmt_sec(r.param_sync_seconds) + " frac=" + fmt_sec(r.param_sync_fraction) + "\n";
    out += "send_recv " + fmt_sec(r.send_recv_seconds) + " frac=" + fmt_sec(r.send_recv_fraction) + "\n";
    return out;
}

inline std::string report_timeline_csv(const SimulationReport& r) {
    std::string out = "device,t_start,t_end,state\n";
    std::vector<TimelineItem> items = r.timeline;
    std::sort(items.begin(), items.end(), [](const TimelineItem& a, const TimelineItem& b) {
        if (a.device != b.device) return a.device < b.device;
        if (a.start != b.start) return a.start < b.start;
        return a.end < b.end;
    });
    for (const TimelineItem& item : items) {
        out += std::to_string(item.device) + "," + fmt_sec(item.start) + "," + fmt_sec(item.end) + "," +
               item.state + "\n";
    }
    return out;
}

inline std::string report_memory_table(const SimulationReport& r) {
    std::string out = "device,bytes\n";
    for (const auto& [d, bytes] : r.per_device_peak_memory)
        out += std::to_string(d) + "," + std::to_string(static_cast<std::uint64_t>(bytes)) + "\n";
    return out;
}

inline std::string report_utilization_csv(const SimulationReport& r) {
    std::string out = "entity,utilization\n";
    for (const auto& [id, u] : r.per_entity_utilization) out += id + "," + fmt_sec(u) + "\n";
    return out;
}

// Minimal SVG Gantt of the simulated timeline, one row per device.
inline std::string report_gantt_svg(const SimulationReport& r, int num_devices) {
    const double width = 1000.0, row = 18.0, pad = 40.0;
    const double scale = r.makespan > 0 ? (width - pad - 10) / r.makespan : 1.0;
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt_g(width) + "\" height=\"" +
                      fmt_g(num_devices * row + 30) + "\">\n";
    auto color = [](const std::string& state) {
        if (state == "fwd") return "#4a90d9";
        if (state == "bwd") return "#2e5e8c";
        if (state == "send_recv") return "#d98f4a";
        return "#7ac36a";  // sync
    };
    for (const TimelineItem& item : r.timeline) {
        svg += "<rect x=\"" + fmt_g(pad + item.start * scale) + "\" y=\"" + fmt_g(5 + item.device * row) +
               "\" width=\"" + fmt_g(std::max(0.5, (item.end - item.start) * scale)) + "\" height=\"" +
               fmt_g(row - 4) + "\" fill=\"" + color(item.state) + "\"><title>" + item.state + "</title></rect>\n";
    }
    for (int d = 0; d < num_devices; ++d) {
        svg += "<text x=\"2\" y=\"" + fmt_g(5 + d * row + row - 8) + "\" font-size=\"10\">d" +
               std::to_string(d) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace wavesched
