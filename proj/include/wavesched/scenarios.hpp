// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wavesched/common.hpp"
#include "wavesched/topology.hpp"
#include "wavesched/workload.hpp"

namespace wavesched {

// Synthetic multi-task multi-modal workload families. Tasks draw on a small
// pool of shared modality encoders; a module activated by several tasks
// carries their combined batch, so its per-operator time, FLOPs proxy and
// activation volume scale with the number of activating tasks. All values
// are deterministic in (name, tasks, devices, seed).
struct Scenario {
    std::string workload_text;
    std::string topology_text;
};

namespace detail {

// Module blueprint accumulated while tasks are assembled; emitted once the
// activation count is known.
struct ModuleDraft {
    std::string kind;
    int layers = 1;
    std::int64_t seq = 1;
    std::int64_t hidden = 1;
    bool pooled_output = false;  // hands pooled features (seq-free) downstream
    int tp = 1;
    std::string group;
    double t1 = 0.0;      // per-operator seconds on one device, single task
    double f_flat = 0.1;  // fraction of t1 that does not scale with devices
    bool two_piece = false;
    int activations = 0;  // tasks routing through this module
};

// per-task batch; highly divisible so valid allocation sets stay dense
constexpr std::int64_t kTaskBatch = 6720;

inline double flops_proxy(std::int64_t seq, std::int64_t hidden) {
    return static_cast<double>(seq) * static_cast<double>(hidden) * static_cast<double>(hidden) / 1e9;
}

inline std::uint64_t encoder_params(int layers, std::int64_t hidden) {
    // 12 h^2 weights per transformer layer, kept in full precision
    return static_cast<std::uint64_t>(layers) * 12ull * static_cast<std::uint64_t>(hidden) *
           static_cast<std::uint64_t>(hidden) * 4ull;
}

inline void emit_module(std::string& out, const ModuleDraft& d, int batch_scale = 1) {
    // weak scaling: every task's batch grows with the cluster
    const int acts = std::max(1, d.activations) * std::max(1, batch_scale);
    const std::int64_t batch = kTaskBatch * acts;
    const double w = flops_proxy(d.seq, d.hidden) * acts;
    const double t1 = d.t1 * acts;
    // activation checkpoint footprint: bounded micro-batch, fp16 elements
    const std::uint64_t act_bytes = 64ull * static_cast<std::uint64_t>(acts) *
                                    static_cast<std::uint64_t>(d.seq) *
                                    static_cast<std::uint64_t>(d.hidden) * 2ull;
    out += "module " + d.kind + " layers=" + std::to_string(d.layers) + " B=" + std::to_string(batch) +
           " seq=" + std::to_string(d.seq) + " hidden=" + std::to_string(d.hidden) +
           " tp=" + std::to_string(d.tp);
    if (!d.group.empty()) out += " param_group=" + d.group;
    out += " param_bytes=" + std::to_string(encoder_params(d.layers, d.hidden)) + " w=" + fmt_exact(w) +
           " c=1 act_bytes=" + std::to_string(act_bytes);
    if (d.pooled_output)
        out += " out_bytes=" + std::to_string(64ull * static_cast<std::uint64_t>(acts) *
                                              static_cast<std::uint64_t>(d.hidden) * 2ull);
    out += "\n";

    const double alpha = t1 * d.f_flat * 0.5;
    const double beta_c = t1 * d.f_flat * 0.5;  // c = 1
    const double beta_w = t1 * (1.0 - d.f_flat) / w;
    if (!d.two_piece) {
        out += "truth " + d.kind + " piece 1 1024 " + fmt_exact(alpha) + " " + fmt_exact(beta_c) + " " +
               fmt_exact(beta_w) + "\n";
    } else {
        // kernel switch above 8 devices: 12% lower efficiency, continuous join
        const double beta_w2 = beta_w * 1.12;
        const double alpha2 = alpha + (beta_w - beta_w2) * w / 8.0;
        out += "truth " + d.kind + " piece 1 8 " + fmt_exact(alpha) + " " + fmt_exact(beta_c) + " " +
               fmt_exact(beta_w) + "\n";
        out += "truth " + d.kind + " piece 8 1024 " + fmt_exact(alpha2) + " " + fmt_exact(beta_c) + " " +
               fmt_exact(beta_w2) + "\n";
    }
}

}  // namespace detail

// Small clusters model two PCIe-attached 4-GPU nodes; larger ones NVLink
// islands of eight with a slower fabric between them.
inline std::string generate_topology_text(int devices, int island_size = 0) {
    double inter = 20e9;
    if (island_size <= 0) {
        island_size = devices > 16 ? 8 : std::max(1, std::min(4, devices / 2));
        if (devices <= 8) inter = 9e9;
    }
    return dump_topology(make_topology(devices, std::min(island_size, devices), 100e9, inter,
                                       85899345920ull));  // 80 GiB per device
}

// Contrastive multi-tower family: six modality encoders of varied depth and
// width; every task pairs two of them under a tiny per-task loss head. Most
// computation sits in the heterogeneous towers.
inline Scenario generate_clip_like(int tasks, int devices, std::uint64_t seed) {
    Rng rng(seed ^ 0x636c6970ull);
    std::string out;
    out += "# multitask-clip-like tasks=" + std::to_string(tasks) + " devices=" + std::to_string(devices) +
           " seed=" + std::to_string(seed) + "\n";
    const char* names[6] = {"text-enc", "vision-enc", "audio-enc", "motion-enc", "thermal-enc", "depth-enc"};
    std::vector<detail::ModuleDraft> encoders;
    const std::int64_t seqs[] = {196, 256, 512, 784};
    const std::int64_t hiddens[] = {768, 1024, 1280, 1536};
    for (int m = 0; m < 6; ++m) {
        detail::ModuleDraft d;
        d.kind = names[m];
        d.layers = 24 + static_cast<int>(rng.next_int(0, 24));
        d.seq = seqs[rng.next_int(0, 3)];
        d.hidden = hiddens[rng.next_int(0, 3)];
        d.group = std::string("g.") + names[m];
        d.t1 = 0.04 * detail::flops_proxy(d.seq, d.hidden) / detail::flops_proxy(256, 1024) *
               (0.8 + 0.4 * rng.next_double());
        d.f_flat = 0.04 + 0.08 * rng.next_double();
        d.two_piece = m % 3 == 0;
        d.pooled_output = true;  // contrastive heads consume pooled embeddings
        encoders.push_back(d);
    }
    std::string tasks_text;
    std::vector<detail::ModuleDraft> losses;
    for (int i = 0; i < tasks; ++i) {
        // pair two distinct modalities (contrastive objective)
        const int a = i % 6;
        int b = (a + 1 + static_cast<int>(rng.next_int(0, 4))) % 6;
        if (b == a) b = (a + 1) % 6;
        encoders[static_cast<std::size_t>(a)].activations++;
        encoders[static_cast<std::size_t>(b)].activations++;
        detail::ModuleDraft loss;
        loss.kind = "loss" + std::to_string(i);
        loss.layers = 1;
        loss.seq = 16;
        loss.hidden = 512;
        loss.t1 = 0.002;
        loss.f_flat = 0.5;
        loss.activations = 1;
        losses.push_back(loss);
        tasks_text += "task t" + std::to_string(i) + " flow=" + encoders[static_cast<std::size_t>(a)].kind +
                      "+" + encoders[static_cast<std::size_t>(b)].kind + ",loss" + std::to_string(i) + "\n";
    }
    const int batch_scale = std::max(1, devices / 8);
    for (const auto& d : encoders)
        if (d.activations > 0) detail::emit_module(out, d, batch_scale);
    for (const auto& d : losses) detail::emit_module(out, d, batch_scale);
    out += tasks_text;
    return {out, generate_topology_text(devices)};
}

// Unified encoder-decoder family: light per-modality adaptors (some backed
// by a medium encoder) feed a shared LM whose workload is comparable to the
// towers.
inline Scenario generate_ofasys_like(int tasks, int devices, std::uint64_t seed) {
    Rng rng(seed ^ 0x6f666173ull);
    std::string out;
    out += "# ofasys-like tasks=" + std::to_string(tasks) + " devices=" + std::to_string(devices) +
           " seed=" + std::to_string(seed) + "\n";
    const char* names[6] = {"text", "image", "audio", "motion", "box", "struct"};
    std::vector<detail::ModuleDraft> adaptors, towers;
    std::vector<bool> has_tower;
    for (int m = 0; m < 6; ++m) {
        detail::ModuleDraft a;
        a.kind = std::string("adapt-") + names[m];
        a.layers = 2 + static_cast<int>(rng.next_int(0, 2));
        a.seq = 64;
        a.hidden = 512;
        a.group = std::string("g.adapt-") + names[m];
        a.t1 = 0.004 + 0.004 * rng.next_double();
        a.f_flat = 0.3 + 0.2 * rng.next_double();
        adaptors.push_back(a);
        detail::ModuleDraft t;
        t.kind = std::string("enc-") + names[m];
        t.layers = 16 + static_cast<int>(rng.next_int(0, 16));
        t.seq = 256;
        t.hidden = 768 + 256 * rng.next_int(0, 2);
        t.group = std::string("g.enc-") + names[m];
        t.t1 = 0.035 * detail::flops_proxy(t.seq, t.hidden) / detail::flops_proxy(256, 1024) *
               (0.8 + 0.4 * rng.next_double());
        t.f_flat = 0.05 + 0.06 * rng.next_double();
        t.two_piece = m % 2 == 0;
        towers.push_back(t);
        has_tower.push_back(m % 3 != 0);  // text-like modalities keep only the light adaptor
    }
    detail::ModuleDraft lm_enc, lm_dec;
    lm_enc.kind = "llm-enc";
    lm_enc.layers = 24;
    lm_enc.seq = 512;
    lm_enc.hidden = 1024;
    lm_enc.group = "g.llm-enc";
    lm_enc.t1 = 0.035;
    lm_enc.f_flat = 0.06;
    lm_dec = lm_enc;
    lm_dec.kind = "llm-dec";
    lm_dec.group = "g.llm-dec";
    lm_dec.two_piece = true;

    std::string tasks_text;
    for (int i = 0; i < tasks; ++i) {
        const int m = i % 6;
        adaptors[static_cast<std::size_t>(m)].activations++;
        lm_enc.activations++;
        lm_dec.activations++;
        std::string head = adaptors[static_cast<std::size_t>(m)].kind;
        if (has_tower[static_cast<std::size_t>(m)]) {
            towers[static_cast<std::size_t>(m)].activations++;
            head += ">" + towers[static_cast<std::size_t>(m)].kind;
        }
        tasks_text += "task t" + std::to_string(i) + " flow=" + head + ",llm-enc,llm-dec\n";
    }
    const int batch_scale = std::max(1, devices / 8);
    for (const auto& d : adaptors)
        if (d.activations > 0) detail::emit_module(out, d, batch_scale);
    for (const auto& d : towers)
        if (d.activations > 0) detail::emit_module(out, d, batch_scale);
    detail::emit_module(out, lm_enc, batch_scale);
    detail::emit_module(out, lm_dec, batch_scale);
    out += tasks_text;
    return {out, generate_topology_text(devices)};
}

// Decoder-heavy family: shared vision and audio encoders feed a dominant
// decoder-only LM trained with tensor parallelism.
inline Scenario generate_qwen_val_like(int tasks, int devices, std::uint64_t seed) {
    Rng rng(seed ^ 0x7177656eull);
    std::string out;
    out += "# qwen-val-like tasks=" + std::to_string(tasks) + " devices=" + std::to_string(devices) +
           " seed=" + std::to_string(seed) + "\n";
    detail::ModuleDraft venc, aenc, llm;
    venc.kind = "venc";
    venc.layers = 32;
    venc.seq = 256;
    venc.hidden = 1280;
    venc.group = "g.venc";
    venc.t1 = 0.055;
    venc.f_flat = 0.07;
    aenc.kind = "aenc";
    aenc.layers = 24;
    aenc.seq = 512;
    aenc.hidden = 768;
    aenc.group = "g.aenc";
    aenc.t1 = 0.04;
    aenc.f_flat = 0.10;
    llm.kind = "llm";
    llm.layers = 48;
    llm.seq = 768;
    llm.hidden = 2048;
    llm.tp = devices >= 2 ? 2 : 1;
    llm.group = "g.llm";
    llm.t1 = 0.10 + 0.01 * rng.next_double();
    llm.f_flat = 0.05;
    llm.two_piece = true;

    std::string tasks_text;
    for (int i = 0; i < tasks; ++i) {
        const int pattern = i % 3;
        llm.activations++;
        if (pattern == 0) {
            venc.activations++;
            tasks_text += "task t" + std::to_string(i) + " flow=venc,llm\n";
        } else if (pattern == 1) {
            aenc.activations++;
            tasks_text += "task t" + std::to_string(i) + " flow=aenc,llm\n";
        } else {
            venc.activations++;
            aenc.activations++;
            tasks_text += "task t" + std::to_string(i) + " flow=venc+aenc,llm\n";
        }
    }
    const int batch_scale = std::max(1, devices / 8);
    if (venc.activations > 0) detail::emit_module(out, venc, batch_scale);
    if (aenc.activations > 0) detail::emit_module(out, aenc, batch_scale);
    detail::emit_module(out, llm, batch_scale);
    out += tasks_text;
    return {out, generate_topology_text(devices)};
}

inline Scenario generate_scenario(const std::string& name, int tasks, int devices, std::uint64_t seed) {
    if (tasks < 1) throw ParseError("scenario needs at least one task");
    if (devices < 1) throw ParseError("scenario needs at least one device");
    if (name == "clip-like") return generate_clip_like(tasks, devices, seed);
    if (name == "ofasys-like") return generate_ofasys_like(tasks, devices, seed);
    if (name == "qwen-val-like") return generate_qwen_val_like(tasks, devices, seed);
    throw ParseError("unknown scenario '" + name + "' (expected clip-like | ofasys-like | qwen-val-like)");
}

}  // namespace wavesched
