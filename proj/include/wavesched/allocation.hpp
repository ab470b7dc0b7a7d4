// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wavesched/common.hpp"
#include "wavesched/graph.hpp"
#include "wavesched/scaling.hpp"

namespace wavesched {

// l consecutive operators of a MetaOp executing on n devices from time
// start. start stays unset (-1) until the wavefront scheduler runs.
struct AslTuple {
    std::string metaop_id;
    int n = 0;
    double start = -1.0;
    int layers = 0;
};

struct ContinuousAllocation {
    double c_star = 0.0;                  // optimal completion time of the level
    std::map<std::string, double> alloc;  // metaop -> fractional optimal n
};

struct TuplePair {
    AslTuple upper;                  // larger allocation
    std::optional<AslTuple> lower;   // absent when the optimum is a single tuple
};

struct AllocationPlan {
    int level = 0;
    double c_star = 0.0;
    std::map<std::string, TuplePair> tuples;
};

struct AllocatorOptions {
    double eps = 1e-7;      // relative bisection tolerance
    int max_iters = 200;
    double drop_floor = 0.0;  // drop tuples whose time share is below this fraction of c_star
};

// Allocations usable by a MetaOp on an N-device cluster: n must be a
// multiple of the model-parallel degree and the resulting data-parallel
// replica count must divide the global batch.
inline std::vector<int> valid_allocations(const MetaOp& m, int upper_n) {
    if (m.tp_degree > upper_n)
        throw NoValidAllocation("metaop '" + m.id + "': tp degree " + std::to_string(m.tp_degree) +
                                " exceeds device count " + std::to_string(upper_n));
    std::vector<int> out;
    for (int n = 1; n <= upper_n; ++n) {
        if (n % m.tp_degree != 0) continue;
        const int replicas = n / m.tp_degree;
        if (m.global_batch % replicas != 0) continue;
        out.push_back(n);
    }
    return out;  // never empty: n = tp_degree always qualifies
}

using LevelInput = std::vector<std::pair<const MetaOp*, const ScalingCurve*>>;

// Bisection over the level completion time: the capacity equation
// sum_m T_m^{-1}(C / L_m) = N is monotone in C, bracketed by
// [max_m T_m(N) L_m, sum_m T_m(1) L_m]. The exact analytic inverse keeps
// the balanced-finish property of the continuous optimum.
inline ContinuousAllocation solve_continuous(const LevelInput& level, int devices,
                                             const AllocatorOptions& opt = {}) {
    if (level.empty()) throw EmptyLevel("solve_continuous: empty MetaLevel");
    const double n_devices = static_cast<double>(devices);
    double c_lo = 0.0, c_hi = 0.0;
    for (const auto& [m, curve] : level) {
        const double n_cap = std::min(n_devices, curve->n_max());
        c_lo = std::max(c_lo, curve->eval(n_cap) * m->length);
        c_hi += curve->eval(1.0) * m->length;
    }
    auto probe = [&](double c) {
        double total = 0.0;
        for (const auto& [m, curve] : level)
            total += std::min(curve->inverse_exact(c / m->length), n_devices);
        return total;
    };
    for (int iter = 0; iter < opt.max_iters && (c_hi - c_lo) > opt.eps * c_hi; ++iter) {
        const double mid = 0.5 * (c_lo + c_hi);
        if (probe(mid) < n_devices)
            c_hi = mid;
        else
            c_lo = mid;
    }
    ContinuousAllocation out;
    out.c_star = 0.5 * (c_lo + c_hi);
    for (const auto& [m, curve] : level)
        out.alloc[m->id] = std::min(curve->inverse_exact(out.c_star / m->length), n_devices);
    return out;
}

namespace detail {

// A level whose rounded allocations cannot coexist (flat curves at the
// capacity boundary produce this) would serialize whole MetaOps. Shift the
// tuple with the cheapest time penalty down to its previous valid allocation
// until every MetaOp's widest tuple fits the cluster together.
inline void repair_capacity(AllocationPlan& plan,
                            const std::map<std::string, std::vector<int>>& valid_sets,
                            const std::map<std::string, ScalingCurve>& curves, int devices) {
    auto widest = [&] {
        int total = 0;
        for (const auto& [id, pair] : plan.tuples)
            total += std::max(pair.upper.n, pair.lower ? pair.lower->n : 0);
        return total;
    };
    while (widest() > devices) {
        std::string best_id;
        double best_penalty = 0.0;
        int best_target = 0;
        for (const auto& [id, pair] : plan.tuples) {
            const AslTuple& t = pair.upper;  // the widest tuple of the MetaOp
            const std::vector<int>& valid = valid_sets.at(id);
            auto it = std::lower_bound(valid.begin(), valid.end(), t.n);
            if (it == valid.begin()) continue;
            const int target = *(it - 1);
            if (pair.lower && target <= pair.lower->n) continue;
            const double penalty =
                t.layers * (curves.at(id).eval(target) - curves.at(id).eval(t.n));
            if (best_id.empty() || penalty < best_penalty ||
                (penalty == best_penalty && id < best_id)) {
                best_id = id;
                best_penalty = penalty;
                best_target = target;
            }
        }
        if (best_id.empty()) break;  // nothing shiftable: the scheduler serializes
        plan.tuples.at(best_id).upper.n = best_target;
    }
}

}  // namespace detail

// Bi-point discretization: represent the fractional optimum n* with the two
// enclosing valid allocations so that the layer split preserves the level
// completion time. layers are rounded to integers (ties up), the counterpart
// absorbs the remainder so the layer total stays exact. An optimum below the
// smallest valid allocation rides entirely on that allocation (the zero-
// device tuple is a dummy and is dropped).
inline AllocationPlan discretize(const ContinuousAllocation& cont,
                                 const std::map<std::string, std::vector<int>>& valid_sets,
                                 const std::map<std::string, ScalingCurve>& curves,
                                 const std::map<std::string, int>& lengths,
                                 const AllocatorOptions& opt = {}, int devices = 0) {
    AllocationPlan plan;
    plan.c_star = cont.c_star;
    for (const auto& [id, n_star] : cont.alloc) {
        const std::vector<int>& valid = valid_sets.at(id);
        const ScalingCurve& curve = curves.at(id);
        const int total_layers = lengths.at(id);
        TuplePair pair;

        auto exact = std::find_if(valid.begin(), valid.end(),
                                  [&](int v) { return std::abs(v - n_star) < 1e-9; });
        int n_over = -1, n_under = -1;
        if (exact == valid.end()) {
            for (int v : valid) {
                if (v < n_star) n_under = v;
                if (v > n_star) {
                    n_over = v;
                    break;
                }
            }
        }

        if (exact != valid.end()) {
            pair.upper = {id, *exact, -1.0, total_layers};
        } else if (n_over == -1) {
            pair.upper = {id, valid.back(), -1.0, total_layers};
        } else if (n_under == -1) {
            pair.upper = {id, valid.front(), -1.0, total_layers};  // dummy lower dropped
        } else {
            const double t_over = curve.eval(n_over);
            const double t_under = curve.eval(n_under);
            if (t_under - t_over <= 0.0) {
                pair.upper = {id, n_under, -1.0, total_layers};  // flat: cheaper allocation
            } else {
                double l_over_real = (cont.c_star - t_under * total_layers) / (t_over - t_under);
                l_over_real = std::clamp(l_over_real, 0.0, static_cast<double>(total_layers));
                int l_over = static_cast<int>(std::floor(l_over_real + 0.5));
                int l_under = total_layers - l_over;
                if (opt.drop_floor > 0.0 && l_over > 0 && l_under > 0) {
                    if (l_over * t_over < opt.drop_floor * cont.c_star) {
                        l_under += l_over;
                        l_over = 0;
                    } else if (l_under * t_under < opt.drop_floor * cont.c_star) {
                        l_over += l_under;
                        l_under = 0;
                    }
                }
                if (l_over == 0) {
                    pair.upper = {id, n_under, -1.0, total_layers};
                } else if (l_under == 0) {
                    pair.upper = {id, n_over, -1.0, total_layers};
                } else {
                    pair.upper = {id, n_over, -1.0, l_over};
                    pair.lower = AslTuple{id, n_under, -1.0, l_under};
                }
            }
        }
        plan.tuples.emplace(id, pair);
    }
    if (devices > 0) detail::repair_capacity(plan, valid_sets, curves, devices);
    return plan;
}

inline std::string dump_allocation(const AllocationPlan& plan) {
    std::string out;
    for (const auto& [id, pair] : plan.tuples) {
        out += "metaop " + id + " tuple n=" + std::to_string(pair.upper.n) +
               " l=" + std::to_string(pair.upper.layers) + "\n";
        if (pair.lower) {
            out += "metaop " + id + " tuple n=" + std::to_string(pair.lower->n) +
                   " l=" + std::to_string(pair.lower->layers) + "\n";
        }
    }
    return out;
}

}  // namespace wavesched
