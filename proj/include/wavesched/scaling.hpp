// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wavesched/common.hpp"

namespace wavesched {

// One measured execution time of a single operator of a MetaOp on n devices.
struct ProfilePoint {
    int n = 1;
    double time = 0.0;  // seconds per operator
    std::string parallel_config = "dp";
};

// One segment of a piecewise alpha-beta execution time model:
//   T(n) = alpha + beta_c * c + beta_w * w / n   for n in [n_lo, n_hi]
// where c is the non-scaling workload magnitude and w the scalable one.
struct CurvePiece {
    double n_lo = 1.0;
    double n_hi = 1.0;
    double alpha = 0.0;
    double beta_c = 0.0;
    double beta_w = 0.0;
};

// Per-operator execution time as a function of allocated devices. Curves are
// immutable after construction, positive and non-increasing over [1, n_max].
class ScalingCurve {
public:
    ScalingCurve() = default;

    static ScalingCurve from_pieces(std::vector<CurvePiece> pieces, double c, double w) {
        if (pieces.empty()) throw InvariantError("ScalingCurve: no pieces");
        ScalingCurve curve;
        curve.pieces_ = std::move(pieces);
        curve.c_ = c;
        curve.w_ = w;
        std::sort(curve.pieces_.begin(), curve.pieces_.end(),
                  [](const CurvePiece& a, const CurvePiece& b) { return a.n_lo < b.n_lo; });
        if (std::abs(curve.pieces_.front().n_lo - 1.0) > 1e-9)
            throw InvariantError("ScalingCurve: pieces must start at n=1");
        for (std::size_t i = 0; i + 1 < curve.pieces_.size(); ++i) {
            if (std::abs(curve.pieces_[i].n_hi - curve.pieces_[i + 1].n_lo) > 1e-9)
                throw InvariantError("ScalingCurve: pieces must be contiguous");
        }
        curve.n_max_ = curve.pieces_.back().n_hi;
        if (std::abs(curve.n_max_ - std::llround(curve.n_max_)) > 1e-9)
            throw InvariantError("ScalingCurve: n_max must be an integer");
        return curve;
    }

    double n_max() const { return n_max_; }
    int n_max_int() const { return static_cast<int>(std::llround(n_max_)); }
    double c() const { return c_; }
    double w() const { return w_; }
    const std::vector<CurvePiece>& pieces() const { return pieces_; }

    // T(n) over the profiled domain [1, n_max].
    double eval(double n) const {
        if (n < 1.0 - 1e-9 || n > n_max_ + 1e-9)
            throw OutOfRange("eval_time: n=" + fmt_g(n) + " outside [1, " + fmt_g(n_max_) + "]");
        return piece_value(locate(n), n);
    }

    // T(n) with the first piece extended below n=1. The continuous allocator
    // probes fractional allocations smaller than one device.
    double eval_extended(double n) const {
        if (n <= 0.0) throw OutOfRange("eval_extended: n must be positive");
        if (n > n_max_ + 1e-9) throw OutOfRange("eval_extended: n above n_max");
        if (n < 1.0) return piece_value(pieces_.front(), n);
        return piece_value(locate(n), n);
    }

    // T(n) for a fraction of the batch: the per-device term scales with the
    // fraction, fixed overhead and the non-scaling term do not.
    double eval_batch_fraction(double n, double frac) const {
        const CurvePiece& p = n < 1.0 ? pieces_.front() : locate(std::min(n, n_max_));
        return p.alpha + p.beta_c * c_ + p.beta_w * w_ * frac / n;
    }

    double scalability(double n) const { return eval(1.0) / eval(n); }

    // Inverse by linear interpolation between consecutive integer anchor
    // points (n, T(n)), (n+1, T(n+1)). Targets outside [T(n_max), T(1)] clamp
    // to the boundary allocation. A flat bracket returns the cheaper anchor.
    double inverse_anchored(double target) const {
        const int nmax = n_max_int();
        if (target >= eval(1.0)) return 1.0;
        if (target <= eval(static_cast<double>(nmax))) return static_cast<double>(nmax);
        // largest integer k with T(k) >= target; T is non-increasing
        int lo = 1, hi = nmax - 1;
        while (lo < hi) {
            int mid = (lo + hi + 1) / 2;
            if (eval(static_cast<double>(mid)) >= target)
                lo = mid;
            else
                hi = mid - 1;
        }
        const double t_under = eval(static_cast<double>(lo));
        const double t_over = eval(static_cast<double>(lo + 1));
        if (t_under - t_over <= 0.0) return static_cast<double>(lo);
        const double n_under = static_cast<double>(lo);
        const double n_over = static_cast<double>(lo + 1);
        return ((target - t_under) * n_over + (t_over - target) * n_under) / (t_over - t_under);
    }

    // Analytic inverse of the piecewise formula, exact on the alpha-beta
    // family. The domain extends below one device (first piece formula), so
    // the capacity equation stays solvable when a level holds more MetaOps
    // than devices. Flat stretches resolve to the cheapest allocation.
    double inverse_exact(double target) const {
        if (target <= piece_value(pieces_.back(), n_max_)) return n_max_;
        for (const CurvePiece& p : pieces_) {
            const double hi_val = piece_value(p, p.n_lo);  // largest value in piece
            const double lo_val = piece_value(p, p.n_hi);
            const double b = p.beta_w * w_;
            const double base = p.alpha + p.beta_c * c_;
            if (target > hi_val + 1e-15 * std::abs(hi_val)) {
                // only reachable in the first piece: allocation below n_lo
                if (b <= 0.0) return 0.0;  // flat: arbitrarily small allocation suffices
                return b / (target - base);
            }
            if (target >= lo_val) {
                if (b <= 0.0) return p.n_lo;
                if (target <= base) return p.n_hi;
                return std::clamp(b / (target - base), p.n_lo, p.n_hi);
            }
        }
        return n_max_;
    }

    std::string dump() const {
        std::string out;
        for (const CurvePiece& p : pieces_) {
            out += "piece " + fmt_exact(p.n_lo) + " " + fmt_exact(p.n_hi) + " " +
                   fmt_exact(p.alpha) + " " + fmt_exact(p.beta_c) + " " + fmt_exact(p.beta_w) + "\n";
        }
        return out;
    }

private:
    const CurvePiece& locate(double n) const {
        for (const CurvePiece& p : pieces_) {
            if (n <= p.n_hi + 1e-9) return p;
        }
        return pieces_.back();
    }

    double piece_value(const CurvePiece& p, double n) const {
        return p.alpha + p.beta_c * c_ + p.beta_w * w_ / n;
    }

    std::vector<CurvePiece> pieces_;
    double c_ = 0.0;
    double w_ = 1.0;
    double n_max_ = 1.0;
};

struct FitResult {
    ScalingCurve curve;
    std::vector<double> piece_residuals;  // max relative residual per piece
    bool isotonic_corrected = false;
};

namespace detail {

// Least squares of time against 1/n. Returns {intercept, slope}.
inline std::pair<double, double> fit_inverse_linear(const std::vector<ProfilePoint>& pts) {
    double sx = 0, sy = 0, sxy = 0, sxx = 0;
    const double m = static_cast<double>(pts.size());
    for (const ProfilePoint& p : pts) {
        const double x = 1.0 / static_cast<double>(p.n);
        sx += x;
        sy += p.time;
        sxy += x * p.time;
        sxx += x * x;
    }
    const double denom = m * sxx - sx * sx;
    if (std::abs(denom) < 1e-18) throw InsufficientProfile("fit: points do not span distinct n");
    const double slope = (m * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / m;
    return {intercept, slope};
}

// Pool-adjacent-violators for a non-increasing sequence.
inline bool isotonic_non_increasing(std::vector<double>& v) {
    struct Block {
        double sum;
        int count;
    };
    std::vector<Block> blocks;
    bool changed = false;
    for (double x : v) {
        blocks.push_back({x, 1});
        while (blocks.size() >= 2) {
            Block& prev = blocks[blocks.size() - 2];
            Block& last = blocks.back();
            if (prev.sum / prev.count >= last.sum / last.count - 1e-15) break;
            prev.sum += last.sum;
            prev.count += last.count;
            blocks.pop_back();
            changed = true;
        }
    }
    if (changed) {
        std::size_t i = 0;
        for (const Block& b : blocks) {
            const double mean = b.sum / b.count;
            for (int k = 0; k < b.count; ++k) v[i++] = mean;
        }
    }
    return changed;
}

}  // namespace detail

// Fits a piecewise alpha-beta curve to profile points. Because c is constant
// across a MetaOp's points, alpha and beta_c*c are not separately
// identifiable; the combined intercept lands in alpha and beta_c is zero.
// Adjacent pieces are joined continuously by shifting the right piece's
// alpha, then the curve is made non-increasing over integer anchors.
inline FitResult fit_curve(const std::vector<ProfilePoint>& points, const std::vector<int>& breakpoints,
                           double c, double w) {
    if (points.empty()) throw InsufficientProfile("fit: no profile points");
    if (w <= 0.0) throw InvariantError("fit: scalable workload magnitude w must be positive");
    int nmax = 1;
    for (const ProfilePoint& p : points) {
        if (p.n < 1) throw InsufficientProfile("fit: device count must be >= 1");
        if (p.time <= 0.0) throw InsufficientProfile("fit: non-positive time sample");
        nmax = std::max(nmax, p.n);
    }
    std::vector<int> bounds;
    bounds.push_back(1);
    for (int b : breakpoints) {
        if (b <= bounds.back() || b >= nmax)
            throw ParseError("fit: breakpoint " + std::to_string(b) + " outside point span");
        bounds.push_back(b);
    }
    bounds.push_back(nmax);

    std::vector<CurvePiece> pieces;
    std::vector<double> residuals;
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
        const int lo = bounds[i];
        const int hi = bounds[i + 1];
        std::vector<ProfilePoint> segment;
        for (const ProfilePoint& p : points) {
            // interior boundary points belong to the piece on their left
            const bool in = (i == 0) ? (p.n >= lo && p.n <= hi) : (p.n > lo && p.n <= hi);
            if (in) segment.push_back(p);
        }
        std::vector<int> distinct;
        for (const ProfilePoint& p : segment) distinct.push_back(p.n);
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() < 2)
            throw InsufficientProfile("fit: piece [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                      "] needs points at >= 2 distinct n");
        auto [intercept, slope] = detail::fit_inverse_linear(segment);
        CurvePiece piece;
        piece.n_lo = static_cast<double>(lo);
        piece.n_hi = static_cast<double>(hi);
        piece.alpha = intercept;
        piece.beta_c = 0.0;
        piece.beta_w = slope / w;
        pieces.push_back(piece);
        double maxrel = 0.0;
        for (const ProfilePoint& p : segment) {
            const double pred = intercept + slope / p.n;
            maxrel = std::max(maxrel, std::abs(pred - p.time) / p.time);
        }
        residuals.push_back(maxrel);
    }
    // join pieces continuously at the breakpoints
    for (std::size_t i = 1; i < pieces.size(); ++i) {
        const double bound = pieces[i].n_lo;
        const double left = pieces[i - 1].alpha + pieces[i - 1].beta_w * w / bound;
        const double right = pieces[i].alpha + pieces[i].beta_w * w / bound;
        pieces[i].alpha += left - right;
    }

    FitResult result;
    result.curve = ScalingCurve::from_pieces(pieces, c, w);
    result.piece_residuals = residuals;

    // isotonic correction over integer anchors; a changed anchor sequence is
    // re-interpolated with an exact alpha-beta segment per unit interval
    std::vector<double> anchors(static_cast<std::size_t>(nmax));
    for (int k = 1; k <= nmax; ++k) anchors[static_cast<std::size_t>(k - 1)] = result.curve.eval(k);
    std::vector<double> corrected = anchors;
    if (detail::isotonic_non_increasing(corrected)) {
        result.isotonic_corrected = true;
        std::vector<CurvePiece> fixed;
        if (nmax == 1) {
            fixed.push_back({1.0, 1.0, corrected[0], 0.0, 0.0});
        }
        for (int k = 1; k < nmax; ++k) {
            const double v0 = corrected[static_cast<std::size_t>(k - 1)];
            const double v1 = corrected[static_cast<std::size_t>(k)];
            const double b = (v0 - v1) / (1.0 / k - 1.0 / (k + 1.0));
            CurvePiece piece;
            piece.n_lo = static_cast<double>(k);
            piece.n_hi = static_cast<double>(k + 1);
            piece.beta_w = b / w;
            piece.alpha = v0 - b / k;
            fixed.push_back(piece);
        }
        result.curve = ScalingCurve::from_pieces(fixed, c, w);
    }
    for (int k = 1; k <= nmax; ++k) {
        if (result.curve.eval(k) <= 0.0)
            throw DegenerateFit("fit: non-positive T(" + std::to_string(k) + ")");
    }
    return result;
}

// Deterministic synthetic profile generator; stands in for on-hardware
// profiling. noise is a relative standard deviation; zero reproduces the
// truth curve exactly.
inline std::vector<ProfilePoint> synth_profile(const ScalingCurve& truth, const std::vector<int>& ns,
                                               double noise, std::uint64_t seed,
                                               const std::string& config = "synthetic") {
    Rng rng(seed);
    std::vector<ProfilePoint> out;
    out.reserve(ns.size());
    for (int n : ns) {
        double t = truth.eval(static_cast<double>(n));
        if (noise > 0.0) t *= std::max(1e-6, 1.0 + noise * rng.next_normal());
        out.push_back({n, t, config});
    }
    return out;
}

// Profile table grammar: `metaop <id> n=<n> config=<label> time=<seconds>`.
inline std::map<std::string, std::vector<ProfilePoint>> parse_profile_table(const std::string& text) {
    std::map<std::string, std::vector<ProfilePoint>> out;
    std::istringstream iss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(iss, line)) {
        ++lineno;
        if (is_comment_or_blank(line)) continue;
        auto toks = split_tokens(line);
        const std::string ctx = "profile line " + std::to_string(lineno);
        if (toks.size() < 3 || toks[0] != "metaop") throw ParseError(ctx + ": expected 'metaop <id> ...'");
        KvLine kv(toks, 2, ctx);
        ProfilePoint p;
        p.n = static_cast<int>(kv.num("n"));
        p.time = kv.real("time");
        p.parallel_config = kv.str_or("config", "dp");
        if (p.n < 1 || p.time <= 0.0) throw ParseError(ctx + ": need n >= 1 and time > 0");
        out[toks[1]].push_back(p);
    }
    return out;
}

inline std::string dump_profile_table(const std::map<std::string, std::vector<ProfilePoint>>& table) {
    std::string out;
    for (const auto& [id, pts] : table) {
        for (const ProfilePoint& p : pts) {
            out += "metaop " + id + " n=" + std::to_string(p.n) + " config=" + p.parallel_config +
                   " time=" + fmt_exact(p.time) + "\n";
        }
    }
    return out;
}

}  // namespace wavesched
