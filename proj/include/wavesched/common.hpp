// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wavesched {

// ---------------------------------------------------------------------------
// Error taxonomy. Exit codes: parse errors -> 2, infeasible -> 3,
// internal invariant violations -> 4.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : Error {
    using Error::Error;
};
struct InfeasibleError : Error {
    using Error::Error;
};
struct InvariantError : Error {
    using Error::Error;
};

struct CyclicWorkload : ParseError {
    using ParseError::ParseError;
};
struct UnknownModule : ParseError {
    using ParseError::ParseError;
};
struct EmptyWorkload : ParseError {
    using ParseError::ParseError;
};
struct InsufficientProfile : ParseError {
    using ParseError::ParseError;
};
struct DegenerateFit : InfeasibleError {
    using InfeasibleError::InfeasibleError;
};
struct OutOfRange : InvariantError {
    using InvariantError::InvariantError;
};
struct NoValidAllocation : InfeasibleError {
    using InfeasibleError::InfeasibleError;
};
struct EmptyLevel : InvariantError {
    using InvariantError::InvariantError;
};
struct PlacementInfeasible : InfeasibleError {
    using InfeasibleError::InfeasibleError;
};

// ---------------------------------------------------------------------------
// Deterministic RNG. splitmix64 core so generated scenario/profile files are
// byte-identical across platforms and standard library versions.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [lo, hi] inclusive
    std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    // standard normal via Box-Muller (no stdlib distribution, for determinism)
    double next_normal() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Text formatting. Durations are decimal text with >= 9 significant digits;
// plan files use 17 digits so doubles round-trip exactly.
// ---------------------------------------------------------------------------

inline std::string fmt_g(double v, int precision = 9) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return std::string(buf);
}

inline std::string fmt_sec(double v) { return fmt_g(v, 9); }
inline std::string fmt_exact(double v) { return fmt_g(v, 17); }

// ---------------------------------------------------------------------------
// Line/token helpers for the key=value file grammar.
// ---------------------------------------------------------------------------

inline std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream iss(line);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

// Parses "key=value" tokens after a fixed number of positional tokens.
class KvLine {
public:
    KvLine(const std::vector<std::string>& tokens, std::size_t first_kv, const std::string& ctx)
        : ctx_(ctx) {
        for (std::size_t i = first_kv; i < tokens.size(); ++i) {
            auto eq = tokens[i].find('=');
            if (eq == std::string::npos)
                throw ParseError(ctx + ": expected key=value token, got '" + tokens[i] + "'");
            kv_[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
        }
    }

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    std::string str(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw ParseError(ctx_ + ": missing key '" + key + "'");
        return it->second;
    }

    std::string str_or(const std::string& key, const std::string& dflt) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? dflt : it->second;
    }

    std::int64_t num(const std::string& key) const {
        try {
            return std::stoll(str(key));
        } catch (const std::logic_error&) {
            throw ParseError(ctx_ + ": key '" + key + "' is not an integer");
        }
    }

    std::int64_t num_or(const std::string& key, std::int64_t dflt) const {
        return has(key) ? num(key) : dflt;
    }

    double real(const std::string& key) const {
        try {
            return std::stod(str(key));
        } catch (const std::logic_error&) {
            throw ParseError(ctx_ + ": key '" + key + "' is not a number");
        }
    }

    double real_or(const std::string& key, double dflt) const {
        return has(key) ? real(key) : dflt;
    }

private:
    std::map<std::string, std::string> kv_;
    std::string ctx_;
};

inline bool is_comment_or_blank(const std::string& line) {
    for (char c : line) {
        if (c == '#') return true;
        if (!isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

}  // namespace wavesched
