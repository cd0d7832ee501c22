// Copyright 2026 The timecapsule Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "mptc/bytes.hpp"
#include "mptc/errors.hpp"
#include "mptc/numtheory.hpp"
#include "mptc/prng.hpp"

// Deterministic derivation of discrete-log puzzles from a seed.
//
// A puzzle (p, g, b) doubles as the time-lock ElGamal public key: p is a safe
// prime of lambda_m bits (top bit set), g generates Z*_p, and b = g^a for the
// unknown secret a. Table mode fixes (p, g) per difficulty and samples only b
// from the seed stream; PCR mode derives all three parameters from the
// stream, so per-group precomputation buys an attacker nothing.

namespace mptc::puzzle {

using nt::BigUint;

enum class PuzzleMode : std::uint8_t { table = 0, pcr = 1 };

struct Puzzle {
    BigUint p;
    BigUint g;
    BigUint b;
    int lambda_m = 0;
    PuzzleMode mode = PuzzleMode::table;

    bool operator==(const Puzzle&) const = default;
};

struct PuzzleSolution {
    BigUint a;
};

struct DifficultyTable {
    std::map<int, nt::GroupParams> rows;

    bool contains(int lambda_m) const { return rows.contains(lambda_m); }

    const nt::GroupParams& row(int lambda_m) const {
        auto it = rows.find(lambda_m);
        if (it == rows.end())
            throw UnknownDifficulty("no difficulty row for lambda_m = " +
                                    std::to_string(lambda_m));
        return it->second;
    }
};

enum class SolverAlgo : std::uint8_t { naive = 0, bsgs = 1, rho = 2 };

inline SolverAlgo parse_solver_algo(const std::string& name) {
    if (name == "naive") return SolverAlgo::naive;
    if (name == "bsgs") return SolverAlgo::bsgs;
    if (name == "rho") return SolverAlgo::rho;
    throw ConfigError("unknown solver algorithm: " + name);
}

inline std::string solver_algo_name(SolverAlgo algo) {
    switch (algo) {
        case SolverAlgo::naive: return "naive";
        case SolverAlgo::bsgs: return "bsgs";
        case SolverAlgo::rho: return "rho";
    }
    throw ConfigError("invalid solver algorithm value");
}

struct CalibrationTarget {
    double tau_seconds = 0.0;
    SolverAlgo solver_algo = SolverAlgo::naive;
    double measured_rate_ops_per_sec = 0.0;
};

inline bool verify_puzzle_solution(const Puzzle& puz, const PuzzleSolution& sol) {
    if (sol.a < 1 || sol.a > puz.p - 1) return false;
    return nt::mod_pow(puz.g, sol.a, puz.p) == puz.b;
}

// Table-mode puzzle: (p, g) from the difficulty row, b sampled from the seed
// stream in lambda_m-bit chunks until it lands in [2, p-1]. The chunk width
// deliberately stays at lambda_m even though p has its top bit set (accept
// probability is still above 1/2), so independent implementations walk the
// stream identically.
inline Puzzle gen_puz(int lambda_m, const prng::Seed& seed, const DifficultyTable& table) {
    const nt::GroupParams& row = table.row(lambda_m);
    prng::BitStreamCursor cursor{seed, 0};
    const BigUint& p = row.p;
    auto in_group = [&p](const BigUint& v) { return v >= 2 && v <= p - 1; };
    nt::SampleResult b = nt::iteration_sample(cursor, static_cast<std::uint64_t>(lambda_m),
                                              in_group);
    return Puzzle{row.p, row.g, std::move(b.value), lambda_m, PuzzleMode::table};
}

struct PcrStats {
    std::uint64_t p_iterations = 0;
    std::uint64_t g_iterations = 0;
    std::uint64_t b_iterations = 0;
};

// Precomputation-resistant puzzle: all three parameters come from the seed
// stream. Prime candidates are (lambda_m - 1) stream bits plus a forced top
// bit; candidate parity is not forced, even candidates simply fail the
// primality test. The generator and b searches continue from the same cursor.
inline Puzzle pcr_gen_puz(int lambda_m, const prng::Seed& seed, PcrStats* stats = nullptr) {
    if (lambda_m < 8) throw DomainError("pcr_gen_puz requires lambda_m >= 8");
    prng::BitStreamCursor cursor{seed, 0};
    const std::uint64_t lm = static_cast<std::uint64_t>(lambda_m);

    const BigUint top_bit = BigUint(1) << (lambda_m - 1);
    nt::SampleResult ps = nt::iteration_sample(
        cursor, lm - 1, [&](const BigUint& v) { return nt::is_safe_prime(top_bit + v); });
    const BigUint p = top_bit + ps.value;

    nt::SampleResult gs = nt::iteration_sample(
        cursor, lm, [&](const BigUint& v) { return nt::detail::is_generator_unchecked(p, v); });

    nt::SampleResult bs = nt::iteration_sample(
        cursor, lm, [&](const BigUint& v) { return v >= 2 && v <= p - 1; });

    if (stats != nullptr) {
        stats->p_iterations = ps.bits_consumed / (lm - 1);
        stats->g_iterations = gs.bits_consumed / lm;
        stats->b_iterations = bs.bits_consumed / lm;
    }
    return Puzzle{p, std::move(gs.value), std::move(bs.value), lambda_m, PuzzleMode::pcr};
}

inline Puzzle derive_puzzle(PuzzleMode mode, int lambda_m, const prng::Seed& seed,
                            const DifficultyTable& table) {
    return mode == PuzzleMode::table ? gen_puz(lambda_m, seed, table)
                                     : pcr_gen_puz(lambda_m, seed);
}

namespace detail {

inline BigUint smallest_safe_prime_at_least(const BigUint& lower) {
    BigUint candidate = lower;
    if (candidate < 5) candidate = 5;
    if (candidate % 2 == 0) ++candidate;
    while (!nt::is_safe_prime(candidate)) candidate += 2;
    return candidate;
}

}  // namespace detail

// Canonical table construction: per lambda_m the smallest safe prime with the
// top bit set and the smallest generator. The construction is pinned so that
// independent parties can agree on a table without distributing one.
inline DifficultyTable build_difficulty_table(const std::vector<int>& lambda_set) {
    DifficultyTable table;
    for (int lambda_m : lambda_set) {
        if (lambda_m < 4) throw DomainError("difficulty rows require lambda_m >= 4");
        if (table.rows.contains(lambda_m)) continue;
        BigUint p = detail::smallest_safe_prime_at_least(BigUint(1) << (lambda_m - 1));
        if (nt::bit_length(p) != static_cast<std::uint32_t>(lambda_m))
            throw DomainError("no safe prime of " + std::to_string(lambda_m) + " bits");
        BigUint g = 2;
        while (!nt::detail::is_generator_unchecked(p, g)) ++g;
        table.rows.emplace(lambda_m, nt::GroupParams{std::move(p), std::move(g)});
    }
    return table;
}

// Expected group operations for each shipped solver; models, not guarantees.
inline double expected_solver_ops(int lambda_m, SolverAlgo algo) {
    const double group_bits = static_cast<double>(lambda_m - 1);
    switch (algo) {
        case SolverAlgo::naive: return std::pow(2.0, group_bits) / 2.0;
        case SolverAlgo::bsgs: return 2.0 * std::pow(2.0, group_bits / 2.0);
        case SolverAlgo::rho: return 1.25 * std::pow(2.0, group_bits / 2.0);
    }
    throw ConfigError("invalid solver algorithm value");
}

// Smallest lambda_m in the table whose expected solve time meets tau.
inline int calibrate(const CalibrationTarget& target, const DifficultyTable& table) {
    if (target.measured_rate_ops_per_sec <= 0.0)
        throw DomainError("calibration rate must be positive");
    for (const auto& [lambda_m, row] : table.rows) {
        const double seconds = expected_solver_ops(lambda_m, target.solver_algo) /
                               target.measured_rate_ops_per_sec;
        if (seconds >= target.tau_seconds) return lambda_m;
    }
    throw TableRangeError("no difficulty row reaches the target delay");
}

// Text format: one `lambda_m p_hex g_hex` row per line, sorted by lambda_m,
// '#' starts a comment.
inline std::string table_to_text(const DifficultyTable& table) {
    std::ostringstream out;
    out << "# lambda_m p_hex g_hex\n";
    for (const auto& [lambda_m, row] : table.rows) {
        out << lambda_m << " " << to_hex(nt::to_bytes_be(row.p)) << " "
            << to_hex(nt::to_bytes_be(row.g)) << "\n";
    }
    return out.str();
}

inline DifficultyTable table_from_text(const std::string& text) {
    DifficultyTable table;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.erase(hash_pos);
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream row(line);
        int lambda_m = 0;
        std::string p_hex, g_hex;
        if (!(row >> lambda_m >> p_hex >> g_hex))
            throw DecodeError("malformed difficulty table row: " + line);
        BigUint p = nt::from_bytes_be(from_hex(p_hex));
        BigUint g = nt::from_bytes_be(from_hex(g_hex));
        if (nt::bit_length(p) != static_cast<std::uint32_t>(lambda_m))
            throw DecodeError("table row prime has wrong bit length");
        if (!nt::is_safe_prime(p)) throw DecodeError("table row prime is not a safe prime");
        if (!nt::detail::is_generator_unchecked(p, g))
            throw DecodeError("table row g is not a generator");
        table.rows.emplace(lambda_m, nt::GroupParams{std::move(p), std::move(g)});
    }
    return table;
}

inline void save_table(const std::string& path, const DifficultyTable& table) {
    write_file(path, bytes_of(table_to_text(table)));
}

inline DifficultyTable load_table(const std::string& path) {
    Bytes raw = read_file(path);
    return table_from_text(std::string(raw.begin(), raw.end()));
}

}  // namespace mptc::puzzle
