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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <vector>

#include "mptc/errors.hpp"
#include "mptc/numtheory.hpp"
#include "mptc/puzzle.hpp"

// Discrete-log solvers for the reveal phase. All three return the unique
// a in [1, p-1] with g^a = b mod p (unique because g generates the full
// group). The naive scan is the paper-faithful baseline; BSGS and Pollard rho
// are the standard sqrt-time alternatives. Since p is a safe prime there is
// no useful Pohlig-Hellman decomposition beyond the factor-2 subgroup, so all
// solvers work in the full group.

namespace mptc::solver {

using nt::BigUint;
using puzzle::Puzzle;
using puzzle::PuzzleSolution;
using puzzle::SolverAlgo;

struct SolverConfig {
    SolverAlgo algo = SolverAlgo::naive;
    int workers = 1;
    std::uint64_t progress_interval_ops = 0;  // 0 disables progress reporting
    std::function<void(std::uint64_t)> on_progress;
};

struct SolveReport {
    PuzzleSolution solution;
    std::uint64_t ops_performed = 0;
    double wall_seconds = 0.0;
};

namespace detail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline BigUint ceil_sqrt(const BigUint& v) {
    BigUint r = boost::multiprecision::sqrt(v);
    if (r * r < v) ++r;
    return r;
}

}  // namespace detail

// Linear scan g^1, g^2, ... by incremental multiplication. ops_performed
// equals the found exponent.
inline SolveReport solve_naive(const Puzzle& puz) {
    detail::Stopwatch clock;
    std::uint64_t ops = 0;

    if (nt::fits_u64(puz.p)) {
        const std::uint64_t p = puz.p.convert_to<std::uint64_t>();
        const std::uint64_t g = puz.g.convert_to<std::uint64_t>();
        const std::uint64_t b = puz.b.convert_to<std::uint64_t>();
        std::uint64_t acc = g % p;
        std::uint64_t i = 1;
        while (acc != b) {
            acc = nt::mulmod_u64(acc, g, p);
            ++i;
        }
        ops = i;
        return SolveReport{PuzzleSolution{BigUint(i)}, ops, clock.seconds()};
    }

    BigUint acc = puz.g % puz.p;
    BigUint i = 1;
    while (acc != puz.b) {
        acc = (acc * puz.g) % puz.p;
        ++i;
        ++ops;
    }
    return SolveReport{PuzzleSolution{i}, ops + 1, clock.seconds()};
}

// Instrumented variant used by the coordinator for long searches.
inline SolveReport solve_naive(const Puzzle& puz, const SolverConfig& config) {
    if (config.progress_interval_ops == 0 || !config.on_progress) return solve_naive(puz);
    detail::Stopwatch clock;
    const std::uint64_t interval = config.progress_interval_ops;
    if (nt::fits_u64(puz.p)) {
        const std::uint64_t p = puz.p.convert_to<std::uint64_t>();
        const std::uint64_t g = puz.g.convert_to<std::uint64_t>();
        const std::uint64_t b = puz.b.convert_to<std::uint64_t>();
        std::uint64_t acc = g % p;
        std::uint64_t i = 1;
        while (acc != b) {
            acc = nt::mulmod_u64(acc, g, p);
            ++i;
            if (i % interval == 0) config.on_progress(i);
        }
        return SolveReport{PuzzleSolution{BigUint(i)}, i, clock.seconds()};
    }
    BigUint acc = puz.g % puz.p;
    std::uint64_t i = 1;
    while (acc != puz.b) {
        acc = (acc * puz.g) % puz.p;
        ++i;
        if (i % interval == 0) config.on_progress(i);
    }
    return SolveReport{PuzzleSolution{BigUint(i)}, i, clock.seconds()};
}

inline constexpr std::uint64_t kDefaultBsgsTableCap = 1ull << 22;

// Baby-step giant-step; needs ceil(sqrt(p-1)) table entries of memory.
inline SolveReport solve_bsgs(const Puzzle& puz,
                              std::uint64_t max_table_entries = kDefaultBsgsTableCap) {
    detail::Stopwatch clock;
    const BigUint n = puz.p - 1;
    const BigUint m_big = detail::ceil_sqrt(n);
    if (m_big > max_table_entries)
        throw ResourceError("bsgs table would exceed " + std::to_string(max_table_entries) +
                            " entries");
    const std::uint64_t m = m_big.convert_to<std::uint64_t>();
    std::uint64_t ops = 0;

    if (nt::fits_u64(puz.p)) {
        const std::uint64_t p = puz.p.convert_to<std::uint64_t>();
        const std::uint64_t g = puz.g.convert_to<std::uint64_t>();
        const std::uint64_t b = puz.b.convert_to<std::uint64_t>();
        std::unordered_map<std::uint64_t, std::uint64_t> baby;
        baby.reserve(m);
        std::uint64_t acc = 1;
        for (std::uint64_t j = 0; j < m; ++j) {
            baby.emplace(acc, j);
            acc = nt::mulmod_u64(acc, g, p);
            ++ops;
        }
        // factor = g^(-m) = g^(p-1-m)
        const std::uint64_t factor = nt::powmod_u64(g, p - 1 - m, p);
        ops += 2ull * nt::bit_length(puz.p);
        std::uint64_t gamma = b;
        for (std::uint64_t i = 0; i <= m; ++i) {
            auto it = baby.find(gamma);
            if (it != baby.end()) {
                std::uint64_t a = i * m + it->second;
                if (a == 0) a = p - 1;  // b = 1 cannot occur for a valid puzzle
                return SolveReport{PuzzleSolution{BigUint(a)}, ops, clock.seconds()};
            }
            gamma = nt::mulmod_u64(gamma, factor, p);
            ++ops;
        }
        throw Error("bsgs found no solution; puzzle invariants violated");
    }

    std::map<BigUint, std::uint64_t> baby;
    BigUint acc = 1;
    for (std::uint64_t j = 0; j < m; ++j) {
        baby.emplace(acc, j);
        acc = (acc * puz.g) % puz.p;
        ++ops;
    }
    const BigUint factor = nt::mod_pow(puz.g, n - m, puz.p);
    ops += 2ull * nt::bit_length(puz.p);
    BigUint gamma = puz.b;
    for (std::uint64_t i = 0; i <= m; ++i) {
        auto it = baby.find(gamma);
        if (it != baby.end()) {
            BigUint a = BigUint(i) * m + it->second;
            if (a == 0) a = n;
            return SolveReport{PuzzleSolution{std::move(a)}, ops, clock.seconds()};
        }
        gamma = (gamma * factor) % puz.p;
        ++ops;
    }
    throw Error("bsgs found no solution; puzzle invariants violated");
}

namespace detail {

struct RhoPoint {
    BigUint alpha;
    BigUint beta;
};

struct RhoShared {
    std::map<BigUint, RhoPoint> distinguished;
    std::mutex mutex;
    std::atomic<bool> found{false};
    std::atomic<std::uint64_t> ops{0};
    BigUint answer;
    std::mutex answer_mutex;
};

// Solve delta_beta * a == delta_alpha (mod n) and verify candidates against
// the puzzle. Returns true when the discrete log was pinned down.
inline bool solve_collision(const Puzzle& puz, const RhoPoint& first, const RhoPoint& second,
                            RhoShared& shared) {
    const BigUint n = puz.p - 1;
    BigUint delta_beta = (first.beta + n - second.beta) % n;
    BigUint delta_alpha = (second.alpha + n - first.alpha) % n;
    if (delta_beta == 0) return false;
    const BigUint d = boost::multiprecision::gcd(delta_beta, n);
    if (delta_alpha % d != 0) return false;
    if (d > 4096) return false;  // only reachable for pathological tiny-group walks
    const BigUint n_red = n / d;
    const BigUint base =
        (delta_alpha / d % n_red) * nt::mod_inverse(delta_beta / d, n_red) % n_red;
    std::uint64_t verify_ops = 0;
    for (BigUint k = 0; k < d; ++k) {
        BigUint candidate = (base + k * n_red) % n;
        if (candidate == 0) candidate = n;
        verify_ops += 2ull * nt::bit_length(puz.p);
        if (nt::mod_pow(puz.g, candidate, puz.p) == puz.b) {
            std::lock_guard lock(shared.answer_mutex);
            shared.answer = candidate;
            shared.found.store(true, std::memory_order_release);
            shared.ops.fetch_add(verify_ops, std::memory_order_relaxed);
            return true;
        }
    }
    shared.ops.fetch_add(verify_ops, std::memory_order_relaxed);
    return false;
}

inline void rho_worker(const Puzzle& puz, int worker_id, int distinguished_bits,
                       RhoShared& shared) {
    const BigUint n = puz.p - 1;
    const BigUint mask = (BigUint(1) << distinguished_bits) - 1;
    const std::uint64_t step_cap =
        8 * ceil_sqrt(n).convert_to<std::uint64_t>() + (16ull << distinguished_bits) + 256;

    for (std::uint32_t attempt = 0; !shared.found.load(std::memory_order_acquire); ++attempt) {
        // Deterministic walk start so a given puzzle always costs the same.
        Bytes tag = bytes_of("mptc-rho");
        append(tag, nt::to_bytes_be(puz.p));
        append(tag, nt::to_bytes_be(puz.g));
        append(tag, nt::to_bytes_be(puz.b));
        put_u32_be(tag, static_cast<std::uint32_t>(worker_id));
        put_u32_be(tag, attempt);
        prng::BitStreamCursor rng{prng::Seed::from_digest(suite::hash(tag)), 0};
        const std::uint32_t width = nt::bit_length(n) + 64;
        BigUint alpha = nt::bits_to_biguint(rng.read(width), width) % n;
        BigUint beta = nt::bits_to_biguint(rng.read(width), width) % n;
        BigUint x = nt::mod_pow(puz.g, alpha, puz.p) * nt::mod_pow(puz.b, beta, puz.p) % puz.p;

        std::uint64_t local_ops = 0;
        for (std::uint64_t step = 0; step < step_cap; ++step) {
            if ((x & mask) == 0) {
                std::unique_lock lock(shared.mutex);
                auto [it, inserted] = shared.distinguished.emplace(x, RhoPoint{alpha, beta});
                if (!inserted) {
                    RhoPoint stored = it->second;
                    lock.unlock();
                    shared.ops.fetch_add(local_ops, std::memory_order_relaxed);
                    local_ops = 0;
                    if (stored.alpha == alpha && stored.beta == beta) break;  // sterile cycle
                    if (solve_collision(puz, stored, RhoPoint{alpha, beta}, shared)) return;
                    break;  // unsolvable collision, start a fresh walk
                }
            }
            switch ((x % 3).convert_to<int>()) {
                case 0:
                    x = (x * x) % puz.p;
                    alpha = (alpha * 2) % n;
                    beta = (beta * 2) % n;
                    break;
                case 1:
                    x = (x * puz.b) % puz.p;
                    beta = (beta + 1) % n;
                    break;
                default:
                    x = (x * puz.g) % puz.p;
                    alpha = (alpha + 1) % n;
                    break;
            }
            ++local_ops;
            if (shared.found.load(std::memory_order_acquire)) break;
        }
        shared.ops.fetch_add(local_ops, std::memory_order_relaxed);
    }
}

}  // namespace detail

// Pollard rho with the standard 3-partition walk and distinguished-point
// cycle detection. Workers run independent walks over a shared
// distinguished-point map; the reported ops aggregate all walks.
inline SolveReport solve_rho(const Puzzle& puz, const SolverConfig& config = {}) {
    detail::Stopwatch clock;
    const int workers = std::max(1, config.workers);
    // Distinguished-point density: overshoot ~2^bits stays well under the
    // sqrt(n) mean walk length. bits = 0 stores every point, which is exactly
    // right for tiny groups.
    const int distinguished_bits =
        std::max(0, static_cast<int>(nt::bit_length(puz.p - 1)) / 2 - 4);

    detail::RhoShared shared;
    if (workers == 1) {
        detail::rho_worker(puz, 0, distinguished_bits, shared);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(detail::rho_worker, std::cref(puz), w, distinguished_bits,
                              std::ref(shared));
        for (auto& t : pool) t.join();
    }
    if (!shared.found.load()) throw Error("rho terminated without a solution");
    return SolveReport{PuzzleSolution{shared.answer}, shared.ops.load(), clock.seconds()};
}

inline SolveReport solve(const Puzzle& puz, const SolverConfig& config) {
    switch (config.algo) {
        case SolverAlgo::naive: return solve_naive(puz, config);
        case SolverAlgo::bsgs: return solve_bsgs(puz);
        case SolverAlgo::rho: return solve_rho(puz, config);
    }
    throw ConfigError("invalid solver algorithm value");
}

}  // namespace mptc::solver
