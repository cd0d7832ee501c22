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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mptc/puzzle.hpp"
#include "mptc/solver.hpp"
#include "oracles.hpp"

using namespace mptc;
using nt::BigUint;

namespace {

const puzzle::Puzzle kTiny{23, 5, 8, 5, puzzle::PuzzleMode::table};

puzzle::Puzzle random_puzzle(std::mt19937_64& rng,
                             const std::vector<std::uint64_t>& safe_primes) {
    const std::uint64_t p = safe_primes[rng() % safe_primes.size()];
    std::uint64_t g = 2 + rng() % (p - 3);
    while (!oracles::brute_force_is_generator(p, g)) g = 2 + rng() % (p - 3);
    const std::uint64_t b = 2 + rng() % (p - 2);
    return puzzle::Puzzle{p, g, b, static_cast<int>(nt::bit_length(p)),
                          puzzle::PuzzleMode::table};
}

}  // namespace

TEST_CASE("naive scan on hand-checked puzzles", "[solver]") {
    auto report = solver::solve_naive(kTiny);
    CHECK(report.solution.a == 6);  // 5^1..5^6 mod 23 ends at 8
    CHECK(report.ops_performed == 6);

    puzzle::Puzzle trivial{23, 5, 5, 5, puzzle::PuzzleMode::table};
    auto one = solver::solve_naive(trivial);
    CHECK(one.solution.a == 1);
    CHECK(one.ops_performed == 1);
}

TEST_CASE("naive ops equal the exponent", "[solver]") {
    std::mt19937_64 rng(43);
    auto primes = oracles::safe_primes_below(1 << 12);
    for (int i = 0; i < 50; ++i) {
        auto puz = random_puzzle(rng, primes);
        auto report = solver::solve_naive(puz);
        REQUIRE(report.ops_performed == report.solution.a.convert_to<std::uint64_t>());
    }
}

TEST_CASE("bsgs on the hand-checked puzzle and its op bound", "[solver]") {
    auto report = solver::solve_bsgs(kTiny);
    CHECK(report.solution.a == 6);
    // m + (m+1) giant steps + inverse exponentiation.
    CHECK(report.ops_performed <= 3 * 5 + 2 * 5 + 8);
}

TEST_CASE("bsgs memory cap", "[solver]") {
    puzzle::Puzzle puz{524387, 2, 1234, 20, puzzle::PuzzleMode::table};
    CHECK_THROWS_AS(solver::solve_bsgs(puz, 100), ResourceError);
}

TEST_CASE("rho on the hand-checked puzzle", "[solver]") {
    auto report = solver::solve_rho(kTiny);
    CHECK(report.solution.a == 6);
}

TEST_CASE("cross-solver agreement against brute force", "[solver]") {
    std::mt19937_64 rng(47);
    auto primes = oracles::safe_primes_below(1 << 16);
    for (int i = 0; i < 200; ++i) {
        auto puz = random_puzzle(rng, primes);
        const std::uint64_t expected = oracles::brute_force_dlog(
            puz.p.convert_to<std::uint64_t>(), puz.g.convert_to<std::uint64_t>(),
            puz.b.convert_to<std::uint64_t>());
        REQUIRE(expected != 0);
        REQUIRE(solver::solve_naive(puz).solution.a == expected);
        REQUIRE(solver::solve_bsgs(puz).solution.a == expected);
        REQUIRE(solver::solve_rho(puz).solution.a == expected);
    }
}

TEST_CASE("rho stays valid across worker counts", "[solver]") {
    std::mt19937_64 rng(53);
    auto primes = oracles::safe_primes_below(1 << 14);
    for (int workers : {1, 2, 3, 4}) {
        solver::SolverConfig config;
        config.algo = puzzle::SolverAlgo::rho;
        config.workers = workers;
        for (int i = 0; i < 10; ++i) {
            auto puz = random_puzzle(rng, primes);
            auto report = solver::solve_rho(puz, config);
            REQUIRE(puzzle::verify_puzzle_solution(puz, report.solution));
        }
    }
}

TEST_CASE("rho mean ops track the sqrt cost model", "[solver]") {
    // Smoke-scale version of the acceptance measurement: lambda 16 table
    // puzzles with seed-driven b values.
    auto table = puzzle::build_difficulty_table({16});
    double total_ops = 0;
    constexpr int kTrials = 60;
    for (int i = 0; i < kTrials; ++i) {
        Bytes tag = bytes_of("rho-model");
        put_u64_be(tag, i);
        auto puz = puzzle::gen_puz(16, prng::Seed::from_digest(suite::hash(tag)), table);
        total_ops += static_cast<double>(solver::solve_rho(puz).ops_performed);
    }
    const double mean = total_ops / kTrials;
    const double model =
        1.25 * std::sqrt((puzzle::build_difficulty_table({16}).row(16).p - 1).convert_to<double>());
    CHECK(mean > 0.6 * model);
    CHECK(mean < 1.6 * model);
}

TEST_CASE("naive mean ops double per difficulty increment", "[solver]") {
    // Deterministic core of the time-scaling law: ops, not wall time.
    std::vector<double> means;
    for (int lambda : {14, 15, 16}) {
        auto table = puzzle::build_difficulty_table({lambda});
        double total = 0;
        constexpr int kTrials = 60;
        for (int i = 0; i < kTrials; ++i) {
            Bytes tag = bytes_of("doubling");
            put_u64_be(tag, static_cast<std::uint64_t>(lambda) * 1000 + i);
            auto puz = puzzle::gen_puz(lambda, prng::Seed::from_digest(suite::hash(tag)), table);
            total += static_cast<double>(solver::solve_naive(puz).ops_performed);
        }
        means.push_back(total / kTrials);
    }
    for (std::size_t i = 1; i < means.size(); ++i) {
        const double ratio = means[i] / means[i - 1];
        CHECK(ratio > 1.4);
        CHECK(ratio < 2.6);
    }
}

TEST_CASE("solve dispatches on the configured algorithm", "[solver]") {
    for (auto algo :
         {puzzle::SolverAlgo::naive, puzzle::SolverAlgo::bsgs, puzzle::SolverAlgo::rho}) {
        solver::SolverConfig config;
        config.algo = algo;
        auto report = solver::solve(kTiny, config);
        CHECK(report.solution.a == 6);
        CHECK(puzzle::verify_puzzle_solution(kTiny, report.solution));
    }
}

TEST_CASE("progress callback fires at the configured interval", "[solver]") {
    auto table = puzzle::build_difficulty_table({14});
    auto puz = puzzle::gen_puz(14, prng::Seed::zero(), table);
    solver::SolverConfig config;
    config.algo = puzzle::SolverAlgo::naive;
    config.progress_interval_ops = 100;
    std::uint64_t calls = 0, last = 0;
    config.on_progress = [&](std::uint64_t ops) {
        ++calls;
        last = ops;
    };
    auto report = solver::solve(puz, config);
    if (report.solution.a >= 100) {
        CHECK(calls == report.solution.a.convert_to<std::uint64_t>() / 100);
        CHECK(last <= report.solution.a);
    } else {
        CHECK(calls == 0);
    }
}
