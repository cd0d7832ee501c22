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

// Independent oracles for the test suites: deliberately naive implementations
// (trial division, repeated multiplication, exhaustive order computation)
// that never share code with the library paths they check.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mptc/bytes.hpp"
#include "mptc/core.hpp"
#include "mptc/numtheory.hpp"
#include "mptc/prng.hpp"
#include "mptc/suite.hpp"

namespace oracles {

using mptc::Bytes;
using mptc::nt::BigUint;

inline bool trial_division_prime(std::uint64_t n) {
    if (n < 2) return false;
    for (std::uint64_t d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

inline bool trial_division_safe_prime(std::uint64_t p) {
    return p >= 5 && trial_division_prime(p) && trial_division_prime((p - 1) / 2);
}

// Repeated multiplication, no square-and-multiply.
inline BigUint repeated_mul_pow(const BigUint& base, std::uint64_t exp, const BigUint& mod) {
    BigUint acc = 1 % mod;
    for (std::uint64_t i = 0; i < exp; ++i) acc = acc * (base % mod) % mod;
    return acc;
}

// Multiplicative order of g mod p by walking the powers; 0 when g is outside
// the group.
inline std::uint64_t multiplicative_order(std::uint64_t p, std::uint64_t g) {
    if (g % p == 0) return 0;
    std::uint64_t acc = g % p;
    std::uint64_t order = 1;
    while (acc != 1) {
        acc = (unsigned __int128)acc * g % p;
        ++order;
        if (order > p) return 0;  // unreachable for valid inputs
    }
    return order;
}

inline bool brute_force_is_generator(std::uint64_t p, std::uint64_t g) {
    if (g < 2 || g > p - 1) return false;
    return multiplicative_order(p, g) == p - 1;
}

// Linear scan for the discrete log; the cross-check for all solvers.
inline std::uint64_t brute_force_dlog(std::uint64_t p, std::uint64_t g, std::uint64_t b) {
    std::uint64_t acc = g % p;
    for (std::uint64_t i = 1; i < p; ++i) {
        if (acc == b) return i;
        acc = (unsigned __int128)acc * g % p;
    }
    return 0;
}

inline std::vector<std::uint64_t> safe_primes_below(std::uint64_t bound) {
    std::vector<std::uint64_t> out;
    for (std::uint64_t p = 5; p < bound; ++p)
        if (trial_division_safe_prime(p)) out.push_back(p);
    return out;
}

// Deterministic per-participant randomness for reproducible protocol runs:
// a counter-mode stream keyed by a tag and the participant index.
inline mptc::core::RandHook fixed_rand_hook(std::uint64_t index, std::string_view tag = "rand") {
    Bytes key = mptc::bytes_of(tag);
    mptc::put_u64_be(key, index);
    auto seed = mptc::prng::Seed::from_digest(mptc::suite::hash(key));
    auto cursor = std::make_shared<mptc::prng::BitStreamCursor>(mptc::prng::BitStreamCursor{seed, 0});
    return [cursor](std::span<std::uint8_t> out) {
        Bytes bytes = cursor->read(out.size() * 8);
        std::copy(bytes.begin(), bytes.end(), out.begin());
    };
}

inline mptc::suite::KeyPair deterministic_keypair(std::uint64_t index,
                                                  std::string_view tag = "key") {
    Bytes seed_input = mptc::bytes_of(tag);
    mptc::put_u64_be(seed_input, index);
    auto digest = mptc::suite::hash(seed_input);
    return mptc::suite::keypair_from_seed(
        std::span<const std::uint8_t>(digest.data(), digest.size()));
}

}  // namespace oracles
