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

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <functional>
#include <utility>

#include "mptc/bytes.hpp"
#include "mptc/errors.hpp"
#include "mptc/prng.hpp"
#include "mptc/suite.hpp"

// Arbitrary-precision modular arithmetic, probabilistic primality, safe-prime
// and generator predicates, and rejection (iteration) sampling. Values that
// fit a machine word take a fast uint64 path; the generic path covers any
// size. Serialization of a BigUint is always minimal-length big-endian bytes.

namespace mptc::nt {

using BigUint = boost::multiprecision::cpp_int;

inline std::uint32_t bit_length(const BigUint& v) {
    if (v == 0) return 0;
    return static_cast<std::uint32_t>(boost::multiprecision::msb(v)) + 1;
}

inline Bytes to_bytes_be(const BigUint& v) {
    if (v == 0) return {};
    Bytes out;
    boost::multiprecision::export_bits(v, std::back_inserter(out), 8, true);
    return out;
}

inline BigUint from_bytes_be(std::span<const std::uint8_t> data) {
    BigUint v = 0;
    for (std::uint8_t b : data) {
        v <<= 8;
        v |= b;
    }
    return v;
}

// Stream-ordered bits (MSB-first packing from prng) -> unsigned integer.
inline BigUint bits_to_biguint(const Bytes& bits, std::uint64_t width) {
    BigUint v = from_bytes_be(bits);
    const std::uint64_t padding = bits.size() * 8 - width;
    return v >> padding;
}

inline std::uint64_t mulmod_u64(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % m);
}

inline std::uint64_t powmod_u64(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
    std::uint64_t result = 1 % m;
    base %= m;
    while (exp != 0) {
        if (exp & 1) result = mulmod_u64(result, base, m);
        base = mulmod_u64(base, base, m);
        exp >>= 1;
    }
    return result;
}

inline bool fits_u64(const BigUint& v) { return bit_length(v) <= 64; }

inline BigUint mod_pow(const BigUint& base, const BigUint& exp, const BigUint& modulus) {
    if (modulus < 2) throw DomainError("mod_pow modulus must be >= 2");
    if (fits_u64(modulus) && fits_u64(exp)) {
        const std::uint64_t m = modulus.convert_to<std::uint64_t>();
        const std::uint64_t b = (base % modulus).convert_to<std::uint64_t>();
        return BigUint(powmod_u64(b, exp.convert_to<std::uint64_t>(), m));
    }
    return boost::multiprecision::powm(base % modulus, exp, modulus);
}

// Modular inverse via extended Euclid; DomainError when gcd(a, m) != 1.
inline BigUint mod_inverse(const BigUint& a, const BigUint& m) {
    if (m < 2) throw DomainError("mod_inverse modulus must be >= 2");
    using Int = boost::multiprecision::cpp_int;
    Int r0 = m, r1 = a % m, t0 = 0, t1 = 1;
    while (r1 != 0) {
        Int q = r0 / r1;
        Int r2 = r0 - q * r1;
        r0 = r1;
        r1 = r2;
        Int t2 = t0 - q * t1;
        t0 = t1;
        t1 = t2;
    }
    if (r0 != 1) throw DomainError("element not invertible");
    if (t0 < 0) t0 += m;
    return BigUint(t0);
}

namespace detail {

inline constexpr std::uint32_t kSmallPrimes[] = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,  53,
    59,  61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107, 109, 113, 127, 131,
    137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223,
    227, 229, 233, 239, 241, 251};

// One Miller-Rabin witness round; n odd, n > 3, n-1 = d * 2^s.
inline bool witness_passes_u64(std::uint64_t n, std::uint64_t d, std::uint32_t s,
                               std::uint64_t base) {
    std::uint64_t x = powmod_u64(base, d, n);
    if (x == 1 || x == n - 1) return true;
    for (std::uint32_t i = 1; i < s; ++i) {
        x = mulmod_u64(x, x, n);
        if (x == n - 1) return true;
    }
    return false;
}

inline bool witness_passes_big(const BigUint& n, const BigUint& d, std::uint32_t s,
                               const BigUint& base) {
    BigUint x = mod_pow(base, d, n);
    if (x == 1 || x == n - 1) return true;
    for (std::uint32_t i = 1; i < s; ++i) {
        x = (x * x) % n;
        if (x == n - 1) return true;
    }
    return false;
}

}  // namespace detail

// Probabilistic primality: TRUE for every prime; FALSE for a composite except
// with probability <= 4^-rounds. Witness bases are chosen deterministically:
// a fixed proven base set below 2^64, and bases drawn from a stream keyed by
// hash(n) above it, so verdicts are reproducible across runs and platforms.
inline bool miller_rabin(const BigUint& n, int rounds = 40) {
    if (rounds < 1) throw DomainError("miller_rabin rounds must be >= 1");
    if (n < 2) return false;
    for (std::uint32_t p : detail::kSmallPrimes) {
        if (n == p) return true;
        if (n % p == 0) return false;
    }
    // n is odd and > 251 here.
    if (fits_u64(n)) {
        const std::uint64_t nv = n.convert_to<std::uint64_t>();
        std::uint64_t d = nv - 1;
        std::uint32_t s = 0;
        while ((d & 1) == 0) {
            d >>= 1;
            ++s;
        }
        // Deterministic for every n below 3.3 * 10^24.
        for (std::uint64_t base : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
            if (!detail::witness_passes_u64(nv, d, s, base)) return false;
        }
        return true;
    }
    BigUint d = n - 1;
    std::uint32_t s = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++s;
    }
    Bytes key_input = bytes_of("mptc-mr");
    append(key_input, to_bytes_be(n));
    prng::BitStreamCursor bases{prng::Seed::from_digest(suite::hash(key_input)), 0};
    const std::uint32_t width = bit_length(n);
    int done = 0;
    while (done < rounds) {
        BigUint base = bits_to_biguint(bases.read(width), width);
        if (base < 2 || base > n - 2) continue;
        if (!detail::witness_passes_big(n, d, s, base)) return false;
        ++done;
    }
    return true;
}

inline constexpr int kDefaultMrRounds = 40;

inline bool is_safe_prime(const BigUint& p) {
    if (p < 5) return false;
    if (!miller_rabin(p, kDefaultMrRounds)) return false;
    return miller_rabin((p - 1) / 2, kDefaultMrRounds);
}

struct GroupParams {
    BigUint p;  // safe prime
    BigUint g;  // generator of Z*_p
};

namespace detail {

// Generator test assuming p is already known to be a safe prime. With
// |Z*_p| = 2q the element orders are {1, 2, q, 2q}, so g generates the whole
// group iff g^2 != 1 and g^q != 1.
inline bool is_generator_unchecked(const BigUint& p, const BigUint& g) {
    if (g < 2 || g > p - 1) return false;
    if ((g * g) % p == 1) return false;
    return mod_pow(g, (p - 1) / 2, p) != 1;
}

}  // namespace detail

inline bool is_group_generator(const BigUint& p, const BigUint& g) {
    if (!is_safe_prime(p)) throw DomainError("is_group_generator requires a safe prime");
    return detail::is_generator_unchecked(p, g);
}

struct SampleResult {
    BigUint value;
    std::uint64_t bits_consumed = 0;
};

inline std::uint64_t default_sampling_cap(std::uint64_t width_bits) {
    return 64 * width_bits * width_bits;
}

// Rejection sampling from the pseudo-random stream: reads width_bits chunks
// until `accept` holds. The cursor advances exactly by the bits consumed.
// Exceeding the iteration cap is a hard SamplingExhausted error instead of a
// silent retry, turning a negligible-probability hang into a diagnosable
// failure.
inline SampleResult iteration_sample(prng::BitStreamCursor& stream, std::uint64_t width_bits,
                                     const std::function<bool(const BigUint&)>& accept,
                                     std::uint64_t max_iterations = 0) {
    if (width_bits == 0) throw DomainError("iteration_sample width must be positive");
    if (max_iterations == 0) max_iterations = default_sampling_cap(width_bits);
    for (std::uint64_t iter = 1; iter <= max_iterations; ++iter) {
        BigUint v = bits_to_biguint(stream.read(width_bits), width_bits);
        if (accept(v)) return SampleResult{std::move(v), iter * width_bits};
    }
    throw SamplingExhausted("iteration_sample exceeded " + std::to_string(max_iterations) +
                            " iterations");
}

}  // namespace mptc::nt
