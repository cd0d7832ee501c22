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

#include "mptc/prng.hpp"

using namespace mptc;

namespace {

// Bit-level concatenation oracle: appends `count` bits of `src` to `acc`.
void append_bits(std::vector<bool>& acc, const Bytes& src, std::uint64_t count) {
    for (std::uint64_t i = 0; i < count; ++i)
        acc.push_back((src[i / 8] >> (7 - i % 8)) & 1);
}

std::vector<bool> unpack(const Bytes& src, std::uint64_t count) {
    std::vector<bool> out;
    append_bits(out, src, count);
    return out;
}

}  // namespace

TEST_CASE("zero-length read yields the empty string", "[prng]") {
    CHECK(prng::prng_bits(prng::Seed::zero(), 0, 0).empty());
    CHECK(prng::prng_bits(prng::Seed::zero(), 977, 0).empty());
}

TEST_CASE("keystream with zero seed matches the chacha20 reference vector", "[prng]") {
    // First keystream block of ChaCha20 under an all-zero key and nonce.
    Bytes first = prng::prng_bits(prng::Seed::zero(), 0, 128);
    CHECK(to_hex(first) == "76b8e0ada0f13d90405d6ae55386bd28");
}

TEST_CASE("stream-consistency identity", "[prng]") {
    prng::Seed seed = prng::Seed::from_digest(suite::hash(std::string_view{"seek"}));
    Bytes whole = prng::prng_bits(seed, 0, 16);
    std::vector<bool> glued;
    append_bits(glued, prng::prng_bits(seed, 0, 8), 8);
    append_bits(glued, prng::prng_bits(seed, 8, 8), 8);
    CHECK(glued == unpack(whole, 16));
}

TEST_CASE("seek consistency over random split points", "[prng]") {
    prng::Seed seed = prng::Seed::from_digest(suite::hash(std::string_view{"splits"}));
    std::mt19937_64 rng(17);
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t start = rng() % 5000;
        const std::uint64_t n1 = rng() % 200;
        const std::uint64_t n2 = rng() % 200;
        Bytes whole = prng::prng_bits(seed, start, n1 + n2);
        std::vector<bool> glued;
        append_bits(glued, prng::prng_bits(seed, start, n1), n1);
        append_bits(glued, prng::prng_bits(seed, start + n1, n2), n2);
        REQUIRE(glued == unpack(whole, n1 + n2));
    }
}

TEST_CASE("monobit frequency of a long stream", "[prng]") {
    prng::Seed seed = prng::Seed::from_digest(suite::hash(std::string_view{"monobit"}));
    constexpr std::uint64_t n = 1'000'000;
    Bytes stream = prng::prng_bits(seed, 0, n);
    std::uint64_t ones = 0;
    for (std::uint64_t i = 0; i < n; ++i) ones += (stream[i / 8] >> (7 - i % 8)) & 1;
    const double sigma = std::sqrt(n * 0.25);
    CHECK(std::abs(static_cast<double>(ones) - n / 2.0) < 3.0 * sigma);
}

TEST_CASE("single-bit seed change flips about half the stream", "[prng]") {
    prng::Seed a = prng::Seed::from_digest(suite::hash(std::string_view{"avalanche"}));
    prng::Seed b = a;
    b.bytes[0] ^= 0x01;
    constexpr std::uint64_t n = 10'000;
    Bytes sa = prng::prng_bits(a, 0, n);
    Bytes sb = prng::prng_bits(b, 0, n);
    std::uint64_t distance = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        const int bit_a = (sa[i / 8] >> (7 - i % 8)) & 1;
        const int bit_b = (sb[i / 8] >> (7 - i % 8)) & 1;
        distance += bit_a != bit_b;
    }
    const double sigma = std::sqrt(n * 0.25);
    CHECK(std::abs(static_cast<double>(distance) - n / 2.0) < 3.0 * sigma);
}

TEST_CASE("reads past the stream cap fail", "[prng]") {
    CHECK_THROWS_AS(prng::prng_bits(prng::Seed::zero(), (1ull << 32) - 4, 8),
                    StreamCapExceeded);
    CHECK_NOTHROW(prng::prng_bits(prng::Seed::zero(), (1ull << 32) - 8, 8));
}

TEST_CASE("bit chunks map to integers most-significant-bit first", "[prng]") {
    prng::Seed seed = prng::Seed::zero();
    Bytes raw = prng::prng_bits(seed, 0, 16);
    const std::uint64_t expected = (std::uint64_t(raw[0]) << 8) | raw[1];
    CHECK(prng::bits_to_u64(raw, 16) == expected);
    // 0x76b8 from the reference keystream.
    CHECK(expected == 0x76b8);

    prng::BitStreamCursor cursor{seed, 0};
    CHECK(cursor.read_u64(16) == 0x76b8);
    CHECK(cursor.position_bits == 16);
}

TEST_CASE("unaligned reads agree with the aligned stream", "[prng]") {
    prng::Seed seed = prng::Seed::from_digest(suite::hash(std::string_view{"offsets"}));
    Bytes aligned = prng::prng_bits(seed, 0, 64);
    auto all = unpack(aligned, 64);
    for (std::uint64_t off : {1, 3, 7, 9, 15, 31}) {
        Bytes part = prng::prng_bits(seed, off, 33);
        auto bits = unpack(part, 33);
        for (std::uint64_t i = 0; i < 33; ++i) REQUIRE(bits[i] == all[off + i]);
    }
}
