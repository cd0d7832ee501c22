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

#include <random>

#include "mptc/elgamal.hpp"
#include "mptc/solver.hpp"
#include "oracles.hpp"

using namespace mptc;
using nt::BigUint;

namespace {

elgamal::Plaintext random_plaintext(std::mt19937_64& rng, std::size_t max_len = 100) {
    elgamal::Plaintext pt;
    pt.message.resize(rng() % (max_len + 1));
    for (auto& b : pt.message) b = static_cast<std::uint8_t>(rng());
    for (auto& b : pt.blinding) b = static_cast<std::uint8_t>(rng());
    return pt;
}

puzzle::Puzzle table_puzzle(int lambda, std::uint64_t seed_tag) {
    auto table = puzzle::build_difficulty_table({lambda});
    Bytes tag = bytes_of("elgamal");
    put_u64_be(tag, seed_tag);
    return puzzle::gen_puz(lambda, prng::Seed::from_digest(suite::hash(tag)), table);
}

}  // namespace

TEST_CASE("plaintext encode/decode round trip", "[elgamal]") {
    auto puz = table_puzzle(24, 1);
    std::mt19937_64 rng(59);
    for (int i = 0; i < 1000; ++i) {
        auto pt = random_plaintext(rng);
        auto chunks = elgamal::encode_plaintext(pt, puz.p);
        for (const auto& c : chunks) {
            REQUIRE(c >= 1);
            REQUIRE(c < puz.p);
        }
        REQUIRE(elgamal::decode_plaintext(chunks, puz.p) == pt);
    }
}

TEST_CASE("empty message with zero blinding encodes to all-one chunks", "[elgamal]") {
    auto puz = table_puzzle(24, 2);
    elgamal::Plaintext pt;  // empty message, zero blinding
    auto chunks = elgamal::encode_plaintext(pt, puz.p);
    REQUIRE(chunks.size() == 36);  // (4 + 0 + 32) bytes at 8-bit chunks
    for (const auto& c : chunks) REQUIRE(c == 1);
}

TEST_CASE("chunk width guards", "[elgamal]") {
    CHECK(elgamal::chunk_width_bits((BigUint(1) << 19) + 1) == 4);  // 20-bit p
    CHECK_THROWS_AS(elgamal::chunk_width_bits(BigUint(23)), DomainError);
}

TEST_CASE("decode rejects malformed chunk streams", "[elgamal]") {
    auto puz = table_puzzle(24, 3);
    elgamal::Plaintext pt;
    pt.message = bytes_of("x");
    auto chunks = elgamal::encode_plaintext(pt, puz.p);

    SECTION("chunk out of range") {
        chunks[0] = 0;
        CHECK_THROWS_AS(elgamal::decode_plaintext(chunks, puz.p), DecodeError);
        chunks[0] = (BigUint(1) << 8) + 1;
        CHECK_THROWS_AS(elgamal::decode_plaintext(chunks, puz.p), DecodeError);
    }
    SECTION("length prefix past the buffer") {
        // 37 bytes but the prefix claims 200.
        std::vector<BigUint> forged(37, 1);
        forged[3] = 200 + 1;
        CHECK_THROWS_AS(elgamal::decode_plaintext(forged, puz.p), DecodeError);
    }
    SECTION("nonzero padding") {
        auto padded = elgamal::encode_plaintext(elgamal::Plaintext{}, puz.p);
        padded.push_back(0x55 + 1);
        CHECK_THROWS_AS(elgamal::decode_plaintext(padded, puz.p), DecodeError);
    }
}

TEST_CASE("decrypt formula on the hand-checked pair", "[elgamal]") {
    // p=23, g=5, b=8, sk a=6: chunk 9 encrypted with k=3 gives
    // c1 = 5^3 = 10, c2 = 9*8^3 = 8 (mod 23); decrypting (10, 8) returns 9.
    puzzle::Puzzle puz{23, 5, 8, 5, puzzle::PuzzleMode::table};
    elgamal::Ciphertext ct;
    ct.chunks.emplace_back(10, 8);
    auto chunks = elgamal::detail::decrypt_chunks(ct, puz, BigUint(6));
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0] == 9);
}

TEST_CASE("encrypt with a forced ephemeral matches the schoolbook formula", "[elgamal]") {
    auto puz = table_puzzle(17, 4);
    elgamal::Plaintext pt;
    pt.message = bytes_of("forced");
    auto seed = prng::Seed::from_digest(suite::hash(std::string_view{"hook"}));
    const BigUint k = 12345 % (puz.p - 1);
    auto ct = elgamal::encrypt(pt, puz, seed, [&](std::uint64_t) { return k; });
    auto chunks = elgamal::encode_plaintext(pt, puz.p);
    REQUIRE(ct.chunks.size() == chunks.size());
    const BigUint c1_expected =
        oracles::repeated_mul_pow(puz.g, k.convert_to<std::uint64_t>(), puz.p);
    const BigUint mask = oracles::repeated_mul_pow(puz.b, k.convert_to<std::uint64_t>(), puz.p);
    for (std::size_t j = 0; j < chunks.size(); ++j) {
        REQUIRE(ct.chunks[j].first == c1_expected);
        REQUIRE(ct.chunks[j].second == chunks[j] * mask % puz.p);
    }
}

TEST_CASE("encryption is deterministic in (plaintext, puzzle, seed)", "[elgamal]") {
    auto puz = table_puzzle(20, 5);
    std::mt19937_64 rng(61);
    auto pt = random_plaintext(rng, 40);
    auto seed = prng::Seed::from_digest(suite::hash(std::string_view{"det"}));
    auto a = elgamal::encrypt(pt, puz, seed);
    auto b = elgamal::encrypt(pt, puz, seed);
    CHECK(elgamal::ciphertext_to_bytes(a) == elgamal::ciphertext_to_bytes(b));

    auto other_seed = prng::Seed::from_digest(suite::hash(std::string_view{"det2"}));
    CHECK(elgamal::ciphertext_to_bytes(elgamal::encrypt(pt, puz, other_seed)) !=
          elgamal::ciphertext_to_bytes(a));
}

TEST_CASE("encrypt/decrypt round trip with a solver-found key", "[elgamal]") {
    auto puz = table_puzzle(24, 6);
    auto sk = solver::solve_bsgs(puz).solution;
    REQUIRE(puzzle::verify_puzzle_solution(puz, sk));
    auto seed = prng::Seed::from_digest(suite::hash(std::string_view{"roundtrip"}));
    std::mt19937_64 rng(67);
    for (int i = 0; i < 500; ++i) {
        auto pt = random_plaintext(rng, 60);
        auto ct = elgamal::encrypt(pt, puz, seed);
        REQUIRE(elgamal::decrypt(ct, puz, sk) == pt);
    }
}

TEST_CASE("wrong key never crashes", "[elgamal]") {
    auto puz = table_puzzle(20, 7);
    auto sk = solver::solve_bsgs(puz).solution;
    auto seed = prng::Seed::from_digest(suite::hash(std::string_view{"fuzz"}));
    std::mt19937_64 rng(71);
    elgamal::Plaintext pt;
    pt.message = bytes_of("target");
    auto ct = elgamal::encrypt(pt, puz, seed);
    int decode_errors = 0, wrong = 0;
    for (int i = 0; i < 100; ++i) {
        BigUint bad_a = 1 + BigUint(rng()) % (puz.p - 1);
        if (bad_a == sk.a) continue;
        try {
            auto out = elgamal::decrypt(ct, puz, puzzle::PuzzleSolution{bad_a});
            if (!(out == pt)) ++wrong;
        } catch (const DecodeError&) {
            ++decode_errors;
        }
    }
    CHECK(decode_errors + wrong > 0);
    CHECK(wrong == 0);  // a wrong key cannot reproduce the true plaintext
}

TEST_CASE("chunk independence under a fixed ephemeral", "[elgamal]") {
    auto puz = table_puzzle(24, 8);
    elgamal::Plaintext a;
    a.message.assign(20, 0x11);
    elgamal::Plaintext b = a;
    b.message[10] ^= 0xff;  // at 8-bit chunks this is exactly chunk 4 + 10

    auto seed = prng::Seed::zero();
    auto hook = [&](std::uint64_t j) { return std::optional<BigUint>(100 + j); };
    auto ct_a = elgamal::encrypt(a, puz, seed, hook);
    auto ct_b = elgamal::encrypt(b, puz, seed, hook);
    REQUIRE(ct_a.chunks.size() == ct_b.chunks.size());
    for (std::size_t j = 0; j < ct_a.chunks.size(); ++j) {
        if (j == 14)
            REQUIRE(ct_a.chunks[j] != ct_b.chunks[j]);
        else
            REQUIRE(ct_a.chunks[j] == ct_b.chunks[j]);
    }
}

TEST_CASE("ephemeral derivation retries away from zero", "[elgamal]") {
    auto puz = table_puzzle(17, 9);
    std::mt19937_64 rng(73);
    for (int i = 0; i < 2000; ++i) {
        Bytes m(rng() % 8);
        for (auto& byte : m) byte = static_cast<std::uint8_t>(rng());
        std::array<std::uint8_t, 32> r{};
        auto seed = prng::Seed::zero();
        BigUint k = elgamal::derive_ephemeral(seed, m, r, i, puz.p);
        REQUIRE(k >= 1);
        REQUIRE(k <= puz.p - 2);
    }
}

TEST_CASE("ciphertext wire encoding round trip", "[elgamal]") {
    std::mt19937_64 rng(79);
    for (int i = 0; i < 200; ++i) {
        elgamal::Ciphertext ct;
        const std::size_t n = rng() % 20;
        for (std::size_t j = 0; j < n; ++j)
            ct.chunks.emplace_back(BigUint(rng()), BigUint(rng()) << (rng() % 40));
        auto bytes = elgamal::ciphertext_to_bytes(ct);
        REQUIRE(elgamal::ciphertext_from_bytes(bytes) == ct);
    }
    CHECK_THROWS_AS(elgamal::ciphertext_from_bytes(Bytes{0, 0, 0, 2, 0}), DecodeError);
}
