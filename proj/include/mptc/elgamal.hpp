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

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mptc/bytes.hpp"
#include "mptc/errors.hpp"
#include "mptc/numtheory.hpp"
#include "mptc/prng.hpp"
#include "mptc/puzzle.hpp"
#include "mptc/suite.hpp"

// ElGamal over Z*_p with deterministic ephemeral exponents.
//
// Verification re-encrypts revealed messages and compares ciphertext hashes,
// which only works if encryption is reproducible: the ephemeral exponent of
// chunk j is derived as
//
//   k_j = prng_bits(hash("MPTC1-eph" || seed || m || r || be64(j)), 0,
//                   lambda_m + 64) mod (p - 1)
//
// re-derived with the index bumped by a retry counter while k_j = 0. The
// per-participant random blinding r keeps messages hidden from pre-reveal
// guessing despite the deterministic k.
//
// Plaintexts wider than one group element are chunked: the buffer
// be32(|m|) || m || r is zero-padded to a whole number of (lambda_m - 16)-bit
// chunks, each mapped MSB-first to an integer plus one, so every chunk lands
// in [1, p-1].

namespace mptc::elgamal {

using nt::BigUint;
using puzzle::Puzzle;
using puzzle::PuzzleSolution;

inline constexpr std::size_t kBlindingSize = suite::kDigestSize;

struct Plaintext {
    Bytes message;
    std::array<std::uint8_t, kBlindingSize> blinding{};

    bool operator==(const Plaintext&) const = default;
};

struct Ciphertext {
    std::vector<std::pair<BigUint, BigUint>> chunks;  // (c1, c2)

    bool operator==(const Ciphertext&) const = default;
};

inline std::uint32_t chunk_width_bits(const BigUint& p) {
    const std::uint32_t lambda_m = nt::bit_length(p);
    if (lambda_m < 17) throw DomainError("plaintext chunking requires a prime of >= 17 bits");
    return lambda_m - 16;
}

inline std::vector<BigUint> encode_plaintext(const Plaintext& pt, const BigUint& p) {
    const std::uint32_t width = chunk_width_bits(p);
    Bytes buffer;
    put_u32_be(buffer, static_cast<std::uint32_t>(pt.message.size()));
    append(buffer, pt.message);
    append(buffer, pt.blinding);
    while ((buffer.size() * 8) % width != 0) buffer.push_back(0);

    const std::size_t chunk_count = buffer.size() * 8 / width;
    std::vector<BigUint> chunks;
    chunks.reserve(chunk_count);
    std::size_t bit = 0;
    for (std::size_t c = 0; c < chunk_count; ++c) {
        BigUint v = 0;
        for (std::uint32_t i = 0; i < width; ++i, ++bit) {
            const int b = (buffer[bit / 8] >> (7 - bit % 8)) & 1;
            v <<= 1;
            v |= b;
        }
        chunks.push_back(v + 1);
    }
    return chunks;
}

inline Plaintext decode_plaintext(const std::vector<BigUint>& chunks, const BigUint& p) {
    const std::uint32_t width = chunk_width_bits(p);
    const BigUint max_chunk = (BigUint(1) << width);
    const std::uint64_t total_bits = static_cast<std::uint64_t>(chunks.size()) * width;
    if (total_bits % 8 != 0) throw DecodeError("chunk list does not cover whole bytes");

    Bytes buffer(total_bits / 8, 0);
    std::size_t bit = 0;
    for (const BigUint& c : chunks) {
        if (c < 1 || c > max_chunk) throw DecodeError("ciphertext chunk out of range");
        BigUint v = c - 1;
        for (std::uint32_t i = 0; i < width; ++i, ++bit) {
            if (boost::multiprecision::bit_test(v, width - 1 - i))
                buffer[bit / 8] |= static_cast<std::uint8_t>(1u << (7 - bit % 8));
        }
    }

    ByteReader in(buffer);
    const std::uint32_t msg_len = in.u32_be();
    if (in.remaining() < msg_len + kBlindingSize)
        throw DecodeError("plaintext length prefix exceeds buffer");
    Plaintext pt;
    pt.message = in.take_bytes(msg_len);
    auto r = in.take(kBlindingSize);
    std::copy(r.begin(), r.end(), pt.blinding.begin());
    while (!in.done()) {
        if (in.u8() != 0) throw DecodeError("nonzero padding byte");
    }
    return pt;
}

// Deterministic ephemeral exponent for chunk `index`; see the header comment.
inline BigUint derive_ephemeral(const prng::Seed& seed, const Bytes& message,
                                std::span<const std::uint8_t> blinding, std::uint64_t index,
                                const BigUint& p) {
    const std::uint32_t lambda_m = nt::bit_length(p);
    const BigUint n = p - 1;
    for (std::uint64_t retry = 0;; ++retry) {
        Bytes input = bytes_of("MPTC1-eph");
        append(input, seed.bytes);
        append(input, message);
        append(input, blinding);
        put_u64_be(input, index + retry);
        prng::Seed k_seed = prng::Seed::from_digest(suite::hash(input));
        BigUint k = nt::bits_to_biguint(prng::prng_bits(k_seed, 0, lambda_m + 64),
                                        lambda_m + 64) %
                    n;
        if (k != 0) return k;
    }
}

// Test hook: overrides the ephemeral exponent for chunk j when it returns a
// value. Production callers leave it empty.
using EphemeralHook = std::function<std::optional<BigUint>(std::uint64_t)>;

inline Ciphertext encrypt(const Plaintext& pt, const Puzzle& puz, const prng::Seed& seed,
                          const EphemeralHook& hook = {}) {
    std::vector<BigUint> chunks = encode_plaintext(pt, puz.p);
    Ciphertext ct;
    ct.chunks.reserve(chunks.size());
    for (std::size_t j = 0; j < chunks.size(); ++j) {
        BigUint k;
        if (hook) {
            auto forced = hook(j);
            k = forced ? *forced : derive_ephemeral(seed, pt.message, pt.blinding, j, puz.p);
        } else {
            k = derive_ephemeral(seed, pt.message, pt.blinding, j, puz.p);
        }
        BigUint c1 = nt::mod_pow(puz.g, k, puz.p);
        BigUint c2 = chunks[j] * nt::mod_pow(puz.b, k, puz.p) % puz.p;
        ct.chunks.emplace_back(std::move(c1), std::move(c2));
    }
    return ct;
}

namespace detail {

// chunk = c2 * c1^(p-1-a): the inverse of c1^a without a gcd step.
inline std::vector<BigUint> decrypt_chunks(const Ciphertext& ct, const Puzzle& puz,
                                           const BigUint& a) {
    const BigUint inv_exp = puz.p - 1 - a;
    std::vector<BigUint> chunks;
    chunks.reserve(ct.chunks.size());
    if (nt::fits_u64(puz.p)) {
        const std::uint64_t p = puz.p.convert_to<std::uint64_t>();
        const std::uint64_t e = inv_exp.convert_to<std::uint64_t>();
        for (const auto& [c1, c2] : ct.chunks) {
            if (c1 < 1 || c1 > puz.p - 1 || c2 < 1 || c2 > puz.p - 1)
                throw DecodeError("ciphertext element outside [1, p-1]");
            const std::uint64_t u = nt::powmod_u64(c1.convert_to<std::uint64_t>(), e, p);
            chunks.emplace_back(nt::mulmod_u64(c2.convert_to<std::uint64_t>(), u, p));
        }
        return chunks;
    }
    for (const auto& [c1, c2] : ct.chunks) {
        if (c1 < 1 || c1 > puz.p - 1 || c2 < 1 || c2 > puz.p - 1)
            throw DecodeError("ciphertext element outside [1, p-1]");
        chunks.push_back(c2 * nt::mod_pow(c1, inv_exp, puz.p) % puz.p);
    }
    return chunks;
}

}  // namespace detail

// Throws DecodeError when the chunk stream does not decode to a well-formed
// plaintext; that signals a committed garbage ciphertext (or a wrong key) and
// the caller surfaces it instead of crashing.
inline Plaintext decrypt(const Ciphertext& ct, const Puzzle& puz, const PuzzleSolution& sol) {
    return decode_plaintext(detail::decrypt_chunks(ct, puz, sol.a), puz.p);
}

// Wire encoding: chunk count (4-byte big-endian), then per chunk c1 and c2 as
// 2-byte-length-prefixed minimal big-endian integers. This is the canonical
// form that commitment hashes are computed over.
inline Bytes ciphertext_to_bytes(const Ciphertext& ct) {
    Bytes out;
    put_u32_be(out, static_cast<std::uint32_t>(ct.chunks.size()));
    for (const auto& [c1, c2] : ct.chunks) {
        Bytes b1 = nt::to_bytes_be(c1);
        Bytes b2 = nt::to_bytes_be(c2);
        put_u16_be(out, static_cast<std::uint16_t>(b1.size()));
        append(out, b1);
        put_u16_be(out, static_cast<std::uint16_t>(b2.size()));
        append(out, b2);
    }
    return out;
}

inline Ciphertext ciphertext_from_reader(ByteReader& in) {
    Ciphertext ct;
    const std::uint32_t count = in.u32_be();
    ct.chunks.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t len1 = in.u16_be();
        BigUint c1 = nt::from_bytes_be(in.take(len1));
        const std::uint16_t len2 = in.u16_be();
        BigUint c2 = nt::from_bytes_be(in.take(len2));
        ct.chunks.emplace_back(std::move(c1), std::move(c2));
    }
    return ct;
}

inline Ciphertext ciphertext_from_bytes(std::span<const std::uint8_t> data) {
    ByteReader in(data);
    Ciphertext ct = ciphertext_from_reader(in);
    in.expect_done();
    return ct;
}

inline suite::Digest hash_ciphertext(const Ciphertext& ct) {
    return suite::hash(ciphertext_to_bytes(ct));
}

}  // namespace mptc::elgamal
