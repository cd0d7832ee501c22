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

#include <sodium.h>

#include <array>
#include <cstdint>
#include <span>

#include "mptc/bytes.hpp"
#include "mptc/errors.hpp"
#include "mptc/suite.hpp"

// Seekable deterministic bit stream: prng_bits(seed, first_bit, bit_count).
//
// Realized as the ChaCha20 keystream keyed by the 32-byte seed with an
// all-zero nonce; the bit offset maps onto the cipher's 64-byte block
// counter, giving O(1) random access. Bit order within a byte is
// most-significant-bit first, so the first stream bit is the MSB of keystream
// byte 0. Both choices are pinned: independently written implementations must
// derive identical puzzles from the same seed.

namespace mptc::prng {

inline constexpr std::uint64_t kStreamCapBits = 1ull << 32;

struct Seed {
    std::array<std::uint8_t, 32> bytes{};

    static Seed zero() { return Seed{}; }

    static Seed from_digest(const suite::Digest& d) {
        Seed s;
        std::copy(d.begin(), d.end(), s.bytes.begin());
        return s;
    }

    static Seed from_span(std::span<const std::uint8_t> data) {
        if (data.size() != 32) throw DecodeError("seed must be 32 bytes");
        Seed s;
        std::copy(data.begin(), data.end(), s.bytes.begin());
        return s;
    }

    static Seed from_hex(std::string_view hex) { return from_span(from_hex_bytes(hex)); }

    bool operator==(const Seed&) const = default;

private:
    static Bytes from_hex_bytes(std::string_view hex) { return ::mptc::from_hex(hex); }
};

namespace detail {

// Raw keystream bytes [first_byte, first_byte + count).
inline Bytes keystream_bytes(const Seed& seed, std::uint64_t first_byte, std::size_t count) {
    suite::ensure_init();
    if (count == 0) return {};
    constexpr std::uint64_t kBlock = 64;
    const std::uint64_t first_block = first_byte / kBlock;
    const std::uint64_t offset = first_byte % kBlock;
    const std::size_t padded = static_cast<std::size_t>(offset) + count;
    Bytes buf(padded, 0);
    static constexpr std::uint8_t kZeroNonce[8] = {0};
    crypto_stream_chacha20_xor_ic(buf.data(), buf.data(), buf.size(), kZeroNonce,
                                  first_block, seed.bytes.data());
    return Bytes(buf.begin() + static_cast<std::ptrdiff_t>(offset), buf.end());
}

}  // namespace detail

// Returns ceil(bit_count / 8) bytes holding the requested bits MSB-first;
// unused low bits of the final byte are zero.
inline Bytes prng_bits(const Seed& seed, std::uint64_t first_bit, std::uint64_t bit_count) {
    if (first_bit + bit_count > kStreamCapBits || first_bit + bit_count < first_bit)
        throw StreamCapExceeded("prng read past stream cap");
    if (bit_count == 0) return {};

    const std::uint64_t first_byte = first_bit / 8;
    const std::uint32_t bit_shift = static_cast<std::uint32_t>(first_bit % 8);
    const std::uint64_t last_bit = first_bit + bit_count - 1;
    const std::size_t src_len = static_cast<std::size_t>(last_bit / 8 - first_byte + 1);
    Bytes src = detail::keystream_bytes(seed, first_byte, src_len);

    const std::size_t out_len = static_cast<std::size_t>((bit_count + 7) / 8);
    Bytes out(out_len, 0);
    if (bit_shift == 0) {
        std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(out_len), out.begin());
    } else {
        for (std::size_t i = 0; i < out_len; ++i) {
            std::uint16_t hi = src[i];
            std::uint16_t lo = (i + 1 < src.size()) ? src[i + 1] : 0;
            out[i] = static_cast<std::uint8_t>(((hi << 8 | lo) >> (8 - bit_shift)) & 0xff);
        }
    }
    // Mask the trailing bits of the final byte so the padding is canonical.
    const std::uint32_t tail = static_cast<std::uint32_t>(bit_count % 8);
    if (tail != 0) out.back() &= static_cast<std::uint8_t>(0xff << (8 - tail));
    return out;
}

// Interprets the first `width` stream-ordered bits of `bits` as a big-endian
// unsigned integer (first bit = most significant). width <= 64.
inline std::uint64_t bits_to_u64(const Bytes& bits, std::uint32_t width) {
    std::uint64_t v = 0;
    for (std::uint32_t i = 0; i < width; ++i) {
        const std::uint8_t byte = bits[i / 8];
        const int bit = (byte >> (7 - i % 8)) & 1;
        v = (v << 1) | static_cast<std::uint64_t>(bit);
    }
    return v;
}

// Single-owner sequential view over the stream. Reads from the same
// (seed, position) always yield identical bits.
struct BitStreamCursor {
    Seed seed;
    std::uint64_t position_bits = 0;

    Bytes read(std::uint64_t bit_count) {
        Bytes out = prng_bits(seed, position_bits, bit_count);
        position_bits += bit_count;
        return out;
    }

    std::uint64_t read_u64(std::uint32_t width) {
        if (width > 64) throw DomainError("read_u64 width > 64");
        return bits_to_u64(read(width), width);
    }
};

}  // namespace mptc::prng
