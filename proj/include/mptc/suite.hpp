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
#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "mptc/bytes.hpp"
#include "mptc/errors.hpp"

// Hash, signature and PKI primitives shared by every protocol module.
// The default suite is SHA-256 ("sha-256") plus Ed25519 ("ed25519"); both are
// identified by string ids carried in SuiteConfig so a different suite can be
// swapped in without touching protocol logic. Ed25519 is deterministic: the
// same (key, message) always yields the same signature bytes, which the
// re-verification path relies on.

namespace mptc::suite {

inline constexpr int kLambdaHBits = 256;
inline constexpr std::size_t kDigestSize = kLambdaHBits / 8;

using Digest = std::array<std::uint8_t, kDigestSize>;

struct SuiteConfig {
    std::string suite_id = "sha-256";
    int hash_output_bits = kLambdaHBits;
    std::string sig_scheme_id = "ed25519";
};

inline SuiteConfig default_suite() { return SuiteConfig{}; }

inline void ensure_init() {
    static const int rc = sodium_init();
    if (rc < 0) throw Error("libsodium initialization failed");
}

inline Digest hash(std::span<const std::uint8_t> data) {
    ensure_init();
    Digest out;
    crypto_hash_sha256(out.data(), data.data(), data.size());
    return out;
}

inline Digest hash(const Bytes& data) {
    return hash(std::span<const std::uint8_t>(data));
}

inline Digest hash(std::string_view s) {
    return hash(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

inline Bytes digest_bytes(const Digest& d) { return Bytes(d.begin(), d.end()); }

inline Digest digest_from_span(std::span<const std::uint8_t> s) {
    if (s.size() != kDigestSize) throw DecodeError("digest must be 32 bytes");
    Digest d;
    std::copy(s.begin(), s.end(), d.begin());
    return d;
}

struct KeyPair {
    Bytes secret_key;  // 64 bytes in the default suite (seed || public key)
    Bytes public_key;  // 32 bytes
};

inline KeyPair keypair_generate() {
    ensure_init();
    KeyPair kp;
    kp.public_key.resize(crypto_sign_PUBLICKEYBYTES);
    kp.secret_key.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_keypair(kp.public_key.data(), kp.secret_key.data());
    return kp;
}

// Deterministic keypair from a 32-byte seed; used by tests that need
// reproducible identities.
inline KeyPair keypair_from_seed(std::span<const std::uint8_t> seed) {
    ensure_init();
    if (seed.size() != crypto_sign_SEEDBYTES) throw KeyError("keypair seed must be 32 bytes");
    KeyPair kp;
    kp.public_key.resize(crypto_sign_PUBLICKEYBYTES);
    kp.secret_key.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_seed_keypair(kp.public_key.data(), kp.secret_key.data(), seed.data());
    return kp;
}

inline Bytes sign(const Bytes& secret_key, std::span<const std::uint8_t> msg) {
    ensure_init();
    if (secret_key.size() != crypto_sign_SECRETKEYBYTES)
        throw KeyError("malformed secret key");
    Bytes sig(crypto_sign_BYTES);
    unsigned long long len = 0;
    crypto_sign_detached(sig.data(), &len, msg.data(), msg.size(), secret_key.data());
    sig.resize(len);
    return sig;
}

inline bool verify_sig(const Bytes& public_key, std::span<const std::uint8_t> msg,
                       const Bytes& sig) {
    ensure_init();
    // Malformed inputs are a verification failure, never an error.
    if (public_key.size() != crypto_sign_PUBLICKEYBYTES) return false;
    if (sig.size() != crypto_sign_BYTES) return false;
    return crypto_sign_verify_detached(sig.data(), msg.data(), msg.size(),
                                       public_key.data()) == 0;
}

// In-memory index -> public key registry. The binding of participant index to
// key pair is out of band: the registry is loaded from a directory holding one
// `<index>.pub` file per participant (lowercase hex of the raw public key).
// Secret keys live in `<index>.key`, read only by their owner.
class PkiRegistry {
public:
    void register_key(std::uint64_t index, Bytes public_key) {
        if (entries_.contains(index)) throw KeyError("duplicate participant index");
        entries_.emplace(index, std::move(public_key));
    }

    const Bytes& lookup(std::uint64_t index) const {
        auto it = entries_.find(index);
        if (it == entries_.end())
            throw KeyError("no key registered for participant " + std::to_string(index));
        return it->second;
    }

    bool contains(std::uint64_t index) const { return entries_.contains(index); }
    std::size_t size() const { return entries_.size(); }
    const std::map<std::uint64_t, Bytes>& entries() const { return entries_; }

private:
    std::map<std::uint64_t, Bytes> entries_;
};

inline PkiRegistry load_key_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    PkiRegistry pki;
    if (!fs::is_directory(dir)) throw IoError("not a key directory: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto path = entry.path();
        if (path.extension() != ".pub") continue;
        std::uint64_t index = 0;
        try {
            index = std::stoull(path.stem().string());
        } catch (const std::exception&) {
            continue;  // not an <index>.pub file
        }
        auto raw = read_file(path.string());
        std::string hex(raw.begin(), raw.end());
        while (!hex.empty() && (hex.back() == '\n' || hex.back() == '\r')) hex.pop_back();
        pki.register_key(index, from_hex(hex));
    }
    return pki;
}

inline Bytes load_secret_key(const std::string& dir, std::uint64_t index) {
    auto raw = read_file(dir + "/" + std::to_string(index) + ".key");
    std::string hex(raw.begin(), raw.end());
    while (!hex.empty() && (hex.back() == '\n' || hex.back() == '\r')) hex.pop_back();
    return from_hex(hex);
}

inline void save_keypair(const std::string& dir, std::uint64_t index, const KeyPair& kp) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto pub_hex = to_hex(kp.public_key) + "\n";
    auto key_hex = to_hex(kp.secret_key) + "\n";
    write_file(dir + "/" + std::to_string(index) + ".pub", bytes_of(pub_hex));
    write_file(dir + "/" + std::to_string(index) + ".key", bytes_of(key_hex));
}

}  // namespace mptc::suite
