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
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "mptc/bytes.hpp"
#include "mptc/core.hpp"
#include "mptc/errors.hpp"
#include "mptc/merkle.hpp"
#include "mptc/puzzle.hpp"
#include "mptc/solver.hpp"
#include "mptc/suite.hpp"

// Capsule-Chain single-block layer. The commit protocol differs from the
// plain one in four ways: a user's nonce is hash(m) instead of random bytes,
// the first Merkle leaf is hash(metadata), the puzzle comes from the
// precomputation-resistant generator, and the nonce arrival order is recorded
// in L_seed so verifiers can rebuild the tree. Both the nonce leaf and the
// rebuilt leaf hash the application message m alone; re-encryption uses the
// (m, r) pair carried in L_m.

namespace mptc::chain {

using core::RevealEntry;
using puzzle::PuzzleSolution;
using suite::Digest;

struct Metadata {
    std::vector<Digest> parent_refs;
    Bytes miner_id;
    std::uint64_t height = 0;
};

inline Bytes metadata_to_bytes(const Metadata& md) {
    Bytes out;
    put_u32_be(out, static_cast<std::uint32_t>(md.parent_refs.size()));
    for (const Digest& d : md.parent_refs) append(out, d);
    put_u16_be(out, static_cast<std::uint16_t>(md.miner_id.size()));
    append(out, md.miner_id);
    put_u64_be(out, md.height);
    return out;
}

inline Metadata metadata_from_reader(ByteReader& in) {
    Metadata md;
    const std::uint32_t count = in.u32_be();
    for (std::uint32_t i = 0; i < count; ++i)
        md.parent_refs.push_back(suite::digest_from_span(in.take(suite::kDigestSize)));
    md.miner_id = in.take_bytes(in.u16_be());
    md.height = in.u64_be();
    return md;
}

struct SeedOrderList {
    std::vector<std::uint64_t> indices;  // leaf j+1 belongs to indices[j]

    std::optional<std::size_t> position_of(std::uint64_t index) const {
        for (std::size_t j = 0; j < indices.size(); ++j)
            if (indices[j] == index) return j;
        return std::nullopt;
    }
};

struct Block {
    Metadata metadata;
    PuzzleSolution sk_tl;
    std::vector<Bytes> signatures;      // L_s
    SeedOrderList seed_order;           // L_seed
    std::vector<RevealEntry> messages;  // L_m
    int lambda_m = 0;
    suite::SuiteConfig suite = suite::default_suite();
};

struct ChainUser {
    std::uint64_t index = 0;
    suite::KeyPair keypair;
    Bytes message;
    core::RandHook rand;  // drives only the blinding r in chain mode
};

struct ChainCommitResult {
    core::CommitResult commit;
    puzzle::Puzzle puzzle;
    SeedOrderList seed_order;
};

inline ChainCommitResult chain_commit_protocol(const Metadata& metadata,
                                               std::vector<ChainUser> users,
                                               core::ProtocolParams params,
                                               const suite::PkiRegistry& pki) {
    params.puzzle_mode = puzzle::PuzzleMode::pcr;
    params.n_participants = static_cast<std::uint32_t>(users.size());
    std::vector<core::ParticipantSpec> specs;
    specs.reserve(users.size());
    for (auto& user : users)
        specs.push_back(core::ParticipantSpec{user.index, std::move(user.keypair),
                                              std::move(user.message), std::move(user.rand)});
    ChainCommitResult result;
    result.commit = core::run_commit_in_memory(params, pki, std::move(specs), true,
                                               metadata_to_bytes(metadata));
    if (result.commit.completed) {
        result.seed_order = SeedOrderList{result.commit.seed_order};
        result.puzzle = puzzle::pcr_gen_puz(params.lambda_m, result.commit.seed);
    }
    return result;
}

// A user whose revealed message does not hash to her committed nonce makes
// the whole block unverifiable; her signature over L_H || seed is the
// irrefutable evidence of the violation.
struct BlockInvalidated {
    std::uint64_t user_index = 0;
    Bytes evidence_signature;
};

struct CommitAborted {
    core::AbortReason reason = core::AbortReason::none;
    std::optional<std::uint64_t> offender;
};

using CreateBlockResult = std::variant<Block, BlockInvalidated, CommitAborted>;

// Reveal a completed chain commit and package the block. A user whose
// revealed message does not hash to her committed nonce invalidates the block
// and is reported with her signature as evidence.
inline CreateBlockResult assemble_block(const Metadata& metadata,
                                        const core::CommitResult& commit,
                                        core::ProtocolParams params,
                                        const solver::SolverConfig& solver_config) {
    params.puzzle_mode = puzzle::PuzzleMode::pcr;
    params.n_participants = static_cast<std::uint32_t>(commit.ciphertexts.size());

    core::RevealOutput revealed =
        core::reveal(commit.seed, commit.signatures, commit.ciphertexts, params, solver_config);

    for (std::size_t j = 0; j < revealed.messages.size(); ++j) {
        const RevealEntry& entry = revealed.messages[j];
        Digest expected{};
        bool found = false;
        for (const auto& [index, nonce] : commit.nonces) {
            if (index == entry.index) {
                expected = nonce;
                found = true;
                break;
            }
        }
        const bool undecodable =
            std::find(revealed.undecodable_slots.begin(), revealed.undecodable_slots.end(),
                      static_cast<std::uint32_t>(j)) != revealed.undecodable_slots.end();
        if (!found || undecodable || suite::hash(entry.message) != expected)
            return BlockInvalidated{entry.index, revealed.signatures[j]};
    }

    Block block;
    block.metadata = metadata;
    block.sk_tl = revealed.sk_tl;
    block.signatures = revealed.signatures;
    block.seed_order = SeedOrderList{commit.seed_order};
    block.messages = revealed.messages;
    block.lambda_m = params.lambda_m;
    block.suite = params.suite;
    return block;
}

// Metadata-only blocks (zero users) are legal: the tree degenerates to the
// single hash(metadata) leaf and L_m stays empty.
inline CreateBlockResult create_block(const Metadata& metadata, std::vector<ChainUser> users,
                                      core::ProtocolParams params,
                                      const suite::PkiRegistry& pki,
                                      const solver::SolverConfig& solver_config) {
    params.puzzle_mode = puzzle::PuzzleMode::pcr;
    params.n_participants = static_cast<std::uint32_t>(users.size());

    core::CommitResult commit;
    if (users.empty()) {
        commit.completed = true;
        std::vector<Bytes> leaves{suite::digest_bytes(suite::hash(metadata_to_bytes(metadata)))};
        commit.tree = merkle::build(leaves);
        std::copy(commit.tree.root().begin(), commit.tree.root().end(),
                  commit.seed.bytes.begin());
    } else {
        ChainCommitResult committed = chain_commit_protocol(metadata, std::move(users), params, pki);
        if (!committed.commit.completed)
            return CommitAborted{committed.commit.failure, committed.commit.offender};
        commit = std::move(committed.commit);
    }
    return assemble_block(metadata, commit, params, solver_config);
}

struct BlockVerifyResult {
    bool ok = false;
    std::string failing_check;
};

namespace detail {

// Rebuild the seed from metadata and message hashes placed at their L_seed
// positions. Empty optional when the block structure is inconsistent.
inline std::optional<prng::Seed> rebuild_seed(const Block& block) {
    if (block.seed_order.indices.size() != block.messages.size()) return std::nullopt;
    std::set<std::uint64_t> seen(block.seed_order.indices.begin(),
                                 block.seed_order.indices.end());
    if (seen.size() != block.seed_order.indices.size()) return std::nullopt;

    std::vector<Bytes> leaves(block.messages.size() + 1);
    leaves[0] = suite::digest_bytes(suite::hash(metadata_to_bytes(block.metadata)));
    std::vector<bool> filled(block.messages.size(), false);
    for (const RevealEntry& entry : block.messages) {
        auto pos = block.seed_order.position_of(entry.index);
        if (!pos || filled[*pos]) return std::nullopt;
        leaves[*pos + 1] = suite::digest_bytes(suite::hash(entry.message));
        filled[*pos] = true;
    }
    merkle::MerkleTree tree = merkle::build(leaves);
    prng::Seed seed;
    std::copy(tree.root().begin(), tree.root().end(), seed.bytes.begin());
    return seed;
}

}  // namespace detail

inline BlockVerifyResult verify_block_detailed(const Block& block,
                                               const core::ProtocolParams& params,
                                               const suite::PkiRegistry& pki) {
    try {
        auto seed = detail::rebuild_seed(block);
        if (!seed) return {false, "seed_order"};

        core::ProtocolParams chain_params = params;
        chain_params.puzzle_mode = puzzle::PuzzleMode::pcr;
        chain_params.lambda_m = block.lambda_m;
        chain_params.suite = block.suite;
        chain_params.n_participants = static_cast<std::uint32_t>(block.messages.size());

        core::RevealOutput out;
        out.seed = *seed;
        out.sk_tl = block.sk_tl;
        out.signatures = block.signatures;
        out.messages = block.messages;
        core::VerifyCheck check = core::verify_output_detailed(chain_params, out, pki);
        if (check != core::VerifyCheck::ok) return {false, core::verify_check_name(check)};
        return {true, ""};
    } catch (...) {
        return {false, "structure"};
    }
}

inline bool verify_block(const Block& block, const core::ProtocolParams& params,
                         const suite::PkiRegistry& pki) {
    return verify_block_detailed(block, params, pki).ok;
}

// Testable core of the linearity-of-computation property: every valid block
// must sit behind its own puzzle, so the derived (p, g, b) triples of a block
// set are pairwise distinct.
inline bool linearity_check(const std::vector<Block>& blocks) {
    std::set<std::string> seen;
    for (const Block& block : blocks) {
        auto seed = detail::rebuild_seed(block);
        if (!seed) return false;
        puzzle::Puzzle puz = puzzle::pcr_gen_puz(block.lambda_m, *seed);
        Bytes key;
        Bytes p = nt::to_bytes_be(puz.p), g = nt::to_bytes_be(puz.g), b = nt::to_bytes_be(puz.b);
        put_u16_be(key, static_cast<std::uint16_t>(p.size()));
        append(key, p);
        put_u16_be(key, static_cast<std::uint16_t>(g.size()));
        append(key, g);
        append(key, b);
        if (!seen.insert(to_hex(key)).second) return false;
    }
    return true;
}

// Block file: the reveal-output layout plus metadata and L_seed.
inline Bytes block_to_bytes(const Block& block) {
    Bytes buf;
    append(buf, "MPTC1");
    buf.push_back(core::kFileKindBlock);
    put_u32_be(buf, static_cast<std::uint32_t>(block.lambda_m));
    buf.push_back(static_cast<std::uint8_t>(block.suite.suite_id.size()));
    append(buf, block.suite.suite_id);
    buf.push_back(static_cast<std::uint8_t>(block.suite.sig_scheme_id.size()));
    append(buf, block.suite.sig_scheme_id);
    append(buf, metadata_to_bytes(block.metadata));
    put_u32_be(buf, static_cast<std::uint32_t>(block.seed_order.indices.size()));
    for (std::uint64_t index : block.seed_order.indices) put_u64_be(buf, index);
    Bytes sk = nt::to_bytes_be(block.sk_tl.a);
    put_u16_be(buf, static_cast<std::uint16_t>(sk.size()));
    append(buf, sk);
    put_u32_be(buf, static_cast<std::uint32_t>(block.signatures.size()));
    for (const Bytes& sig : block.signatures) {
        put_u16_be(buf, static_cast<std::uint16_t>(sig.size()));
        append(buf, sig);
    }
    put_u32_be(buf, static_cast<std::uint32_t>(block.messages.size()));
    for (const RevealEntry& entry : block.messages) {
        put_u64_be(buf, entry.index);
        append(buf, entry.blinding);
        put_u32_be(buf, static_cast<std::uint32_t>(entry.message.size()));
        append(buf, entry.message);
    }
    return buf;
}

inline Block block_from_bytes(std::span<const std::uint8_t> data) {
    ByteReader in(data);
    core::detail::expect_magic(in, core::kFileKindBlock);
    Block block;
    block.lambda_m = static_cast<int>(in.u32_be());
    auto sid = in.take(in.u8());
    block.suite.suite_id = std::string(sid.begin(), sid.end());
    auto sig_id = in.take(in.u8());
    block.suite.sig_scheme_id = std::string(sig_id.begin(), sig_id.end());
    block.metadata = metadata_from_reader(in);
    const std::uint32_t order_count = in.u32_be();
    for (std::uint32_t i = 0; i < order_count; ++i)
        block.seed_order.indices.push_back(in.u64_be());
    block.sk_tl.a = nt::from_bytes_be(in.take(in.u16_be()));
    const std::uint32_t sig_count = in.u32_be();
    for (std::uint32_t i = 0; i < sig_count; ++i)
        block.signatures.push_back(in.take_bytes(in.u16_be()));
    const std::uint32_t msg_count = in.u32_be();
    for (std::uint32_t i = 0; i < msg_count; ++i) {
        RevealEntry entry;
        entry.index = in.u64_be();
        auto r = in.take(elgamal::kBlindingSize);
        std::copy(r.begin(), r.end(), entry.blinding.begin());
        entry.message = in.take_bytes(in.u32_be());
        block.messages.push_back(std::move(entry));
    }
    in.expect_done();
    return block;
}

inline void save_block(const std::string& path, const Block& block) {
    write_file(path, block_to_bytes(block));
}

inline Block load_block(const std::string& path) { return block_from_bytes(read_file(path)); }

}  // namespace mptc::chain
