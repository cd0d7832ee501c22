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
#include <span>
#include <vector>

#include "mptc/bytes.hpp"
#include "mptc/errors.hpp"
#include "mptc/suite.hpp"

// Merkle tree over participant nonces producing the protocol seed.
//
// Canonical shape, recomputed identically by every party:
//   leaf digest     = hash(0x00 || leaf bytes)
//   internal digest = hash(0x01 || left || right)
//   an unpaired node is promoted unchanged to the next level
// Leaves keep exactly the order supplied by the caller; the tree never sorts.

namespace mptc::merkle {

using suite::Digest;

class MerkleTree {
public:
    const Digest& root() const { return levels_.back().back(); }
    std::size_t leaf_count() const { return levels_.front().size(); }
    const std::vector<std::vector<Digest>>& levels() const { return levels_; }

private:
    friend MerkleTree build(std::span<const Bytes> leaves);
    std::vector<std::vector<Digest>> levels_;  // levels_[0] = leaf digests
};

namespace detail {

inline Digest hash_leaf(std::span<const std::uint8_t> leaf) {
    Bytes buf;
    buf.reserve(leaf.size() + 1);
    buf.push_back(0x00);
    append(buf, leaf);
    return suite::hash(buf);
}

inline Digest hash_internal(const Digest& left, const Digest& right) {
    Bytes buf;
    buf.reserve(1 + 2 * suite::kDigestSize);
    buf.push_back(0x01);
    append(buf, left);
    append(buf, right);
    return suite::hash(buf);
}

}  // namespace detail

inline MerkleTree build(std::span<const Bytes> leaves) {
    if (leaves.empty()) throw DomainError("merkle tree needs at least one leaf");
    MerkleTree tree;
    std::vector<Digest> level;
    level.reserve(leaves.size());
    for (const Bytes& leaf : leaves) level.push_back(detail::hash_leaf(leaf));
    tree.levels_.push_back(level);
    while (tree.levels_.back().size() > 1) {
        const auto& prev = tree.levels_.back();
        std::vector<Digest> next;
        next.reserve((prev.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < prev.size(); i += 2)
            next.push_back(detail::hash_internal(prev[i], prev[i + 1]));
        if (prev.size() % 2 == 1) next.push_back(prev.back());
        tree.levels_.push_back(std::move(next));
    }
    return tree;
}

struct MerkleProof {
    struct Step {
        Digest sibling;
        bool sibling_on_left = false;
    };
    std::uint32_t leaf_index = 0;
    std::vector<Step> path;
};

inline MerkleProof prove(const MerkleTree& tree, std::size_t index) {
    if (index >= tree.leaf_count()) throw IndexError("merkle leaf index out of range");
    MerkleProof proof;
    proof.leaf_index = static_cast<std::uint32_t>(index);
    std::size_t pos = index;
    for (std::size_t lvl = 0; lvl + 1 < tree.levels().size(); ++lvl) {
        const auto& nodes = tree.levels()[lvl];
        const std::size_t sibling = pos ^ 1;
        if (sibling < nodes.size()) {
            proof.path.push_back({nodes[sibling], sibling < pos});
        }
        // A promoted (unpaired) node contributes no step.
        pos /= 2;
    }
    return proof;
}

inline bool verify_mp(const Digest& root, const MerkleProof& proof,
                      std::span<const std::uint8_t> leaf) {
    Digest acc = detail::hash_leaf(leaf);
    for (const auto& step : proof.path) {
        acc = step.sibling_on_left ? detail::hash_internal(step.sibling, acc)
                                   : detail::hash_internal(acc, step.sibling);
    }
    return acc == root;
}

// Wire form: leaf index (4-byte BE), path length (2-byte BE), then per step a
// side byte (0x00 sibling-left, 0x01 sibling-right) and the 32-byte digest.
inline Bytes proof_to_bytes(const MerkleProof& proof) {
    Bytes out;
    put_u32_be(out, proof.leaf_index);
    put_u16_be(out, static_cast<std::uint16_t>(proof.path.size()));
    for (const auto& step : proof.path) {
        out.push_back(step.sibling_on_left ? 0x00 : 0x01);
        append(out, step.sibling);
    }
    return out;
}

inline MerkleProof proof_from_reader(ByteReader& in) {
    MerkleProof proof;
    proof.leaf_index = in.u32_be();
    const std::uint16_t len = in.u16_be();
    proof.path.reserve(len);
    for (std::uint16_t i = 0; i < len; ++i) {
        const std::uint8_t side = in.u8();
        if (side > 1) throw DecodeError("invalid merkle proof side byte");
        MerkleProof::Step step;
        step.sibling_on_left = (side == 0x00);
        step.sibling = suite::digest_from_span(in.take(suite::kDigestSize));
        proof.path.push_back(step);
    }
    return proof;
}

inline MerkleProof proof_from_bytes(std::span<const std::uint8_t> data) {
    ByteReader in(data);
    MerkleProof proof = proof_from_reader(in);
    in.expect_done();
    return proof;
}

}  // namespace mptc::merkle
