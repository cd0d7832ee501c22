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

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <thread>
#include <variant>
#include <vector>

#include "mptc/bytes.hpp"
#include "mptc/elgamal.hpp"
#include "mptc/errors.hpp"
#include "mptc/merkle.hpp"
#include "mptc/numtheory.hpp"
#include "mptc/prng.hpp"
#include "mptc/puzzle.hpp"
#include "mptc/solver.hpp"
#include "mptc/suite.hpp"

// The timed-commitment protocol proper: the participant and coordinator state
// machines for the interactive commit phase, the coordinator's reveal, and
// the public verify_output check.
//
// Message flow per participant (all checks that fail abort the session):
//
//   P -> C   nonce
//   C -> P   (seed, merkle proof of the nonce)
//   P -> C   (hash(ciphertext), index)
//   C -> P   commitment list L_H
//   P -> C   (signature over L_H || seed, ciphertext, index)
//
// The state machines are transport-free and process one message at a time;
// drivers (in-memory or sockets) pump messages between them.

namespace mptc::core {

using elgamal::Ciphertext;
using nt::BigUint;
using puzzle::Puzzle;
using puzzle::PuzzleSolution;
using suite::Digest;

enum class ListPolicy : std::uint8_t { arrival = 0, lex = 1 };

struct ProtocolParams {
    std::uint32_t n_participants = 1;
    int lambda_m = 20;
    int lambda_h = suite::kLambdaHBits;
    suite::SuiteConfig suite = suite::default_suite();
    puzzle::PuzzleMode puzzle_mode = puzzle::PuzzleMode::table;
    puzzle::DifficultyTable table;
    ListPolicy list_policy = ListPolicy::arrival;
};

struct CommitmentEntry {
    Digest h;
    std::uint64_t index = 0;

    bool operator==(const CommitmentEntry&) const = default;
};

struct CommitmentList {
    std::vector<CommitmentEntry> entries;

    std::optional<std::size_t> slot_of(std::uint64_t index) const {
        for (std::size_t j = 0; j < entries.size(); ++j)
            if (entries[j].index == index) return j;
        return std::nullopt;
    }
};

// Canonical encoding of "L_H || seed" for signing:
// "MPTC1" || suite_id || seed || count(4) || per entry digest(32) || index(8).
inline Bytes signing_payload(const suite::SuiteConfig& suite, const prng::Seed& seed,
                             const CommitmentList& list) {
    Bytes out;
    append(out, "MPTC1");
    append(out, suite.suite_id);
    append(out, seed.bytes);
    put_u32_be(out, static_cast<std::uint32_t>(list.entries.size()));
    for (const auto& entry : list.entries) {
        append(out, entry.h);
        put_u64_be(out, entry.index);
    }
    return out;
}

inline CommitmentList prepare_list(std::vector<CommitmentEntry> arrival, ListPolicy policy) {
    if (policy == ListPolicy::lex) {
        std::sort(arrival.begin(), arrival.end(), [](const auto& a, const auto& b) {
            if (a.h != b.h) return std::lexicographical_compare(a.h.begin(), a.h.end(),
                                                                b.h.begin(), b.h.end());
            return a.index < b.index;
        });
    }
    return CommitmentList{std::move(arrival)};
}

enum class AbortReason : std::uint8_t {
    none = 0,
    bad_seed_proof,
    commitment_missing,
    protocol_violation,
    bad_signature,
    commitment_mismatch,
    duplicate_index,
    unknown_participant,
    timeout,
    disconnected,
};

inline const char* abort_reason_name(AbortReason r) {
    switch (r) {
        case AbortReason::none: return "none";
        case AbortReason::bad_seed_proof: return "BadSeedProof";
        case AbortReason::commitment_missing: return "CommitmentMissing";
        case AbortReason::protocol_violation: return "ProtocolViolation";
        case AbortReason::bad_signature: return "BadSignature";
        case AbortReason::commitment_mismatch: return "CommitmentMismatch";
        case AbortReason::duplicate_index: return "DuplicateIndex";
        case AbortReason::unknown_participant: return "UnknownParticipant";
        case AbortReason::timeout: return "Timeout";
        case AbortReason::disconnected: return "Disconnected";
    }
    return "Unknown";
}

struct MsgNonce {
    std::uint64_t index = 0;
    Digest nonce{};
};

struct MsgSeedProof {
    prng::Seed seed;
    merkle::MerkleProof proof;
};

struct MsgCommitHash {
    std::uint64_t index = 0;
    Digest commitment{};
};

struct MsgCommitList {
    CommitmentList list;
};

struct MsgSignedCiphertext {
    std::uint64_t index = 0;
    Bytes signature;
    Ciphertext ciphertext;
};

using ParticipantIncoming = std::variant<MsgSeedProof, MsgCommitList>;
using ParticipantOutgoing = std::variant<MsgNonce, MsgCommitHash, MsgSignedCiphertext>;

using RandHook = std::function<void(std::span<std::uint8_t>)>;

inline RandHook default_rand_hook() {
    return [](std::span<std::uint8_t> out) {
        suite::ensure_init();
        randombytes_buf(out.data(), out.size());
    };
}

class ParticipantSession {
public:
    enum class State : std::uint8_t { init, await_seed, await_list, done, aborted };

    struct Step {
        State state = State::init;
        std::optional<ParticipantOutgoing> message;
        AbortReason reason = AbortReason::none;
    };

    // chain_mode switches the nonce rule to hash(message) and the puzzle to
    // the precomputation-resistant generator.
    ParticipantSession(ProtocolParams params, std::uint64_t index, suite::KeyPair keypair,
                       Bytes message, RandHook rand = {}, bool chain_mode = false)
        : params_(std::move(params)),
          index_(index),
          keypair_(std::move(keypair)),
          message_(std::move(message)),
          rand_(rand ? std::move(rand) : default_rand_hook()),
          chain_mode_(chain_mode) {}

    Step start() {
        if (state_ != State::init) return abort(AbortReason::protocol_violation);
        if (chain_mode_) {
            nonce_ = suite::hash(message_);
        } else {
            rand_(std::span<std::uint8_t>(nonce_.data(), nonce_.size()));
        }
        state_ = State::await_seed;
        return Step{state_, MsgNonce{index_, nonce_}};
    }

    Step on_seed_proof(const MsgSeedProof& msg) {
        if (state_ != State::await_seed) return abort(AbortReason::protocol_violation);
        Digest root;
        std::copy(msg.seed.bytes.begin(), msg.seed.bytes.end(), root.begin());
        if (!merkle::verify_mp(root, msg.proof, nonce_))
            return abort(AbortReason::bad_seed_proof);
        seed_ = msg.seed;
        try {
            const auto mode =
                chain_mode_ ? puzzle::PuzzleMode::pcr : params_.puzzle_mode;
            puzzle_ = puzzle::derive_puzzle(mode, params_.lambda_m, seed_, params_.table);
        } catch (const Error&) {
            return abort(AbortReason::protocol_violation);
        }
        elgamal::Plaintext pt;
        pt.message = message_;
        rand_(std::span<std::uint8_t>(pt.blinding.data(), pt.blinding.size()));
        blinding_ = pt.blinding;
        ciphertext_ = elgamal::encrypt(pt, puzzle_, seed_);
        commitment_ = elgamal::hash_ciphertext(ciphertext_);
        state_ = State::await_list;
        return Step{state_, MsgCommitHash{index_, commitment_}};
    }

    Step on_commit_list(const MsgCommitList& msg) {
        if (state_ != State::await_list) return abort(AbortReason::protocol_violation);
        std::size_t occurrences = 0;
        std::uint64_t bound_index = 0;
        for (const auto& entry : msg.list.entries) {
            if (entry.h == commitment_) {
                ++occurrences;
                bound_index = entry.index;
            }
        }
        if (occurrences != 1 || bound_index != index_)
            return abort(AbortReason::commitment_missing);
        const Bytes payload = signing_payload(params_.suite, seed_, msg.list);
        Bytes sig;
        try {
            sig = suite::sign(keypair_.secret_key, payload);
        } catch (const KeyError&) {
            return abort(AbortReason::protocol_violation);
        }
        state_ = State::done;
        return Step{state_, MsgSignedCiphertext{index_, std::move(sig), ciphertext_}};
    }

    State state() const { return state_; }
    AbortReason abort_reason() const { return reason_; }
    std::uint64_t index() const { return index_; }
    const Digest& nonce() const { return nonce_; }
    const Ciphertext& ciphertext() const { return ciphertext_; }
    const Puzzle& puzzle() const { return puzzle_; }

private:
    Step abort(AbortReason reason) {
        state_ = State::aborted;
        if (reason_ == AbortReason::none) reason_ = reason;
        return Step{state_, std::nullopt, reason_};
    }

    ProtocolParams params_;
    std::uint64_t index_;
    suite::KeyPair keypair_;
    Bytes message_;
    RandHook rand_;
    bool chain_mode_;

    State state_ = State::init;
    AbortReason reason_ = AbortReason::none;
    Digest nonce_{};
    prng::Seed seed_;
    Puzzle puzzle_;
    std::array<std::uint8_t, elgamal::kBlindingSize> blinding_{};
    Ciphertext ciphertext_;
    Digest commitment_{};
};

// Spec-shaped single entry point; aborts are sticky.
inline ParticipantSession::Step participant_step(ParticipantSession& session,
                                                 const ParticipantIncoming& incoming) {
    return std::visit(
        [&](const auto& msg) -> ParticipantSession::Step {
            using T = std::decay_t<decltype(msg)>;
            if constexpr (std::is_same_v<T, MsgSeedProof>) return session.on_seed_proof(msg);
            if constexpr (std::is_same_v<T, MsgCommitList>) return session.on_commit_list(msg);
        },
        incoming);
}

class CoordinatorSession {
public:
    enum class State : std::uint8_t {
        await_nonces,
        await_commits,
        await_ciphertexts,
        complete,
        aborted,
    };

    struct Out {
        std::uint64_t index = 0;
        ParticipantIncoming message;
    };

    struct Reject {
        std::uint64_t index = 0;
        AbortReason reason = AbortReason::none;
    };

    struct Step {
        State state = State::await_nonces;
        std::vector<Out> outgoing;
        std::optional<Reject> reject;
    };

    CoordinatorSession(ProtocolParams params, suite::PkiRegistry pki, bool chain_mode = false,
                       Bytes chain_metadata = {})
        : params_(std::move(params)),
          pki_(std::move(pki)),
          chain_mode_(chain_mode),
          chain_metadata_(std::move(chain_metadata)) {
        signatures_.resize(params_.n_participants);
        ciphertexts_.resize(params_.n_participants);
    }

    Step on_nonce(const MsgNonce& msg) {
        if (state_ != State::await_nonces)
            return Step{state_, {}, Reject{msg.index, AbortReason::protocol_violation}};
        if (!pki_.contains(msg.index))
            return Step{state_, {}, Reject{msg.index, AbortReason::unknown_participant}};
        if (std::find(arrival_.begin(), arrival_.end(), msg.index) != arrival_.end())
            return Step{state_, {}, Reject{msg.index, AbortReason::duplicate_index}};
        arrival_.push_back(msg.index);
        nonces_.emplace_back(msg.index, msg.nonce);
        if (arrival_.size() < params_.n_participants) return Step{state_};
        return build_seed();
    }

    Step on_commit_hash(const MsgCommitHash& msg) {
        if (state_ != State::await_commits)
            return Step{state_, {}, Reject{msg.index, AbortReason::protocol_violation}};
        for (const auto& entry : commit_arrival_)
            if (entry.index == msg.index)
                return Step{state_, {}, Reject{msg.index, AbortReason::duplicate_index}};
        if (std::find(arrival_.begin(), arrival_.end(), msg.index) == arrival_.end())
            return Step{state_, {}, Reject{msg.index, AbortReason::unknown_participant}};
        commit_arrival_.push_back(CommitmentEntry{msg.commitment, msg.index});
        if (commit_arrival_.size() < params_.n_participants) return Step{state_};
        list_ = prepare_list(commit_arrival_, params_.list_policy);
        payload_ = signing_payload(params_.suite, seed_, list_);
        state_ = State::await_ciphertexts;
        Step step{state_};
        for (std::uint64_t index : arrival_)
            step.outgoing.push_back(Out{index, MsgCommitList{list_}});
        return step;
    }

    Step on_signed_ciphertext(const MsgSignedCiphertext& msg) {
        if (state_ != State::await_ciphertexts)
            return Step{state_, {}, Reject{msg.index, AbortReason::protocol_violation}};
        auto slot = list_.slot_of(msg.index);
        if (!slot)
            return Step{state_, {}, Reject{msg.index, AbortReason::unknown_participant}};
        if (filled_[*slot])
            return Step{state_, {}, Reject{msg.index, AbortReason::duplicate_index}};
        if (!suite::verify_sig(pki_.lookup(msg.index), payload_, msg.signature))
            return Step{state_, {}, Reject{msg.index, AbortReason::bad_signature}};
        if (elgamal::hash_ciphertext(msg.ciphertext) != list_.entries[*slot].h)
            return Step{state_, {}, Reject{msg.index, AbortReason::commitment_mismatch}};
        signatures_[*slot] = msg.signature;
        ciphertexts_[*slot] = {msg.ciphertext, msg.index};
        filled_[*slot] = true;
        if (std::count(filled_.begin(), filled_.end(), true) <
            static_cast<std::ptrdiff_t>(params_.n_participants))
            return Step{state_};
        state_ = State::complete;
        return Step{state_};
    }

    void abort(AbortReason reason) {
        state_ = State::aborted;
        if (reason_ == AbortReason::none) reason_ = reason;
    }

    State state() const { return state_; }
    AbortReason abort_reason() const { return reason_; }
    const prng::Seed& seed() const { return seed_; }
    const merkle::MerkleTree& tree() const { return tree_; }
    const CommitmentList& commitment_list() const { return list_; }
    const std::vector<Bytes>& signatures() const { return signatures_; }
    const std::vector<std::pair<Ciphertext, std::uint64_t>>& ciphertexts() const {
        return ciphertexts_;
    }
    // Nonce arrival order; in chain mode this is the L_seed list.
    const std::vector<std::uint64_t>& arrival_order() const { return arrival_; }
    const std::vector<std::pair<std::uint64_t, Digest>>& nonces() const { return nonces_; }

private:
    Step build_seed() {
        // Plain sessions aggregate nonce leaves in ascending participant
        // index; chain sessions lead with hash(metadata) and keep nonce
        // arrival order, which L_seed records.
        std::vector<Bytes> leaves;
        std::vector<std::pair<std::uint64_t, std::size_t>> slots;  // (index, leaf pos)
        if (chain_mode_) {
            leaves.push_back(suite::digest_bytes(suite::hash(chain_metadata_)));
            for (std::size_t i = 0; i < arrival_.size(); ++i) {
                const std::uint64_t index = arrival_[i];
                leaves.push_back(digest_bytes_of(index));
                slots.emplace_back(index, i + 1);
            }
        } else {
            std::vector<std::uint64_t> sorted = arrival_;
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i < sorted.size(); ++i) {
                leaves.push_back(digest_bytes_of(sorted[i]));
                slots.emplace_back(sorted[i], i);
            }
        }
        tree_ = merkle::build(leaves);
        std::copy(tree_.root().begin(), tree_.root().end(), seed_.bytes.begin());
        filled_.assign(params_.n_participants, false);
        state_ = State::await_commits;
        Step step{state_};
        for (const auto& [index, pos] : slots)
            step.outgoing.push_back(Out{index, MsgSeedProof{seed_, merkle::prove(tree_, pos)}});
        return step;
    }

    Bytes digest_bytes_of(std::uint64_t index) const {
        for (const auto& [i, nonce] : nonces_)
            if (i == index) return Bytes(nonce.begin(), nonce.end());
        throw Error("nonce lookup for unknown index");
    }

    ProtocolParams params_;
    suite::PkiRegistry pki_;
    bool chain_mode_;
    Bytes chain_metadata_;

    State state_ = State::await_nonces;
    AbortReason reason_ = AbortReason::none;
    std::vector<std::uint64_t> arrival_;
    std::vector<std::pair<std::uint64_t, Digest>> nonces_;
    merkle::MerkleTree tree_;
    prng::Seed seed_;
    std::vector<CommitmentEntry> commit_arrival_;
    CommitmentList list_;
    Bytes payload_;
    std::vector<Bytes> signatures_;
    std::vector<std::pair<Ciphertext, std::uint64_t>> ciphertexts_;
    std::vector<bool> filled_;
};

struct RevealEntry {
    Bytes message;
    std::array<std::uint8_t, elgamal::kBlindingSize> blinding{};
    std::uint64_t index = 0;

    bool operator==(const RevealEntry&) const = default;
};

struct RevealOutput {
    prng::Seed seed;
    PuzzleSolution sk_tl;
    std::vector<Bytes> signatures;       // L_s, ordered like L_H
    std::vector<RevealEntry> messages;   // L_m, same order
    // Not serialized: slots whose ciphertext failed to decode (the file will
    // simply fail verification) and the solve cost for reporting.
    std::vector<std::uint32_t> undecodable_slots;
    std::uint64_t solve_ops = 0;
    double solve_wall_seconds = 0.0;
};

// Coordinator reveal: regenerate the puzzle from the seed, solve it, decrypt
// every committed ciphertext in list order. Decryptions are independent and
// run on a small thread pool.
inline RevealOutput reveal(const prng::Seed& seed,
                           const std::vector<Bytes>& l_s,
                           const std::vector<std::pair<Ciphertext, std::uint64_t>>& l_c,
                           const ProtocolParams& params,
                           const solver::SolverConfig& solver_config) {
    Puzzle puz = puzzle::derive_puzzle(params.puzzle_mode, params.lambda_m, seed, params.table);
    solver::SolveReport report = solver::solve(puz, solver_config);

    RevealOutput out;
    out.seed = seed;
    out.sk_tl = report.solution;
    out.signatures = l_s;
    out.messages.resize(l_c.size());
    out.solve_ops = report.ops_performed;
    out.solve_wall_seconds = report.wall_seconds;

    std::vector<std::uint8_t> failed(l_c.size(), 0);
    auto decrypt_range = [&](std::size_t begin, std::size_t step) {
        for (std::size_t j = begin; j < l_c.size(); j += step) {
            RevealEntry& entry = out.messages[j];
            entry.index = l_c[j].second;
            try {
                elgamal::Plaintext pt = elgamal::decrypt(l_c[j].first, puz, out.sk_tl);
                entry.message = std::move(pt.message);
                entry.blinding = pt.blinding;
            } catch (const DecodeError&) {
                failed[j] = 1;
            }
        }
    };
    const std::size_t pool = std::min<std::size_t>(
        std::max(1u, std::thread::hardware_concurrency()), l_c.size());
    if (pool <= 1) {
        decrypt_range(0, 1);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(pool);
        for (std::size_t t = 0; t < pool; ++t)
            threads.emplace_back(decrypt_range, t, pool);
        for (auto& t : threads) t.join();
    }
    for (std::size_t j = 0; j < failed.size(); ++j)
        if (failed[j]) out.undecodable_slots.push_back(static_cast<std::uint32_t>(j));
    return out;
}

enum class VerifyCheck : std::uint8_t {
    ok = 0,
    entry_count,
    puzzle_generation,
    puzzle_solution,
    duplicate_index,
    reencryption,
    signature,
};

inline const char* verify_check_name(VerifyCheck c) {
    switch (c) {
        case VerifyCheck::ok: return "ok";
        case VerifyCheck::entry_count: return "entry_count";
        case VerifyCheck::puzzle_generation: return "puzzle_generation";
        case VerifyCheck::puzzle_solution: return "puzzle_solution";
        case VerifyCheck::duplicate_index: return "duplicate_index";
        case VerifyCheck::reencryption: return "reencryption";
        case VerifyCheck::signature: return "signature";
    }
    return "unknown";
}

// Public validation of a reveal output. Never throws: every failure maps to
// the first failing check.
inline VerifyCheck verify_output_detailed(const ProtocolParams& params, const RevealOutput& out,
                                          const suite::PkiRegistry& pki) {
    try {
        if (out.messages.size() != params.n_participants ||
            out.signatures.size() != params.n_participants)
            return VerifyCheck::entry_count;

        Puzzle puz;
        try {
            puz = puzzle::derive_puzzle(params.puzzle_mode, params.lambda_m, out.seed,
                                        params.table);
        } catch (const Error&) {
            return VerifyCheck::puzzle_generation;
        }
        if (!puzzle::verify_puzzle_solution(puz, out.sk_tl))
            return VerifyCheck::puzzle_solution;

        std::vector<std::uint64_t> indices;
        for (const auto& entry : out.messages) indices.push_back(entry.index);
        std::sort(indices.begin(), indices.end());
        if (std::adjacent_find(indices.begin(), indices.end()) != indices.end())
            return VerifyCheck::duplicate_index;

        CommitmentList list;
        try {
            for (const auto& entry : out.messages) {
                elgamal::Plaintext pt;
                pt.message = entry.message;
                pt.blinding = entry.blinding;
                Ciphertext ct = elgamal::encrypt(pt, puz, out.seed);
                list.entries.push_back(
                    CommitmentEntry{elgamal::hash_ciphertext(ct), entry.index});
            }
        } catch (const Error&) {
            return VerifyCheck::reencryption;
        }

        const Bytes payload = signing_payload(params.suite, out.seed, list);
        for (std::size_t j = 0; j < out.messages.size(); ++j) {
            if (!pki.contains(out.messages[j].index)) return VerifyCheck::signature;
            if (!suite::verify_sig(pki.lookup(out.messages[j].index), payload,
                                   out.signatures[j]))
                return VerifyCheck::signature;
        }
        return VerifyCheck::ok;
    } catch (...) {
        return VerifyCheck::reencryption;
    }
}

inline bool verify_output(const ProtocolParams& params, const RevealOutput& out,
                          const suite::PkiRegistry& pki) {
    return verify_output_detailed(params, out, pki) == VerifyCheck::ok;
}

// ---------------------------------------------------------------------------
// In-memory commit driver: runs one coordinator session against N participant
// sessions in deterministic (vector) order. Used by tests, the chain layer
// and the demo subcommand; the socket transport in net.hpp is the multi-
// process path.

struct ParticipantSpec {
    std::uint64_t index = 0;
    suite::KeyPair keypair;
    Bytes message;
    RandHook rand;  // empty -> system randomness
};

struct CommitResult {
    bool completed = false;
    AbortReason failure = AbortReason::none;
    std::optional<std::uint64_t> offender;  // participant whose step failed
    prng::Seed seed;
    merkle::MerkleTree tree;
    CommitmentList list;
    std::vector<Bytes> signatures;
    std::vector<std::pair<Ciphertext, std::uint64_t>> ciphertexts;
    std::vector<std::uint64_t> seed_order;  // nonce arrival order
    std::vector<std::pair<std::uint64_t, Digest>> nonces;
};

inline CommitResult run_commit_in_memory(const ProtocolParams& params,
                                         const suite::PkiRegistry& pki,
                                         std::vector<ParticipantSpec> specs,
                                         bool chain_mode = false, Bytes chain_metadata = {}) {
    CommitResult result;
    CoordinatorSession coordinator(params, pki, chain_mode, std::move(chain_metadata));
    std::vector<ParticipantSession> participants;
    participants.reserve(specs.size());
    for (auto& spec : specs)
        participants.emplace_back(params, spec.index, std::move(spec.keypair),
                                  std::move(spec.message), std::move(spec.rand), chain_mode);

    auto fail = [&](std::uint64_t index, AbortReason reason) {
        result.failure = reason;
        result.offender = index;
        return result;
    };
    auto deliver = [&](std::uint64_t index,
                       const ParticipantIncoming& msg) -> ParticipantSession::Step {
        for (auto& p : participants)
            if (p.index() == index) return participant_step(p, msg);
        throw Error("coordinator addressed unknown participant");
    };

    // Phase 1: nonces.
    std::vector<CoordinatorSession::Out> pending;
    for (auto& p : participants) {
        auto step = p.start();
        if (p.state() == ParticipantSession::State::aborted)
            return fail(p.index(), p.abort_reason());
        auto coord = coordinator.on_nonce(std::get<MsgNonce>(*step.message));
        if (coord.reject) return fail(coord.reject->index, coord.reject->reason);
        for (auto& out : coord.outgoing) pending.push_back(std::move(out));
    }

    // Phase 2: seed proofs out, commitment hashes in.
    std::vector<CoordinatorSession::Out> broadcast;
    for (const auto& out : pending) {
        auto step = deliver(out.index, out.message);
        if (!step.message) return fail(out.index, step.reason);
        auto coord = coordinator.on_commit_hash(std::get<MsgCommitHash>(*step.message));
        if (coord.reject) return fail(coord.reject->index, coord.reject->reason);
        for (auto& msg : coord.outgoing) broadcast.push_back(std::move(msg));
    }

    // Phase 3: list out, signed ciphertexts in.
    for (const auto& out : broadcast) {
        auto step = deliver(out.index, out.message);
        if (!step.message) return fail(out.index, step.reason);
        auto coord =
            coordinator.on_signed_ciphertext(std::get<MsgSignedCiphertext>(*step.message));
        if (coord.reject) return fail(coord.reject->index, coord.reject->reason);
    }

    if (coordinator.state() != CoordinatorSession::State::complete)
        return fail(0, AbortReason::protocol_violation);

    result.completed = true;
    result.seed = coordinator.seed();
    result.tree = coordinator.tree();
    result.list = coordinator.commitment_list();
    result.signatures = coordinator.signatures();
    result.ciphertexts = coordinator.ciphertexts();
    result.seed_order = coordinator.arrival_order();
    result.nonces = coordinator.nonces();
    return result;
}

// ---------------------------------------------------------------------------
// Reveal output file: versioned binary, magic "MPTC1".

inline constexpr std::uint8_t kFileKindRevealOutput = 0x01;
inline constexpr std::uint8_t kFileKindBlock = 0x02;

namespace detail {

inline void put_params(Bytes& out, const ProtocolParams& params) {
    put_u32_be(out, params.n_participants);
    put_u32_be(out, static_cast<std::uint32_t>(params.lambda_m));
    put_u32_be(out, static_cast<std::uint32_t>(params.lambda_h));
    out.push_back(static_cast<std::uint8_t>(params.puzzle_mode));
    out.push_back(static_cast<std::uint8_t>(params.list_policy));
    out.push_back(static_cast<std::uint8_t>(params.suite.suite_id.size()));
    append(out, params.suite.suite_id);
    out.push_back(static_cast<std::uint8_t>(params.suite.sig_scheme_id.size()));
    append(out, params.suite.sig_scheme_id);
}

inline ProtocolParams read_params(ByteReader& in) {
    ProtocolParams params;
    params.n_participants = in.u32_be();
    params.lambda_m = static_cast<int>(in.u32_be());
    params.lambda_h = static_cast<int>(in.u32_be());
    const std::uint8_t mode = in.u8();
    if (mode > 1) throw DecodeError("invalid puzzle mode byte");
    params.puzzle_mode = static_cast<puzzle::PuzzleMode>(mode);
    const std::uint8_t policy = in.u8();
    if (policy > 1) throw DecodeError("invalid list policy byte");
    params.list_policy = static_cast<ListPolicy>(policy);
    auto sid = in.take(in.u8());
    params.suite.suite_id = std::string(sid.begin(), sid.end());
    auto sig = in.take(in.u8());
    params.suite.sig_scheme_id = std::string(sig.begin(), sig.end());
    return params;
}

inline void expect_magic(ByteReader& in, std::uint8_t kind) {
    auto magic = in.take(5);
    const char expected[] = "MPTC1";
    if (!std::equal(magic.begin(), magic.end(),
                    reinterpret_cast<const std::uint8_t*>(expected)))
        throw DecodeError("bad file magic");
    if (in.u8() != kind) throw DecodeError("unexpected file kind");
}

}  // namespace detail

inline Bytes reveal_output_to_bytes(const ProtocolParams& params, const RevealOutput& out) {
    Bytes buf;
    append(buf, "MPTC1");
    buf.push_back(kFileKindRevealOutput);
    detail::put_params(buf, params);
    append(buf, out.seed.bytes);
    Bytes sk = nt::to_bytes_be(out.sk_tl.a);
    put_u16_be(buf, static_cast<std::uint16_t>(sk.size()));
    append(buf, sk);
    put_u32_be(buf, static_cast<std::uint32_t>(out.signatures.size()));
    for (const Bytes& sig : out.signatures) {
        put_u16_be(buf, static_cast<std::uint16_t>(sig.size()));
        append(buf, sig);
    }
    put_u32_be(buf, static_cast<std::uint32_t>(out.messages.size()));
    for (const RevealEntry& entry : out.messages) {
        put_u64_be(buf, entry.index);
        append(buf, entry.blinding);
        put_u32_be(buf, static_cast<std::uint32_t>(entry.message.size()));
        append(buf, entry.message);
    }
    return buf;
}

struct RevealOutputFile {
    ProtocolParams params;  // difficulty table not included; supplied separately
    RevealOutput output;
};

inline RevealOutputFile reveal_output_from_bytes(std::span<const std::uint8_t> data) {
    ByteReader in(data);
    detail::expect_magic(in, kFileKindRevealOutput);
    RevealOutputFile file;
    file.params = detail::read_params(in);
    file.output.seed = prng::Seed::from_span(in.take(32));
    file.output.sk_tl.a = nt::from_bytes_be(in.take(in.u16_be()));
    const std::uint32_t sig_count = in.u32_be();
    for (std::uint32_t i = 0; i < sig_count; ++i)
        file.output.signatures.push_back(in.take_bytes(in.u16_be()));
    const std::uint32_t msg_count = in.u32_be();
    for (std::uint32_t i = 0; i < msg_count; ++i) {
        RevealEntry entry;
        entry.index = in.u64_be();
        auto r = in.take(elgamal::kBlindingSize);
        std::copy(r.begin(), r.end(), entry.blinding.begin());
        entry.message = in.take_bytes(in.u32_be());
        file.output.messages.push_back(std::move(entry));
    }
    in.expect_done();
    return file;
}

inline void save_reveal_output(const std::string& path, const ProtocolParams& params,
                               const RevealOutput& out) {
    write_file(path, reveal_output_to_bytes(params, out));
}

inline RevealOutputFile load_reveal_output(const std::string& path) {
    return reveal_output_from_bytes(read_file(path));
}

}  // namespace mptc::core
