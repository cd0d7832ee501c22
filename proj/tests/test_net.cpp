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

#include <future>
#include <thread>

#include "mptc/net.hpp"
#include "oracles.hpp"

using namespace mptc;

namespace {

struct NetFixture {
    core::ProtocolParams params;
    suite::PkiRegistry pki;
    std::vector<suite::KeyPair> keypairs;  // index i at [i-1]
};

NetFixture make_net_fixture(std::uint32_t n, int lambda_m, std::string_view tag = "net",
                            core::ListPolicy policy = core::ListPolicy::arrival) {
    NetFixture f;
    f.params.n_participants = n;
    f.params.lambda_m = lambda_m;
    f.params.table = puzzle::build_difficulty_table({lambda_m});
    f.params.list_policy = policy;
    for (std::uint64_t i = 1; i <= n; ++i) {
        auto kp = oracles::deterministic_keypair(i, tag);
        f.pki.register_key(i, kp.public_key);
        f.keypairs.push_back(kp);
    }
    return f;
}

// Starts the server in a worker thread and resolves the bound port.
struct ServerRun {
    std::future<net::ServerResult> result;
    std::string address;

    ServerRun(const NetFixture& f, net::ServerConfig config) {
        std::promise<std::uint16_t> port_promise;
        auto port_future = port_promise.get_future();
        config.on_listening = [&port_promise](std::uint16_t port) {
            port_promise.set_value(port);
        };
        result = std::async(std::launch::async, [&f, config] {
            return net::run_coordinator_server(f.params, "127.0.0.1:0", f.pki, config);
        });
        address = "127.0.0.1:" + std::to_string(port_future.get());
    }
};

}  // namespace

TEST_CASE("wire messages round trip", "[net]") {
    net::WireMessage msg;
    msg.msg_type = static_cast<std::uint8_t>(net::MsgType::commit_hash);
    msg.session_id[3] = 0xaa;
    msg.payload = bytes_of("payload");
    auto frame = net::encode_message(msg);
    auto decoded = net::decode_message(frame);
    CHECK(decoded.version == net::kProtocolVersion);
    CHECK(decoded.msg_type == msg.msg_type);
    CHECK(decoded.session_id == msg.session_id);
    CHECK(decoded.payload == msg.payload);
}

TEST_CASE("frame decoding rejects damage", "[net]") {
    net::WireMessage msg;
    msg.msg_type = 0x01;
    auto frame = net::encode_message(msg);

    SECTION("truncated frame") {
        frame.pop_back();
        CHECK_THROWS_AS(net::decode_message(frame), FrameError);
    }
    SECTION("length mismatch") {
        frame[3] += 1;
        CHECK_THROWS_AS(net::decode_message(frame), FrameError);
    }
    SECTION("unsupported version") {
        frame[4] = 0x02;
        CHECK_THROWS_AS(net::decode_message(frame), VersionError);
    }
    SECTION("short body") {
        Bytes tiny{0x00, 0x00, 0x00, 0x02, 0x01, 0x01};
        CHECK_THROWS_AS(net::decode_message(tiny), FrameError);
    }
}

TEST_CASE("protocol payload codecs round trip", "[net]") {
    core::MsgNonce nonce{42, suite::hash(std::string_view{"n"})};
    auto n2 = net::decode_nonce(net::encode_nonce(nonce));
    CHECK(n2.index == 42);
    CHECK(n2.nonce == nonce.nonce);

    std::vector<Bytes> leaves{bytes_of("a"), bytes_of("b"), bytes_of("c")};
    auto tree = merkle::build(leaves);
    core::MsgSeedProof sp;
    std::copy(tree.root().begin(), tree.root().end(), sp.seed.bytes.begin());
    sp.proof = merkle::prove(tree, 1);
    auto sp2 = net::decode_seed_proof(net::encode_seed_proof(sp));
    CHECK(sp2.seed == sp.seed);
    CHECK(merkle::verify_mp(tree.root(), sp2.proof, leaves[1]));

    core::MsgCommitList list;
    list.list.entries.push_back({suite::hash(std::string_view{"h1"}), 1});
    list.list.entries.push_back({suite::hash(std::string_view{"h2"}), 2});
    auto cl2 = net::decode_commit_list(net::encode_commit_list(list));
    CHECK(cl2.list.entries.size() == 2);
    CHECK(cl2.list.entries[1].index == 2);

    core::MsgSignedCiphertext sc;
    sc.index = 7;
    sc.signature = bytes_of("sig-bytes");
    sc.ciphertext.chunks.emplace_back(nt::BigUint(12345), nt::BigUint(99999));
    auto sc2 = net::decode_signed_ciphertext(net::encode_signed_ciphertext(sc));
    CHECK(sc2.index == 7);
    CHECK(sc2.signature == sc.signature);
    CHECK(sc2.ciphertext == sc.ciphertext);

    CHECK(net::decode_abort(net::encode_abort(core::AbortReason::bad_signature)) ==
          core::AbortReason::bad_signature);
}

TEST_CASE("three clients complete the commit phase over loopback", "[net]") {
    auto f = make_net_fixture(3, 18);
    net::ServerConfig config;
    config.timeout_secs = 20.0;
    ServerRun server(f, config);

    std::vector<std::future<net::ClientResult>> clients;
    for (std::uint64_t i = 1; i <= 3; ++i) {
        clients.push_back(std::async(std::launch::async, [&, i] {
            net::ClientConfig cc;
            cc.timeout_secs = 20.0;
            cc.rand = oracles::fixed_rand_hook(i, "net");
            return net::run_participant_client(f.params, server.address, i, f.keypairs[i - 1],
                                               bytes_of("m" + std::to_string(i)), cc);
        }));
    }
    for (auto& c : clients) {
        auto r = c.get();
        CHECK(r.done);
    }
    auto result = server.result.get();
    REQUIRE(result.completed);
    CHECK(result.ciphertexts.size() == 3);

    // The committed output decrypts and verifies.
    solver::SolverConfig sc;
    sc.algo = puzzle::SolverAlgo::bsgs;
    auto out = core::reveal(result.seed, result.signatures, result.ciphertexts, f.params, sc);
    CHECK(core::verify_output(f.params, out, f.pki));
}

TEST_CASE("client disconnect aborts the session after the timeout", "[net]") {
    auto f = make_net_fixture(2, 18);
    net::ServerConfig config;
    config.timeout_secs = 1.5;
    ServerRun server(f, config);

    // One participant sends a nonce and vanishes; the second never shows up.
    {
        auto sock = net::detail::connect_to(server.address);
        core::MsgNonce nonce{1, suite::hash(std::string_view{"stale"})};
        net::detail::send_message(sock.fd(),
                                  static_cast<std::uint8_t>(net::MsgType::nonce),
                                  net::SessionId{}, net::encode_nonce(nonce));
    }  // socket closes here
    auto result = server.result.get();
    CHECK_FALSE(result.completed);
    CHECK(result.failure == core::AbortReason::timeout);
}

TEST_CASE("duplicate index connection is rejected without hurting the session", "[net]") {
    auto f = make_net_fixture(2, 18);

    std::promise<void> first_nonce;
    auto first_nonce_seen = first_nonce.get_future();
    net::ServerConfig config;
    config.timeout_secs = 20.0;
    bool signaled = false;
    config.on_nonce_accepted = [&](std::uint64_t index) {
        if (index == 1 && !signaled) {
            signaled = true;
            first_nonce.set_value();
        }
    };
    ServerRun server(f, config);

    auto client1 = std::async(std::launch::async, [&] {
        net::ClientConfig cc;
        cc.timeout_secs = 20.0;
        return net::run_participant_client(f.params, server.address, 1, f.keypairs[0],
                                           bytes_of("m1"), cc);
    });
    first_nonce_seen.get();

    // A second connection claiming index 1 is turned away...
    auto dup = std::async(std::launch::async, [&] {
        net::ClientConfig cc;
        cc.timeout_secs = 20.0;
        return net::run_participant_client(f.params, server.address, 1, f.keypairs[0],
                                           bytes_of("dup"), cc);
    });
    auto dup_result = dup.get();
    CHECK_FALSE(dup_result.done);
    CHECK(dup_result.reason == core::AbortReason::duplicate_index);

    // ...while the session still completes once participant 2 arrives.
    auto client2 = std::async(std::launch::async, [&] {
        net::ClientConfig cc;
        cc.timeout_secs = 20.0;
        return net::run_participant_client(f.params, server.address, 2, f.keypairs[1],
                                           bytes_of("m2"), cc);
    });
    CHECK(client1.get().done);
    CHECK(client2.get().done);
    CHECK(server.result.get().completed);
}

namespace {

// Minimal scripted coordinator for client fault injection.
struct FakeServer {
    net::detail::Socket listener;
    std::uint16_t port = 0;

    FakeServer() : listener(net::detail::listen_on("127.0.0.1:0", &port)) {}

    std::string address() const { return "127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("malformed commit list aborts the client as a protocol violation", "[net]") {
    auto f = make_net_fixture(1, 18);
    FakeServer fake;

    auto client = std::async(std::launch::async, [&] {
        net::ClientConfig cc;
        cc.timeout_secs = 10.0;
        return net::run_participant_client(f.params, fake.address(), 1, f.keypairs[0],
                                           bytes_of("m1"), cc);
    });

    sockaddr_in peer{};
    socklen_t len = sizeof(peer);
    int fd = ::accept(fake.listener.fd(), reinterpret_cast<sockaddr*>(&peer), &len);
    REQUIRE(fd >= 0);
    net::detail::Socket conn(fd);

    auto frame = net::detail::read_frame(fd);
    REQUIRE(frame.has_value());
    auto nonce = net::decode_nonce(net::decode_message(*frame).payload);

    // Honest seed proof over the single nonce...
    std::vector<Bytes> leaves{Bytes(nonce.nonce.begin(), nonce.nonce.end())};
    auto tree = merkle::build(leaves);
    core::MsgSeedProof sp;
    std::copy(tree.root().begin(), tree.root().end(), sp.seed.bytes.begin());
    sp.proof = merkle::prove(tree, 0);
    net::detail::send_message(fd, static_cast<std::uint8_t>(net::MsgType::seed_proof),
                              net::SessionId{}, net::encode_seed_proof(sp));
    REQUIRE(net::detail::read_frame(fd).has_value());  // commit hash

    // ...followed by a commit list whose payload is garbage.
    net::detail::send_message(fd, static_cast<std::uint8_t>(net::MsgType::commit_list),
                              net::SessionId{}, bytes_of("\xff\xff\xff"));
    auto result = client.get();
    CHECK_FALSE(result.done);
    CHECK(result.reason == core::AbortReason::protocol_violation);
}

TEST_CASE("a frame for a different session raises FrameError", "[net]") {
    auto f = make_net_fixture(1, 18);
    FakeServer fake;

    auto client = std::async(std::launch::async, [&] {
        net::ClientConfig cc;
        cc.timeout_secs = 10.0;
        return net::run_participant_client(f.params, fake.address(), 1, f.keypairs[0],
                                           bytes_of("m1"), cc);
    });

    sockaddr_in peer{};
    socklen_t len = sizeof(peer);
    int fd = ::accept(fake.listener.fd(), reinterpret_cast<sockaddr*>(&peer), &len);
    REQUIRE(fd >= 0);
    net::detail::Socket conn(fd);
    REQUIRE(net::detail::read_frame(fd).has_value());  // nonce

    net::SessionId other{};
    other[0] = 0x99;
    net::detail::send_message(fd, static_cast<std::uint8_t>(net::MsgType::seed_proof), other,
                              bytes_of("junk-proof-bytes-padding-padding-x"));
    CHECK_THROWS_AS(client.get(), FrameError);
}

TEST_CASE("in-memory and loopback transports produce identical reveal outputs", "[net]") {
    // Fixed per-participant randomness plus the lex list policy make the
    // result independent of socket arrival order.
    auto f = make_net_fixture(3, 18, "transparent", core::ListPolicy::lex);

    std::vector<core::ParticipantSpec> specs;
    for (std::uint64_t i = 1; i <= 3; ++i)
        specs.push_back(core::ParticipantSpec{i, f.keypairs[i - 1],
                                              bytes_of("tt-" + std::to_string(i)),
                                              oracles::fixed_rand_hook(i, "transparent")});
    auto mem_commit = core::run_commit_in_memory(f.params, f.pki, specs);
    REQUIRE(mem_commit.completed);
    solver::SolverConfig sc;
    sc.algo = puzzle::SolverAlgo::bsgs;
    auto mem_out = core::reveal(mem_commit.seed, mem_commit.signatures, mem_commit.ciphertexts,
                                f.params, sc);
    const Bytes mem_bytes = core::reveal_output_to_bytes(f.params, mem_out);

    net::ServerConfig config;
    config.timeout_secs = 20.0;
    ServerRun server(f, config);
    std::vector<std::future<net::ClientResult>> clients;
    for (std::uint64_t i = 1; i <= 3; ++i) {
        clients.push_back(std::async(std::launch::async, [&, i] {
            net::ClientConfig cc;
            cc.timeout_secs = 20.0;
            cc.rand = oracles::fixed_rand_hook(i, "transparent");
            return net::run_participant_client(f.params, server.address, i, f.keypairs[i - 1],
                                               bytes_of("tt-" + std::to_string(i)), cc);
        }));
    }
    for (auto& c : clients) REQUIRE(c.get().done);
    auto result = server.result.get();
    REQUIRE(result.completed);
    auto net_out =
        core::reveal(result.seed, result.signatures, result.ciphertexts, f.params, sc);
    CHECK(core::reveal_output_to_bytes(f.params, net_out) == mem_bytes);
}
