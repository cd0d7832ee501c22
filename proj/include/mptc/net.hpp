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

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mptc/bytes.hpp"
#include "mptc/core.hpp"
#include "mptc/errors.hpp"

// Wire protocol and TCP transport for the commit phase.
//
// Frame layout, bit-exact:
//   total_length (4-byte BE, covers everything after itself)
//   version      (1 byte, 0x01)
//   msg_type     (1 byte)
//   session_id   (16 bytes)
//   payload      (type-specific body)
//
// One reliable ordered connection per participant per session; there is no
// retransmission logic above the transport. The server funnels every decoded
// message into a single coordinator session guarded by one mutex, so all
// protocol state mutation is serialized.

namespace mptc::net {

inline constexpr std::uint16_t kDefaultPort = 7431;
inline constexpr std::uint8_t kProtocolVersion = 0x01;
inline constexpr std::uint32_t kMaxFrameBytes = 16u << 20;

// Chain-variant counterparts live at base + 0x0f (0x10 .. 0x15).
enum class MsgType : std::uint8_t {
    nonce = 0x01,
    seed_proof = 0x02,
    commit_hash = 0x03,
    commit_list = 0x04,
    signed_ciphertext = 0x05,
    abort = 0x06,
};

inline constexpr std::uint8_t kChainTypeOffset = 0x0f;

using SessionId = std::array<std::uint8_t, 16>;

struct WireMessage {
    std::uint8_t version = kProtocolVersion;
    std::uint8_t msg_type = 0;
    SessionId session_id{};
    Bytes payload;
};

inline Bytes encode_message(const WireMessage& msg) {
    Bytes out;
    const std::uint32_t body_len =
        static_cast<std::uint32_t>(1 + 1 + msg.session_id.size() + msg.payload.size());
    put_u32_be(out, body_len);
    out.push_back(msg.version);
    out.push_back(msg.msg_type);
    append(out, msg.session_id);
    append(out, msg.payload);
    return out;
}

// Decodes a complete frame (including the length prefix).
inline WireMessage decode_message(std::span<const std::uint8_t> frame) {
    try {
        ByteReader in(frame);
        const std::uint32_t body_len = in.u32_be();
        if (body_len != in.remaining()) throw FrameError("frame length mismatch");
        if (body_len < 18) throw FrameError("frame too short");
        if (body_len > kMaxFrameBytes) throw FrameError("frame exceeds size limit");
        WireMessage msg;
        msg.version = in.u8();
        if (msg.version != kProtocolVersion)
            throw VersionError("unsupported protocol version");
        msg.msg_type = in.u8();
        auto sid = in.take(msg.session_id.size());
        std::copy(sid.begin(), sid.end(), msg.session_id.begin());
        msg.payload = in.take_bytes(in.remaining());
        return msg;
    } catch (const DecodeError& e) {
        throw FrameError(e.what());
    }
}

// --------------------------------------------------------------------------
// Payload codecs between frames and the core message structs.

inline Bytes encode_nonce(const core::MsgNonce& m) {
    Bytes out;
    put_u64_be(out, m.index);
    append(out, m.nonce);
    return out;
}

inline core::MsgNonce decode_nonce(std::span<const std::uint8_t> payload) {
    ByteReader in(payload);
    core::MsgNonce m;
    m.index = in.u64_be();
    m.nonce = suite::digest_from_span(in.take(suite::kDigestSize));
    in.expect_done();
    return m;
}

inline Bytes encode_seed_proof(const core::MsgSeedProof& m) {
    Bytes out;
    append(out, m.seed.bytes);
    append(out, merkle::proof_to_bytes(m.proof));
    return out;
}

inline core::MsgSeedProof decode_seed_proof(std::span<const std::uint8_t> payload) {
    ByteReader in(payload);
    core::MsgSeedProof m;
    m.seed = prng::Seed::from_span(in.take(32));
    m.proof = merkle::proof_from_reader(in);
    in.expect_done();
    return m;
}

inline Bytes encode_commit_hash(const core::MsgCommitHash& m) {
    Bytes out;
    put_u64_be(out, m.index);
    append(out, m.commitment);
    return out;
}

inline core::MsgCommitHash decode_commit_hash(std::span<const std::uint8_t> payload) {
    ByteReader in(payload);
    core::MsgCommitHash m;
    m.index = in.u64_be();
    m.commitment = suite::digest_from_span(in.take(suite::kDigestSize));
    in.expect_done();
    return m;
}

inline Bytes encode_commit_list(const core::MsgCommitList& m) {
    Bytes out;
    put_u32_be(out, static_cast<std::uint32_t>(m.list.entries.size()));
    for (const auto& entry : m.list.entries) {
        append(out, entry.h);
        put_u64_be(out, entry.index);
    }
    return out;
}

inline core::MsgCommitList decode_commit_list(std::span<const std::uint8_t> payload) {
    ByteReader in(payload);
    core::MsgCommitList m;
    const std::uint32_t count = in.u32_be();
    for (std::uint32_t i = 0; i < count; ++i) {
        core::CommitmentEntry entry;
        entry.h = suite::digest_from_span(in.take(suite::kDigestSize));
        entry.index = in.u64_be();
        m.list.entries.push_back(entry);
    }
    in.expect_done();
    return m;
}

inline Bytes encode_signed_ciphertext(const core::MsgSignedCiphertext& m) {
    Bytes out;
    put_u64_be(out, m.index);
    put_u16_be(out, static_cast<std::uint16_t>(m.signature.size()));
    append(out, m.signature);
    append(out, elgamal::ciphertext_to_bytes(m.ciphertext));
    return out;
}

inline core::MsgSignedCiphertext decode_signed_ciphertext(
    std::span<const std::uint8_t> payload) {
    ByteReader in(payload);
    core::MsgSignedCiphertext m;
    m.index = in.u64_be();
    m.signature = in.take_bytes(in.u16_be());
    m.ciphertext = elgamal::ciphertext_from_reader(in);
    in.expect_done();
    return m;
}

inline Bytes encode_abort(core::AbortReason reason) {
    Bytes out;
    out.push_back(static_cast<std::uint8_t>(reason));
    append(out, std::string_view(core::abort_reason_name(reason)));
    return out;
}

inline core::AbortReason decode_abort(std::span<const std::uint8_t> payload) {
    ByteReader in(payload);
    const std::uint8_t code = in.u8();
    if (code > static_cast<std::uint8_t>(core::AbortReason::disconnected))
        return core::AbortReason::protocol_violation;
    return static_cast<core::AbortReason>(code);
}

// --------------------------------------------------------------------------
// Sockets.

namespace detail {

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    Socket& operator=(Socket&& other) noexcept {
        if (this != &other) {
            close_fd();
            fd_ = other.fd_;
            other.fd_ = -1;
        }
        return *this;
    }
    ~Socket() { close_fd(); }

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    void shutdown_both() {
        if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
    }

private:
    void close_fd() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    int fd_ = -1;
};

inline std::pair<std::string, std::uint16_t> split_hostport(const std::string& address) {
    auto pos = address.rfind(':');
    if (pos == std::string::npos) return {address, kDefaultPort};
    const std::string host = address.substr(0, pos);
    const int port = std::stoi(address.substr(pos + 1));
    if (port < 1 || port > 65535) throw ConfigError("port out of range: " + address);
    return {host.empty() ? "127.0.0.1" : host, static_cast<std::uint16_t>(port)};
}

inline void set_recv_timeout(int fd, double seconds) {
    timeval tv{};
    tv.tv_sec = static_cast<long>(seconds);
    tv.tv_usec = static_cast<long>((seconds - static_cast<double>(tv.tv_sec)) * 1e6);
    setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

inline void send_all(int fd, std::span<const std::uint8_t> data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) throw NetError("send failed");
        sent += static_cast<std::size_t>(n);
    }
}

// Full frame (length prefix included); empty optional on orderly close or
// receive timeout.
inline std::optional<Bytes> read_frame(int fd) {
    auto read_exact = [fd](std::uint8_t* dst, std::size_t len) -> bool {
        std::size_t got = 0;
        while (got < len) {
            const ssize_t n = ::recv(fd, dst + got, len - got, 0);
            if (n <= 0) return false;
            got += static_cast<std::size_t>(n);
        }
        return true;
    };
    std::uint8_t header[4];
    if (!read_exact(header, 4)) return std::nullopt;
    const std::uint32_t body_len = (std::uint32_t(header[0]) << 24) |
                                   (std::uint32_t(header[1]) << 16) |
                                   (std::uint32_t(header[2]) << 8) | header[3];
    if (body_len < 18 || body_len > kMaxFrameBytes) throw FrameError("bad frame length");
    Bytes frame(4 + body_len);
    std::copy(header, header + 4, frame.begin());
    if (!read_exact(frame.data() + 4, body_len)) return std::nullopt;
    return frame;
}

inline Socket connect_to(const std::string& address) {
    auto [host, port] = split_hostport(address);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0)
        throw NetError("cannot resolve " + address);
    Socket sock;
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
            sock = Socket(fd);
            break;
        }
        ::close(fd);
    }
    freeaddrinfo(res);
    if (!sock.valid()) throw NetError("connection to " + address + " refused");
    int one = 1;
    setsockopt(sock.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return sock;
}

inline Socket listen_on(const std::string& address, std::uint16_t* bound_port = nullptr) {
    auto [host, port] = split_hostport(address);
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw NetError("socket() failed");
    Socket sock(fd);
    int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (host == "0.0.0.0" || host.empty()) {
        addr.sin_addr.s_addr = INADDR_ANY;
    } else if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        throw NetError("bad bind address: " + host);
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw NetError("cannot bind " + address);
    if (::listen(fd, 64) != 0) throw NetError("listen() failed");
    if (bound_port != nullptr) {
        sockaddr_in actual{};
        socklen_t len = sizeof(actual);
        getsockname(fd, reinterpret_cast<sockaddr*>(&actual), &len);
        *bound_port = ntohs(actual.sin_port);
    }
    return sock;
}

}  // namespace detail

// --------------------------------------------------------------------------
// Coordinator server.

struct ServerConfig {
    SessionId session_id{};
    double timeout_secs = 30.0;
    bool chain_mode = false;
    Bytes chain_metadata;
    // Called once the listener is bound, with the actual port (useful with
    // an ephemeral bind port).
    std::function<void(std::uint16_t)> on_listening;
    // Called (locked) after a nonce is accepted; lets tests sequence clients.
    std::function<void(std::uint64_t)> on_nonce_accepted;
};

struct ServerResult {
    bool completed = false;
    core::AbortReason failure = core::AbortReason::none;
    prng::Seed seed;
    core::CommitmentList list;
    std::vector<Bytes> signatures;
    std::vector<std::pair<elgamal::Ciphertext, std::uint64_t>> ciphertexts;
    std::vector<std::uint64_t> seed_order;
    std::vector<std::pair<std::uint64_t, suite::Digest>> nonces;
};

namespace detail {

struct ServerState {
    core::CoordinatorSession session;
    std::mutex mutex;
    std::condition_variable done_cv;
    std::map<std::uint64_t, int> conn_fd;  // admitted participant -> socket
    bool finished = false;

    ServerState(const core::ProtocolParams& params, const suite::PkiRegistry& pki,
                bool chain_mode, Bytes metadata)
        : session(params, pki, chain_mode, std::move(metadata)) {}
};

inline void send_message(int fd, std::uint8_t type, const SessionId& sid, Bytes payload) {
    WireMessage msg;
    msg.msg_type = type;
    msg.session_id = sid;
    msg.payload = std::move(payload);
    send_all(fd, encode_message(msg));
}

inline std::uint8_t wire_type(MsgType base, bool chain_mode) {
    return static_cast<std::uint8_t>(base) + (chain_mode ? kChainTypeOffset : 0);
}

// Routes one coordinator step result to the participant sockets. Caller holds
// the state mutex.
inline void route_step(const core::CoordinatorSession::Step& step, ServerState& state,
                       const ServerConfig& config) {
    for (const auto& out : step.outgoing) {
        auto it = state.conn_fd.find(out.index);
        if (it == state.conn_fd.end()) continue;
        try {
            if (std::holds_alternative<core::MsgSeedProof>(out.message)) {
                send_message(it->second, wire_type(MsgType::seed_proof, config.chain_mode),
                             config.session_id,
                             encode_seed_proof(std::get<core::MsgSeedProof>(out.message)));
            } else {
                send_message(it->second, wire_type(MsgType::commit_list, config.chain_mode),
                             config.session_id,
                             encode_commit_list(std::get<core::MsgCommitList>(out.message)));
            }
        } catch (const NetError&) {
            // The read loop of that connection notices the failure.
        }
    }
}

}  // namespace detail

// Accepts exactly N participant connections, pumps their messages through the
// coordinator state machine and returns once the commit phase completes or
// the deadline passes. A rejected message from an admitted participant aborts
// the session (her slot could never be filled); extra or duplicate-index
// connections are turned away without disturbing the session.
inline ServerResult run_coordinator_server(const core::ProtocolParams& params,
                                           const std::string& bind_address,
                                           const suite::PkiRegistry& pki,
                                           const ServerConfig& config = {}) {
    detail::ServerState state(params, pki, config.chain_mode, config.chain_metadata);
    std::uint16_t port = 0;
    detail::Socket listener = detail::listen_on(bind_address, &port);
    detail::set_recv_timeout(listener.fd(), 0.2);
    if (config.on_listening) config.on_listening(port);

    std::vector<std::thread> readers;
    std::vector<detail::Socket> sockets;
    std::mutex sockets_mutex;
    std::atomic<bool> stop_accepting{false};

    auto handle_connection = [&](int fd) {
        std::optional<std::uint64_t> bound_index;
        try {
            while (true) {
                auto frame = detail::read_frame(fd);
                if (!frame) break;  // disconnect or timeout
                WireMessage msg = decode_message(*frame);
                if (msg.session_id != config.session_id) throw FrameError("wrong session id");
                const std::uint8_t base = config.chain_mode && msg.msg_type >= 0x10
                                              ? msg.msg_type - kChainTypeOffset
                                              : msg.msg_type;
                std::unique_lock lock(state.mutex);
                if (state.finished) break;
                core::CoordinatorSession::Step step;
                switch (static_cast<MsgType>(base)) {
                    case MsgType::nonce: {
                        auto m = decode_nonce(msg.payload);
                        step = state.session.on_nonce(m);
                        if (!step.reject) {
                            bound_index = m.index;
                            state.conn_fd[m.index] = fd;
                            if (config.on_nonce_accepted) config.on_nonce_accepted(m.index);
                        }
                        break;
                    }
                    case MsgType::commit_hash:
                        step = state.session.on_commit_hash(decode_commit_hash(msg.payload));
                        break;
                    case MsgType::signed_ciphertext:
                        step = state.session.on_signed_ciphertext(
                            decode_signed_ciphertext(msg.payload));
                        break;
                    default:
                        throw FrameError("unexpected message type");
                }
                if (step.reject) {
                    detail::send_message(fd, detail::wire_type(MsgType::abort, config.chain_mode),
                                         config.session_id, encode_abort(step.reject->reason));
                    if (bound_index && *bound_index == step.reject->index) {
                        // An admitted participant misbehaved; the session can
                        // never complete.
                        state.session.abort(step.reject->reason);
                        state.finished = true;
                        state.done_cv.notify_all();
                    }
                    break;
                }
                detail::route_step(step, state, config);
                if (state.session.state() == core::CoordinatorSession::State::complete) {
                    state.finished = true;
                    state.done_cv.notify_all();
                }
            }
        } catch (const Error&) {
            // Frame garbage or send failure: drop the connection. If the
            // participant was already admitted the session times out.
        }
    };

    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::duration<double>(config.timeout_secs);
    std::thread acceptor([&] {
        while (!stop_accepting.load()) {
            sockaddr_in peer{};
            socklen_t len = sizeof(peer);
            int fd = ::accept(listener.fd(), reinterpret_cast<sockaddr*>(&peer), &len);
            if (fd < 0) {
                if (std::chrono::steady_clock::now() >= deadline) break;
                continue;  // accept timeout tick
            }
            int one = 1;
            setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            detail::set_recv_timeout(fd, config.timeout_secs);
            std::lock_guard lock(sockets_mutex);
            sockets.emplace_back(fd);
            readers.emplace_back(handle_connection, fd);
        }
    });

    ServerResult result;
    {
        std::unique_lock lock(state.mutex);
        state.done_cv.wait_until(lock, deadline, [&] { return state.finished; });
        if (!state.finished) {
            state.session.abort(core::AbortReason::timeout);
            state.finished = true;
        }
        if (state.session.state() == core::CoordinatorSession::State::complete) {
            result.completed = true;
            result.seed = state.session.seed();
            result.list = state.session.commitment_list();
            result.signatures = state.session.signatures();
            result.ciphertexts = state.session.ciphertexts();
            result.seed_order = state.session.arrival_order();
            result.nonces = state.session.nonces();
        } else {
            result.failure = state.session.abort_reason();
            for (const auto& [index, fd] : state.conn_fd) {
                try {
                    detail::send_message(fd, detail::wire_type(MsgType::abort, config.chain_mode),
                                         config.session_id, encode_abort(result.failure));
                } catch (const Error&) {
                }
            }
        }
    }

    stop_accepting.store(true);
    {
        std::lock_guard lock(sockets_mutex);
        for (auto& s : sockets) s.shutdown_both();
    }
    listener.shutdown_both();
    acceptor.join();
    for (auto& t : readers) t.join();
    return result;
}

// --------------------------------------------------------------------------
// Participant client.

struct ClientConfig {
    SessionId session_id{};
    double timeout_secs = 30.0;
    bool chain_mode = false;
    core::RandHook rand;
};

struct ClientResult {
    bool done = false;
    core::AbortReason reason = core::AbortReason::none;
};

// Connects, runs the participant state machine over the socket until the
// final signed ciphertext is sent (done) or the session aborts. Connection
// failures throw NetError; a frame addressed to a different session throws
// FrameError; in-protocol trouble is reported through ClientResult.
inline ClientResult run_participant_client(const core::ProtocolParams& params,
                                           const std::string& connect_address,
                                           std::uint64_t index, const suite::KeyPair& keypair,
                                           const Bytes& message,
                                           const ClientConfig& config = {}) {
    detail::Socket sock = detail::connect_to(connect_address);
    detail::set_recv_timeout(sock.fd(), config.timeout_secs);

    core::ParticipantSession session(params, index, keypair, message, config.rand,
                                     config.chain_mode);
    auto first = session.start();
    if (session.state() == core::ParticipantSession::State::aborted)
        return {false, session.abort_reason()};
    detail::send_message(sock.fd(), detail::wire_type(MsgType::nonce, config.chain_mode),
                         config.session_id,
                         encode_nonce(std::get<core::MsgNonce>(*first.message)));

    while (true) {
        auto frame = detail::read_frame(sock.fd());
        if (!frame) return {false, core::AbortReason::disconnected};
        WireMessage msg = decode_message(*frame);
        if (msg.session_id != config.session_id) throw FrameError("wrong session id");
        const std::uint8_t base = config.chain_mode && msg.msg_type >= 0x10
                                      ? msg.msg_type - kChainTypeOffset
                                      : msg.msg_type;
        core::ParticipantSession::Step step;
        switch (static_cast<MsgType>(base)) {
            case MsgType::seed_proof:
                try {
                    step = session.on_seed_proof(decode_seed_proof(msg.payload));
                } catch (const Error&) {
                    return {false, core::AbortReason::protocol_violation};
                }
                break;
            case MsgType::commit_list:
                try {
                    step = session.on_commit_list(decode_commit_list(msg.payload));
                } catch (const Error&) {
                    return {false, core::AbortReason::protocol_violation};
                }
                break;
            case MsgType::abort:
                return {false, decode_abort(msg.payload)};
            default:
                return {false, core::AbortReason::protocol_violation};
        }
        if (session.state() == core::ParticipantSession::State::aborted)
            return {false, session.abort_reason()};
        if (step.message) {
            if (std::holds_alternative<core::MsgCommitHash>(*step.message)) {
                detail::send_message(
                    sock.fd(), detail::wire_type(MsgType::commit_hash, config.chain_mode),
                    config.session_id,
                    encode_commit_hash(std::get<core::MsgCommitHash>(*step.message)));
            } else if (std::holds_alternative<core::MsgSignedCiphertext>(*step.message)) {
                detail::send_message(
                    sock.fd(), detail::wire_type(MsgType::signed_ciphertext, config.chain_mode),
                    config.session_id,
                    encode_signed_ciphertext(
                        std::get<core::MsgSignedCiphertext>(*step.message)));
            }
        }
        if (session.state() == core::ParticipantSession::State::done) return {true};
    }
}

}  // namespace mptc::net
