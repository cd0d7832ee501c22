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

#include <stdexcept>
#include <string>

namespace mptc {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Precondition violations on mathematical inputs (modulus < 2, not a safe
// prime, empty leaf set, ...).
struct DomainError : Error {
    using Error::Error;
};

// Malformed or missing key material.
struct KeyError : Error {
    using Error::Error;
};

// Rejection sampling exceeded its iteration cap.
struct SamplingExhausted : Error {
    using Error::Error;
};

// prng read past the configured stream cap.
struct StreamCapExceeded : Error {
    using Error::Error;
};

// Difficulty table has no row for the requested security parameter.
struct UnknownDifficulty : Error {
    using Error::Error;
};

// No table row is hard enough for the calibration target.
struct TableRangeError : Error {
    using Error::Error;
};

// A solver would exceed its configured memory bound.
struct ResourceError : Error {
    using Error::Error;
};

// Bad configuration value (unknown algorithm id, bad flag combination).
struct ConfigError : Error {
    using Error::Error;
};

// Byte-level decoding failure of a serialized structure.
struct DecodeError : Error {
    using Error::Error;
};

// Transport frame is truncated, oversized, or has a wrong session id.
struct FrameError : Error {
    using Error::Error;
};

// Transport frame carries an unsupported protocol version.
struct VersionError : Error {
    using Error::Error;
};

// Out-of-range index (Merkle proofs, list slots).
struct IndexError : Error {
    using Error::Error;
};

// File system failure.
struct IoError : Error {
    using Error::Error;
};

// Socket-level failure (bind, connect, broken pipe).
struct NetError : Error {
    using Error::Error;
};

}  // namespace mptc
