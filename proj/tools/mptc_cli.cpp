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

// Operator entry points: key generation, coordinator/participant endpoints,
// difficulty calibration, standalone puzzle solving, output/block
// verification and the single-process chain demo.
//
// Exit codes: 0 success (or TRUE verification), 1 FALSE verification,
// 2 usage error, 3 protocol abort.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

#include "mptc/chain.hpp"
#include "mptc/core.hpp"
#include "mptc/net.hpp"
#include "mptc/numtheory.hpp"
#include "mptc/puzzle.hpp"
#include "mptc/solver.hpp"
#include "mptc/suite.hpp"

namespace {

using json = nlohmann::json;
using namespace mptc;

constexpr int kExitOk = 0;
constexpr int kExitFalse = 1;
constexpr int kExitUsage = 2;
constexpr int kExitAbort = 3;

struct CommonOpts {
    bool json_output = false;
};

void emit(const CommonOpts& opts, const json& event, const std::string& human) {
    if (opts.json_output)
        std::cout << event.dump() << "\n";
    else
        std::cout << human << "\n";
}

net::SessionId parse_session_id(const std::string& hex) {
    if (hex.empty()) return {};
    Bytes raw = from_hex(hex);
    if (raw.size() != 16) throw ConfigError("--session must be 32 hex characters");
    net::SessionId sid{};
    std::copy(raw.begin(), raw.end(), sid.begin());
    return sid;
}

Bytes parse_message_arg(const std::string& arg) {
    if (!arg.empty() && arg.front() == '@') return read_file(arg.substr(1));
    return from_hex(arg);
}

std::string default_bind() {
    if (const char* env = std::getenv("MPTC_BIND"); env != nullptr && *env != '\0')
        return env;
    return "127.0.0.1:" + std::to_string(net::kDefaultPort);
}

core::ProtocolParams make_params(std::uint32_t n, int lambda_m, bool pcr,
                                 const std::string& table_path, const std::string& policy) {
    core::ProtocolParams params;
    params.n_participants = n;
    params.lambda_m = lambda_m;
    params.puzzle_mode = pcr ? puzzle::PuzzleMode::pcr : puzzle::PuzzleMode::table;
    if (!pcr) {
        if (table_path.empty())
            params.table = puzzle::build_difficulty_table({lambda_m});
        else
            params.table = puzzle::load_table(table_path);
    }
    if (policy == "lex")
        params.list_policy = core::ListPolicy::lex;
    else if (policy == "arrival")
        params.list_policy = core::ListPolicy::arrival;
    else
        throw ConfigError("unknown list policy: " + policy);
    return params;
}

solver::SolverConfig make_solver_config(const std::string& algo, int workers,
                                        std::uint64_t progress_interval,
                                        const CommonOpts& opts) {
    solver::SolverConfig config;
    config.algo = puzzle::parse_solver_algo(algo);
    config.workers = workers;
    config.progress_interval_ops = progress_interval;
    if (progress_interval > 0) {
        config.on_progress = [opts](std::uint64_t ops) {
            emit(opts, json{{"event", "progress"}, {"ops", ops}},
                 "... " + std::to_string(ops) + " ops");
        };
    }
    return config;
}

int cmd_keygen(const CommonOpts& opts, const std::string& keys_dir, std::uint32_t count,
               std::uint64_t start_index) {
    for (std::uint64_t i = start_index; i < start_index + count; ++i) {
        suite::KeyPair kp = suite::keypair_generate();
        suite::save_keypair(keys_dir, i, kp);
        emit(opts,
             json{{"event", "keygen"}, {"index", i}, {"public_key", to_hex(kp.public_key)}},
             "wrote " + keys_dir + "/" + std::to_string(i) + ".pub");
    }
    return kExitOk;
}

int cmd_calibrate(const CommonOpts& opts, double rate, double tau, const std::string& algo,
                  const std::string& table_path, int lambda_min, int lambda_max,
                  const std::string& emit_table) {
    puzzle::DifficultyTable table;
    if (!table_path.empty()) {
        table = puzzle::load_table(table_path);
    } else {
        std::vector<int> lambdas;
        for (int l = lambda_min; l <= lambda_max; ++l) lambdas.push_back(l);
        table = puzzle::build_difficulty_table(lambdas);
    }
    if (!emit_table.empty()) puzzle::save_table(emit_table, table);

    puzzle::CalibrationTarget target;
    target.tau_seconds = tau;
    target.solver_algo = puzzle::parse_solver_algo(algo);
    target.measured_rate_ops_per_sec = rate;
    const int lambda_m = puzzle::calibrate(target, table);
    const auto& row = table.row(lambda_m);
    emit(opts,
         json{{"event", "calibrate"},
              {"lambda_m", lambda_m},
              {"algo", algo},
              {"tau_seconds", tau},
              {"rate_ops_per_sec", rate},
              {"p", to_hex(nt::to_bytes_be(row.p))},
              {"g", to_hex(nt::to_bytes_be(row.g))}},
         "lambda_m=" + std::to_string(lambda_m));
    return kExitOk;
}

int cmd_solve_dl(const CommonOpts& opts, const std::string& p_hex, const std::string& g_hex,
                 const std::string& b_hex, const std::string& algo, int workers,
                 std::uint64_t progress_interval) {
    puzzle::Puzzle puz;
    puz.p = nt::from_bytes_be(from_hex(p_hex));
    puz.g = nt::from_bytes_be(from_hex(g_hex));
    puz.b = nt::from_bytes_be(from_hex(b_hex));
    puz.lambda_m = static_cast<int>(nt::bit_length(puz.p));
    if (!nt::is_safe_prime(puz.p)) throw ConfigError("--p is not a safe prime");
    if (!nt::is_group_generator(puz.p, puz.g)) throw ConfigError("--g does not generate Z*_p");
    if (puz.b < 2 || puz.b > puz.p - 1) throw ConfigError("--b outside [2, p-1]");

    solver::SolveReport report =
        solver::solve(puz, make_solver_config(algo, workers, progress_interval, opts));
    emit(opts,
         json{{"event", "solve"},
              {"a", to_hex(nt::to_bytes_be(report.solution.a))},
              {"ops", report.ops_performed},
              {"seconds", report.wall_seconds},
              {"algo", algo}},
         "a=" + to_hex(nt::to_bytes_be(report.solution.a)) +
             " ops=" + std::to_string(report.ops_performed) +
             " seconds=" + std::to_string(report.wall_seconds));
    return kExitOk;
}

int cmd_coordinator(const CommonOpts& opts, const std::string& bind, std::uint32_t n,
                    int lambda_m, bool pcr, const std::string& table_path,
                    const std::string& policy, const std::string& keys_dir,
                    const std::string& output_file, const std::string& algo, int workers,
                    double timeout_secs, const std::string& session_hex,
                    std::uint64_t progress_interval) {
    core::ProtocolParams params = make_params(n, lambda_m, pcr, table_path, policy);
    suite::PkiRegistry pki = suite::load_key_directory(keys_dir);

    net::ServerConfig server;
    server.session_id = parse_session_id(session_hex);
    server.timeout_secs = timeout_secs;
    emit(opts, json{{"event", "listening"}, {"address", bind}, {"n", n}},
         "listening on " + bind + " for " + std::to_string(n) + " participants");
    net::ServerResult commit = net::run_coordinator_server(params, bind, pki, server);
    if (!commit.completed) {
        emit(opts,
             json{{"event", "abort"}, {"reason", core::abort_reason_name(commit.failure)}},
             std::string("commit phase aborted: ") + core::abort_reason_name(commit.failure));
        return kExitAbort;
    }
    emit(opts, json{{"event", "commit_complete"}, {"seed", to_hex(commit.seed.bytes)}},
         "commit phase complete, seed " + to_hex(commit.seed.bytes));

    core::RevealOutput out =
        core::reveal(commit.seed, commit.signatures, commit.ciphertexts, params,
                     make_solver_config(algo, workers, progress_interval, opts));
    core::save_reveal_output(output_file, params, out);
    const bool valid = core::verify_output(params, out, pki);
    emit(opts,
         json{{"event", "reveal"},
              {"output_file", output_file},
              {"sk_tl", to_hex(nt::to_bytes_be(out.sk_tl.a))},
              {"ops", out.solve_ops},
              {"seconds", out.solve_wall_seconds},
              {"valid", valid}},
         "reveal done: sk=" + to_hex(nt::to_bytes_be(out.sk_tl.a)) + " ops=" +
             std::to_string(out.solve_ops) + " valid=" + (valid ? "TRUE" : "FALSE"));
    return valid ? kExitOk : kExitFalse;
}

int cmd_participant(const CommonOpts& opts, const std::string& connect, std::uint64_t index,
                    int lambda_m, bool pcr, const std::string& table_path,
                    const std::string& policy, const std::string& keys_dir,
                    const std::string& message_arg, double timeout_secs,
                    const std::string& session_hex) {
    core::ProtocolParams params = make_params(1, lambda_m, pcr, table_path, policy);
    suite::KeyPair kp;
    kp.secret_key = suite::load_secret_key(keys_dir, index);
    suite::PkiRegistry pki = suite::load_key_directory(keys_dir);
    kp.public_key = pki.lookup(index);

    net::ClientConfig client;
    client.session_id = parse_session_id(session_hex);
    client.timeout_secs = timeout_secs;
    net::ClientResult result = net::run_participant_client(
        params, connect, index, kp, parse_message_arg(message_arg), client);
    if (!result.done) {
        emit(opts, json{{"event", "abort"}, {"reason", core::abort_reason_name(result.reason)}},
             std::string("aborted: ") + core::abort_reason_name(result.reason));
        return kExitAbort;
    }
    emit(opts, json{{"event", "committed"}, {"index", index}},
         "commitment accepted for participant " + std::to_string(index));
    return kExitOk;
}

int cmd_verify(const CommonOpts& opts, const std::string& output_file,
               const std::string& keys_dir, const std::string& table_path) {
    core::RevealOutputFile file = core::load_reveal_output(output_file);
    if (file.params.puzzle_mode == puzzle::PuzzleMode::table) {
        if (table_path.empty())
            file.params.table = puzzle::build_difficulty_table({file.params.lambda_m});
        else
            file.params.table = puzzle::load_table(table_path);
    }
    suite::PkiRegistry pki = suite::load_key_directory(keys_dir);
    core::VerifyCheck check = core::verify_output_detailed(file.params, file.output, pki);
    const bool ok = check == core::VerifyCheck::ok;
    emit(opts,
         json{{"event", "verify"},
              {"result", ok},
              {"failing_check", ok ? "" : core::verify_check_name(check)}},
         ok ? "TRUE" : std::string("FALSE (") + core::verify_check_name(check) + ")");
    return ok ? kExitOk : kExitFalse;
}

int cmd_verify_block(const CommonOpts& opts, const std::string& block_file,
                     const std::string& keys_dir) {
    chain::Block block = chain::load_block(block_file);
    suite::PkiRegistry pki = suite::load_key_directory(keys_dir);
    core::ProtocolParams params;
    params.lambda_m = block.lambda_m;
    params.suite = block.suite;
    chain::BlockVerifyResult result = chain::verify_block_detailed(block, params, pki);
    emit(opts,
         json{{"event", "verify_block"},
              {"result", result.ok},
              {"failing_check", result.failing_check}},
         result.ok ? "TRUE" : "FALSE (" + result.failing_check + ")");
    return result.ok ? kExitOk : kExitFalse;
}

int cmd_chain_demo(const CommonOpts& opts, std::uint32_t users, int lambda_m,
                   const std::string& metadata_hex, std::uint64_t height,
                   const std::string& algo, int workers, const std::string& block_out) {
    core::ProtocolParams params;
    params.n_participants = users;
    params.lambda_m = lambda_m;
    params.puzzle_mode = puzzle::PuzzleMode::pcr;

    chain::Metadata metadata;
    metadata.miner_id = metadata_hex.empty() ? bytes_of("demo-miner") : from_hex(metadata_hex);
    metadata.height = height;

    suite::PkiRegistry pki;
    std::vector<chain::ChainUser> chain_users;
    for (std::uint32_t i = 1; i <= users; ++i) {
        chain::ChainUser user;
        user.index = i;
        user.keypair = suite::keypair_generate();
        user.message = bytes_of("tx-" + std::to_string(i));
        pki.register_key(i, user.keypair.public_key);
        chain_users.push_back(std::move(user));
    }

    auto outcome = chain::create_block(metadata, std::move(chain_users), params, pki,
                                       make_solver_config(algo, workers, 0, opts));
    if (std::holds_alternative<chain::CommitAborted>(outcome)) {
        const auto& aborted = std::get<chain::CommitAborted>(outcome);
        emit(opts,
             json{{"event", "abort"}, {"reason", core::abort_reason_name(aborted.reason)}},
             std::string("commit aborted: ") + core::abort_reason_name(aborted.reason));
        return kExitAbort;
    }
    if (std::holds_alternative<chain::BlockInvalidated>(outcome)) {
        const auto& bad = std::get<chain::BlockInvalidated>(outcome);
        emit(opts, json{{"event", "block_invalidated"}, {"user", bad.user_index}},
             "block invalidated by user " + std::to_string(bad.user_index));
        return kExitAbort;
    }
    const chain::Block& block = std::get<chain::Block>(outcome);
    if (!block_out.empty()) chain::save_block(block_out, block);

    auto seed = chain::detail::rebuild_seed(block);
    puzzle::Puzzle puz = puzzle::pcr_gen_puz(block.lambda_m, *seed);
    const bool ok = chain::verify_block(block, params, pki);
    emit(opts,
         json{{"event", "chain_demo"},
              {"users", users},
              {"lambda_m", lambda_m},
              {"p", to_hex(nt::to_bytes_be(puz.p))},
              {"g", to_hex(nt::to_bytes_be(puz.g))},
              {"b", to_hex(nt::to_bytes_be(puz.b))},
              {"verify_block", ok}},
         "verify_block=" + std::string(ok ? "TRUE" : "FALSE") + " puzzle p=" +
             to_hex(nt::to_bytes_be(puz.p)) + " g=" + to_hex(nt::to_bytes_be(puz.g)) +
             " b=" + to_hex(nt::to_bytes_be(puz.b)));
    return ok ? kExitOk : kExitFalse;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"timecapsule: multi-party timed commitments"};
    app.require_subcommand(1);
    app.set_config("--config");

    CommonOpts opts;
    app.add_flag("--json", opts.json_output, "machine-readable JSON-lines output");

    // keygen
    auto* keygen = app.add_subcommand("keygen", "generate participant key pairs");
    std::string kg_keys;
    std::uint32_t kg_count = 1;
    std::uint64_t kg_start = 1;
    keygen->add_option("--keys", kg_keys, "key directory")->required();
    keygen->add_option("--count", kg_count, "number of key pairs");
    keygen->add_option("--start-index", kg_start, "first participant index");

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "pick lambda_m for a target delay");
    double cal_rate = 0.0, cal_tau = 0.0;
    std::string cal_algo = "naive", cal_table, cal_emit;
    int cal_min = 8, cal_max = 28;
    calibrate->add_option("--rate", cal_rate, "measured solver ops per second")->required();
    calibrate->add_option("--tau", cal_tau, "target mean reveal delay in seconds")->required();
    calibrate->add_option("--algo", cal_algo, "naive|bsgs|rho");
    calibrate->add_option("--table", cal_table, "difficulty table file to consume");
    calibrate->add_option("--lambda-min", cal_min, "smallest lambda_m to build");
    calibrate->add_option("--lambda-max", cal_max, "largest lambda_m to build");
    calibrate->add_option("--emit-table", cal_emit, "write the difficulty table to this file");

    // solve-dl
    auto* solve_dl = app.add_subcommand("solve-dl", "solve a standalone DL puzzle");
    std::string sd_p, sd_g, sd_b, sd_algo = "naive";
    int sd_workers = 1;
    std::uint64_t sd_progress = 0;
    solve_dl->add_option("--p", sd_p, "prime, hex")->required();
    solve_dl->add_option("--g", sd_g, "generator, hex")->required();
    solve_dl->add_option("--b", sd_b, "target element, hex")->required();
    solve_dl->add_option("--algo", sd_algo, "naive|bsgs|rho");
    solve_dl->add_option("--workers", sd_workers, "parallel search units");
    solve_dl->add_option("--progress-interval", sd_progress, "ops between progress reports");

    // coordinator
    auto* coordinator = app.add_subcommand("coordinator", "run a coordinator session");
    std::string co_bind = default_bind(), co_table, co_policy = "arrival", co_keys,
                co_output, co_algo = "naive", co_session;
    std::uint32_t co_n = 0;
    int co_lambda = 20, co_workers = 1;
    bool co_pcr = false;
    double co_timeout = 30.0;
    std::uint64_t co_progress = 0;
    coordinator->add_option("--bind", co_bind, "listen address host:port");
    coordinator->add_option("--n", co_n, "number of participants")->required();
    coordinator->add_option("--lambda-m", co_lambda, "puzzle difficulty in bits");
    coordinator->add_flag("--pcr", co_pcr, "use the precomputation-resistant generator");
    coordinator->add_option("--table", co_table, "difficulty table file");
    coordinator->add_option("--policy", co_policy, "commitment list order: arrival|lex");
    coordinator->add_option("--keys", co_keys, "key directory (public keys)")->required();
    coordinator->add_option("--output-file", co_output, "reveal output file")->required();
    coordinator->add_option("--algo", co_algo, "naive|bsgs|rho");
    coordinator->add_option("--workers", co_workers, "solver workers");
    coordinator->add_option("--timeout-secs", co_timeout, "per-session timeout");
    coordinator->add_option("--session", co_session, "session id, 32 hex chars");
    coordinator->add_option("--progress-interval", co_progress, "ops between progress reports");

    // participant
    auto* participant = app.add_subcommand("participant", "commit one message");
    std::string pa_connect = default_bind(), pa_table, pa_policy = "arrival", pa_keys,
                pa_message, pa_session;
    std::uint64_t pa_index = 0;
    int pa_lambda = 20;
    bool pa_pcr = false;
    double pa_timeout = 30.0;
    participant->add_option("--connect", pa_connect, "coordinator address host:port");
    participant->add_option("--index", pa_index, "participant index")->required();
    participant->add_option("--lambda-m", pa_lambda, "puzzle difficulty in bits");
    participant->add_flag("--pcr", pa_pcr, "use the precomputation-resistant generator");
    participant->add_option("--table", pa_table, "difficulty table file");
    participant->add_option("--policy", pa_policy, "commitment list order: arrival|lex");
    participant->add_option("--keys", pa_keys, "key directory")->required();
    participant->add_option("--message", pa_message, "message, hex or @file")->required();
    participant->add_option("--timeout-secs", pa_timeout, "receive timeout");
    participant->add_option("--session", pa_session, "session id, 32 hex chars");

    // verify
    auto* verify = app.add_subcommand("verify", "verify a reveal output file");
    std::string ve_output, ve_keys, ve_table;
    verify->add_option("--output-file", ve_output, "reveal output file")->required();
    verify->add_option("--keys", ve_keys, "key directory")->required();
    verify->add_option("--table", ve_table, "difficulty table file (table mode)");

    // verify-block
    auto* verify_block = app.add_subcommand("verify-block", "verify a capsule-chain block");
    std::string vb_block, vb_keys;
    verify_block->add_option("--block-file", vb_block, "block file")->required();
    verify_block->add_option("--keys", vb_keys, "key directory")->required();

    // chain-demo
    auto* chain_demo = app.add_subcommand("chain-demo", "create and verify one block locally");
    std::uint32_t cd_users = 3;
    int cd_lambda = 20, cd_workers = 1;
    std::string cd_metadata, cd_algo = "naive", cd_block_out;
    std::uint64_t cd_height = 1;
    chain_demo->add_option("--users", cd_users, "number of in-process users");
    chain_demo->add_option("--lambda-m", cd_lambda, "puzzle difficulty in bits");
    chain_demo->add_option("--metadata", cd_metadata, "miner id bytes, hex");
    chain_demo->add_option("--height", cd_height, "block height");
    chain_demo->add_option("--algo", cd_algo, "naive|bsgs|rho");
    chain_demo->add_option("--workers", cd_workers, "solver workers");
    chain_demo->add_option("--block-file", cd_block_out, "also write the block here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*keygen) return cmd_keygen(opts, kg_keys, kg_count, kg_start);
        if (*calibrate)
            return cmd_calibrate(opts, cal_rate, cal_tau, cal_algo, cal_table, cal_min, cal_max,
                                 cal_emit);
        if (*solve_dl)
            return cmd_solve_dl(opts, sd_p, sd_g, sd_b, sd_algo, sd_workers, sd_progress);
        if (*coordinator)
            return cmd_coordinator(opts, co_bind, co_n, co_lambda, co_pcr, co_table, co_policy,
                                   co_keys, co_output, co_algo, co_workers, co_timeout,
                                   co_session, co_progress);
        if (*participant)
            return cmd_participant(opts, pa_connect, pa_index, pa_lambda, pa_pcr, pa_table,
                                   pa_policy, pa_keys, pa_message, pa_timeout, pa_session);
        if (*verify) return cmd_verify(opts, ve_output, ve_keys, ve_table);
        if (*verify_block) return cmd_verify_block(opts, vb_block, vb_keys);
        if (*chain_demo)
            return cmd_chain_demo(opts, cd_users, cd_lambda, cd_metadata, cd_height, cd_algo,
                                  cd_workers, cd_block_out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const TableRangeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DecodeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitAbort;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitAbort;
    }
    return kExitUsage;
}
