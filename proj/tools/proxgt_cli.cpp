// Command-line front-end: single runs, parameter sweeps, the invariant
// audit, and a spectral-gap table for the built-in topologies.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "proxgt/proxgt.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitInvariant = 3;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

proxgt::ExperimentConfig load_config(const CommonArgs& args) {
    std::ifstream in(args.config_path);
    if (!in) throw proxgt::ParseError("cannot open config file: " + args.config_path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::vector<std::string> warnings;
    proxgt::ExperimentConfig cfg = proxgt::ExperimentConfig::parse(buffer.str(), &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& kv : args.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw proxgt::ParseError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

int thread_budget() {
    if (const char* env = std::getenv("PROXGT_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

json summarize(const proxgt::ExperimentConfig& cfg, const proxgt::ResolvedExperiment& exp,
               const proxgt::RunResult& result) {
    json out;
    out["config"] = json::object();
    for (const auto& [k, v] : cfg.values()) out["config"][k] = v;
    out["resolved"] = json::object();
    for (const auto& [k, v] : exp.resolved_echo) out["resolved"][k] = v;

    const proxgt::RunRecord& last = result.last();
    out["final"]["t"] = last.t;
    out["final"]["stat_term"] = last.stat_term;
    out["final"]["stat_running_mean"] = last.stat_running_mean;
    out["final"]["consensus_err"] = last.consensus_err;
    out["final"]["psi"] = last.psi.is_infinite() ? json("inf") : json(last.psi.finite_value());
    out["final"]["psi_is_proxy"] = last.psi_is_proxy;
    out["final"]["samples_per_node"] = last.samples_per_node;
    out["final"]["comm_rounds"] = last.comm_rounds;
    out["final"]["wk_applications"] = 2 * static_cast<std::int64_t>(result.records.size());
    out["final"]["elapsed_ns"] = last.elapsed_ns;

    out["invariants"]["tracking"] = result.invariants.tracking;
    out["invariants"]["mean_recursion"] = result.invariants.mean_recursion;
    out["invariants"]["feasibility"] = result.invariants.feasibility;
    out["diverged"] = result.diverged;

    if (cfg.has("run.epsilon")) {
        const double epsilon = cfg.require_double("run.epsilon");
        const auto crossing = proxgt::samples_to_threshold(result.records, epsilon);
        out["crossing"]["epsilon"] = epsilon;
        if (crossing.has_value())
            out["crossing"]["samples_per_node"] = *crossing;
        else
            out["crossing"]["samples_per_node"] = "not_reached";
    }
    return out;
}

// Executes one resolved cell: run, write CSV + JSON, report divergence.
int execute_cell(const proxgt::ExperimentConfig& cfg, std::mutex* io_mutex,
                 const std::string& stem_suffix = "") {
    const proxgt::ResolvedExperiment exp = proxgt::resolve_experiment(cfg);
    const proxgt::RunResult result =
        proxgt::run(exp.run_cfg, exp.est_cfg, exp.oracle, exp.regularizer, exp.weights);

    const fs::path dir = cfg.get_string("output.dir", "out");
    fs::create_directories(dir);
    std::string stem = cfg.has("output.name")
                           ? cfg.get_string("output.name") + stem_suffix
                           : proxgt::config_hash(cfg);
    const fs::path csv_path = dir / (stem + ".csv");
    const fs::path json_path = dir / (stem + ".json");

    proxgt::write_csv(csv_path.string(), result.records, cfg.get_bool("output.timing", false));
    std::ofstream js(json_path);
    js << summarize(cfg, exp, result).dump(2) << "\n";

    {
        std::unique_lock<std::mutex> lock;
        if (io_mutex) lock = std::unique_lock<std::mutex>(*io_mutex);
        std::cout << "wrote " << csv_path.string() << " " << json_path.string() << "\n";
        if (result.diverged)
            std::cerr << "error: run diverged: " << result.divergence_message << "\n";
    }
    return result.diverged ? kExitDiverged : kExitOk;
}

int cmd_run(const CommonArgs& args) {
    const proxgt::ExperimentConfig base = load_config(args);
    const std::int64_t reps = base.get_int("run.repetitions", 1);
    const std::uint64_t seed = static_cast<std::uint64_t>(base.get_int("run.seed", 0));
    int status = kExitOk;
    for (std::int64_t r = 0; r < reps; ++r) {
        proxgt::ExperimentConfig cell = base;
        if (reps > 1) cell.set("run.seed", std::to_string(seed + static_cast<std::uint64_t>(r)));
        status = std::max(status,
                          execute_cell(cell, nullptr, reps > 1 ? "-r" + std::to_string(r) : ""));
    }
    return status;
}

int cmd_sweep(const CommonArgs& args) {
    const proxgt::ExperimentConfig base = load_config(args);
    auto split_list = [](const std::string& csv) {
        std::vector<std::string> out;
        std::stringstream ss(csv);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const std::string trimmed = proxgt::detail::trim(cell);
            if (!trimmed.empty()) out.push_back(trimmed);
        }
        return out;
    };

    std::vector<std::string> topologies = base.has("sweep.topology")
                                              ? split_list(base.get_string("sweep.topology"))
                                              : std::vector<std::string>{};
    std::vector<std::string> estimators = base.has("sweep.estimator")
                                              ? split_list(base.get_string("sweep.estimator"))
                                              : std::vector<std::string>{};
    std::vector<std::string> node_counts =
        base.has("sweep.n") ? split_list(base.get_string("sweep.n")) : std::vector<std::string>{};
    if (topologies.empty()) topologies.push_back("");
    if (estimators.empty()) estimators.push_back("");
    if (node_counts.empty()) node_counts.push_back("");

    const std::int64_t reps = base.get_int("run.repetitions", 1);
    const std::uint64_t seed = static_cast<std::uint64_t>(base.get_int("run.seed", 0));

    std::vector<proxgt::ExperimentConfig> grid;
    for (const auto& topo : topologies) {
        for (const auto& est : estimators) {
            for (const auto& nodes : node_counts) {
                for (std::int64_t r = 0; r < reps; ++r) {
                    proxgt::ExperimentConfig cell = base;
                    cell.erase("output.name");  // sweep cells are hash-named
                    if (!topo.empty()) cell.set("graph.topology", topo);
                    if (!est.empty()) cell.set("estimator.kind", est);
                    if (!nodes.empty()) {
                        cell.set("problem.n", nodes);
                        if (cell.has("graph.n")) cell.set("graph.n", nodes);
                    }
                    if (reps > 1)
                        cell.set("run.seed", std::to_string(seed + static_cast<std::uint64_t>(r)));
                    grid.push_back(std::move(cell));
                }
            }
        }
    }

    // Validate every cell before spending time on any of them.
    for (const auto& cell : grid) (void)proxgt::resolve_experiment(cell);

    std::atomic<std::size_t> next{0};
    std::atomic<int> status{kExitOk};
    std::mutex io_mutex;
    const int workers = std::min<int>(thread_budget(), static_cast<int>(grid.size()));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t idx = next.fetch_add(1);
                if (idx >= grid.size()) return;
                try {
                    const int code = execute_cell(grid[idx], &io_mutex);
                    int expected = status.load();
                    while (expected < code && !status.compare_exchange_weak(expected, code)) {
                    }
                } catch (const proxgt::Diverged& e) {
                    std::scoped_lock lock(io_mutex);
                    std::cerr << "error: " << e.what() << "\n";
                    status.store(kExitDiverged);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    std::cout << "sweep finished: " << grid.size() << " runs\n";
    return status.load();
}

int cmd_audit() {
    const std::vector<proxgt::AuditCheck> checks = proxgt::run_audit();
    std::size_t width = 0;
    for (const auto& c : checks) width = std::max(width, c.name.size());
    bool all_ok = true;
    for (const auto& c : checks) {
        all_ok = all_ok && c.passed;
        std::printf("%-*s  %s  %s\n", static_cast<int>(width), c.name.c_str(),
                    c.passed ? "PASS" : "FAIL", c.detail.c_str());
    }
    std::printf("%zu checks, %s\n", checks.size(), all_ok ? "all passed" : "FAILURES PRESENT");
    return all_ok ? kExitOk : kExitInvariant;
}

int cmd_gap(const CommonArgs& args) {
    const proxgt::ExperimentConfig cfg = load_config(args);
    const int n = static_cast<int>(
        cfg.get_int("graph.n", cfg.get_int("problem.n", 8)));
    const bool lazy = cfg.get_bool("graph.lazy", false);
    std::vector<std::string> kinds;
    if (cfg.has("graph.topology")) kinds.push_back(cfg.get_string("graph.topology"));
    for (const char* builtin : {"ring", "path", "grid2d", "complete", "star"}) {
        if (!kinds.empty() && kinds.front() == builtin) continue;
        kinds.push_back(builtin);
    }
    std::printf("%-12s %6s %12s %12s %6s\n", "topology", "n", "lambda_star", "gap", "K");
    for (const auto& kind : kinds) {
        try {
            const proxgt::Graph g = proxgt::build_topology_from_spec(kind, n);
            const proxgt::WeightMatrix w = proxgt::metropolis_weights(g, lazy);
            // Prescribed consensus rounds with the log factor evaluated at
            // zeta = 1, i.e. K = ceil(max(1, log n) / (1 - lambda_*)).
            const double log_term = std::max(1.0, std::log(static_cast<double>(n)));
            const int rounds = std::max(
                1, static_cast<int>(std::ceil(log_term / w.spectral_gap())));
            std::printf("%-12s %6d %12.6f %12.6f %6d\n", kind.c_str(), n, w.lambda_star,
                        w.spectral_gap(), rounds);
        } catch (const proxgt::BadShape&) {
            std::printf("%-12s %6d %12s %12s %6s\n", kind.c_str(), n, "-", "-", "-");
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ProxGT decentralized composite optimization simulator"};
    app.require_subcommand(1);

    CommonArgs run_args, sweep_args, gap_args;

    auto* run_cmd = app.add_subcommand("run", "execute one experiment (CSV + JSON outputs)");
    run_cmd->add_option("--config", run_args.config_path, "config file")->required();
    run_cmd->add_option("--set", run_args.overrides, "override key=value (repeatable)");

    auto* sweep_cmd = app.add_subcommand("sweep", "grid over topology/estimator/n");
    sweep_cmd->add_option("--config", sweep_args.config_path, "config file")->required();
    sweep_cmd->add_option("--set", sweep_args.overrides, "override key=value (repeatable)");

    auto* audit_cmd = app.add_subcommand("audit", "run the invariant suite");

    auto* gap_cmd = app.add_subcommand("gap", "print topology spectral-gap table");
    gap_cmd->add_option("--config", gap_args.config_path, "config file")->required();
    gap_cmd->add_option("--set", gap_args.overrides, "override key=value (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(run_args);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_args);
        if (audit_cmd->parsed()) return cmd_audit();
        if (gap_cmd->parsed()) return cmd_gap(gap_args);
    } catch (const proxgt::Diverged& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const proxgt::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
