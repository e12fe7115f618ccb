#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "proxgt/core.hpp"
#include "proxgt/errors.hpp"
#include "proxgt/estimators.hpp"
#include "proxgt/graph.hpp"
#include "proxgt/problems.hpp"
#include "proxgt/prox.hpp"

namespace proxgt {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "problem.kind", "problem.risk", "problem.n", "problem.p", "problem.m",
        "problem.heterogeneity", "problem.dataset", "problem.partition", "problem.a",
        "problem.noise", "problem.h", "problem.seed",
        "graph.topology", "graph.n", "graph.lazy", "graph.weights_csv",
        "estimator.kind", "estimator.b", "estimator.B", "estimator.q",
        "run.alpha", "run.K", "run.T", "run.theorem", "run.epsilon", "run.consensus",
        "run.seed", "run.x0", "run.psi_lower", "run.invariant_check_every",
        "run.repetitions", "run.proxy_samples",
        "run.mult_alpha", "run.mult_K", "run.mult_b", "run.mult_B", "run.mult_q", "run.mult_T",
        "output.dir", "output.name", "output.timing",
        "sweep.topology", "sweep.estimator", "sweep.n",
    };
    return keys;
}

// Section ordering for canonical rendering.
inline int section_rank(const std::string& key) {
    if (key.rfind("problem.", 0) == 0) return 0;
    if (key.rfind("graph.", 0) == 0) return 1;
    if (key.rfind("estimator.", 0) == 0) return 2;
    if (key.rfind("run.", 0) == 0) return 3;
    if (key.rfind("output.", 0) == 0) return 4;
    return 5;
}

}  // namespace detail

// Line-oriented experiment configuration: `section.key = value` per line,
// `#` starts a comment line, duplicate keys take the last value (with a
// warning), unknown keys are rejected.
class ExperimentConfig {
public:
    ExperimentConfig() = default;

    static ExperimentConfig parse(const std::string& text, std::vector<std::string>* warnings = nullptr) {
        ExperimentConfig cfg;
        std::istringstream in(text);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string stripped = detail::trim(line);
            if (stripped.empty() || stripped[0] == '#') continue;
            const auto eq = stripped.find('=');
            if (eq == std::string::npos)
                throw ParseError("line " + std::to_string(line_no) + ": expected key = value");
            const std::string key = detail::trim(stripped.substr(0, eq));
            const std::string value = detail::trim(stripped.substr(eq + 1));
            cfg.set(key, value, warnings);
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value,
             std::vector<std::string>* warnings = nullptr) {
        if (detail::known_keys().count(key) == 0) throw UnknownKey("unknown config key: " + key);
        if (values_.count(key) && warnings)
            warnings->push_back("duplicate key '" + key + "': last value wins");
        values_[key] = value;
    }

    // Canonical rendering: keys grouped by section in fixed order,
    // alphabetical within a section. parse(render(c)) == c.
    std::string render() const {
        std::vector<std::string> keys;
        keys.reserve(values_.size());
        for (const auto& [k, v] : values_) keys.push_back(k);
        std::sort(keys.begin(), keys.end(), [](const std::string& a, const std::string& b) {
            const int ra = detail::section_rank(a), rb = detail::section_rank(b);
            if (ra != rb) return ra < rb;
            return a < b;
        });
        std::string out;
        int last_rank = -1;
        for (const auto& k : keys) {
            const int rank = detail::section_rank(k);
            if (rank != last_rank && last_rank != -1) out.push_back('\n');
            last_rank = rank;
            out += k;
            out += " = ";
            out += values_.at(k);
            out.push_back('\n');
        }
        return out;
    }

    void erase(const std::string& key) { values_.erase(key); }

    bool operator==(const ExperimentConfig& other) const { return values_ == other.values_; }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    const std::map<std::string, std::string>& values() const { return values_; }

    std::string get_string(const std::string& key, const std::string& fallback = "") const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require_string(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw MissingRequired("missing required config key: " + key);
        return it->second;
    }

    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse_int(key, it->second);
    }

    std::int64_t require_int(const std::string& key) const {
        return parse_int(key, require_string(key));
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse_double(key, it->second);
    }

    double require_double(const std::string& key) const {
        return parse_double(key, require_string(key));
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true") return true;
        if (it->second == "false") return false;
        throw TypeError("config key " + key + " expects true/false, got '" + it->second + "'");
    }

private:
    static std::int64_t parse_int(const std::string& key, const std::string& value) {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(value, &used);
            if (used != value.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw TypeError("config key " + key + " expects an integer, got '" + value + "'");
        }
    }

    static double parse_double(const std::string& key, const std::string& value) {
        try {
            std::size_t used = 0;
            const double v = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw TypeError("config key " + key + " expects a number, got '" + value + "'");
        }
    }

    std::map<std::string, std::string> values_;
};

// Everything a single experiment needs, resolved from a config.
struct ResolvedExperiment {
    ProblemOracle oracle;
    Graph graph;
    WeightMatrix weights;
    Regularizer regularizer;
    RunConfig run_cfg;
    EstimatorConfig est_cfg;
    std::map<std::string, std::string> resolved_echo;  // derived parameter values
};

namespace detail {

inline Eigen::VectorXd resolve_x0(const std::string& spec, int p, std::uint64_t seed) {
    if (spec == "zeros") return Eigen::VectorXd::Zero(p);
    if (spec == "ones") return Eigen::VectorXd::Ones(p);
    if (spec.rfind("gauss:", 0) == 0) {
        double scale = 0.0;
        try {
            scale = std::stod(spec.substr(6));
        } catch (const std::exception&) {
            throw TypeError("malformed x0 spec: " + spec);
        }
        rng::Stream stream(seed, rng::Purpose::Init, 0, 0);
        Eigen::VectorXd x(p);
        for (int j = 0; j < p; ++j) x(j) = scale * stream.next_gaussian();
        return x;
    }
    if (spec.rfind("vals:", 0) == 0) {
        std::vector<double> vals;
        std::stringstream ss(spec.substr(5));
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw TypeError("malformed x0 value list: " + spec);
            }
        }
        if (static_cast<int>(vals.size()) != p)
            throw ShapeMismatch("x0 value list length does not match problem dimension");
        return Eigen::Map<Eigen::VectorXd>(vals.data(), p);
    }
    throw TypeError("unknown x0 spec: " + spec);
}

inline std::string format_double(double v) {
    char buf[48];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

inline ProblemOracle resolve_oracle(const ExperimentConfig& cfg) {
    const std::string kind_name = cfg.require_string("problem.kind");
    ProblemKind kind;
    if (kind_name == "least_squares")
        kind = ProblemKind::LeastSquares;
    else if (kind_name == "nc_logistic")
        kind = ProblemKind::NcLogistic;
    else
        throw TypeError("unknown problem.kind: " + kind_name);

    const std::string risk_name = cfg.get_string("problem.risk", "empirical");
    RiskKind risk;
    if (risk_name == "empirical")
        risk = RiskKind::Empirical;
    else if (risk_name == "population")
        risk = RiskKind::Population;
    else
        throw TypeError("unknown problem.risk: " + risk_name);

    const double nc_weight = cfg.get_double("problem.a", 0.0);

    if (cfg.has("problem.dataset")) {
        if (risk != RiskKind::Empirical)
            throw TypeError("dataset ingestion requires problem.risk = empirical");
        const int n = static_cast<int>(cfg.require_int("problem.n"));
        const PartitionSpec part =
            partition_from_spec(cfg.get_string("problem.partition", "contiguous"));
        return load_and_partition(cfg.require_string("problem.dataset"), n, part, kind, nc_weight);
    }

    const int n = static_cast<int>(cfg.require_int("problem.n"));
    const int p = static_cast<int>(cfg.require_int("problem.p"));
    const int m = static_cast<int>(cfg.get_int("problem.m", risk == RiskKind::Population ? 1 : 0));
    if (risk == RiskKind::Empirical && m < 1)
        throw MissingRequired("problem.m is required for empirical risk");
    return synthesize_problem(kind, risk, n, p, m, cfg.get_double("problem.heterogeneity", 0.5),
                              static_cast<std::uint64_t>(cfg.get_int("problem.seed", 1)),
                              nc_weight, cfg.get_double("problem.noise", 0.1));
}

inline std::pair<Graph, WeightMatrix> resolve_graph(const ExperimentConfig& cfg, int problem_n) {
    const int n = static_cast<int>(cfg.get_int("graph.n", problem_n));
    if (n != problem_n)
        throw ShapeMismatch("graph.n disagrees with problem.n");
    const Graph g = build_topology_from_spec(cfg.require_string("graph.topology"), n);
    if (cfg.has("graph.weights_csv")) {
        const Dataset raw = [&] {
            // Reuse the CSV reader; a weight matrix is n rows of n reals.
            return load_csv_dataset(cfg.get_string("graph.weights_csv"));
        }();
        Eigen::MatrixXd full(raw.features.rows(), raw.features.cols() + 1);
        full << raw.features, raw.targets;
        return {g, validate_weight_matrix(full, g)};
    }
    return {g, metropolis_weights(g, cfg.get_bool("graph.lazy", false))};
}

inline ResolvedExperiment resolve_experiment(const ExperimentConfig& cfg) {
    ResolvedExperiment exp;
    exp.oracle = resolve_oracle(cfg);
    auto [graph, weights] = resolve_graph(cfg, exp.oracle.n);
    exp.graph = std::move(graph);
    exp.weights = std::move(weights);
    exp.regularizer = regularizer_from_spec(cfg.get_string("problem.h", "zero"));

    const bool preset_mode = cfg.has("run.theorem");
    const bool explicit_mode = cfg.has("run.alpha") || cfg.has("run.K") || cfg.has("run.T");
    if (preset_mode && explicit_mode)
        throw TypeError("give either run.theorem or explicit run.alpha/run.K/run.T, not both");
    if (!preset_mode && !explicit_mode)
        throw MissingRequired("run section needs run.theorem or explicit run.alpha/run.K/run.T");

    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", 0));
    const Eigen::VectorXd x0 =
        detail::resolve_x0(cfg.get_string("run.x0", "zeros"), exp.oracle.p, seed);

    if (preset_mode) {
        const std::string preset_name = cfg.require_string("run.theorem");
        TheoremPreset preset;
        if (preset_name == "sa")
            preset = TheoremPreset::Sa;
        else if (preset_name == "sro")
            preset = TheoremPreset::Sro;
        else if (preset_name == "sre")
            preset = TheoremPreset::Sre;
        else
            throw TypeError("unknown run.theorem preset: " + preset_name);
        if (cfg.has("estimator.kind") && cfg.get_string("estimator.kind") != preset_name)
            throw TypeError("estimator.kind conflicts with run.theorem preset");
        TheoremMultipliers mult;
        mult.alpha = cfg.get_double("run.mult_alpha", 1.0);
        mult.rounds_k = cfg.get_double("run.mult_K", 1.0);
        mult.batch = cfg.get_double("run.mult_b", 1.0);
        mult.big_batch = cfg.get_double("run.mult_B", 1.0);
        mult.period = cfg.get_double("run.mult_q", 1.0);
        mult.iterations = cfg.get_double("run.mult_T", 1.0);
        auto [run_cfg, est_cfg] = theorem_defaults(
            preset, exp.oracle, exp.weights, cfg.require_double("run.epsilon"), x0, std::nullopt,
            cfg.get_double("run.psi_lower", 0.0), mult);
        // Explicit estimator keys override the prescription.
        if (cfg.has("estimator.b")) est_cfg.b = static_cast<int>(cfg.require_int("estimator.b"));
        if (cfg.has("estimator.B"))
            est_cfg.big_b = static_cast<int>(cfg.require_int("estimator.B"));
        if (cfg.has("estimator.q")) est_cfg.q = static_cast<int>(cfg.require_int("estimator.q"));
        exp.run_cfg = run_cfg;
        exp.est_cfg = est_cfg;
    } else {
        exp.run_cfg.alpha = cfg.require_double("run.alpha");
        exp.run_cfg.rounds_k = static_cast<int>(cfg.require_int("run.K"));
        exp.run_cfg.iterations = cfg.require_int("run.T");
        exp.run_cfg.x0 = x0;
        exp.est_cfg.kind = estimator_kind_from_name(cfg.require_string("estimator.kind"));
        if (exp.est_cfg.kind != EstimatorKind::Exact) {
            exp.est_cfg.b = static_cast<int>(cfg.require_int("estimator.b"));
            if (exp.est_cfg.kind == EstimatorKind::Sro) {
                if (!cfg.has("estimator.B"))
                    throw MissingRequired("estimator.kind = sro requires estimator.B");
                exp.est_cfg.big_b = static_cast<int>(cfg.require_int("estimator.B"));
            }
            if (exp.est_cfg.kind == EstimatorKind::Sro || exp.est_cfg.kind == EstimatorKind::Sre) {
                if (!cfg.has("estimator.q"))
                    throw MissingRequired("this estimator kind requires estimator.q");
                exp.est_cfg.q = static_cast<int>(cfg.require_int("estimator.q"));
            }
        }
    }

    exp.run_cfg.seed = seed;
    exp.run_cfg.x0 = x0;
    const std::string consensus = cfg.get_string("run.consensus", "plain");
    if (consensus == "plain")
        exp.run_cfg.consensus = ConsensusMode::Plain;
    else if (consensus == "chebyshev")
        exp.run_cfg.consensus = ConsensusMode::Chebyshev;
    else
        throw TypeError("unknown run.consensus mode: " + consensus);
    exp.run_cfg.invariant_check_every = cfg.get_int("run.invariant_check_every", 1);
    exp.run_cfg.proxy_samples_per_node = static_cast<int>(cfg.get_int("run.proxy_samples", 512));
    exp.run_cfg.validate();
    exp.est_cfg.validate();

    exp.resolved_echo["alpha"] = detail::format_double(exp.run_cfg.alpha);
    exp.resolved_echo["K"] = std::to_string(exp.run_cfg.rounds_k);
    exp.resolved_echo["T"] = std::to_string(exp.run_cfg.iterations);
    exp.resolved_echo["estimator"] = EstimatorConfig::kind_name(exp.est_cfg.kind);
    exp.resolved_echo["b"] = std::to_string(exp.est_cfg.b);
    exp.resolved_echo["B"] = std::to_string(exp.est_cfg.big_b);
    exp.resolved_echo["q"] = std::to_string(exp.est_cfg.q);
    exp.resolved_echo["lambda_star"] = detail::format_double(exp.weights.lambda_star);
    exp.resolved_echo["spectral_gap"] = detail::format_double(exp.weights.spectral_gap());
    exp.resolved_echo["L"] = detail::format_double(exp.oracle.smoothness);
    exp.resolved_echo["L_mss"] = detail::format_double(exp.oracle.mss_smoothness);
    exp.resolved_echo["nu"] = detail::format_double(exp.oracle.nu());
    return exp;
}

// FNV-1a hash of the canonical rendering, skipping output-destination keys
// so the same experiment hashes identically wherever it is written.
inline std::string config_hash(const ExperimentConfig& cfg) {
    std::string text;
    for (const auto& [k, v] : cfg.values()) {
        if (k.rfind("output.", 0) == 0) continue;
        text += k;
        text += '=';
        text += v;
        text += '\n';
    }
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace proxgt
