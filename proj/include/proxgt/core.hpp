#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "proxgt/consensus.hpp"
#include "proxgt/errors.hpp"
#include "proxgt/estimators.hpp"
#include "proxgt/graph.hpp"
#include "proxgt/problems.hpp"
#include "proxgt/prox.hpp"

namespace proxgt {

enum class ConsensusMode { Plain, Chebyshev };

struct RunConfig {
    double alpha = 0.0;
    int rounds_k = 1;
    std::int64_t iterations = 1;
    ConsensusMode consensus = ConsensusMode::Plain;
    Eigen::VectorXd x0;
    std::uint64_t seed = 0;
    std::int64_t invariant_check_every = 1;
    double divergence_threshold = 1e12;
    int proxy_samples_per_node = 512;  // population-risk objective proxy

    void validate() const {
        if (!(alpha > 0.0)) throw BadShape("step size alpha must be > 0");
        if (rounds_k < 1) throw BadShape("consensus rounds K must be >= 1");
        if (iterations < 1) throw BadShape("iteration count T must be >= 1");
        if (invariant_check_every < 1) throw BadShape("invariant check interval must be >= 1");
    }
};

// Network state across one iteration of the loop. At construction every
// node holds the same x-bar_1, y = 0, and the estimator's v_prev = 0.
struct NetworkState {
    std::int64_t t = 1;
    StackedVectors x;
    StackedVectors y;
    StackedVectors z_last;
    std::int64_t comm_rounds = 0;

    NetworkState() = default;
    NetworkState(int n, const Eigen::VectorXd& x0)
        : x(StackedVectors::replicate(x0, n)),
          y(n, static_cast<int>(x0.size())),
          z_last(n, static_cast<int>(x0.size())) {}
};

// Exact gradient mapping s(x) = (x - prox_{alpha h}(x - alpha grad F(x))) / alpha.
// Observer-only: it consumes the exact global gradient, which the algorithm
// itself never sees.
inline Eigen::VectorXd gradient_mapping(const ProblemOracle& oracle, const Regularizer& h,
                                        double alpha, const Eigen::VectorXd& x) {
    if (!(alpha > 0.0)) throw BadShape("gradient mapping step must be > 0");
    const Eigen::VectorXd grad = oracle.global_exact_gradient(x);
    return (x - prox_eval(h, alpha, x - alpha * grad)) / alpha;
}

// Stochastic gradient mapping of the last prox-descent: g_t^i = (x_t^i - z_{t+1}^i)/alpha.
inline StackedVectors stochastic_gradient_mapping(const StackedVectors& x_t,
                                                  const StackedVectors& z_next, double alpha) {
    if (x_t.n() != z_next.n() || x_t.p() != z_next.p())
        throw ShapeMismatch("gradient mapping stacks disagree");
    return StackedVectors((x_t.data - z_next.data) / alpha);
}

struct StationarityTerm {
    double total = 0.0;          // (1/n) sum_i [ ||s(x^i)||^2 + L^2 ||x^i - x-bar||^2 ]
    double stationary_gap = 0.0; // (1/n) sum_i ||s(x^i)||^2
    double consensus_err = 0.0;  // sum_i ||x^i - x-bar||^2
};

// Per-iteration term of the stationarity metric at the current iterates.
inline StationarityTerm stationarity_term(const ProblemOracle& oracle, const Regularizer& h,
                                          double alpha, const StackedVectors& x) {
    StationarityTerm out;
    const int n = x.n();
    const Eigen::VectorXd mean = x.blockwise_mean();
    for (int i = 0; i < n; ++i) {
        out.stationary_gap += gradient_mapping(oracle, h, alpha, x.block(i)).squaredNorm();
        out.consensus_err += (x.block(i) - mean).squaredNorm();
    }
    out.stationary_gap /= static_cast<double>(n);
    const double lsq = oracle.smoothness * oracle.smoothness;
    out.total = out.stationary_gap + lsq * out.consensus_err / static_cast<double>(n);
    return out;
}

struct RunRecord {
    std::int64_t t = 0;
    double stat_term = 0.0;
    double stat_running_mean = 0.0;
    double consensus_err = 0.0;
    ExtendedReal psi;
    bool psi_is_proxy = false;
    std::int64_t samples_per_node = 0;
    std::int64_t comm_rounds = 0;
    std::int64_t elapsed_ns = 0;
};

// Worst violations of the runtime identities observed during a run; all of
// these should sit at floating-point noise level.
struct InvariantReport {
    double tracking = 0.0;        // ||y-bar_{t+1} - v-bar_t||_inf, relative
    double mean_recursion = 0.0;  // ||x-bar_{t+1} - (x-bar_t - alpha g-bar_t)||_inf, relative
    double feasibility = 0.0;     // dom(h) violation of mixed iterates (indicator h only)
};

struct RunResult {
    std::vector<RunRecord> records;
    InvariantReport invariants;
    NetworkState final_state;
    bool diverged = false;
    std::string divergence_message;

    const RunRecord& last() const { return records.back(); }
};

namespace detail {

inline StackedVectors apply_consensus(const WeightMatrix& w, const StackedVectors& v,
                                      const RunConfig& cfg, std::int64_t* comm_rounds) {
    if (cfg.consensus == ConsensusMode::Chebyshev)
        return chebyshev_mix(w, v, cfg.rounds_k, comm_rounds);
    return mix(w, v, cfg.rounds_k, comm_rounds);
}

inline double dom_violation(const Regularizer& h, const StackedVectors& x) {
    if (!h.is_indicator()) return 0.0;
    double worst = 0.0;
    for (int i = 0; i < x.n(); ++i) {
        if (h.kind() == RegularizerKind::Box) {
            for (int j = 0; j < x.p(); ++j) {
                const double v = x.data(j, i);
                worst = std::max(worst, h.box_lo(j) - v);
                worst = std::max(worst, v - h.box_hi(j));
            }
        } else {
            const Eigen::VectorXd c = h.center(x.p());
            worst = std::max(worst, (Eigen::VectorXd(x.block(i)) - c).norm() - h.radius());
        }
    }
    return std::max(worst, 0.0);
}

inline void check_divergence(const StackedVectors& x, double threshold) {
    const double worst = x.data.cwiseAbs().maxCoeff();
    if (!std::isfinite(worst) || worst > threshold)
        throw Diverged("iterate magnitude exceeded " + std::to_string(threshold));
}

}  // namespace detail

// One iteration: estimate v_t, tracking, prox-descent, consensus.
inline void proxgt_step(NetworkState& state, const RunConfig& cfg, const EstimatorConfig& est_cfg,
                        EstimatorState& est_state, const ProblemOracle& oracle,
                        const Regularizer& h, const WeightMatrix& w,
                        InvariantReport* invariants = nullptr) {
    const StackedVectors v_before = est_state.v_prev;  // v_{t-1}
    const StackedVectors v_t = estimate(est_cfg, est_state, oracle, state.x, cfg.seed);
    const Eigen::VectorXd x_mean_before = state.x.blockwise_mean();

    // Tracking: y_{t+1} = W^K (y_t + v_t - v_{t-1}).
    state.y.data += v_t.data - v_before.data;
    state.y = detail::apply_consensus(w, state.y, cfg, &state.comm_rounds);

    if (invariants) {
        const Eigen::VectorXd v_mean = v_t.blockwise_mean();
        const Eigen::VectorXd y_mean = state.y.blockwise_mean();
        const double scale = 1.0 + v_mean.cwiseAbs().maxCoeff();
        invariants->tracking =
            std::max(invariants->tracking, (y_mean - v_mean).cwiseAbs().maxCoeff() / scale);
    }

    // Prox-Descent: z_{t+1}^i = prox_{alpha h}(x_t^i - alpha y_{t+1}^i).
    StackedVectors z(state.x.n(), state.x.p());
    for (int i = 0; i < state.x.n(); ++i) {
        z.block(i) = prox_eval(h, cfg.alpha, state.x.block(i) - cfg.alpha * state.y.block(i));
    }
    state.z_last = z;

    // Consensus: x_{t+1} = W^K z_{t+1}.
    state.x = detail::apply_consensus(w, z, cfg, &state.comm_rounds);

    if (invariants) {
        const Eigen::VectorXd g_mean = (x_mean_before - z.blockwise_mean()) / cfg.alpha;
        const Eigen::VectorXd predicted = x_mean_before - cfg.alpha * g_mean;
        const double scale = 1.0 + predicted.cwiseAbs().maxCoeff();
        invariants->mean_recursion = std::max(
            invariants->mean_recursion,
            (state.x.blockwise_mean() - predicted).cwiseAbs().maxCoeff() / scale);
        invariants->feasibility =
            std::max(invariants->feasibility, detail::dom_violation(h, state.x));
    }

    detail::check_divergence(state.x, cfg.divergence_threshold);
    state.t += 1;
}

// Full loop producing one record per iteration. The stationarity metric is
// evaluated at x_t before the update, matching a 1..T running mean; sample
// and communication counters are cumulative through iteration t. Throws
// Diverged only if the very first iteration diverges; later divergence is
// reported in the result together with the partial records.
inline RunResult run(const RunConfig& cfg, const EstimatorConfig& est_cfg,
                     const ProblemOracle& oracle, const Regularizer& h, const WeightMatrix& w) {
    cfg.validate();
    est_cfg.validate();
    if (w.n != oracle.n) throw ShapeMismatch("weight matrix does not match oracle node count");
    if (cfg.x0.size() != oracle.p) throw ShapeMismatch("x0 dimension does not match problem");

    RunResult result;
    NetworkState state(oracle.n, cfg.x0);
    EstimatorState est_state(oracle.n, oracle.p);
    ObjectiveProxy proxy;
    const bool use_proxy = oracle.risk == RiskKind::Population;
    if (use_proxy) proxy = ObjectiveProxy(oracle, cfg.proxy_samples_per_node, cfg.seed);

    double stat_sum = 0.0;
    const auto start = std::chrono::steady_clock::now();
    result.records.reserve(static_cast<std::size_t>(cfg.iterations));

    for (std::int64_t t = 1; t <= cfg.iterations; ++t) {
        RunRecord rec;
        rec.t = t;
        const StationarityTerm term = stationarity_term(oracle, h, cfg.alpha, state.x);
        stat_sum += term.total;
        rec.stat_term = term.total;
        rec.stat_running_mean = stat_sum / static_cast<double>(t);
        rec.consensus_err = term.consensus_err;
        const Eigen::VectorXd mean = state.x.blockwise_mean();
        rec.psi_is_proxy = use_proxy;
        rec.psi = use_proxy ? proxy.evaluate(oracle, h, mean) : global_objective(oracle, h, mean);

        const bool check = (t % cfg.invariant_check_every) == 0;
        try {
            proxgt_step(state, cfg, est_cfg, est_state, oracle, h, w,
                        check ? &result.invariants : nullptr);
        } catch (const Diverged& e) {
            if (t == 1) throw;
            result.diverged = true;
            result.divergence_message = e.what();
            rec.samples_per_node = est_state.samples_at(0);
            rec.comm_rounds = state.comm_rounds;
            rec.elapsed_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                                 std::chrono::steady_clock::now() - start)
                                 .count();
            result.records.push_back(rec);
            break;
        }

        rec.samples_per_node = est_state.samples_at(0);
        rec.comm_rounds = state.comm_rounds;
        rec.elapsed_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
        result.records.push_back(rec);
    }

    result.final_state = std::move(state);
    return result;
}

enum class TheoremPreset { Sa, Sro, Sre };

struct TheoremMultipliers {
    double alpha = 1.0;
    double rounds_k = 1.0;
    double batch = 1.0;
    double big_batch = 1.0;
    double period = 1.0;
    double iterations = 1.0;
};

// zeta^2 = (1/n) sum_i ||grad f_i(x-bar_1)||^2, the initial gradient spread.
inline double zeta_at(const ProblemOracle& oracle, const Eigen::VectorXd& x0) {
    double acc = 0.0;
    for (int i = 0; i < oracle.n; ++i) acc += oracle.local_exact_gradient(i, x0).squaredNorm();
    return std::sqrt(acc / static_cast<double>(oracle.n));
}

// Parameter prescriptions from the convergence theory, with user multipliers
// standing in for the hidden universal constants. The log factors are
// clamped at 1 so a fully connected network prescribes K = 1.
inline std::pair<RunConfig, EstimatorConfig> theorem_defaults(
    TheoremPreset preset, const ProblemOracle& oracle, const WeightMatrix& w, double epsilon,
    const Eigen::VectorXd& x0, std::optional<double> nu = std::nullopt,
    double psi_lower = 0.0, const TheoremMultipliers& mult = TheoremMultipliers{}) {
    if (!(epsilon > 0.0)) throw BadShape("epsilon must be > 0");
    const double gap = 1.0 - w.lambda_star;
    const double n = static_cast<double>(oracle.n);
    const double zeta = zeta_at(oracle, x0);

    double nu_value = 0.0;
    if (preset == TheoremPreset::Sa || preset == TheoremPreset::Sro) {
        if (nu.has_value()) {
            nu_value = *nu;
        } else if (!oracle.nu_sq.empty()) {
            nu_value = std::sqrt(oracle.pooled_variance_at(x0));
        } else {
            throw MissingConstant("variance bound nu is required for this preset");
        }
    }

    RunConfig run_cfg;
    run_cfg.x0 = x0;
    run_cfg.alpha = mult.alpha / oracle.smoothness;

    const double log_arg = preset == TheoremPreset::Sre ? zeta : n * zeta;
    const double log_term = std::max(1.0, std::log(std::max(log_arg, 1.0)));
    run_cfg.rounds_k =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(
                                      std::ceil(mult.rounds_k * log_term / gap)));

    EstimatorConfig est_cfg;
    switch (preset) {
        case TheoremPreset::Sa: {
            est_cfg.kind = EstimatorKind::Sa;
            est_cfg.b = std::max<int>(
                1, static_cast<int>(std::ceil(mult.batch * nu_value * nu_value /
                                              (n * epsilon * epsilon))));
            break;
        }
        case TheoremPreset::Sro: {
            est_cfg.kind = EstimatorKind::Sro;
            est_cfg.q = std::max<int>(
                1, static_cast<int>(std::ceil(mult.period * nu_value / epsilon)));
            est_cfg.b = std::max<int>(
                1, static_cast<int>(std::ceil(mult.batch * nu_value / (n * epsilon))));
            est_cfg.big_b = std::max<int>(
                est_cfg.b, static_cast<int>(std::ceil(mult.big_batch * nu_value * nu_value /
                                                      (n * epsilon * epsilon))));
            break;
        }
        case TheoremPreset::Sre: {
            if (oracle.risk != RiskKind::Empirical)
                throw OracleError("the sre preset requires empirical risk");
            est_cfg.kind = EstimatorKind::Sre;
            const double md = static_cast<double>(oracle.m);
            est_cfg.q = std::max<int>(
                1, static_cast<int>(std::ceil(mult.period * std::sqrt(n * md))));
            est_cfg.b = std::max<int>(
                1, static_cast<int>(std::ceil(mult.batch * std::max(std::sqrt(md / n), 1.0))));
            break;
        }
    }

    // T = ceil(c L Delta / eps^2), plus one reset period for the recursive
    // estimators. Delta-hat falls back to Psi(x-bar_1) - psi_lower.
    double delta_hat = 1.0;
    if (oracle.risk == RiskKind::Empirical) {
        const ExtendedReal psi0 = ExtendedReal(oracle.global_value(x0));
        delta_hat = std::max(psi0.finite_value() - psi_lower, 1e-12);
    } else {
        delta_hat = std::max(oracle.global_value(x0) - psi_lower, 1e-12);
    }
    double iters = mult.iterations * oracle.smoothness * delta_hat / (epsilon * epsilon);
    if (preset != TheoremPreset::Sa) iters += static_cast<double>(est_cfg.q);
    run_cfg.iterations = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(iters)));

    return {run_cfg, est_cfg};
}

}  // namespace proxgt
