#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "proxgt/consensus.hpp"
#include "proxgt/errors.hpp"
#include "proxgt/problems.hpp"

namespace proxgt {

enum class EstimatorKind { Exact, Sa, Sro, Sre };

struct EstimatorConfig {
    EstimatorKind kind = EstimatorKind::Exact;
    int b = 1;        // minibatch size (sa, recursion branch of sro/sre)
    int big_b = 1;    // reset batch size (sro)
    int q = 1;        // reset period (sro, sre)

    void validate() const {
        if (kind == EstimatorKind::Exact) return;
        if (b < 1) throw BadShape("estimator batch size b must be >= 1");
        if (kind == EstimatorKind::Sro) {
            if (big_b < b) throw BadShape("estimator requires B >= b");
            if (q < 1) throw BadShape("estimator period q must be >= 1");
        }
        if (kind == EstimatorKind::Sre && q < 1)
            throw BadShape("estimator period q must be >= 1");
    }

    static std::string kind_name(EstimatorKind k) {
        switch (k) {
            case EstimatorKind::Exact: return "exact";
            case EstimatorKind::Sa: return "sa";
            case EstimatorKind::Sro: return "sro";
            case EstimatorKind::Sre: return "sre";
        }
        return "exact";
    }
};

inline EstimatorKind estimator_kind_from_name(const std::string& name) {
    if (name == "exact") return EstimatorKind::Exact;
    if (name == "sa") return EstimatorKind::Sa;
    if (name == "sro") return EstimatorKind::Sro;
    if (name == "sre") return EstimatorKind::Sre;
    throw ParseError("unknown estimator kind: " + name);
}

// Per-node recursion state. v_prev starts at zero (v_0 = 0) and x_prev is
// only consulted on non-reset SARAH steps, which never occur at t = 1.
struct EstimatorState {
    StackedVectors v_prev;
    StackedVectors x_prev;
    std::int64_t t = 1;
    std::vector<std::int64_t> samples;  // cumulative per node

    EstimatorState() = default;
    EstimatorState(int n, int p) : v_prev(n, p), x_prev(n, p), samples(static_cast<std::size_t>(n), 0) {}

    std::int64_t samples_at(int i) const { return samples[static_cast<std::size_t>(i)]; }
};

// Reset convention: the paper indexes iterations from 1 and resets when
// t mod q = 1. Comparing against 1 % q makes q = 1 mean "reset every
// iteration" and guarantees a reset at t = 1 for every q >= 1.
inline bool is_reset_step(std::int64_t t, int q) {
    return t % q == 1 % q;
}

// Computes v_t for every node and advances the state. Draws are keyed by
// (seed, node, iteration, draw), so results do not depend on evaluation
// order across nodes.
inline StackedVectors estimate(const EstimatorConfig& cfg, EstimatorState& state,
                               const ProblemOracle& oracle, const StackedVectors& x_t,
                               std::uint64_t run_seed) {
    cfg.validate();
    if (x_t.n() != oracle.n) throw ShapeMismatch("iterate stack does not match oracle node count");
    if (state.t < 1) throw BadShape("estimator iteration counter starts at 1");
    const int n = oracle.n;
    StackedVectors v(n, x_t.p());

    for (int i = 0; i < n; ++i) {
        auto& used = state.samples[static_cast<std::size_t>(i)];
        switch (cfg.kind) {
            case EstimatorKind::Exact: {
                v.block(i) = oracle.local_exact_gradient(i, x_t.block(i));
                if (oracle.risk == RiskKind::Empirical) used += oracle.m;
                break;
            }
            case EstimatorKind::Sa: {
                const SampleBatch batch = oracle.draw_batch(i, state.t, cfg.b, run_seed);
                v.block(i) = oracle.stochastic_gradient(i, x_t.block(i), batch);
                used += cfg.b;
                break;
            }
            case EstimatorKind::Sro: {
                if (is_reset_step(state.t, cfg.q)) {
                    const SampleBatch batch = oracle.draw_batch(i, state.t, cfg.big_b, run_seed);
                    v.block(i) = oracle.stochastic_gradient(i, x_t.block(i), batch);
                    used += cfg.big_b;
                } else {
                    const SampleBatch batch = oracle.draw_batch(i, state.t, cfg.b, run_seed);
                    v.block(i) = state.v_prev.block(i) +
                                 oracle.paired_gradient_difference(i, x_t.block(i),
                                                                   state.x_prev.block(i), batch);
                    used += cfg.b;
                }
                break;
            }
            case EstimatorKind::Sre: {
                if (oracle.risk != RiskKind::Empirical)
                    throw OracleError("sre estimator requires empirical risk");
                if (is_reset_step(state.t, cfg.q)) {
                    v.block(i) = oracle.local_exact_gradient(i, x_t.block(i));
                    used += oracle.m;
                } else {
                    const SampleBatch batch = oracle.draw_batch(i, state.t, cfg.b, run_seed);
                    v.block(i) = state.v_prev.block(i) +
                                 oracle.paired_gradient_difference(i, x_t.block(i),
                                                                   state.x_prev.block(i), batch);
                    used += cfg.b;
                }
                break;
            }
        }
    }

    state.v_prev = v;
    state.x_prev = x_t;
    state.t += 1;
    return v;
}

// Per-node cumulative sample counts (equal across nodes for the built-in
// estimators, but reported per node).
inline const std::vector<std::int64_t>& sample_count(const EstimatorState& state) {
    return state.samples;
}

}  // namespace proxgt
