#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "proxgt/config.hpp"
#include "proxgt/consensus.hpp"
#include "proxgt/core.hpp"
#include "proxgt/estimators.hpp"
#include "proxgt/graph.hpp"
#include "proxgt/metrics.hpp"
#include "proxgt/problems.hpp"
#include "proxgt/prox.hpp"

namespace proxgt {

struct AuditCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace audit_detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3e", v);
    return buf;
}

inline Eigen::VectorXd random_vector(int p, rng::Stream& stream, double scale = 1.0) {
    Eigen::VectorXd x(p);
    for (int j = 0; j < p; ++j) x(j) = scale * stream.next_gaussian();
    return x;
}

inline StackedVectors random_stack(int n, int p, rng::Stream& stream, double scale = 1.0) {
    StackedVectors v(n, p);
    for (int i = 0; i < n; ++i) v.block(i) = random_vector(p, stream, scale);
    return v;
}

}  // namespace audit_detail

// Self-contained runtime invariant suite behind the `audit` CLI command.
// Each check returns its worst observed violation so regressions show up in
// the printed table even while still passing.
inline std::vector<AuditCheck> run_audit(std::uint64_t seed = 20240501) {
    using audit_detail::fmt;
    std::vector<AuditCheck> checks;
    auto add = [&](const std::string& name, bool ok, const std::string& detail) {
        checks.push_back({name, ok, detail});
    };

    // Weight-matrix invariants across the built-in topologies.
    {
        double worst_sum = 0.0, worst_contract = 0.0, worst_norm = 0.0, worst_mean = 0.0;
        rng::Stream stream(seed, rng::Purpose::Test, 0, 0);
        for (const auto& spec : {std::string("ring"), std::string("path"), std::string("grid2d"),
                                 std::string("complete"), std::string("star")}) {
            const int n = spec == "grid2d" ? 9 : 8;
            const WeightMatrix w = metropolis_weights(build_topology_from_spec(spec, n));
            for (int i = 0; i < n; ++i) {
                worst_sum = std::max(worst_sum, std::abs(w.entries.row(i).sum() - 1.0));
                worst_sum = std::max(worst_sum, std::abs(w.entries.col(i).sum() - 1.0));
            }
            const Eigen::MatrixXd j = Eigen::MatrixXd::Constant(n, n, 1.0 / n);
            Eigen::MatrixXd wk = Eigen::MatrixXd::Identity(n, n);
            for (int k = 1; k <= 3; ++k) {
                wk = wk * w.entries;
                const double norm = Eigen::JacobiSVD<Eigen::MatrixXd>(wk - j).singularValues()(0);
                worst_norm = std::max(worst_norm, std::abs(norm - std::pow(w.lambda_star, k)));
            }
            for (int trial = 0; trial < 100; ++trial) {
                const StackedVectors x = audit_detail::random_stack(n, 3, stream);
                for (int k : {1, 2, 5}) {
                    const StackedVectors mixed = mix(w, x, k);
                    const double lhs = std::sqrt(consensus_error(mixed));
                    const double rhs = std::pow(w.lambda_star, k) * std::sqrt(consensus_error(x));
                    worst_contract = std::max(worst_contract, lhs - rhs);
                    worst_mean = std::max(
                        worst_mean,
                        (mixed.blockwise_mean() - x.blockwise_mean()).cwiseAbs().maxCoeff());
                }
            }
        }
        add("weights.doubly_stochastic", worst_sum <= 1e-12, "max |sum-1| = " + fmt(worst_sum));
        add("weights.norm_power_law", worst_norm <= 1e-8,
            "max | ||W^K-J|| - lambda^K | = " + fmt(worst_norm));
        add("consensus.contraction", worst_contract <= 1e-10,
            "max excess over lambda^K bound = " + fmt(worst_contract));
        add("consensus.mean_preserved", worst_mean <= 1e-12, "max mean drift = " + fmt(worst_mean));
    }

    // Chebyshev acceleration agrees with plain mixing at k=1 and contracts
    // at least as fast as its theoretical factor.
    {
        const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 16));
        rng::Stream stream(seed, rng::Purpose::Test, 1, 0);
        const StackedVectors v = audit_detail::random_stack(16, 4, stream);
        const double k1_diff =
            (chebyshev_mix(w, v, 1).data - mix(w, v, 1).data).cwiseAbs().maxCoeff();
        double worst_excess = 0.0;
        for (int k : {2, 4, 8, 16}) {
            const double lhs = std::sqrt(consensus_error(chebyshev_mix(w, v, k)));
            const double bound = chebyshev_contraction_factor(w.lambda_star, k) *
                                 std::sqrt(consensus_error(v));
            worst_excess = std::max(worst_excess, lhs - bound);
        }
        add("chebyshev.k1_matches_mix", k1_diff == 0.0, "max |diff| = " + fmt(k1_diff));
        add("chebyshev.contraction_factor", worst_excess <= 1e-10,
            "max excess over 2rho^k/(1+rho^2k) = " + fmt(worst_excess));
    }

    // Prox nonexpansiveness and optimality over all regularizer kinds.
    {
        const std::vector<Regularizer> kinds = {
            Regularizer::zero(), Regularizer::l1(0.7), Regularizer::box_scalar(-0.4, 1.1),
            Regularizer::l2ball(1.3)};
        double worst_exp = 0.0, worst_opt = 0.0;
        rng::Stream stream(seed, rng::Purpose::Test, 2, 0);
        for (const auto& h : kinds) {
            for (int trial = 0; trial < 1000; ++trial) {
                const Eigen::VectorXd x = audit_detail::random_vector(6, stream, 2.0);
                const Eigen::VectorXd y = audit_detail::random_vector(6, stream, 2.0);
                const double alpha = 0.1 + stream.next_double();
                const Eigen::VectorXd px = prox_eval(h, alpha, x);
                const Eigen::VectorXd py = prox_eval(h, alpha, y);
                worst_exp = std::max(worst_exp, (px - py).norm() - (x - y).norm());
                const double obj_at_prox = 0.5 * (px - x).squaredNorm() +
                                           alpha * h_eval(h, px).finite_value();
                for (int probe = 0; probe < 10; ++probe) {
                    const Eigen::VectorXd u = audit_detail::random_vector(6, stream, 2.0);
                    const ExtendedReal hu = h_eval(h, u);
                    if (hu.is_infinite()) continue;
                    const double obj_at_u = 0.5 * (u - x).squaredNorm() + alpha * hu.finite_value();
                    worst_opt = std::max(worst_opt, obj_at_prox - obj_at_u);
                }
            }
        }
        add("prox.nonexpansive", worst_exp <= 1e-12, "max expansion = " + fmt(worst_exp));
        add("prox.optimality", worst_opt <= 1e-10, "max optimality gap = " + fmt(worst_opt));
    }

    // Tracking identity and mean recursion across estimators on short runs.
    {
        double worst_track = 0.0, worst_mean = 0.0, worst_feas = 0.0;
        for (const EstimatorKind kind :
             {EstimatorKind::Exact, EstimatorKind::Sa, EstimatorKind::Sro, EstimatorKind::Sre}) {
            const ProblemOracle oracle = synthesize_problem(
                ProblemKind::LeastSquares, RiskKind::Empirical, 4, 5, 24, 0.6, seed);
            const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 4));
            RunConfig cfg;
            cfg.alpha = 0.5 / oracle.smoothness;
            cfg.rounds_k = 2;
            cfg.iterations = 60;
            cfg.seed = seed;
            cfg.x0 = Eigen::VectorXd::Zero(5);
            EstimatorConfig est;
            est.kind = kind;
            est.b = 4;
            est.big_b = 12;
            est.q = 5;
            const RunResult result = run(cfg, est, oracle, Regularizer::box_scalar(-0.5, 0.5), w);
            worst_track = std::max(worst_track, result.invariants.tracking);
            worst_mean = std::max(worst_mean, result.invariants.mean_recursion);
            worst_feas = std::max(worst_feas, result.invariants.feasibility);
        }
        add("proxgt.tracking_identity", worst_track <= 1e-10, "max violation = " + fmt(worst_track));
        add("proxgt.mean_recursion", worst_mean <= 1e-10, "max violation = " + fmt(worst_mean));
        add("proxgt.feasibility", worst_feas <= 1e-9, "max dom violation = " + fmt(worst_feas));
    }

    // Estimator contracts: reset equality, frozen-iterate invariance.
    {
        const ProblemOracle oracle = synthesize_problem(ProblemKind::NcLogistic,
                                                        RiskKind::Empirical, 3, 4, 20, 0.5, seed,
                                                        /*nc_weight=*/0.1);
        EstimatorConfig sre;
        sre.kind = EstimatorKind::Sre;
        sre.b = 3;
        sre.q = 4;
        EstimatorState state(3, 4);
        rng::Stream stream(seed, rng::Purpose::Test, 3, 0);
        StackedVectors x = audit_detail::random_stack(3, 4, stream);
        bool reset_exact = true;
        const StackedVectors v1 = estimate(sre, state, oracle, x, seed);
        for (int i = 0; i < 3; ++i) {
            reset_exact = reset_exact &&
                          (Eigen::VectorXd(v1.block(i)) == oracle.local_exact_gradient(i, x.block(i)));
        }
        const StackedVectors v2 = estimate(sre, state, oracle, x, seed);  // same iterates
        const bool frozen = (v2.data - v1.data).cwiseAbs().maxCoeff() == 0.0;
        add("estimator.sre_reset_exact", reset_exact, "reset step equals local exact gradient");
        add("estimator.frozen_iterate", frozen, "recursion with x_t = x_{t-1} keeps v unchanged");
    }

    // Metric decomposition and running-mean bookkeeping.
    {
        const ProblemOracle oracle = synthesize_problem(ProblemKind::LeastSquares,
                                                        RiskKind::Empirical, 4, 3, 16, 0.4, seed);
        const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 4));
        RunConfig cfg;
        cfg.alpha = 0.4 / oracle.smoothness;
        cfg.rounds_k = 1;
        cfg.iterations = 40;
        cfg.seed = seed;
        cfg.x0 = Eigen::VectorXd::Ones(3);
        EstimatorConfig est;
        est.kind = EstimatorKind::Sa;
        est.b = 2;
        const RunResult result = run(cfg, est, oracle, Regularizer::l1(0.05), w);
        double mean_err = 0.0, decomp_err = 0.0, acc = 0.0;
        for (const RunRecord& rec : result.records) {
            acc += rec.stat_term;
            mean_err = std::max(
                mean_err, std::abs(acc / static_cast<double>(rec.t) - rec.stat_running_mean));
        }
        {
            NetworkState probe(4, cfg.x0);
            const StationarityTerm term =
                stationarity_term(oracle, Regularizer::l1(0.05), cfg.alpha, probe.x);
            decomp_err = std::abs(term.total - term.stationary_gap -
                                  oracle.smoothness * oracle.smoothness * term.consensus_err / 4.0);
        }
        add("metrics.running_mean", mean_err <= 1e-12, "max drift = " + fmt(mean_err));
        add("metrics.decomposition", decomp_err == 0.0, "defect = " + fmt(decomp_err));
    }

    // Determinism: identical seeds give byte-identical CSV.
    {
        const ProblemOracle oracle = synthesize_problem(ProblemKind::LeastSquares,
                                                        RiskKind::Population, 4, 3, 1, 0.5, seed);
        const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 4));
        RunConfig cfg;
        cfg.alpha = 0.3;
        cfg.rounds_k = 2;
        cfg.iterations = 25;
        cfg.seed = seed + 7;
        cfg.x0 = Eigen::VectorXd::Zero(3);
        EstimatorConfig est;
        est.kind = EstimatorKind::Sa;
        est.b = 5;
        const std::string csv_a = records_to_csv(run(cfg, est, oracle, Regularizer::zero(), w).records);
        const std::string csv_b = records_to_csv(run(cfg, est, oracle, Regularizer::zero(), w).records);
        add("run.deterministic", csv_a == csv_b, "repeated run CSV bytes match");
    }

    return checks;
}

}  // namespace proxgt
