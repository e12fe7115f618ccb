#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "proxgt/core.hpp"
#include "proxgt/metrics.hpp"
#include "support/oracles.hpp"

using namespace proxgt;

namespace {

RunConfig basic_run(int p, double alpha, int k, std::int64_t iters, std::uint64_t seed = 3) {
    RunConfig cfg;
    cfg.alpha = alpha;
    cfg.rounds_k = k;
    cfg.iterations = iters;
    cfg.seed = seed;
    cfg.x0 = Eigen::VectorXd::Zero(p);
    return cfg;
}

}  // namespace

TEST_CASE("n=1 with h=0 and exact gradients is centralized gradient descent") {
    const ProblemOracle o =
        synthesize_problem(ProblemKind::LeastSquares, RiskKind::Empirical, 1, 4, 30, 0.0, 5);
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 1));
    RunConfig cfg = basic_run(4, 0.8 / o.smoothness, 3, 100);
    EstimatorConfig est;
    est.kind = EstimatorKind::Exact;

    NetworkState state(1, cfg.x0);
    EstimatorState est_state(1, 4);
    Eigen::VectorXd ref = cfg.x0;
    for (int t = 1; t <= cfg.iterations; ++t) {
        proxgt_step(state, cfg, est, est_state, o, Regularizer::zero(), w);
        ref = ref - cfg.alpha * o.local_exact_gradient(0, ref);
        REQUIRE((Eigen::VectorXd(state.x.block(0)) - ref).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("complete graph with K=1 follows centralized proximal gradient descent") {
    const ProblemOracle o =
        synthesize_problem(ProblemKind::LeastSquares, RiskKind::Empirical, 6, 4, 25, 0.7, 7);
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Complete, 6));
    const Regularizer h = Regularizer::box_scalar(-0.2, 0.2);
    RunConfig cfg = basic_run(4, 0.9 / o.smoothness, 1, 100);
    EstimatorConfig est;
    est.kind = EstimatorKind::Exact;

    const RunResult result = run(cfg, est, o, h, w);
    const auto reference = centralized_prox_gd(o, h, cfg.alpha, cfg.iterations, cfg.x0);

    NetworkState state(6, cfg.x0);
    EstimatorState est_state(6, 4);
    for (int t = 1; t <= cfg.iterations; ++t) {
        proxgt_step(state, cfg, est, est_state, o, h, w);
        const Eigen::VectorXd mean = state.x.blockwise_mean();
        REQUIRE((mean - reference[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff() <= 1e-10);
        // All nodes stay identical on the complete graph.
        REQUIRE(consensus_error(state.x) <= 1e-24);
    }
    REQUIRE_FALSE(result.diverged);
}

TEST_CASE("single hand-computed iteration on a 2-node scalar problem") {
    // Explicit data: f_i(x) = 1/2 (a_i x - b_i)^2 with one sample per node,
    // a = (2, 1), b = (4, -1). Metropolis on the 2-clique gives W = [[.5,.5],[.5,.5]].
    ProblemOracle o;
    o.kind = ProblemKind::LeastSquares;
    o.risk = RiskKind::Empirical;
    o.n = 2;
    o.p = 1;
    o.m = 1;
    o.shards = {Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::MatrixXd::Constant(1, 1, 1.0)};
    o.targets = {Eigen::VectorXd::Constant(1, 4.0), Eigen::VectorXd::Constant(1, -1.0)};
    o.smoothness = 4.0;
    o.mss_smoothness = 4.0;
    o.nu_sq = {0.0, 0.0};

    const Graph g = build_topology(Topology::Complete, 2);
    const WeightMatrix w = metropolis_weights(g);
    REQUIRE(w.entries(0, 0) == 0.5);

    const double alpha = 0.1;
    const double x0 = 1.0;
    RunConfig cfg = basic_run(1, alpha, 1, 1);
    cfg.x0 = Eigen::VectorXd::Constant(1, x0);
    EstimatorConfig est;
    est.kind = EstimatorKind::Exact;

    // Hand computation of Algorithm steps at t = 1:
    //   v1 = (a_i (a_i x0 - b_i)) = (2*(2-4), 1*(1+1)) = (-4, 2)
    //   y2 = W (0 + v1 - 0) = (-1, -1)
    //   z2 = x0 - alpha y2 = (1.1, 1.1)
    //   x2 = W z2 = (1.1, 1.1)
    const RunResult result = run(cfg, est, o, Regularizer::zero(), w);
    REQUIRE(result.final_state.x.data(0, 0) == Catch::Approx(1.1).margin(1e-15));
    REQUIRE(result.final_state.x.data(0, 1) == Catch::Approx(1.1).margin(1e-15));
    REQUIRE(result.final_state.y.data(0, 0) == Catch::Approx(-1.0).margin(1e-15));
    REQUIRE(result.records.size() == 1);
    REQUIRE(result.records[0].comm_rounds == 2);
    REQUIRE(result.records[0].samples_per_node == 1);

    // The recorded stationarity term at x0: s(x0) = F'(x0) = -1 for both
    // nodes (consensual start), so the metric is 1.
    REQUIRE(result.records[0].stat_term == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("tracking identity and mean recursion hold across estimators and sizes") {
    for (const EstimatorKind kind :
         {EstimatorKind::Exact, EstimatorKind::Sa, EstimatorKind::Sro, EstimatorKind::Sre}) {
        for (int n : {1, 4, 8}) {
            const ProblemOracle o = synthesize_problem(ProblemKind::LeastSquares,
                                                       RiskKind::Empirical, n, 5, 20, 0.5, 11);
            const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, n));
            RunConfig cfg = basic_run(5, 0.5 / o.smoothness, 2, 50, 17);
            EstimatorConfig est;
            est.kind = kind;
            est.b = 3;
            est.big_b = 10;
            est.q = 6;
            const RunResult result = run(cfg, est, o, Regularizer::l1(0.01), w);
            REQUIRE(result.invariants.tracking <= 1e-10);
            REQUIRE(result.invariants.mean_recursion <= 1e-10);
        }
    }
}

TEST_CASE("tracking update leaves consensual y unchanged when v is frozen") {
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 4));
    StackedVectors y = StackedVectors::replicate(Eigen::Vector2d(0.4, -0.7), 4);
    const StackedVectors v = StackedVectors::replicate(Eigen::Vector2d(0.4, -0.7), 4);
    // y_{t+1} = W^K (y + v - v) = W^K y = y for consensual y.
    StackedVectors next = y;
    next.data += v.data - v.data;
    next = mix(w, next, 3);
    REQUIRE((next.data - y.data).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("stochastic gradient mapping identities") {
    const ProblemOracle o =
        synthesize_problem(ProblemKind::LeastSquares, RiskKind::Empirical, 4, 3, 15, 0.5, 13);
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 4));
    RunConfig cfg = basic_run(3, 0.3 / o.smoothness, 2, 5, 19);
    EstimatorConfig est;
    est.kind = EstimatorKind::Sa;
    est.b = 4;

    NetworkState state(4, cfg.x0);
    EstimatorState est_state(4, 3);
    for (int t = 1; t <= 5; ++t) {
        const StackedVectors x_before = state.x;
        proxgt_step(state, cfg, est, est_state, o, Regularizer::zero(), w);
        const StackedVectors g = stochastic_gradient_mapping(x_before, state.z_last, cfg.alpha);
        // h = 0 means g_t^i = y_{t+1}^i exactly.
        REQUIRE((g.data - state.y.data).cwiseAbs().maxCoeff() <= 1e-12);
        // Mean recursion: x-bar_{t+1} = x-bar_t - alpha g-bar_t.
        const Eigen::VectorXd predicted =
            x_before.blockwise_mean() - cfg.alpha * g.blockwise_mean();
        REQUIRE((state.x.blockwise_mean() - predicted).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("gradient mapping oracle reduces to the gradient and detects optima") {
    const ProblemOracle o =
        synthesize_problem(ProblemKind::LeastSquares, RiskKind::Empirical, 2, 3, 40, 0.3, 23);
    rng::Stream stream(29, rng::Purpose::Test, 0, 0);
    Eigen::VectorXd x(3);
    for (int j = 0; j < 3; ++j) x(j) = stream.next_gaussian();

    const Eigen::VectorXd s = gradient_mapping(o, Regularizer::zero(), 0.5, x);
    REQUIRE((s - o.global_exact_gradient(x)).cwiseAbs().maxCoeff() <= 1e-14);

    // Unconstrained minimizer of the pooled least squares problem.
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(3, 3);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(3);
    for (int i = 0; i < 2; ++i) {
        H += o.shards[static_cast<std::size_t>(i)].transpose() *
             o.shards[static_cast<std::size_t>(i)] / double(o.m);
        c += o.shards[static_cast<std::size_t>(i)].transpose() *
             o.targets[static_cast<std::size_t>(i)] / double(o.m);
    }
    H /= 2.0;
    c /= 2.0;
    const Eigen::VectorXd opt = H.ldlt().solve(c);
    REQUIRE(gradient_mapping(o, Regularizer::zero(), 0.5, opt).norm() < 1e-10);
}

TEST_CASE("box-constrained stationary point matches the active-set oracle") {
    const ProblemOracle o =
        synthesize_problem(ProblemKind::LeastSquares, RiskKind::Empirical, 2, 3, 60, 0.8, 31);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(3, 3);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(3);
    for (int i = 0; i < 2; ++i) {
        H += o.shards[static_cast<std::size_t>(i)].transpose() *
             o.shards[static_cast<std::size_t>(i)] / double(o.m);
        c += o.shards[static_cast<std::size_t>(i)].transpose() *
             o.targets[static_cast<std::size_t>(i)] / double(o.m);
    }
    H /= 2.0;
    c /= 2.0;
    const double bound = 0.1;
    const Eigen::VectorXd kkt = testsupport::box_qp_active_set(H, c, -bound, bound);
    const Regularizer box = Regularizer::box_scalar(-bound, bound);
    REQUIRE(gradient_mapping(o, box, 1.0 / o.smoothness, kkt).norm() < 1e-6);
}

TEST_CASE("stationarity metric decomposes and vanishes at consensual optima") {
    const ProblemOracle o =
        synthesize_problem(ProblemKind::LeastSquares, RiskKind::Empirical, 3, 2, 30, 0.4, 37);
    StackedVectors x(3, 2);
    rng::Stream stream(41, rng::Purpose::Test, 0, 0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) x.data(j, i) = stream.next_gaussian();
    const StationarityTerm term = stationarity_term(o, Regularizer::zero(), 0.4, x);
    REQUIRE(term.total == term.stationary_gap +
                              o.smoothness * o.smoothness * term.consensus_err / 3.0);

    // Consensual stationary state: centralized optimum replicated.
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2, 2);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(2);
    for (int i = 0; i < 3; ++i) {
        H += o.shards[static_cast<std::size_t>(i)].transpose() *
             o.shards[static_cast<std::size_t>(i)] / double(o.m);
        c += o.shards[static_cast<std::size_t>(i)].transpose() *
             o.targets[static_cast<std::size_t>(i)] / double(o.m);
    }
    H /= 3.0;
    c /= 3.0;
    const StackedVectors opt = StackedVectors::replicate(H.ldlt().solve(c), 3);
    REQUIRE(stationarity_term(o, Regularizer::zero(), 0.4, opt).total < 1e-18);
}

TEST_CASE("indicator feasibility after mixing") {
    const ProblemOracle o =
        synthesize_problem(ProblemKind::LeastSquares, RiskKind::Empirical, 5, 4, 20, 0.9, 43);
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Star, 5));
    RunConfig cfg = basic_run(4, 0.6 / o.smoothness, 1, 60, 47);
    EstimatorConfig est;
    est.kind = EstimatorKind::Sa;
    est.b = 2;
    for (const Regularizer& h :
         {Regularizer::box_scalar(-0.15, 0.15), Regularizer::l2ball(0.4)}) {
        const RunResult result = run(cfg, est, o, h, w);
        REQUIRE(result.invariants.feasibility <= 1e-9);
    }
}

TEST_CASE("config validation and divergence detection") {
    const ProblemOracle o =
        synthesize_problem(ProblemKind::LeastSquares, RiskKind::Empirical, 2, 2, 10, 0.5, 53);
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Complete, 2));
    EstimatorConfig est;
    est.kind = EstimatorKind::Exact;

    RunConfig zero_alpha = basic_run(2, 0.0, 1, 5);
    REQUIRE_THROWS_AS(run(zero_alpha, est, o, Regularizer::zero(), w), BadShape);

    // A grossly oversized step diverges; partial records are preserved.
    RunConfig unstable = basic_run(2, 1e3 / o.smoothness, 1, 500);
    unstable.x0 = Eigen::VectorXd::Ones(2);
    const RunResult result = run(unstable, est, o, Regularizer::zero(), w);
    REQUIRE(result.diverged);
    REQUIRE(result.records.size() < 500);
    REQUIRE(result.records.size() >= 1);
}

TEST_CASE("same seed gives identical records including under chebyshev consensus") {
    const ProblemOracle o =
        synthesize_problem(ProblemKind::LeastSquares, RiskKind::Empirical, 4, 3, 18, 0.5, 59);
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 4));
    for (const ConsensusMode mode : {ConsensusMode::Plain, ConsensusMode::Chebyshev}) {
        RunConfig cfg = basic_run(3, 0.4 / o.smoothness, 3, 30, 61);
        cfg.consensus = mode;
        EstimatorConfig est;
        est.kind = EstimatorKind::Sa;
        est.b = 3;
        const RunResult a = run(cfg, est, o, Regularizer::l1(0.02), w);
        const RunResult b = run(cfg, est, o, Regularizer::l1(0.02), w);
        REQUIRE(a.records.size() == b.records.size());
        for (std::size_t t = 0; t < a.records.size(); ++t) {
            REQUIRE(a.records[t].stat_term == b.records[t].stat_term);
            REQUIRE(a.records[t].psi.finite_value() == b.records[t].psi.finite_value());
        }
    }
}

TEST_CASE("theorem presets honor the prescriptions and clamps") {
    // Noise-free homogeneous data fit exactly at theta: zeta = 0, so the
    // log factor clamps to 1 and the complete graph (gap 1) gives K = 1.
    const ProblemOracle o =
        synthesize_problem(ProblemKind::LeastSquares, RiskKind::Empirical, 4, 3, 16, 0.0, 67,
                           /*nc_weight=*/0.0, /*noise_sigma=*/0.0);
    const Eigen::VectorXd x0 = o.thetas[0];

    const WeightMatrix complete = metropolis_weights(build_topology(Topology::Complete, 4));
    const auto [sa_run, sa_est] =
        theorem_defaults(TheoremPreset::Sa, o, complete, 0.5, x0, /*nu=*/0.0);
    REQUIRE(sa_run.rounds_k == 1);
    REQUIRE(sa_est.b == 1);  // nu = 0 clamps the batch to 1
    REQUIRE(sa_run.alpha == Catch::Approx(1.0 / o.smoothness));

    // m = n gives q = n and b = 1 for the empirical preset.
    const ProblemOracle square =
        synthesize_problem(ProblemKind::LeastSquares, RiskKind::Empirical, 4, 3, 4, 0.5, 71);
    const auto [sre_run, sre_est] =
        theorem_defaults(TheoremPreset::Sre, square, complete, 0.5, x0);
    REQUIRE(sre_est.q == 4);
    REQUIRE(sre_est.b == 1);

    // Ring K grows with 1/(1 - lambda_*).
    const WeightMatrix ring = metropolis_weights(build_topology(Topology::Ring, 4));
    const auto [ring_run, ring_est] =
        theorem_defaults(TheoremPreset::Sa, o, ring, 0.5, x0, /*nu=*/1.0);
    REQUIRE(ring_run.rounds_k >= 2);
    (void)ring_est;

    // SR-O without any variance estimate available must fail loudly.
    ProblemOracle no_nu = o;
    no_nu.nu_sq.clear();
    REQUIRE_THROWS_AS(theorem_defaults(TheoremPreset::Sro, no_nu, ring, 0.5, x0),
                      MissingConstant);
}
