#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "proxgt/consensus.hpp"
#include "proxgt/graph.hpp"

using namespace proxgt;

namespace {

StackedVectors random_stack(int n, int p, std::uint64_t seed) {
    rng::Stream stream(seed, rng::Purpose::Test, 0, 0);
    StackedVectors v(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) v.data(j, i) = stream.next_gaussian();
    return v;
}

int rounds_to_consensus(const WeightMatrix& w, const StackedVectors& v0, bool accelerated,
                        double target) {
    for (int k = 1; k <= 4000; ++k) {
        const StackedVectors out = accelerated ? chebyshev_mix(w, v0, k) : mix(w, v0, k);
        if (consensus_error(out) <= target) return k;
    }
    return -1;
}

}  // namespace

TEST_CASE("mix with k=0 is the identity") {
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 5));
    const StackedVectors v = random_stack(5, 3, 1);
    const StackedVectors out = mix(w, v, 0);
    REQUIRE((out.data - v.data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("complete graph mixes to the blockwise mean in one round") {
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Complete, 6));
    const StackedVectors v = random_stack(6, 4, 2);
    const StackedVectors out = mix(w, v, 1);
    const Eigen::VectorXd mean = v.blockwise_mean();
    for (int i = 0; i < 6; ++i)
        REQUIRE((Eigen::VectorXd(out.block(i)) - mean).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("ring(4) single round spreads a unit impulse by the metropolis row") {
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 4));
    StackedVectors v(4, 1);
    v.data(0, 0) = 1.0;
    const StackedVectors out = mix(w, v, 1);
    REQUIRE(out.data(0, 0) == Catch::Approx(1.0 / 3.0).margin(1e-15));
    REQUIRE(out.data(0, 1) == Catch::Approx(1.0 / 3.0).margin(1e-15));
    REQUIRE(out.data(0, 2) == 0.0);
    REQUIRE(out.data(0, 3) == Catch::Approx(1.0 / 3.0).margin(1e-15));
}

TEST_CASE("mix rejects mismatched shapes") {
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 4));
    REQUIRE_THROWS_AS(mix(w, StackedVectors(5, 2), 1), ShapeMismatch);
}

TEST_CASE("round counters advance by k per call") {
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 6));
    const StackedVectors v = random_stack(6, 2, 9);
    std::int64_t rounds = 0;
    (void)mix(w, v, 3, &rounds);
    (void)chebyshev_mix(w, v, 5, &rounds);
    (void)mix(w, v, 0, &rounds);
    REQUIRE(rounds == 8);
}

TEST_CASE("consensus error basics") {
    StackedVectors equal(3, 2);
    equal.data.setConstant(0.7);
    REQUIRE(consensus_error(equal) <= 1e-30);

    // Two blocks (a, -a): the mean is zero, so the error is 2 ||a||^2.
    StackedVectors pair(2, 3);
    Eigen::VectorXd a(3);
    a << 1.0, -2.0, 0.5;
    pair.block(0) = a;
    pair.block(1) = -a;
    REQUIRE(consensus_error(pair) == Catch::Approx(2.0 * a.squaredNorm()).margin(1e-14));
}

TEST_CASE("consensus error contracts by lambda^2k per mix call") {
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 8));
    const StackedVectors v = random_stack(8, 3, 3);
    const double initial = consensus_error(v);
    for (int k : {1, 2, 5, 10}) {
        const double err = consensus_error(mix(w, v, k));
        REQUIRE(err <= std::pow(w.lambda_star, 2 * k) * initial + 1e-10);
    }
    // Monotone decay toward zero for growing k.
    double prev = initial;
    for (int k = 1; k <= 60; ++k) {
        const double err = consensus_error(mix(w, v, k));
        REQUIRE(err <= prev + 1e-15);
        prev = err;
    }
    REQUIRE(prev < 1e-9);
}

TEST_CASE("contraction lemma on vectors: ||W^K x - Jx|| <= lambda^K ||x - Jx||") {
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Grid2d, 9));
    for (int trial = 0; trial < 100; ++trial) {
        const StackedVectors x = random_stack(9, 2, 100 + static_cast<std::uint64_t>(trial));
        const double base = std::sqrt(consensus_error(x));
        for (int k : {1, 2, 5}) {
            const double lhs = std::sqrt(consensus_error(mix(w, x, k)));
            REQUIRE(lhs <= std::pow(w.lambda_star, k) * base + 1e-10);
        }
    }
}

TEST_CASE("chebyshev_mix with k=1 equals mix bit-for-bit") {
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 16));
    const StackedVectors v = random_stack(16, 4, 4);
    const StackedVectors a = chebyshev_mix(w, v, 1);
    const StackedVectors b = mix(w, v, 1);
    REQUIRE((a.data - b.data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("chebyshev_mix on the complete graph averages exactly") {
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Complete, 5));
    const StackedVectors v = random_stack(5, 2, 5);
    for (int k : {1, 3, 7}) {
        const StackedVectors out = chebyshev_mix(w, v, k);
        REQUIRE(consensus_error(out) < 1e-25);
    }
}

TEST_CASE("chebyshev_mix preserves the blockwise mean") {
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 12));
    const StackedVectors v = random_stack(12, 6, 6);
    for (int k : {2, 5, 20, 60}) {
        const StackedVectors out = chebyshev_mix(w, v, k);
        REQUIRE((out.blockwise_mean() - v.blockwise_mean()).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("chebyshev_mix contracts within its theoretical factor") {
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 16));
    const StackedVectors v = random_stack(16, 3, 7);
    const double base = std::sqrt(consensus_error(v));
    for (int k : {2, 4, 8, 16, 32}) {
        const double lhs = std::sqrt(consensus_error(chebyshev_mix(w, v, k)));
        REQUIRE(lhs <= chebyshev_contraction_factor(w.lambda_star, k) * base + 1e-10);
    }
}

TEST_CASE("chebyshev_mix requires symmetry") {
    const Graph g = build_topology(Topology::Ring, 3);
    // A circulant doubly stochastic but asymmetric matrix on the triangle.
    Eigen::MatrixXd m(3, 3);
    m << 0.5, 0.3, 0.2, 0.2, 0.5, 0.3, 0.3, 0.2, 0.5;
    const WeightMatrix w = validate_weight_matrix(m, g);
    REQUIRE_THROWS_AS(chebyshev_mix(w, StackedVectors(3, 1), 2), AsymmetricMatrix);
    REQUIRE_NOTHROW(mix(w, StackedVectors(3, 1), 2));
}

TEST_CASE("accelerated consensus needs strictly fewer rounds on ring(16)") {
    const WeightMatrix w = metropolis_weights(build_topology(Topology::Ring, 16));
    const StackedVectors v = random_stack(16, 4, 8);
    const int plain = rounds_to_consensus(w, v, false, 1e-6);
    const int accel = rounds_to_consensus(w, v, true, 1e-6);
    REQUIRE(plain > 0);
    REQUIRE(accel > 0);
    REQUIRE(accel < plain);
    // Golden counts for this fixed seed; the ratio backs the acceptance
    // criterion with a wide margin.
    REQUIRE(plain == 142);
    REQUIRE(accel == 29);
}
