#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "proxgt/prox.hpp"
#include "proxgt/rng.hpp"

using namespace proxgt;

namespace {

Eigen::VectorXd random_vector(int p, rng::Stream& stream, double scale = 2.0) {
    Eigen::VectorXd x(p);
    for (int j = 0; j < p; ++j) x(j) = scale * stream.next_gaussian();
    return x;
}

std::vector<Regularizer> all_kinds() {
    return {Regularizer::zero(), Regularizer::l1(1.3), Regularizer::box_scalar(-0.5, 0.75),
            Regularizer::l2ball(1.2)};
}

}  // namespace

TEST_CASE("soft threshold closed form") {
    Eigen::VectorXd x(2);
    x << 2.0, -0.5;
    const Eigen::VectorXd out = prox_eval(Regularizer::l1(1.0), 1.0, x);
    REQUIRE(out(0) == 1.0);
    REQUIRE(out(1) == 0.0);
}

TEST_CASE("zero regularizer prox is the identity") {
    rng::Stream stream(1, rng::Purpose::Test, 0, 0);
    const Eigen::VectorXd x = random_vector(7, stream);
    const Eigen::VectorXd out = prox_eval(Regularizer::zero(), 0.37, x);
    REQUIRE((out - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("l2 ball projection, step size irrelevant") {
    Eigen::VectorXd x(2);
    x << 3.0, 4.0;
    const Regularizer ball = Regularizer::l2ball(1.0);
    const Eigen::VectorXd out = prox_eval(ball, 0.7, x);
    REQUIRE(out(0) == Catch::Approx(0.6).margin(1e-15));
    REQUIRE(out(1) == Catch::Approx(0.8).margin(1e-15));
    const Eigen::VectorXd other = prox_eval(ball, 3.1, x);
    REQUIRE((out - other).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("box prox clamps, step size irrelevant") {
    Eigen::VectorXd x(3);
    x << -2.0, 0.3, 9.0;
    const Regularizer box = Regularizer::box_scalar(0.0, 1.0);
    const Eigen::VectorXd out = prox_eval(box, 0.5, x);
    REQUIRE(out(0) == 0.0);
    REQUIRE(out(1) == 0.3);
    REQUIRE(out(2) == 1.0);
    REQUIRE((prox_eval(box, 2.0, x) - out).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("h_eval values") {
    Eigen::VectorXd x(2);
    x << 1.0, -1.0;
    REQUIRE(h_eval(Regularizer::l1(2.0), x).finite_value() == Catch::Approx(4.0));

    Eigen::VectorXd inside(2), outside(2), boundary(2);
    inside << 0.5, 0.5;
    outside << 0.5, 2.0;
    boundary << 0.5, 1.0;
    const Regularizer box = Regularizer::box_scalar(0.0, 1.0);
    REQUIRE(h_eval(box, inside).finite_value() == 0.0);
    REQUIRE(h_eval(box, outside).is_infinite());
    REQUIRE_FALSE(h_eval(box, boundary).is_infinite());
}

TEST_CASE("non-finite input is rejected") {
    Eigen::VectorXd bad(2);
    bad << 1.0, std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(prox_eval(Regularizer::l1(1.0), 1.0, bad), NonFinite);
    REQUIRE_THROWS_AS(h_eval(Regularizer::zero(), bad), NonFinite);
}

TEST_CASE("fixed point residual reduces to the gradient norm for h = 0") {
    rng::Stream stream(2, rng::Purpose::Test, 0, 0);
    const Eigen::VectorXd x = random_vector(5, stream);
    const Eigen::VectorXd grad = random_vector(5, stream);
    for (double alpha : {0.1, 1.0, 2.5}) {
        REQUIRE(fixed_point_residual(Regularizer::zero(), alpha, x, grad) ==
                Catch::Approx(grad.norm()).epsilon(1e-12));
    }
}

TEST_CASE("fixed point residual vanishes at a constructed fixed point") {
    const Regularizer box = Regularizer::box_scalar(-0.3, 0.3);
    rng::Stream stream(3, rng::Purpose::Test, 0, 0);
    const Eigen::VectorXd grad = random_vector(4, stream);
    const double alpha = 0.7;
    // Iterate the prox map to a fixed point of x = prox(x - alpha grad).
    Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
    for (int it = 0; it < 200; ++it) x = prox_eval(box, alpha, x - alpha * grad);
    REQUIRE(fixed_point_residual(box, alpha, x, grad) < 1e-12);
}

TEST_CASE("constrained quadratic keeps x = 1 stationary under box [1,2]") {
    // F = x^2/2 on the box [1, 2]: the KKT point is x = 1 (gradient 1 > 0
    // pushes against the lower bound).
    Eigen::VectorXd x(1), grad(1);
    x << 1.0;
    grad << 1.0;
    const Regularizer box = Regularizer::box_scalar(1.0, 2.0);
    REQUIRE(fixed_point_residual(box, 0.5, x, grad) == 0.0);
    REQUIRE(fixed_point_residual(box, 0.1, x, grad) == 0.0);
}

TEST_CASE("nonexpansiveness over 1000 random pairs per kind") {
    for (const Regularizer& h : all_kinds()) {
        rng::Stream stream(4, rng::Purpose::Test, 0, 0);
        for (int trial = 0; trial < 1000; ++trial) {
            const Eigen::VectorXd x = random_vector(6, stream);
            const Eigen::VectorXd y = random_vector(6, stream);
            const double alpha = 0.05 + 2.0 * stream.next_double();
            const double lhs = (prox_eval(h, alpha, x) - prox_eval(h, alpha, y)).norm();
            REQUIRE(lhs <= (x - y).norm() + 1e-12);
        }
    }
}

TEST_CASE("prox optimality against random perturbations") {
    for (const Regularizer& h : all_kinds()) {
        rng::Stream stream(5, rng::Purpose::Test, 0, 0);
        for (int trial = 0; trial < 100; ++trial) {
            const Eigen::VectorXd x = random_vector(5, stream);
            const double alpha = 0.05 + stream.next_double();
            const Eigen::VectorXd px = prox_eval(h, alpha, x);
            const double obj_prox =
                0.5 * (px - x).squaredNorm() + alpha * h_eval(h, px).finite_value();
            for (int probe = 0; probe < 100; ++probe) {
                const Eigen::VectorXd u = random_vector(5, stream);
                const ExtendedReal hu = h_eval(h, u);
                if (hu.is_infinite()) continue;
                const double obj_u = 0.5 * (u - x).squaredNorm() + alpha * hu.finite_value();
                REQUIRE(obj_prox <= obj_u + 1e-10);
            }
        }
    }
}

TEST_CASE("prox output is exactly feasible for indicators") {
    const Regularizer box = Regularizer::box_scalar(-0.25, 0.5);
    const Regularizer ball = Regularizer::l2ball(0.9);
    rng::Stream stream(6, rng::Purpose::Test, 0, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::VectorXd x = random_vector(4, stream, 5.0);
        const Eigen::VectorXd bx = prox_eval(box, 1.0, x);
        REQUIRE(bx.minCoeff() >= -0.25);
        REQUIRE(bx.maxCoeff() <= 0.5);
        REQUIRE(prox_eval(ball, 1.0, x).norm() <= 0.9 + 1e-15);
    }
}

TEST_CASE("regularizer spec strings round-trip") {
    for (const char* spec : {"zero", "l1:0.01", "box:-0.1:0.1", "l2ball:1.5"}) {
        const Regularizer h = regularizer_from_spec(spec);
        REQUIRE(h.spec() == spec);
    }
    REQUIRE_THROWS_AS(regularizer_from_spec("l0:3"), ParseError);
    REQUIRE_THROWS_AS(regularizer_from_spec("box:1"), ParseError);
}
