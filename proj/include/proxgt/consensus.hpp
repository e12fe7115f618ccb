#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

#include "proxgt/errors.hpp"
#include "proxgt/graph.hpp"

namespace proxgt {

// n per-node vectors in R^p, stored as a p x n matrix so each node block is
// one contiguous column. Mixing x -> (W (x) I_p) x becomes data * W^T.
struct StackedVectors {
    Eigen::MatrixXd data;  // p rows, n cols

    StackedVectors() = default;
    StackedVectors(int n, int p) : data(Eigen::MatrixXd::Zero(p, n)) {}
    explicit StackedVectors(Eigen::MatrixXd m) : data(std::move(m)) {}

    int n() const { return static_cast<int>(data.cols()); }
    int p() const { return static_cast<int>(data.rows()); }

    auto block(int i) { return data.col(i); }
    auto block(int i) const { return data.col(i); }

    Eigen::VectorXd blockwise_mean() const { return data.rowwise().mean(); }

    static StackedVectors replicate(const Eigen::VectorXd& v, int n) {
        StackedVectors out;
        out.data = v.replicate(1, n);
        return out;
    }
};

inline void check_shapes(const WeightMatrix& w, const StackedVectors& v) {
    if (v.n() != w.n) throw ShapeMismatch("stacked vector node count does not match weight matrix");
}

// K successive gossip rounds; W^K is never formed so each round corresponds
// to one exchange of communication. When a counter is supplied it advances
// by k, the number of rounds spent.
inline StackedVectors mix(const WeightMatrix& w, const StackedVectors& v, int k,
                          std::int64_t* comm_rounds = nullptr) {
    check_shapes(w, v);
    if (k < 0) throw BadShape("round count must be >= 0");
    StackedVectors out = v;
    for (int round = 0; round < k; ++round) {
        out.data = out.data * w.entries.transpose();
    }
    if (comm_rounds) *comm_rounds += k;
    return out;
}

// Sum of squared deviations from the blockwise mean, ||x - Jx||^2.
inline double consensus_error(const StackedVectors& v) {
    if (v.n() == 0) return 0.0;
    const Eigen::VectorXd mean = v.blockwise_mean();
    return (v.data.colwise() - mean).squaredNorm();
}

// Degree-k Chebyshev polynomial of W rescaled to [-lambda_*, lambda_*] and
// normalized so P_k(1) = 1. Uses the three-term recurrence on iterates
// y_{j+1} = (2/lambda) W y_j - y_{j-1} together with the matching scalar
// sequence a_j = T_j(1/lambda); the result y_k / a_k contracts the
// disagreement by 1/T_k(1/lambda) = 2 rho^k / (1 + rho^{2k}) with
// rho = (1 - sqrt(1 - lambda^2)) / lambda.
inline StackedVectors chebyshev_mix(const WeightMatrix& w, const StackedVectors& v, int k,
                                    std::int64_t* comm_rounds = nullptr) {
    check_shapes(w, v);
    if (k < 1) throw BadShape("chebyshev_mix needs at least one round");
    if (!w.is_symmetric(1e-12))
        throw AsymmetricMatrix("chebyshev acceleration requires a symmetric weight matrix");
    if (w.lambda_star >= 1.0)
        throw NotConnected("chebyshev acceleration requires lambda_star < 1");
    if (comm_rounds) *comm_rounds += k;
    const double lambda = w.lambda_star;
    // lambda == 0 means W is already the exact averaging matrix.
    if (lambda < 1e-15 || k == 1) {
        return mix(w, v, 1);
    }
    const double inv_lambda = 1.0 / lambda;
    Eigen::MatrixXd y_prev = v.data;                                   // T_0 term
    Eigen::MatrixXd y_cur = inv_lambda * (v.data * w.entries.transpose());  // T_1 term
    double a_prev = 1.0;
    double a_cur = inv_lambda;
    for (int j = 1; j < k; ++j) {
        Eigen::MatrixXd y_next =
            2.0 * inv_lambda * (y_cur * w.entries.transpose()) - y_prev;
        const double a_next = 2.0 * inv_lambda * a_cur - a_prev;
        y_prev.swap(y_cur);
        y_cur = std::move(y_next);
        a_prev = a_cur;
        a_cur = a_next;
        // The scalar sequence grows like rho^{-j}; rescale both sequences
        // before it can overflow. Scaling is exact for the final ratio.
        if (a_cur > 1e250) {
            const double scale = 1.0 / a_cur;
            y_prev *= scale;
            y_cur *= scale;
            a_prev *= scale;
            a_cur = 1.0;
        }
    }
    return StackedVectors(y_cur / a_cur);
}

// Theoretical contraction factor of chebyshev_mix after k rounds.
inline double chebyshev_contraction_factor(double lambda_star, int k) {
    if (lambda_star <= 0.0) return 0.0;
    const double rho = (1.0 - std::sqrt(1.0 - lambda_star * lambda_star)) / lambda_star;
    const double rk = std::pow(rho, k);
    return 2.0 * rk / (1.0 + rk * rk);
}

}  // namespace proxgt
