#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "proxgt/errors.hpp"
#include "proxgt/rng.hpp"

namespace proxgt {

// Undirected communication graph. Self-loops are implicit: every node may
// always use its own value, so (i,i) is never stored in `edges`.
struct Graph {
    int n = 0;
    std::set<std::pair<int, int>> edges;  // pairs stored with first < second

    void add_edge(int i, int r) {
        if (i == r) return;
        if (i < 0 || r < 0 || i >= n || r >= n) throw BadShape("edge index out of range");
        edges.insert({std::min(i, r), std::max(i, r)});
    }

    bool has_edge(int i, int r) const {
        if (i == r) return false;
        return edges.count({std::min(i, r), std::max(i, r)}) > 0;
    }

    std::vector<int> degrees() const {
        std::vector<int> deg(static_cast<std::size_t>(n), 0);
        for (const auto& [i, r] : edges) {
            ++deg[static_cast<std::size_t>(i)];
            ++deg[static_cast<std::size_t>(r)];
        }
        return deg;
    }
};

inline bool is_connected(const Graph& g) {
    if (g.n <= 1) return true;
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(g.n));
    for (const auto& [i, r] : g.edges) {
        adj[static_cast<std::size_t>(i)].push_back(r);
        adj[static_cast<std::size_t>(r)].push_back(i);
    }
    std::vector<char> seen(static_cast<std::size_t>(g.n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                ++count;
                stack.push_back(v);
            }
        }
    }
    return count == g.n;
}

enum class Topology { Ring, Path, Grid2d, Complete, Star, ErdosRenyi };

inline Graph build_topology(Topology kind, int n, double er_prob = 0.0,
                            std::uint64_t er_seed = 0) {
    if (n < 1) throw BadShape("node count must be >= 1");
    Graph g;
    g.n = n;
    switch (kind) {
        case Topology::Ring:
            for (int i = 0; i + 1 < n; ++i) g.add_edge(i, i + 1);
            if (n >= 3) g.add_edge(n - 1, 0);
            break;
        case Topology::Path:
            for (int i = 0; i + 1 < n; ++i) g.add_edge(i, i + 1);
            break;
        case Topology::Grid2d: {
            int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
            if (side * side != n) throw BadShape("grid2d requires a perfect-square node count");
            for (int row = 0; row < side; ++row) {
                for (int col = 0; col < side; ++col) {
                    int id = row * side + col;
                    if (col + 1 < side) g.add_edge(id, id + 1);
                    if (row + 1 < side) g.add_edge(id, id + side);
                }
            }
            break;
        }
        case Topology::Complete:
            for (int i = 0; i < n; ++i)
                for (int r = i + 1; r < n; ++r) g.add_edge(i, r);
            break;
        case Topology::Star:
            for (int i = 1; i < n; ++i) g.add_edge(0, i);
            break;
        case Topology::ErdosRenyi: {
            if (!(er_prob > 0.0) || er_prob > 1.0)
                throw BadShape("erdos_renyi edge probability must be in (0,1]");
            const int max_retries = 256;
            for (int attempt = 0; attempt < max_retries; ++attempt) {
                Graph trial;
                trial.n = n;
                rng::Stream stream(er_seed, rng::Purpose::Topology, 0,
                                   static_cast<std::uint64_t>(attempt));
                for (int i = 0; i < n; ++i)
                    for (int r = i + 1; r < n; ++r)
                        if (stream.next_double() < er_prob) trial.add_edge(i, r);
                if (is_connected(trial)) return trial;
            }
            throw NotConnected("erdos_renyi sampling exhausted retries without a connected graph");
        }
    }
    return g;
}

// Doubly stochastic mixing matrix with its cached contraction factor
// lambda_star = ||W - (1/n)11^T||, the second largest singular value.
struct WeightMatrix {
    int n = 0;
    Eigen::MatrixXd entries;
    double lambda_star = 0.0;

    double spectral_gap() const { return 1.0 - lambda_star; }
    bool is_symmetric(double tol = 1e-12) const {
        return (entries - entries.transpose()).cwiseAbs().maxCoeff() <= tol;
    }
};

namespace detail {

inline double second_largest_singular_value(const Eigen::MatrixXd& w) {
    const int n = static_cast<int>(w.rows());
    if (n == 1) return 0.0;
    Eigen::MatrixXd deviation = w;
    deviation.array() -= 1.0 / static_cast<double>(n);
    if ((deviation - deviation.transpose()).cwiseAbs().maxCoeff() <= 1e-13) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
            0.5 * (deviation + deviation.transpose()));
        return eig.eigenvalues().cwiseAbs().maxCoeff();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(deviation);
    return svd.singularValues()(0);
}

}  // namespace detail

inline WeightMatrix metropolis_weights(const Graph& g, bool lazy = false) {
    if (!is_connected(g)) throw NotConnected("metropolis weights require a connected graph");
    const int n = g.n;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    const auto deg = g.degrees();
    for (const auto& [i, r] : g.edges) {
        const double value = 1.0 / (1.0 + static_cast<double>(std::max(
                                              deg[static_cast<std::size_t>(i)],
                                              deg[static_cast<std::size_t>(r)])));
        w(i, r) = value;
        w(r, i) = value;
    }
    for (int i = 0; i < n; ++i) w(i, i) = 1.0 - w.row(i).sum();
    if (lazy) {
        w = 0.5 * (Eigen::MatrixXd::Identity(n, n) + w);
    }
    WeightMatrix out;
    out.n = n;
    out.entries = std::move(w);
    out.lambda_star = detail::second_largest_singular_value(out.entries);
    return out;
}

inline double spectral_gap(const WeightMatrix& w) { return w.spectral_gap(); }

// Accepts an externally supplied matrix (e.g. for directed-support
// experiments) provided it is doubly stochastic within tolerance and its
// support agrees with the graph: positive exactly on edges and the diagonal.
inline WeightMatrix validate_weight_matrix(const Eigen::MatrixXd& m, const Graph& g,
                                           double tol = 1e-10) {
    if (m.rows() != g.n || m.cols() != g.n)
        throw ShapeMismatch("weight matrix shape does not match graph node count");
    const int n = g.n;
    if ((m.array() < -tol).any())
        throw NotDoublyStochastic("weight matrix has negative entries");
    for (int i = 0; i < n; ++i) {
        if (std::abs(m.row(i).sum() - 1.0) > tol)
            throw NotDoublyStochastic("row sum deviates from 1");
        if (std::abs(m.col(i).sum() - 1.0) > tol)
            throw NotDoublyStochastic("column sum deviates from 1");
    }
    for (int i = 0; i < n; ++i) {
        // Self-loops are part of the support by convention.
        if (!(m(i, i) > tol)) throw SparsityMismatch("zero weight on the diagonal");
        for (int r = 0; r < n; ++r) {
            if (i == r) continue;
            const bool edge = g.has_edge(i, r);
            if (!edge && m(i, r) > tol)
                throw SparsityMismatch("positive weight on a non-edge");
            if (edge && !(m(i, r) > tol))
                throw SparsityMismatch("zero weight on an edge");
        }
    }
    WeightMatrix out;
    out.n = n;
    out.entries = m;
    out.lambda_star = detail::second_largest_singular_value(m);
    return out;
}

// Topology spec strings: ring, path, grid2d, complete, star, er:<p>:<seed>.
inline Graph build_topology_from_spec(const std::string& spec, int n) {
    if (spec == "ring") return build_topology(Topology::Ring, n);
    if (spec == "path") return build_topology(Topology::Path, n);
    if (spec == "grid2d") return build_topology(Topology::Grid2d, n);
    if (spec == "complete") return build_topology(Topology::Complete, n);
    if (spec == "star") return build_topology(Topology::Star, n);
    if (spec.rfind("er:", 0) == 0) {
        const auto rest = spec.substr(3);
        const auto colon = rest.find(':');
        if (colon == std::string::npos)
            throw ParseError("erdos_renyi spec must be er:<p>:<seed>");
        double prob = 0.0;
        std::uint64_t seed = 0;
        try {
            prob = std::stod(rest.substr(0, colon));
            seed = static_cast<std::uint64_t>(std::stoull(rest.substr(colon + 1)));
        } catch (const std::exception&) {
            throw ParseError("malformed er:<p>:<seed> topology spec: " + spec);
        }
        return build_topology(Topology::ErdosRenyi, n, prob, seed);
    }
    throw ParseError("unknown topology spec: " + spec);
}

}  // namespace proxgt
