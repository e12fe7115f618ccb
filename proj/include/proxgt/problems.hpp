#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "proxgt/consensus.hpp"
#include "proxgt/errors.hpp"
#include "proxgt/prox.hpp"
#include "proxgt/rng.hpp"

namespace proxgt {

enum class RiskKind { Population, Empirical };
enum class ProblemKind { LeastSquares, NcLogistic };

// One stochastic draw. Empirical risk samples carry an index into the local
// shard; population risk samples carry a freshly drawn (features, target).
struct Sample {
    int index = -1;
    Eigen::VectorXd features;
    double target = 0.0;
};

// A batch of draws for one (node, iteration); the same batch object must be
// passed to both sides of a paired gradient difference.
struct SampleBatch {
    int node = 0;
    std::int64_t iteration = 0;
    std::vector<Sample> samples;

    int size() const { return static_cast<int>(samples.size()); }
};

namespace detail {

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double log1p_exp(double z) {
    // log(1 + e^z), stable for large |z|.
    if (z > 35.0) return z;
    if (z < -35.0) return std::exp(z);
    return std::log1p(std::exp(z));
}

// Probabilists' Gauss-Hermite rule: nodes/weights for integrating against
// the standard normal density, via the Golub-Welsch tridiagonal.
struct GaussHermiteRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};

inline const GaussHermiteRule& gauss_hermite_rule() {
    static const GaussHermiteRule rule = [] {
        constexpr int kOrder = 48;
        Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(kOrder, kOrder);
        for (int i = 1; i < kOrder; ++i) {
            const double off = std::sqrt(static_cast<double>(i));
            jacobi(i, i - 1) = off;
            jacobi(i - 1, i) = off;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
        GaussHermiteRule r;
        r.nodes = eig.eigenvalues();
        r.weights.resize(kOrder);
        for (int i = 0; i < kOrder; ++i) {
            const double first = eig.eigenvectors()(0, i);
            r.weights(i) = first * first;
        }
        return r;
    }();
    return rule;
}

}  // namespace detail

// Local risk oracle for node i: exact gradients/values of f_i, per-sample
// stochastic gradients, and draw machinery for both risk kinds.
//
// Built-in kinds:
//   least_squares   G(x; a, y) = 1/2 (a'x - y)^2
//   nc_logistic     G(x; a, y) = log(1 + exp(-y a'x)) + a_nc * sum_j x_j^2/(1+x_j^2)
//
// Population risk draws fresh Gaussian-design samples: a ~ N(0, I_p) and
// y = a'theta_i + sigma eps (least squares) or y = +-1 from the logistic
// model at theta_i. Exact population gradients are closed-form for least
// squares and Gauss-Hermite quadrature over span{x, theta_i} for logistic.
class ProblemOracle {
public:
    ProblemKind kind = ProblemKind::LeastSquares;
    RiskKind risk = RiskKind::Empirical;
    int n = 0;
    int p = 0;
    int m = 0;                  // local sample count (empirical)
    double nc_weight = 0.0;     // a_nc in the nonconvex regularizer
    double noise_sigma = 0.0;   // target noise (population; recorded for synth)
    std::uint64_t seed = 0;

    std::vector<Eigen::MatrixXd> shards;   // empirical: A_i, m x p
    std::vector<Eigen::VectorXd> targets;  // empirical: b_i (or +-1 labels)
    std::vector<Eigen::VectorXd> thetas;   // population generative parameters

    double smoothness = 0.0;      // L for Assumption 1(b)
    double mss_smoothness = 0.0;  // L for Assumption 5 (>= smoothness)
    std::vector<double> nu_sq;    // per-node variance bound estimates nu_i^2

    bool mean_squared_smooth() const { return true; }
    double nu() const {
        double acc = 0.0;
        for (double v : nu_sq) acc += v;
        return std::sqrt(acc / static_cast<double>(n));
    }

    // --- exact local quantities ---------------------------------------

    Eigen::VectorXd local_exact_gradient(int i, const Eigen::VectorXd& x) const {
        check_node(i);
        require_finite(x, "gradient input");
        if (risk == RiskKind::Empirical) {
            const Eigen::MatrixXd& A = shards[static_cast<std::size_t>(i)];
            const Eigen::VectorXd& b = targets[static_cast<std::size_t>(i)];
            if (kind == ProblemKind::LeastSquares) {
                return A.transpose() * (A * x - b) / static_cast<double>(m);
            }
            Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
            for (int s = 0; s < m; ++s) {
                const double y = b(s);
                const double margin = y * A.row(s).dot(x);
                g -= (y * detail::sigmoid(-margin)) * A.row(s).transpose();
            }
            g /= static_cast<double>(m);
            return g + nc_reg_gradient(x);
        }
        const Eigen::VectorXd& theta = thetas[static_cast<std::size_t>(i)];
        if (kind == ProblemKind::LeastSquares) {
            return x - theta;
        }
        return population_logistic_gradient(x, theta) + nc_reg_gradient(x);
    }

    double local_value(int i, const Eigen::VectorXd& x) const {
        check_node(i);
        if (risk == RiskKind::Empirical) {
            const Eigen::MatrixXd& A = shards[static_cast<std::size_t>(i)];
            const Eigen::VectorXd& b = targets[static_cast<std::size_t>(i)];
            if (kind == ProblemKind::LeastSquares) {
                return 0.5 * (A * x - b).squaredNorm() / static_cast<double>(m);
            }
            double acc = 0.0;
            for (int s = 0; s < m; ++s) {
                acc += detail::log1p_exp(-b(s) * A.row(s).dot(x));
            }
            return acc / static_cast<double>(m) + nc_reg_value(x);
        }
        const Eigen::VectorXd& theta = thetas[static_cast<std::size_t>(i)];
        if (kind == ProblemKind::LeastSquares) {
            return 0.5 * ((x - theta).squaredNorm() + noise_sigma * noise_sigma);
        }
        return population_logistic_value(x, theta) + nc_reg_value(x);
    }

    Eigen::VectorXd global_exact_gradient(const Eigen::VectorXd& x) const {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
        for (int i = 0; i < n; ++i) g += local_exact_gradient(i, x);
        return g / static_cast<double>(n);
    }

    double global_value(const Eigen::VectorXd& x) const {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += local_value(i, x);
        return acc / static_cast<double>(n);
    }

    // --- stochastic machinery ------------------------------------------

    Sample draw_sample(int i, rng::Stream& stream) const {
        check_node(i);
        Sample s;
        if (risk == RiskKind::Empirical) {
            s.index = static_cast<int>(stream.next_below(static_cast<std::uint64_t>(m)));
            return s;
        }
        s.features.resize(p);
        for (int j = 0; j < p; ++j) s.features(j) = stream.next_gaussian();
        const Eigen::VectorXd& theta = thetas[static_cast<std::size_t>(i)];
        if (kind == ProblemKind::LeastSquares) {
            s.target = s.features.dot(theta) + noise_sigma * stream.next_gaussian();
        } else {
            const double prob_pos = detail::sigmoid(s.features.dot(theta));
            s.target = stream.next_double() < prob_pos ? 1.0 : -1.0;
        }
        return s;
    }

    SampleBatch draw_batch(int i, std::int64_t iteration, int size, std::uint64_t run_seed) const {
        if (size < 1) throw BadShape("batch size must be >= 1");
        SampleBatch batch;
        batch.node = i;
        batch.iteration = iteration;
        batch.samples.reserve(static_cast<std::size_t>(size));
        for (int d = 0; d < size; ++d) {
            rng::Stream stream(run_seed, rng::Purpose::Batch, static_cast<std::uint64_t>(i),
                               static_cast<std::uint64_t>(iteration),
                               static_cast<std::uint64_t>(d));
            batch.samples.push_back(draw_sample(i, stream));
        }
        return batch;
    }

    // Full-pass batch visiting every empirical index exactly once.
    SampleBatch full_pass_batch(int i) const {
        if (risk != RiskKind::Empirical) throw OracleError("full pass requires empirical risk");
        SampleBatch batch;
        batch.node = i;
        batch.samples.resize(static_cast<std::size_t>(m));
        for (int s = 0; s < m; ++s) batch.samples[static_cast<std::size_t>(s)].index = s;
        return batch;
    }

    Eigen::VectorXd sample_gradient(int i, const Eigen::VectorXd& x, const Sample& s) const {
        if (risk == RiskKind::Empirical) {
            const Eigen::MatrixXd& A = shards[static_cast<std::size_t>(i)];
            const Eigen::VectorXd& b = targets[static_cast<std::size_t>(i)];
            const auto row = A.row(s.index);
            if (kind == ProblemKind::LeastSquares) {
                return (row.dot(x) - b(s.index)) * row.transpose();
            }
            const double y = b(s.index);
            Eigen::VectorXd g = (-y * detail::sigmoid(-y * row.dot(x))) * row.transpose();
            return g + nc_reg_gradient(x);
        }
        if (kind == ProblemKind::LeastSquares) {
            return (s.features.dot(x) - s.target) * s.features;
        }
        const double y = s.target;
        Eigen::VectorXd g = (-y * detail::sigmoid(-y * s.features.dot(x))) * s.features;
        return g + nc_reg_gradient(x);
    }

    Eigen::VectorXd stochastic_gradient(int i, const Eigen::VectorXd& x,
                                        const SampleBatch& batch) const {
        check_node(i);
        require_finite(x, "gradient input");
        if (batch.size() < 1) throw BadShape("batch size must be >= 1");
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(p);
        for (const Sample& s : batch.samples) acc += sample_gradient(i, x, s);
        acc /= static_cast<double>(batch.size());
        if (!acc.allFinite()) throw NonFinite("stochastic gradient is not finite");
        return acc;
    }

    // SARAH-style difference; both gradients use the same sample so the
    // result is exactly zero when x_new == x_old.
    Eigen::VectorXd paired_gradient_difference(int i, const Eigen::VectorXd& x_new,
                                               const Eigen::VectorXd& x_old,
                                               const SampleBatch& batch) const {
        check_node(i);
        require_finite(x_new, "gradient input");
        require_finite(x_old, "gradient input");
        if (batch.size() < 1) throw BadShape("batch size must be >= 1");
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(p);
        for (const Sample& s : batch.samples) {
            acc += sample_gradient(i, x_new, s) - sample_gradient(i, x_old, s);
        }
        acc /= static_cast<double>(batch.size());
        if (!acc.allFinite()) throw NonFinite("paired gradient difference is not finite");
        return acc;
    }

    // Exact single-sample gradient variance at x (data pass for empirical,
    // closed form for population least squares, Monte Carlo otherwise).
    double variance_at(int i, const Eigen::VectorXd& x) const {
        check_node(i);
        if (risk == RiskKind::Empirical) {
            const Eigen::VectorXd mean = local_exact_gradient(i, x);
            double acc = 0.0;
            SampleBatch pass = full_pass_batch(i);
            for (const Sample& s : pass.samples) {
                acc += (sample_gradient(i, x, s) - mean).squaredNorm();
            }
            return acc / static_cast<double>(m);
        }
        if (kind == ProblemKind::LeastSquares) {
            const Eigen::VectorXd d = x - thetas[static_cast<std::size_t>(i)];
            return static_cast<double>(p + 1) * d.squaredNorm() +
                   static_cast<double>(p) * noise_sigma * noise_sigma;
        }
        // Pilot sampling for the population logistic model.
        constexpr int kPilot = 10000;
        const Eigen::VectorXd mean = local_exact_gradient(i, x);
        double acc = 0.0;
        for (int d = 0; d < kPilot; ++d) {
            rng::Stream stream(seed, rng::Purpose::Pilot, static_cast<std::uint64_t>(i), 0,
                               static_cast<std::uint64_t>(d));
            const Sample s = draw_sample(i, stream);
            acc += (sample_gradient(i, x, s) - mean).squaredNorm();
        }
        return acc / static_cast<double>(kPilot);
    }

    // Pooled variance bound nu^2 = (1/n) sum nu_i^2 re-estimated at x.
    double pooled_variance_at(const Eigen::VectorXd& x) const {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += variance_at(i, x);
        return acc / static_cast<double>(n);
    }

    void check_node(int i) const {
        if (i < 0 || i >= n) throw BadShape("node index out of range");
    }

    // --- nonconvex regularizer a_nc * sum x_j^2 / (1 + x_j^2) -----------

    double nc_reg_value(const Eigen::VectorXd& x) const {
        if (nc_weight == 0.0) return 0.0;
        double acc = 0.0;
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            const double sq = x(j) * x(j);
            acc += sq / (1.0 + sq);
        }
        return nc_weight * acc;
    }

    Eigen::VectorXd nc_reg_gradient(const Eigen::VectorXd& x) const {
        if (nc_weight == 0.0) return Eigen::VectorXd::Zero(x.size());
        Eigen::VectorXd g(x.size());
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            const double denom = 1.0 + x(j) * x(j);
            g(j) = nc_weight * 2.0 * x(j) / (denom * denom);
        }
        return g;
    }

private:
    // E_a[ l(a'x, a'theta) ] style integrals reduce to 2-D quadrature over
    // the span of {x, theta}; components orthogonal to it integrate out.
    static void plane_basis(const Eigen::VectorXd& x, const Eigen::VectorXd& theta,
                            Eigen::VectorXd& e1, Eigen::VectorXd& e2, double& x1, double& t1,
                            double& t2) {
        const double xn = x.norm();
        if (xn > 1e-14) {
            e1 = x / xn;
            x1 = xn;
            t1 = theta.dot(e1);
            Eigen::VectorXd perp = theta - t1 * e1;
            const double pn = perp.norm();
            if (pn > 1e-14) {
                e2 = perp / pn;
                t2 = pn;
            } else {
                e2 = Eigen::VectorXd::Zero(x.size());
                t2 = 0.0;
            }
            return;
        }
        x1 = 0.0;
        const double tn = theta.norm();
        if (tn > 1e-14) {
            e1 = theta / tn;
            t1 = tn;
        } else {
            e1 = Eigen::VectorXd::Zero(x.size());
            t1 = 0.0;
        }
        e2 = Eigen::VectorXd::Zero(x.size());
        t2 = 0.0;
    }

    static double population_logistic_value(const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& theta) {
        Eigen::VectorXd e1, e2;
        double x1, t1, t2;
        plane_basis(x, theta, e1, e2, x1, t1, t2);
        const auto& rule = detail::gauss_hermite_rule();
        double acc = 0.0;
        for (int a = 0; a < rule.nodes.size(); ++a) {
            const double s = rule.nodes(a);
            const double u = x1 * s;
            for (int b = 0; b < rule.nodes.size(); ++b) {
                const double w = t1 * s + t2 * rule.nodes(b);
                const double weight = rule.weights(a) * rule.weights(b);
                // E_y[ log(1+e^{-y u}) | w ] with P(y=1) = sigmoid(w).
                acc += weight * (detail::sigmoid(w) * detail::log1p_exp(-u) +
                                 detail::sigmoid(-w) * detail::log1p_exp(u));
            }
        }
        return acc;
    }

    static Eigen::VectorXd population_logistic_gradient(const Eigen::VectorXd& x,
                                                        const Eigen::VectorXd& theta) {
        Eigen::VectorXd e1, e2;
        double x1, t1, t2;
        plane_basis(x, theta, e1, e2, x1, t1, t2);
        const auto& rule = detail::gauss_hermite_rule();
        double acc1 = 0.0;  // E[s * g(u, w)]
        double acc2 = 0.0;  // E[r * g(u, w)]
        for (int a = 0; a < rule.nodes.size(); ++a) {
            const double s = rule.nodes(a);
            const double u = x1 * s;
            for (int b = 0; b < rule.nodes.size(); ++b) {
                const double r = rule.nodes(b);
                const double w = t1 * s + t2 * r;
                const double weight = rule.weights(a) * rule.weights(b);
                // E_y[-y sigmoid(-y u) | w].
                const double g = -detail::sigmoid(w) * detail::sigmoid(-u) +
                                 detail::sigmoid(-w) * detail::sigmoid(u);
                acc1 += weight * s * g;
                acc2 += weight * r * g;
            }
        }
        Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
        if (e1.size() == x.size() && e1.squaredNorm() > 0.0) out += acc1 * e1;
        if (e2.size() == x.size() && e2.squaredNorm() > 0.0) out += acc2 * e2;
        return out;
    }
};

// Psi(x) = F(x) + h(x) under empirical risk; +inf outside dom(h).
inline ExtendedReal global_objective(const ProblemOracle& o, const Regularizer& h,
                                     const Eigen::VectorXd& x) {
    if (o.risk != RiskKind::Empirical)
        throw OracleError("global objective requires empirical risk; use a proxy for population");
    require_finite(x, "objective input");
    const ExtendedReal hval = h_eval(h, x);
    if (hval.is_infinite()) return hval;
    return ExtendedReal(o.global_value(x) + hval.finite_value());
}

// Frozen validation batch giving an empirical proxy of Psi for population
// runs; the batch is drawn once and reused so the proxy is comparable
// across iterations.
class ObjectiveProxy {
public:
    ObjectiveProxy() = default;

    ObjectiveProxy(const ProblemOracle& o, int samples_per_node, std::uint64_t run_seed) {
        batches_.reserve(static_cast<std::size_t>(o.n));
        for (int i = 0; i < o.n; ++i) {
            SampleBatch batch;
            batch.node = i;
            batch.samples.reserve(static_cast<std::size_t>(samples_per_node));
            for (int d = 0; d < samples_per_node; ++d) {
                rng::Stream stream(run_seed, rng::Purpose::Proxy, static_cast<std::uint64_t>(i),
                                   0, static_cast<std::uint64_t>(d));
                batch.samples.push_back(o.draw_sample(i, stream));
            }
            batches_.push_back(std::move(batch));
        }
    }

    ExtendedReal evaluate(const ProblemOracle& o, const Regularizer& h,
                          const Eigen::VectorXd& x) const {
        const ExtendedReal hval = h_eval(h, x);
        if (hval.is_infinite()) return hval;
        double acc = 0.0;
        std::int64_t count = 0;
        for (const SampleBatch& batch : batches_) {
            for (const Sample& s : batch.samples) {
                if (o.kind == ProblemKind::LeastSquares) {
                    const double resid = s.features.dot(x) - s.target;
                    acc += 0.5 * resid * resid;
                } else {
                    acc += detail::log1p_exp(-s.target * s.features.dot(x));
                }
                ++count;
            }
        }
        double value = acc / static_cast<double>(count);
        if (o.kind == ProblemKind::NcLogistic) value += o.nc_reg_value(x);
        return ExtendedReal(value + hval.finite_value());
    }

private:
    std::vector<SampleBatch> batches_;
};

namespace detail {

inline double spectral_norm_sq_over_m(const Eigen::MatrixXd& A) {
    const int m = static_cast<int>(A.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A.transpose() * A /
                                                       static_cast<double>(m));
    return eig.eigenvalues().maxCoeff();
}

// Smoothness L of f_i (Assumption 1(b)) from the data.
inline double empirical_smoothness(ProblemKind kind, const std::vector<Eigen::MatrixXd>& shards,
                                   double nc_weight) {
    double worst = 0.0;
    for (const auto& A : shards) worst = std::max(worst, spectral_norm_sq_over_m(A));
    if (kind == ProblemKind::LeastSquares) return worst;
    return 0.25 * worst + 2.0 * nc_weight;
}

// Mean-squared smoothness constant (Assumption 5). For least squares the
// per-sample second moment is d' M d with M = (1/m) sum ||a_s||^2 a_s a_s',
// so sqrt(sigma_max(M)) is exact; for logistic we use the per-sample
// Lipschitz bound 1/4 ||a_s||^2 + 2 a_nc.
inline double empirical_mss(ProblemKind kind, const std::vector<Eigen::MatrixXd>& shards,
                            double nc_weight) {
    double worst_sq = 0.0;
    for (const auto& A : shards) {
        const int m = static_cast<int>(A.rows());
        if (kind == ProblemKind::LeastSquares) {
            Eigen::MatrixXd M = Eigen::MatrixXd::Zero(A.cols(), A.cols());
            for (int s = 0; s < m; ++s) {
                M += A.row(s).squaredNorm() * (A.row(s).transpose() * A.row(s));
            }
            M /= static_cast<double>(m);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
            worst_sq = std::max(worst_sq, eig.eigenvalues().maxCoeff());
        } else {
            double acc = 0.0;
            for (int s = 0; s < m; ++s) {
                const double lip = 0.25 * A.row(s).squaredNorm() + 2.0 * nc_weight;
                acc += lip * lip;
            }
            worst_sq = std::max(worst_sq, acc / static_cast<double>(m));
        }
    }
    return std::sqrt(worst_sq);
}

inline double population_mss(ProblemKind kind, int p, double nc_weight) {
    if (kind == ProblemKind::LeastSquares) {
        // E ||a a' d||^2 = (p + 2) ||d||^2 for a ~ N(0, I_p).
        return std::sqrt(static_cast<double>(p + 2));
    }
    // E[(1/4 ||a||^2 + 2 a_nc)^2] with E||a||^2 = p, E||a||^4 = p(p+2).
    const double pd = static_cast<double>(p);
    return std::sqrt(pd * (pd + 2.0) / 16.0 + nc_weight * pd + 4.0 * nc_weight * nc_weight);
}

// Per-node variance bounds: analytic suprema of the single-sample gradient
// variance over the ball ||x|| <= radius (logistic bounds hold globally
// since its per-sample gradients are bounded).
inline void estimate_variance_bounds(ProblemOracle& o, double radius) {
    o.nu_sq.assign(static_cast<std::size_t>(o.n), 0.0);
    for (int i = 0; i < o.n; ++i) {
        double bound = 0.0;
        if (o.risk == RiskKind::Population) {
            if (o.kind == ProblemKind::LeastSquares) {
                const double reach = radius + o.thetas[static_cast<std::size_t>(i)].norm();
                bound = static_cast<double>(o.p + 1) * reach * reach +
                        static_cast<double>(o.p) * o.noise_sigma * o.noise_sigma;
            } else {
                bound = static_cast<double>(o.p);  // E||a sigmoid||^2 <= E||a||^2
            }
        } else {
            const Eigen::MatrixXd& A = o.shards[static_cast<std::size_t>(i)];
            const Eigen::VectorXd& b = o.targets[static_cast<std::size_t>(i)];
            for (int s = 0; s < o.m; ++s) {
                const double row_norm = A.row(s).norm();
                if (o.kind == ProblemKind::LeastSquares) {
                    const double residual_reach = row_norm * radius + std::abs(b(s));
                    bound += row_norm * row_norm * residual_reach * residual_reach;
                } else {
                    bound += row_norm * row_norm;
                }
            }
            bound /= static_cast<double>(o.m);
        }
        o.nu_sq[static_cast<std::size_t>(i)] = bound;
    }
}

}  // namespace detail

// Radius of the region over which nu_i is calibrated (and inside which the
// bounded-variance property test samples).
inline constexpr double kVarianceProbeRadius = 2.0;

// Deterministic synthetic problem. `heterogeneity` in [0,1] interpolates
// between one shared generative parameter and fully per-node parameters.
inline ProblemOracle synthesize_problem(ProblemKind kind, RiskKind risk, int n, int p, int m,
                                        double heterogeneity, std::uint64_t seed,
                                        double nc_weight = 0.0, double noise_sigma = 0.1) {
    if (n < 1 || p < 1 || m < 1) throw BadShape("synthesize_problem needs n, p, m >= 1");
    if (heterogeneity < 0.0 || heterogeneity > 1.0)
        throw BadShape("heterogeneity must lie in [0,1]");
    ProblemOracle o;
    o.kind = kind;
    o.risk = risk;
    o.n = n;
    o.p = p;
    o.m = m;
    o.nc_weight = kind == ProblemKind::NcLogistic ? nc_weight : 0.0;
    o.noise_sigma = noise_sigma;
    o.seed = seed;

    Eigen::VectorXd shared(p);
    {
        rng::Stream stream(seed, rng::Purpose::Synthesis, /*node=*/~0ULL, 0);
        for (int j = 0; j < p; ++j) shared(j) = stream.next_gaussian();
    }
    o.thetas.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        rng::Stream stream(seed, rng::Purpose::Synthesis, static_cast<std::uint64_t>(i), 0);
        Eigen::VectorXd own(p);
        for (int j = 0; j < p; ++j) own(j) = stream.next_gaussian();
        o.thetas[static_cast<std::size_t>(i)] =
            (1.0 - heterogeneity) * shared + heterogeneity * own;
    }

    if (risk == RiskKind::Empirical) {
        o.shards.resize(static_cast<std::size_t>(n));
        o.targets.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            rng::Stream stream(seed, rng::Purpose::Synthesis, static_cast<std::uint64_t>(i), 1);
            Eigen::MatrixXd A(m, p);
            Eigen::VectorXd b(m);
            const Eigen::VectorXd& theta = o.thetas[static_cast<std::size_t>(i)];
            for (int s = 0; s < m; ++s) {
                for (int j = 0; j < p; ++j) A(s, j) = stream.next_gaussian();
                if (kind == ProblemKind::LeastSquares) {
                    b(s) = A.row(s).dot(theta) + noise_sigma * stream.next_gaussian();
                } else {
                    const double prob_pos = detail::sigmoid(A.row(s).dot(theta));
                    b(s) = stream.next_double() < prob_pos ? 1.0 : -1.0;
                }
            }
            o.shards[static_cast<std::size_t>(i)] = std::move(A);
            o.targets[static_cast<std::size_t>(i)] = std::move(b);
        }
        o.smoothness = detail::empirical_smoothness(kind, o.shards, o.nc_weight);
        o.mss_smoothness = detail::empirical_mss(kind, o.shards, o.nc_weight);
    } else {
        o.smoothness = kind == ProblemKind::LeastSquares
                           ? 1.0
                           : 0.25 + 2.0 * o.nc_weight;
        o.mss_smoothness = detail::population_mss(kind, p, o.nc_weight);
    }
    detail::estimate_variance_bounds(o, kVarianceProbeRadius);
    return o;
}

enum class PartitionScheme { Contiguous, Shuffled, LabelSkewed };

struct PartitionSpec {
    PartitionScheme scheme = PartitionScheme::Contiguous;
    std::uint64_t seed = 0;
};

inline PartitionSpec partition_from_spec(const std::string& spec) {
    PartitionSpec out;
    if (spec == "contiguous") return out;
    auto parse_seeded = [&](const std::string& prefix, PartitionScheme scheme) -> bool {
        if (spec.rfind(prefix, 0) != 0) return false;
        out.scheme = scheme;
        const auto rest = spec.substr(prefix.size());
        if (!rest.empty()) {
            if (rest[0] != ':') throw ParseError("malformed partition spec: " + spec);
            try {
                out.seed = static_cast<std::uint64_t>(std::stoull(rest.substr(1)));
            } catch (const std::exception&) {
                throw ParseError("malformed partition seed: " + spec);
            }
        }
        return true;
    };
    if (parse_seeded("shuffled", PartitionScheme::Shuffled)) return out;
    if (parse_seeded("label_skewed", PartitionScheme::LabelSkewed)) return out;
    throw ParseError("unknown partition spec: " + spec);
}

struct Dataset {
    Eigen::MatrixXd features;
    Eigen::VectorXd targets;
};

// Numeric CSV, comma separated, no header; `#` lines are comments; the last
// column is the target.
inline Dataset load_csv_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t width = 0;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t begin = line.find_first_not_of(" \t\r");
        if (begin == std::string::npos || line[begin] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                throw ParseError("non-numeric cell at line " + std::to_string(line_no) + " of " +
                                 path);
            }
        }
        if (row.size() < 2)
            throw ParseError("row " + std::to_string(line_no) + " needs >= 2 columns");
        if (width == 0) width = row.size();
        if (row.size() != width)
            throw ParseError("inconsistent column count at line " + std::to_string(line_no));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("dataset is empty: " + path);
    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
    ds.targets.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c + 1 < width; ++c) {
            ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        ds.targets(static_cast<Eigen::Index>(r)) = rows[r][width - 1];
    }
    return ds;
}

// Splits dataset rows into n equal shards (trailing remainder rows are
// dropped) and builds an empirical oracle over them.
inline ProblemOracle load_and_partition(const std::string& path, int n,
                                        const PartitionSpec& partition,
                                        ProblemKind kind = ProblemKind::LeastSquares,
                                        double nc_weight = 0.0) {
    const Dataset ds = load_csv_dataset(path);
    const int rows = static_cast<int>(ds.features.rows());
    if (rows < n) throw TooFewRows("dataset has fewer rows than nodes");
    const int per_node = rows / n;

    std::vector<int> order(static_cast<std::size_t>(rows));
    std::iota(order.begin(), order.end(), 0);
    if (partition.scheme != PartitionScheme::Contiguous) {
        rng::Stream stream(partition.seed, rng::Purpose::Shuffle, 0, 0);
        for (int i = rows - 1; i > 0; --i) {
            const int j = static_cast<int>(stream.next_below(static_cast<std::uint64_t>(i + 1)));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }
    }
    if (partition.scheme == PartitionScheme::LabelSkewed) {
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return ds.targets(a) < ds.targets(b);
        });
    }

    ProblemOracle o;
    o.kind = kind;
    o.risk = RiskKind::Empirical;
    o.n = n;
    o.p = static_cast<int>(ds.features.cols());
    o.m = per_node;
    o.nc_weight = kind == ProblemKind::NcLogistic ? nc_weight : 0.0;
    o.seed = partition.seed;
    o.shards.resize(static_cast<std::size_t>(n));
    o.targets.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd A(per_node, o.p);
        Eigen::VectorXd b(per_node);
        for (int s = 0; s < per_node; ++s) {
            const int src = order[static_cast<std::size_t>(i * per_node + s)];
            A.row(s) = ds.features.row(src);
            double y = ds.targets(src);
            // Binary {0,1} labels map to the +-1 convention for logistic.
            if (kind == ProblemKind::NcLogistic && y == 0.0) y = -1.0;
            b(s) = y;
        }
        o.shards[static_cast<std::size_t>(i)] = std::move(A);
        o.targets[static_cast<std::size_t>(i)] = std::move(b);
    }
    o.smoothness = detail::empirical_smoothness(kind, o.shards, o.nc_weight);
    o.mss_smoothness = detail::empirical_mss(kind, o.shards, o.nc_weight);
    detail::estimate_variance_bounds(o, kVarianceProbeRadius);
    return o;
}

}  // namespace proxgt
