#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "proxgt/core.hpp"
#include "proxgt/errors.hpp"

namespace proxgt {

// Centralized proximal gradient descent, the exactness baseline:
// x_{t+1} = prox_{alpha h}(x_t - alpha grad F(x_t)).
inline std::vector<Eigen::VectorXd> centralized_prox_gd(const ProblemOracle& oracle,
                                                        const Regularizer& h, double alpha,
                                                        std::int64_t iterations,
                                                        const Eigen::VectorXd& x0) {
    if (!(alpha > 0.0)) throw BadShape("step size alpha must be > 0");
    std::vector<Eigen::VectorXd> trajectory;
    trajectory.reserve(static_cast<std::size_t>(iterations) + 1);
    Eigen::VectorXd x = x0;
    trajectory.push_back(x);
    for (std::int64_t t = 1; t <= iterations; ++t) {
        x = prox_eval(h, alpha, x - alpha * oracle.global_exact_gradient(x));
        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e12)
            throw Diverged("centralized prox-gd diverged at iteration " + std::to_string(t));
        trajectory.push_back(x);
    }
    return trajectory;
}

// Single-node minibatch stochastic proximal gradient over the pooled
// data/distribution: each sample picks a node uniformly, then draws from
// that node's local distribution. Used as the speedup comparator.
inline std::vector<RunRecord> centralized_minibatch_prox_sgd(const ProblemOracle& oracle,
                                                             const Regularizer& h, double alpha,
                                                             int b_total,
                                                             std::int64_t iterations,
                                                             const Eigen::VectorXd& x0,
                                                             std::uint64_t seed) {
    if (b_total < 1) throw BadShape("total batch size must be >= 1");
    if (!(alpha > 0.0)) throw BadShape("step size alpha must be > 0");
    std::vector<RunRecord> records;
    records.reserve(static_cast<std::size_t>(iterations));
    Eigen::VectorXd x = x0;
    double stat_sum = 0.0;
    std::int64_t samples = 0;
    for (std::int64_t t = 1; t <= iterations; ++t) {
        RunRecord rec;
        rec.t = t;
        const double stat = gradient_mapping(oracle, h, alpha, x).squaredNorm();
        stat_sum += stat;
        rec.stat_term = stat;
        rec.stat_running_mean = stat_sum / static_cast<double>(t);
        rec.consensus_err = 0.0;
        rec.psi_is_proxy = oracle.risk == RiskKind::Population;
        if (oracle.risk == RiskKind::Empirical) {
            rec.psi = global_objective(oracle, h, x);
        } else {
            const ExtendedReal hv = h_eval(h, x);
            rec.psi = hv.is_infinite() ? hv : ExtendedReal(oracle.global_value(x) +
                                                           hv.finite_value());
        }

        Eigen::VectorXd grad = Eigen::VectorXd::Zero(oracle.p);
        for (int d = 0; d < b_total; ++d) {
            rng::Stream stream(seed, rng::Purpose::Batch, /*node=*/0xC0000000ULL,
                               static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(d));
            const int node = static_cast<int>(stream.next_below(static_cast<std::uint64_t>(oracle.n)));
            const Sample s = oracle.draw_sample(node, stream);
            grad += oracle.sample_gradient(node, x, s);
        }
        grad /= static_cast<double>(b_total);
        x = prox_eval(h, alpha, x - alpha * grad);
        samples += b_total;
        rec.samples_per_node = samples;
        rec.comm_rounds = 0;
        records.push_back(rec);
        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e12)
            throw Diverged("centralized minibatch sgd diverged at iteration " + std::to_string(t));
    }
    return records;
}

// First iteration whose running-mean metric reaches eps^2; reports the
// per-node sample count at that iteration, or nothing if never reached.
inline std::optional<std::int64_t> samples_to_threshold(const std::vector<RunRecord>& records,
                                                        double epsilon) {
    if (!(epsilon > 0.0)) throw BadShape("epsilon must be > 0");
    const double target = epsilon * epsilon;
    for (const RunRecord& rec : records) {
        if (rec.stat_running_mean <= target) return rec.samples_per_node;
    }
    return std::nullopt;
}

namespace detail {

inline void append_double(std::string& out, double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

}  // namespace detail

inline constexpr const char* kCsvHeader =
    "t,stat_term,stat_running_mean,consensus_err,psi,psi_is_proxy,samples_per_node,"
    "comm_rounds,elapsed_ns";

// Rows use shortest round-trip float formatting so identical runs are
// byte-identical. Wall time is volatile, so the timing column is written as
// 0 unless explicitly requested.
inline std::string records_to_csv(const std::vector<RunRecord>& records,
                                  bool include_timing = false) {
    std::string out(kCsvHeader);
    out.push_back('\n');
    for (const RunRecord& rec : records) {
        out += std::to_string(rec.t);
        out.push_back(',');
        detail::append_double(out, rec.stat_term);
        out.push_back(',');
        detail::append_double(out, rec.stat_running_mean);
        out.push_back(',');
        detail::append_double(out, rec.consensus_err);
        out.push_back(',');
        if (rec.psi.is_infinite())
            out += "inf";
        else
            detail::append_double(out, rec.psi.finite_value());
        out.push_back(',');
        out += rec.psi_is_proxy ? '1' : '0';
        out.push_back(',');
        out += std::to_string(rec.samples_per_node);
        out.push_back(',');
        out += std::to_string(rec.comm_rounds);
        out.push_back(',');
        out += std::to_string(include_timing ? rec.elapsed_ns : 0);
        out.push_back('\n');
    }
    return out;
}

inline void write_csv(const std::string& path, const std::vector<RunRecord>& records,
                      bool include_timing = false) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open output file: " + path);
    out << records_to_csv(records, include_timing);
}

}  // namespace proxgt
