#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "proxgt/errors.hpp"

namespace proxgt {

// Extended real value for h(x) in R u {+inf}. The infinite state is a
// dedicated flag so +inf never enters floating-point arithmetic.
class ExtendedReal {
public:
    ExtendedReal() : value_(0.0), infinite_(false) {}
    explicit ExtendedReal(double v) : value_(v), infinite_(false) {}

    static ExtendedReal infinity() {
        ExtendedReal r;
        r.infinite_ = true;
        return r;
    }

    bool is_infinite() const { return infinite_; }
    double value() const { return infinite_ ? std::numeric_limits<double>::infinity() : value_; }
    double finite_value() const { return value_; }

    ExtendedReal operator+(double rhs) const {
        if (infinite_) return *this;
        return ExtendedReal(value_ + rhs);
    }

    std::string str() const {
        return infinite_ ? "inf" : std::to_string(value_);
    }

private:
    double value_;
    bool infinite_;
};

enum class RegularizerKind { Zero, L1, Box, L2Ball };

// Convex regularizer h with a closed-form proximal mapping. Box and l2ball
// are indicator functions; their prox ignores the step size.
class Regularizer {
public:
    Regularizer() : kind_(RegularizerKind::Zero) {}

    static Regularizer zero() { return Regularizer(); }

    static Regularizer l1(double weight) {
        if (weight < 0.0) throw BadShape("l1 weight must be >= 0");
        Regularizer r;
        r.kind_ = RegularizerKind::L1;
        r.weight_ = weight;
        return r;
    }

    static Regularizer box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
        if (lo.size() != hi.size()) throw BadShape("box bounds must have equal dimension");
        if (((hi - lo).array() < 0.0).any()) throw BadShape("box requires lo <= hi elementwise");
        Regularizer r;
        r.kind_ = RegularizerKind::Box;
        r.lo_ = lo;
        r.hi_ = hi;
        return r;
    }

    static Regularizer box_scalar(double lo, double hi) {
        if (lo > hi) throw BadShape("box requires lo <= hi");
        Regularizer r;
        r.kind_ = RegularizerKind::Box;
        r.scalar_box_ = true;
        r.scalar_lo_ = lo;
        r.scalar_hi_ = hi;
        return r;
    }

    static Regularizer l2ball(double radius, const Eigen::VectorXd& center = Eigen::VectorXd()) {
        if (!(radius > 0.0)) throw BadShape("l2ball radius must be > 0");
        Regularizer r;
        r.kind_ = RegularizerKind::L2Ball;
        r.radius_ = radius;
        r.center_ = center;
        return r;
    }

    RegularizerKind kind() const { return kind_; }
    bool is_indicator() const {
        return kind_ == RegularizerKind::Box || kind_ == RegularizerKind::L2Ball;
    }
    double l1_weight() const { return weight_; }

    double box_lo(int j) const { return scalar_box_ ? scalar_lo_ : lo_(j); }
    double box_hi(int j) const { return scalar_box_ ? scalar_hi_ : hi_(j); }

    Eigen::VectorXd center(int p) const {
        if (center_.size() == 0) return Eigen::VectorXd::Zero(p);
        return center_;
    }
    double radius() const { return radius_; }

    std::string spec() const {
        switch (kind_) {
            case RegularizerKind::Zero:
                return "zero";
            case RegularizerKind::L1:
                return "l1:" + format_number(weight_);
            case RegularizerKind::Box:
                return "box:" + format_number(scalar_box_ ? scalar_lo_ : lo_(0)) + ":" +
                       format_number(scalar_box_ ? scalar_hi_ : hi_(0));
            case RegularizerKind::L2Ball:
                return "l2ball:" + format_number(radius_);
        }
        return "zero";
    }

private:
    static std::string format_number(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        return buf;
    }

    RegularizerKind kind_;
    double weight_ = 0.0;       // l1
    Eigen::VectorXd lo_, hi_;   // box (vector form)
    bool scalar_box_ = false;
    double scalar_lo_ = 0.0, scalar_hi_ = 0.0;
    double radius_ = 0.0;       // l2ball
    Eigen::VectorXd center_;
};

inline void require_finite(const Eigen::VectorXd& x, const char* what) {
    if (!x.allFinite()) throw NonFinite(std::string(what) + " contains NaN/Inf");
}

// prox_{alpha h}(x) = argmin_u { 1/2 ||u - x||^2 + alpha h(u) }.
inline Eigen::VectorXd prox_eval(const Regularizer& h, double alpha, const Eigen::VectorXd& x) {
    if (!(alpha > 0.0)) throw BadShape("prox step must be > 0");
    require_finite(x, "prox input");
    switch (h.kind()) {
        case RegularizerKind::Zero:
            return x;
        case RegularizerKind::L1: {
            const double threshold = alpha * h.l1_weight();
            Eigen::VectorXd out(x.size());
            for (Eigen::Index j = 0; j < x.size(); ++j) {
                const double v = x(j);
                if (v > threshold)
                    out(j) = v - threshold;
                else if (v < -threshold)
                    out(j) = v + threshold;
                else
                    out(j) = 0.0;
            }
            return out;
        }
        case RegularizerKind::Box: {
            Eigen::VectorXd out(x.size());
            for (Eigen::Index j = 0; j < x.size(); ++j)
                out(j) = std::min(h.box_hi(static_cast<int>(j)),
                                  std::max(h.box_lo(static_cast<int>(j)), x(j)));
            return out;
        }
        case RegularizerKind::L2Ball: {
            const Eigen::VectorXd c = h.center(static_cast<int>(x.size()));
            const Eigen::VectorXd d = x - c;
            const double norm = d.norm();
            if (norm <= h.radius()) return x;
            return c + (h.radius() / norm) * d;
        }
    }
    return x;
}

// h(x) as an extended real. Indicator membership uses a relative tolerance
// of 1e-9; prox outputs are exactly feasible by construction.
inline ExtendedReal h_eval(const Regularizer& h, const Eigen::VectorXd& x) {
    require_finite(x, "h_eval input");
    constexpr double kDomTol = 1e-9;
    switch (h.kind()) {
        case RegularizerKind::Zero:
            return ExtendedReal(0.0);
        case RegularizerKind::L1:
            return ExtendedReal(h.l1_weight() * x.lpNorm<1>());
        case RegularizerKind::Box: {
            for (Eigen::Index j = 0; j < x.size(); ++j) {
                const double lo = h.box_lo(static_cast<int>(j));
                const double hi = h.box_hi(static_cast<int>(j));
                const double slack = kDomTol * (1.0 + std::max(std::abs(lo), std::abs(hi)));
                if (x(j) < lo - slack || x(j) > hi + slack) return ExtendedReal::infinity();
            }
            return ExtendedReal(0.0);
        }
        case RegularizerKind::L2Ball: {
            const Eigen::VectorXd c = h.center(static_cast<int>(x.size()));
            const double slack = kDomTol * (1.0 + h.radius());
            if ((x - c).norm() > h.radius() + slack) return ExtendedReal::infinity();
            return ExtendedReal(0.0);
        }
    }
    return ExtendedReal(0.0);
}

// ||x - prox_{alpha h}(x - alpha grad)|| / alpha. With grad = grad F(x) this
// is ||s(x)||; it vanishes exactly at the fixed points of the prox iteration.
inline double fixed_point_residual(const Regularizer& h, double alpha, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& grad) {
    if (!(alpha > 0.0)) throw BadShape("fixed_point_residual step must be > 0");
    const Eigen::VectorXd moved = prox_eval(h, alpha, x - alpha * grad);
    return (x - moved).norm() / alpha;
}

// Regularizer spec strings: zero, l1:<lambda>, box:<lo>:<hi>, l2ball:<r>.
inline Regularizer regularizer_from_spec(const std::string& spec) {
    if (spec == "zero") return Regularizer::zero();
    auto parse_tail = [&](std::size_t prefix_len) { return spec.substr(prefix_len); };
    try {
        if (spec.rfind("l1:", 0) == 0) return Regularizer::l1(std::stod(parse_tail(3)));
        if (spec.rfind("box:", 0) == 0) {
            const auto rest = parse_tail(4);
            const auto colon = rest.find(':');
            if (colon == std::string::npos) throw ParseError("box spec must be box:<lo>:<hi>");
            return Regularizer::box_scalar(std::stod(rest.substr(0, colon)),
                                           std::stod(rest.substr(colon + 1)));
        }
        if (spec.rfind("l2ball:", 0) == 0) return Regularizer::l2ball(std::stod(parse_tail(7)));
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        throw ParseError("malformed regularizer spec: " + spec);
    }
    throw ParseError("unknown regularizer spec: " + spec);
}

}  // namespace proxgt
