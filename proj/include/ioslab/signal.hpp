#pragma once

// Piecewise-constant, right-continuous input signals with exact sup norm.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ioslab/errors.hpp"

namespace ioslab {

using Vec = std::vector<double>;

[[nodiscard]] inline double euclid_norm(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// u(t) = values[k] for breakpoints[k] <= t < breakpoints[k+1]; the last piece extends forever.
class InputSignal {
public:
    InputSignal() : dim_(0), breaks_{0.0}, values_{Vec{}} {}

    InputSignal(std::size_t dim, std::vector<double> breakpoints, std::vector<Vec> values)
        : dim_(dim), breaks_(std::move(breakpoints)), values_(std::move(values))
    {
        if (breaks_.empty() || breaks_.size() != values_.size())
            throw domain_error("signal needs one value per breakpoint");
        if (breaks_.front() != 0.0) throw domain_error("first breakpoint must be 0");
        for (std::size_t k = 0; k < breaks_.size(); ++k) {
            if (k > 0 && !(breaks_[k] > breaks_[k - 1])) throw domain_error("breakpoints must be strictly increasing");
            if (!std::isfinite(breaks_[k])) throw domain_error("breakpoints must be finite");
            if (values_[k].size() != dim_) throw domain_error("signal value has wrong dimension");
            for (double x : values_[k])
                if (!std::isfinite(x)) throw domain_error("signal values must be finite");
        }
    }

    static InputSignal zero(std::size_t dim) { return InputSignal(dim, {0.0}, {Vec(dim, 0.0)}); }
    static InputSignal constant(Vec value)
    {
        const std::size_t d = value.size();
        return InputSignal(d, {0.0}, {std::move(value)});
    }

    [[nodiscard]] std::size_t dim() const { return dim_; }
    [[nodiscard]] const std::vector<double>& breakpoints() const { return breaks_; }
    [[nodiscard]] const std::vector<Vec>& values() const { return values_; }

    [[nodiscard]] std::size_t piece_at(double t) const
    {
        const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
        return it == breaks_.begin() ? 0 : static_cast<std::size_t>(it - breaks_.begin()) - 1;
    }

    [[nodiscard]] const Vec& value_at(double t) const { return values_[piece_at(t)]; }

    /// max over pieces of the Euclidean value norm.
    [[nodiscard]] double sup_norm() const
    {
        double m = 0.0;
        for (const auto& v : values_) m = std::max(m, euclid_norm(v));
        return m;
    }

    /// Sup norm over the pieces that meet [0, t].
    [[nodiscard]] double sup_norm_until(double t) const
    {
        double m = 0.0;
        for (std::size_t k = 0; k < breaks_.size() && breaks_[k] <= t; ++k) m = std::max(m, euclid_norm(values_[k]));
        return m;
    }

private:
    std::size_t dim_;
    std::vector<double> breaks_;
    std::vector<Vec> values_;
};

/// s -> u(s + tau).
[[nodiscard]] inline InputSignal shift(const InputSignal& u, double tau)
{
    if (!(tau >= 0.0)) throw domain_error("shift must be nonnegative");
    const std::size_t k0 = u.piece_at(tau);
    std::vector<double> b{0.0};
    std::vector<Vec> v{u.values()[k0]};
    for (std::size_t k = k0 + 1; k < u.breakpoints().size(); ++k) {
        b.push_back(u.breakpoints()[k] - tau);
        v.push_back(u.values()[k]);
    }
    return InputSignal(u.dim(), std::move(b), std::move(v));
}

/// u on [t1, t2), zero elsewhere.
[[nodiscard]] inline InputSignal restrict(const InputSignal& u, double t1, double t2)
{
    if (!(t1 >= 0.0) || !(t2 >= 0.0)) throw domain_error("restriction window must be nonnegative");
    if (t1 > t2) throw domain_error("restriction window has t1 > t2");
    const Vec zero(u.dim(), 0.0);
    std::vector<double> b;
    std::vector<Vec> v;
    if (t1 > 0.0) {
        b.push_back(0.0);
        v.push_back(zero);
    }
    if (t2 > t1) {
        b.push_back(t1);
        v.push_back(u.value_at(t1));
        for (std::size_t k = u.piece_at(t1) + 1; k < u.breakpoints().size() && u.breakpoints()[k] < t2; ++k) {
            b.push_back(u.breakpoints()[k]);
            v.push_back(u.values()[k]);
        }
    }
    if (b.empty() || b.back() < t2) {
        b.push_back(t2);
        v.push_back(zero);
    } else {
        v.back() = zero;
    }
    return InputSignal(u.dim(), std::move(b), std::move(v));
}

} // namespace ioslab
