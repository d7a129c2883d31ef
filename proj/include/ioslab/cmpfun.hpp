#pragma once

// Comparison functions (classes K, K-infinity, L, KL) as immutable expression trees.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ioslab/errors.hpp"

namespace ioslab {

using json = nlohmann::json;

enum class FnClass { zero, k, k_inf, l, increasing, generic };

enum class ScalarKind {
    identity, power, scale, exp_decay, saturation, constant,
    compose, sum, max, table, scale_arg, scale_val, kl_slice
};

enum class KLKind { separable, min, max, sum, piecewise_exp, outer, inner };

enum class CombineOp { compose, add, max, scale_arg, scale_val };

inline constexpr double default_eps_slope = 1e-9;

class KLFn;

/// Scalar comparison function r -> f(r) on [0, inf).
class ScalarFn {
public:
    struct Node;

    ScalarFn();
    explicit ScalarFn(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

    [[nodiscard]] double operator()(double r) const;
    [[nodiscard]] ScalarKind kind() const;
    [[nodiscard]] FnClass declared_class() const;
    [[nodiscard]] const Node& node() const { return *node_; }
    [[nodiscard]] bool is_zero() const { return declared_class() == FnClass::zero; }

private:
    std::shared_ptr<const Node> node_;
};

/// Two-argument function (r, t) -> beta(r, t), class KL when declared so.
class KLFn {
public:
    struct Node;

    KLFn() = default;
    explicit KLFn(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

    [[nodiscard]] double operator()(double r, double t) const;
    [[nodiscard]] KLKind kind() const;
    [[nodiscard]] bool declared_kl() const;
    [[nodiscard]] const Node& node() const { return *node_; }
    [[nodiscard]] bool valid() const { return static_cast<bool>(node_); }

private:
    std::shared_ptr<const Node> node_;
};

struct ScalarFn::Node {
    ScalarKind kind = ScalarKind::constant;
    FnClass cls = FnClass::zero;
    double param = 0.0;           // exponent, factor, rate, constant, slice time, table tail rate
    std::vector<double> knots;    // table abscissae
    std::vector<double> values;   // table ordinates
    std::vector<ScalarFn> children;
    std::vector<KLFn> kl;         // operand of kl_slice
};

struct KLFn::Node {
    KLKind kind = KLKind::separable;
    bool kl = false;
    double param = 0.0;           // decay base (piecewise_exp), time scale (inner)
    std::vector<double> knots;    // piecewise_exp knot times
    std::vector<ScalarFn> fns;    // separable: sigma, lambda; piecewise_exp: eps0; outer: f; inner: g
    std::vector<KLFn> children;   // min/max/sum: operands; outer/inner: beta
};

/// Knot times and base amplitude for the piecewise-exponential KL builder.
struct KnotSequence {
    std::vector<double> taus;
    ScalarFn eps0;
    double decay_base = std::numbers::e;
};

// ===================================================================
// class names
// ===================================================================

inline const char* to_string(FnClass c)
{
    switch (c) {
    case FnClass::zero: return "zero";
    case FnClass::k: return "K";
    case FnClass::k_inf: return "Kinf";
    case FnClass::l: return "L";
    case FnClass::increasing: return "generic-increasing";
    case FnClass::generic: return "generic";
    }
    return "generic";
}

inline FnClass fn_class_from_string(const std::string& s)
{
    if (s == "zero") return FnClass::zero;
    if (s == "K") return FnClass::k;
    if (s == "Kinf") return FnClass::k_inf;
    if (s == "L") return FnClass::l;
    if (s == "generic-increasing") return FnClass::increasing;
    if (s == "generic") return FnClass::generic;
    throw domain_error("unknown function class '" + s + "'");
}

inline bool is_k_family(FnClass c) { return c == FnClass::k || c == FnClass::k_inf; }

// ===================================================================
// evaluation
// ===================================================================

namespace detail {

inline double eval_scalar(const ScalarFn::Node& n, double r);
inline double eval_kl(const KLFn::Node& n, double r, double t);

inline double eval_table(const ScalarFn::Node& n, double r)
{
    const auto& k = n.knots;
    const auto& v = n.values;
    const std::size_t m = k.size();
    if (r <= k.front()) return v.front();
    if (r >= k.back()) {
        if (n.param > 0.0) return v.back() * std::exp(-n.param * (r - k.back()));
        const double slope = (v[m - 1] - v[m - 2]) / (k[m - 1] - k[m - 2]);
        return v.back() + slope * (r - k.back());
    }
    const auto it = std::upper_bound(k.begin(), k.end(), r);
    const std::size_t i = static_cast<std::size_t>(it - k.begin()) - 1;
    return v[i] + (r - k[i]) * (v[i + 1] - v[i]) / (k[i + 1] - k[i]);
}

inline double eval_scalar(const ScalarFn::Node& n, double r)
{
    switch (n.kind) {
    case ScalarKind::identity: return r;
    case ScalarKind::power: return std::pow(r, n.param);
    case ScalarKind::scale: return n.param * r;
    case ScalarKind::exp_decay: return std::exp(-n.param * r);
    case ScalarKind::saturation: return std::min(r, 1.0);
    case ScalarKind::constant: return n.param;
    case ScalarKind::compose:
        return eval_scalar(n.children[0].node(), eval_scalar(n.children[1].node(), r));
    case ScalarKind::sum: {
        double s = 0.0;
        for (const auto& c : n.children) s += eval_scalar(c.node(), r);
        return s;
    }
    case ScalarKind::max: {
        double s = 0.0;
        for (const auto& c : n.children) s = std::max(s, eval_scalar(c.node(), r));
        return s;
    }
    case ScalarKind::table: return eval_table(n, r);
    case ScalarKind::scale_arg: return eval_scalar(n.children[0].node(), n.param * r);
    case ScalarKind::scale_val: return n.param * eval_scalar(n.children[0].node(), r);
    case ScalarKind::kl_slice: return eval_kl(n.kl[0].node(), r, n.param);
    }
    return 0.0;
}

/// Exponent of the piecewise-exponential profile at time t.
inline double piecewise_exponent(const std::vector<double>& taus, double t)
{
    const std::size_t last = taus.size() - 1;
    if (t >= taus[last]) {
        const double seg = taus[last] - taus[last - 1];
        return -(static_cast<double>(last) - 1.0) - (t - taus[last]) / seg;
    }
    const auto it = std::upper_bound(taus.begin(), taus.end(), t);
    const std::size_t n = static_cast<std::size_t>(it - taus.begin()) - 1;
    return -(static_cast<double>(n) - 1.0) - (t - taus[n]) / (taus[n + 1] - taus[n]);
}

inline double eval_kl(const KLFn::Node& n, double r, double t)
{
    switch (n.kind) {
    case KLKind::separable:
        return eval_scalar(n.fns[0].node(), r) * eval_scalar(n.fns[1].node(), t);
    case KLKind::min:
        return std::min(eval_kl(n.children[0].node(), r, t), eval_kl(n.children[1].node(), r, t));
    case KLKind::max:
        return std::max(eval_kl(n.children[0].node(), r, t), eval_kl(n.children[1].node(), r, t));
    case KLKind::sum:
        return eval_kl(n.children[0].node(), r, t) + eval_kl(n.children[1].node(), r, t);
    case KLKind::piecewise_exp: {
        const double e = piecewise_exponent(n.knots, t);
        return std::pow(n.param, e) * eval_scalar(n.fns[0].node(), r);
    }
    case KLKind::outer:
        return eval_scalar(n.fns[0].node(), eval_kl(n.children[0].node(), r, t));
    case KLKind::inner:
        return eval_kl(n.children[0].node(), eval_scalar(n.fns[0].node(), r), n.param * t);
    }
    return 0.0;
}

inline ScalarFn make(ScalarFn::Node n) { return ScalarFn(std::make_shared<const ScalarFn::Node>(std::move(n))); }
inline KLFn make(KLFn::Node n) { return KLFn(std::make_shared<const KLFn::Node>(std::move(n))); }

inline void check_arg(double r, const char* what)
{
    if (!(r >= 0.0)) throw domain_error(std::string(what) + " must be a nonnegative number");
}

} // namespace detail

inline ScalarFn::ScalarFn()
{
    Node n;
    n.kind = ScalarKind::constant;
    n.cls = FnClass::zero;
    node_ = std::make_shared<const Node>(std::move(n));
}

inline double ScalarFn::operator()(double r) const
{
    detail::check_arg(r, "function argument");
    return detail::eval_scalar(*node_, r);
}

inline ScalarKind ScalarFn::kind() const { return node_->kind; }
inline FnClass ScalarFn::declared_class() const { return node_->cls; }

inline double KLFn::operator()(double r, double t) const
{
    detail::check_arg(r, "KL radius argument");
    detail::check_arg(t, "KL time argument");
    return detail::eval_kl(*node_, r, t);
}

inline KLKind KLFn::kind() const { return node_->kind; }
inline bool KLFn::declared_kl() const { return node_ && node_->kl; }

/// f(r); negative or NaN r is a domain error.
[[nodiscard]] inline double eval(const ScalarFn& f, double r) { return f(r); }

/// beta(r, t) with domain checks on both arguments.
[[nodiscard]] inline double kl_eval(const KLFn& b, double r, double t) { return b(r, t); }

// ===================================================================
// leaf factories
// ===================================================================

namespace fn {

inline ScalarFn zero() { return ScalarFn(); }

inline ScalarFn identity()
{
    ScalarFn::Node n;
    n.kind = ScalarKind::identity;
    n.cls = FnClass::k_inf;
    return detail::make(std::move(n));
}

inline ScalarFn power(double p)
{
    if (!(p > 0.0) || !std::isfinite(p)) throw domain_error("power exponent must be positive");
    ScalarFn::Node n;
    n.kind = ScalarKind::power;
    n.cls = FnClass::k_inf;
    n.param = p;
    return detail::make(std::move(n));
}

inline ScalarFn scale(double k)
{
    if (!(k >= 0.0) || !std::isfinite(k)) throw domain_error("scale factor must be nonnegative");
    if (k == 0.0) return zero();
    ScalarFn::Node n;
    n.kind = ScalarKind::scale;
    n.cls = FnClass::k_inf;
    n.param = k;
    return detail::make(std::move(n));
}

/// r -> exp(-a r), class L.
inline ScalarFn exp_decay(double a)
{
    if (!(a > 0.0) || !std::isfinite(a)) throw domain_error("decay rate must be positive");
    ScalarFn::Node n;
    n.kind = ScalarKind::exp_decay;
    n.cls = FnClass::l;
    n.param = a;
    return detail::make(std::move(n));
}

/// sat(r) = min{r, 1}.
inline ScalarFn saturation()
{
    ScalarFn::Node n;
    n.kind = ScalarKind::saturation;
    n.cls = FnClass::increasing;
    return detail::make(std::move(n));
}

inline ScalarFn constant(double c)
{
    if (!(c >= 0.0) || !std::isfinite(c)) throw domain_error("constant must be nonnegative");
    ScalarFn::Node n;
    n.kind = ScalarKind::constant;
    n.cls = c == 0.0 ? FnClass::zero : FnClass::increasing;
    n.param = c;
    return detail::make(std::move(n));
}

/// Piecewise-linear interpolant. tail_rate = 0 extends linearly with the last slope;
/// tail_rate > 0 extends by exponential decay (used for class-L profiles).
inline ScalarFn table(std::vector<double> knots, std::vector<double> values, double tail_rate = 0.0)
{
    if (knots.size() < 2 || knots.size() != values.size())
        throw domain_error("table needs at least two knots and matching values");
    for (std::size_t i = 0; i < knots.size(); ++i) {
        if (!std::isfinite(knots[i]) || knots[i] < 0.0) throw domain_error("table knots must be finite and nonnegative");
        if (!std::isfinite(values[i]) || values[i] < 0.0) throw domain_error("table values must be finite and nonnegative");
        if (i > 0 && !(knots[i] > knots[i - 1])) throw domain_error("table knots must be strictly increasing");
    }
    if (!(tail_rate >= 0.0)) throw domain_error("tail rate must be nonnegative");

    bool nondec = true, strict_inc = true, strict_dec = true;
    for (std::size_t i = 1; i < values.size(); ++i) {
        nondec = nondec && values[i] >= values[i - 1];
        strict_inc = strict_inc && values[i] > values[i - 1];
        strict_dec = strict_dec && values[i] < values[i - 1];
    }
    FnClass cls = FnClass::generic;
    if (tail_rate > 0.0) {
        if (strict_dec && values.back() > 0.0) cls = FnClass::l;
    } else if (nondec) {
        const bool all_zero = std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
        if (all_zero) cls = FnClass::zero;
        else if (strict_inc && knots.front() == 0.0 && values.front() == 0.0) cls = FnClass::k_inf;
        else cls = FnClass::increasing;
    }
    ScalarFn::Node n;
    n.kind = ScalarKind::table;
    n.cls = cls;
    n.param = tail_rate;
    n.knots = std::move(knots);
    n.values = std::move(values);
    return detail::make(std::move(n));
}

} // namespace fn

// ===================================================================
// sampled class checks
// ===================================================================

/// 1000-point logarithmic grid over [1e-6, 1e6].
inline const std::vector<double>& class_check_grid()
{
    static const std::vector<double> grid = [] {
        std::vector<double> g(1000);
        for (int i = 0; i < 1000; ++i) g[static_cast<std::size_t>(i)] = std::pow(10.0, -6.0 + 12.0 * i / 999.0);
        return g;
    }();
    return grid;
}

/// Dense-sampling membership test for the requested class.
[[nodiscard]] inline bool sampled_class_check(const ScalarFn& f, FnClass cls)
{
    const auto& g = class_check_grid();
    switch (cls) {
    case FnClass::zero:
        return f(0.0) == 0.0 && std::all_of(g.begin(), g.end(), [&](double r) { return f(r) == 0.0; });
    case FnClass::k:
    case FnClass::k_inf: {
        if (f(0.0) != 0.0) return false;
        double prev = 0.0;
        for (double r : g) {
            const double v = f(r);
            if (!(v > prev) || !std::isfinite(v)) return false;
            prev = v;
        }
        if (cls == FnClass::k_inf) return f(g.back()) >= 2.0 * f(1.0);
        return true;
    }
    case FnClass::l: {
        double prev = f(0.0);
        for (double r : g) {
            const double v = f(r);
            if (v < 0.0 || v > prev || (v == prev && v > 0.0)) return false;
            prev = v;
        }
        return f(g.back()) <= 1e-6 * std::max(f(0.0), 1e-300) || f(g.back()) == 0.0;
    }
    case FnClass::increasing: {
        double prev = f(0.0);
        for (double r : g) {
            const double v = f(r);
            if (v < prev) return false;
            prev = v;
        }
        return true;
    }
    case FnClass::generic: return true;
    }
    return false;
}

/// Marginal monotonicity counts of a KL candidate on an n x n grid.
struct KLCheckReport {
    std::size_t r_violations = 0;   // r -> beta(r,t) not strictly increasing or beta(0,t) != 0
    std::size_t t_violations = 0;   // t -> beta(r,t) increasing somewhere
    std::size_t limit_violations = 0;
    [[nodiscard]] bool ok() const { return r_violations + t_violations + limit_violations == 0; }
};

[[nodiscard]] inline KLCheckReport kl_sampled_check(const KLFn& b, std::size_t n = 100, double r_lo = 1e-3,
                                                    double r_hi = 1e3, double t_hi = 50.0)
{
    KLCheckReport rep;
    std::vector<double> rs(n), ts(n);
    for (std::size_t i = 0; i < n; ++i) {
        rs[i] = r_lo * std::pow(r_hi / r_lo, static_cast<double>(i) / static_cast<double>(n - 1));
        ts[i] = t_hi * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    for (double t : ts) {
        if (b(0.0, t) != 0.0) ++rep.r_violations;
        double prev = 0.0;
        for (double r : rs) {
            const double v = b(r, t);
            if (!(v >= prev) || (v == prev && v > 0.0)) ++rep.r_violations;
            prev = v;
        }
    }
    for (double r : rs) {
        double prev = b(r, 0.0);
        for (double t : ts) {
            const double v = b(r, t);
            if (v > prev) ++rep.t_violations;
            prev = v;
        }
        if (!(b(r, 1e4) <= 1e-3 * b(r, 0.0))) ++rep.limit_violations;
    }
    return rep;
}

// ===================================================================
// combinators
// ===================================================================

namespace detail {

inline bool zero_at_zero(const ScalarFn& f) { return f(0.0) == 0.0; }

/// Class of f + g or max{f, g}.
inline FnClass sum_like_class(const ScalarFn& f, const ScalarFn& g)
{
    const FnClass a = f.declared_class(), b = g.declared_class();
    if (a == FnClass::zero) return b;
    if (b == FnClass::zero) return a;
    if (a == FnClass::generic || b == FnClass::generic) return FnClass::generic;
    if (a == FnClass::l && b == FnClass::l) return FnClass::l;
    if (a == FnClass::l || b == FnClass::l) {
        const ScalarFn& other = a == FnClass::l ? g : f;
        if (other.kind() == ScalarKind::constant) return FnClass::generic;
        throw class_error("cannot combine a class-L function with an increasing function");
    }
    const bool z = zero_at_zero(f) && zero_at_zero(g);
    if (a == FnClass::k_inf || b == FnClass::k_inf) return z ? FnClass::k_inf : FnClass::increasing;
    if (a == FnClass::k || b == FnClass::k) return z ? FnClass::k : FnClass::increasing;
    return FnClass::increasing;
}

inline FnClass compose_class(const ScalarFn& f, const ScalarFn& g)
{
    const FnClass a = f.declared_class(), b = g.declared_class();
    if (a == FnClass::zero) return FnClass::zero;
    if (b == FnClass::zero) return zero_at_zero(f) ? FnClass::zero : FnClass::increasing;
    if (a == FnClass::generic || b == FnClass::generic) return FnClass::generic;
    if (is_k_family(a) && is_k_family(b))
        return (a == FnClass::k_inf && b == FnClass::k_inf) ? FnClass::k_inf : FnClass::k;
    if (is_k_family(a) && b == FnClass::l) return FnClass::l;
    if (a == FnClass::l && b == FnClass::k_inf) return FnClass::l;
    if (a == FnClass::l || b == FnClass::l) return FnClass::generic;
    return FnClass::increasing;
}

} // namespace detail

/// f o g.
[[nodiscard]] inline ScalarFn compose(const ScalarFn& f, const ScalarFn& g)
{
    if (g.kind() == ScalarKind::identity) return f;
    if (f.kind() == ScalarKind::identity) return g;
    const FnClass cls = detail::compose_class(f, g);
    if (cls == FnClass::zero) return fn::zero();
    ScalarFn::Node n;
    n.kind = ScalarKind::compose;
    n.cls = cls;
    n.children = {f, g};
    return detail::make(std::move(n));
}

[[nodiscard]] inline ScalarFn add(const ScalarFn& f, const ScalarFn& g)
{
    const FnClass cls = detail::sum_like_class(f, g);
    if (f.is_zero()) return g;
    if (g.is_zero()) return f;
    ScalarFn::Node n;
    n.kind = ScalarKind::sum;
    n.cls = cls;
    n.children = {f, g};
    return detail::make(std::move(n));
}

[[nodiscard]] inline ScalarFn maximum(const ScalarFn& f, const ScalarFn& g)
{
    const FnClass cls = detail::sum_like_class(f, g);
    if (f.is_zero()) return g;
    if (g.is_zero()) return f;
    ScalarFn::Node n;
    n.kind = ScalarKind::max;
    n.cls = cls;
    n.children = {f, g};
    return detail::make(std::move(n));
}

/// r -> f(k r).
[[nodiscard]] inline ScalarFn scale_arg(const ScalarFn& f, double k)
{
    if (!(k >= 0.0) || !std::isfinite(k)) throw domain_error("argument scale must be nonnegative");
    if (k == 1.0 || f.is_zero()) return f;
    if (k == 0.0) return fn::constant(f(0.0));
    ScalarFn::Node n;
    n.kind = ScalarKind::scale_arg;
    n.cls = f.declared_class();
    n.param = k;
    n.children = {f};
    return detail::make(std::move(n));
}

/// r -> k f(r).
[[nodiscard]] inline ScalarFn scale_val(const ScalarFn& f, double k)
{
    if (!(k >= 0.0) || !std::isfinite(k)) throw domain_error("value scale must be nonnegative");
    if (k == 1.0 || f.is_zero()) return f;
    if (k == 0.0) return fn::zero();
    ScalarFn::Node n;
    n.kind = ScalarKind::scale_val;
    n.cls = f.declared_class();
    n.param = k;
    n.children = {f};
    return detail::make(std::move(n));
}

/// Generic entry point; for the scale ops g must be a constant node carrying the factor.
[[nodiscard]] inline ScalarFn combine(CombineOp op, const ScalarFn& f, const ScalarFn& g)
{
    switch (op) {
    case CombineOp::compose: return compose(f, g);
    case CombineOp::add: return add(f, g);
    case CombineOp::max: return maximum(f, g);
    case CombineOp::scale_arg:
    case CombineOp::scale_val: {
        if (g.kind() != ScalarKind::constant) throw class_error("scale operations take a constant factor");
        const double k = g(0.0);
        return op == CombineOp::scale_arg ? scale_arg(f, k) : scale_val(f, k);
    }
    }
    throw domain_error("unknown combine op");
}

/// r -> beta(r, t) at a fixed time; class found by sampling.
[[nodiscard]] inline ScalarFn kl_slice(const KLFn& b, double t)
{
    detail::check_arg(t, "slice time");
    ScalarFn::Node n;
    n.kind = ScalarKind::kl_slice;
    n.cls = FnClass::generic;
    n.param = t;
    n.kl = {b};
    ScalarFn probe = detail::make(n);
    if (sampled_class_check(probe, FnClass::k_inf)) n.cls = FnClass::k_inf;
    else if (sampled_class_check(probe, FnClass::k)) n.cls = FnClass::k;
    else if (sampled_class_check(probe, FnClass::zero)) n.cls = FnClass::zero;
    else if (sampled_class_check(probe, FnClass::increasing)) n.cls = FnClass::increasing;
    return detail::make(std::move(n));
}

// ===================================================================
// inversion
// ===================================================================

namespace detail {

inline double invert_bisect(const ScalarFn& f, double v)
{
    double lo = 0.0, hi = 1.0;
    int guard = 0;
    while (f(hi) < v) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 2000 || !std::isfinite(hi)) throw class_error("inversion bracket did not close; function appears bounded");
    }
    for (int it = 0; it < 400 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) < v) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline double invert_node(const ScalarFn& f, double v)
{
    const auto& n = f.node();
    switch (n.kind) {
    case ScalarKind::identity: return v;
    case ScalarKind::power: return std::pow(v, 1.0 / n.param);
    case ScalarKind::scale: return v / n.param;
    case ScalarKind::scale_val: return invert_node(n.children[0], v / n.param);
    case ScalarKind::scale_arg: return invert_node(n.children[0], v) / n.param;
    case ScalarKind::compose:
        if (n.children[0].declared_class() == FnClass::k_inf && n.children[1].declared_class() == FnClass::k_inf)
            return invert_node(n.children[1], invert_node(n.children[0], v));
        return invert_bisect(f, v);
    case ScalarKind::table: {
        const auto& k = n.knots;
        const auto& y = n.values;
        if (v >= y.back()) {
            const std::size_t m = k.size();
            const double slope = (y[m - 1] - y[m - 2]) / (k[m - 1] - k[m - 2]);
            return k.back() + (v - y.back()) / slope;
        }
        const auto it = std::upper_bound(y.begin(), y.end(), v);
        const std::size_t i = static_cast<std::size_t>(it - y.begin()) - 1;
        return k[i] + (v - y[i]) * (k[i + 1] - k[i]) / (y[i + 1] - y[i]);
    }
    default: return invert_bisect(f, v);
    }
}

} // namespace detail

/// r with f(r) = v for f of class K-infinity.
[[nodiscard]] inline double invert(const ScalarFn& f, double v)
{
    if (f.declared_class() != FnClass::k_inf) throw class_error("inverse requires a class K-infinity function");
    detail::check_arg(v, "inverse argument");
    if (v == 0.0) return 0.0;
    return detail::invert_node(f, v);
}

// ===================================================================
// KL builders
// ===================================================================

namespace kl {

/// sigma(r) * lambda(t).
inline KLFn separable(const ScalarFn& sigma, const ScalarFn& lambda)
{
    KLFn::Node n;
    n.kind = KLKind::separable;
    n.kl = (is_k_family(sigma.declared_class()) || sigma.is_zero()) && lambda.declared_class() == FnClass::l;
    n.fns = {sigma, lambda};
    return detail::make(std::move(n));
}

/// r * exp(-rate t).
inline KLFn exponential(double rate = 1.0) { return separable(fn::identity(), fn::exp_decay(rate)); }

inline KLFn binary(KLKind kind, const KLFn& a, const KLFn& b)
{
    KLFn::Node n;
    n.kind = kind;
    n.kl = kind == KLKind::min ? (a.declared_kl() || b.declared_kl()) : (a.declared_kl() && b.declared_kl());
    n.children = {a, b};
    return detail::make(std::move(n));
}

inline KLFn minimum(const KLFn& a, const KLFn& b) { return binary(KLKind::min, a, b); }
inline KLFn maximum(const KLFn& a, const KLFn& b) { return binary(KLKind::max, a, b); }
inline KLFn sum(const KLFn& a, const KLFn& b) { return binary(KLKind::sum, a, b); }

/// min{a, b} where neither operand need be KL on its own (one may vanish only at
/// r = 0, the other only as t grows); KL membership is established by sampling.
inline KLFn minimum_sampled(const KLFn& a, const KLFn& b)
{
    KLFn m = minimum(a, b);
    if (m.declared_kl()) return m;
    if (!kl_sampled_check(m).ok()) throw class_error("minimum of the two bounds fails the sampled KL check");
    KLFn::Node n = m.node();
    n.kl = true;
    return detail::make(std::move(n));
}

/// f(beta(r, t)).
inline KLFn outer(const ScalarFn& f, const KLFn& b)
{
    if (f.kind() == ScalarKind::identity) return b;
    KLFn::Node n;
    n.kind = KLKind::outer;
    n.kl = is_k_family(f.declared_class()) && b.declared_kl();
    n.fns = {f};
    n.children = {b};
    return detail::make(std::move(n));
}

/// beta(g(r), a t).
inline KLFn inner(const KLFn& b, const ScalarFn& g, double time_scale = 1.0)
{
    if (!(time_scale > 0.0)) throw domain_error("time scale must be positive");
    if (g.kind() == ScalarKind::identity && time_scale == 1.0) return b;
    KLFn::Node n;
    n.kind = KLKind::inner;
    n.kl = b.declared_kl() && is_k_family(g.declared_class());
    n.param = time_scale;
    n.fns = {g};
    n.children = {b};
    return detail::make(std::move(n));
}

} // namespace kl

/// beta(r,t) = base^{-(n-1) - (t-tau_n)/(tau_{n+1}-tau_n)} eps0(r) on [tau_n, tau_{n+1});
/// past the last knot the last segment's rate continues.
[[nodiscard]] inline KLFn build_piecewise_kl(const KnotSequence& ks)
{
    if (ks.taus.size() < 2) throw domain_error("knot sequence needs at least two knots");
    if (ks.taus.front() != 0.0) throw domain_error("first knot must be 0");
    for (std::size_t i = 1; i < ks.taus.size(); ++i)
        if (!(ks.taus[i] > ks.taus[i - 1]) || !std::isfinite(ks.taus[i]))
            throw domain_error("knots must be strictly increasing");
    if (ks.eps0.declared_class() != FnClass::k_inf) throw class_error("eps0 must be class K-infinity");
    if (!(ks.decay_base > 1.0)) throw domain_error("decay base must exceed 1");
    KLFn::Node n;
    n.kind = KLKind::piecewise_exp;
    n.kl = true;
    n.param = ks.decay_base;
    n.knots = ks.taus;
    n.fns = {ks.eps0};
    return detail::make(std::move(n));
}

// ===================================================================
// envelope fitting
// ===================================================================

/// Smallest nondecreasing piecewise-linear function dominating the samples,
/// plus eps_slope * r for strictness.
[[nodiscard]] inline ScalarFn fit_monotone_envelope(std::vector<std::pair<double, double>> samples, bool force_zero_at_zero,
                                                    double eps_slope = default_eps_slope, double zero_tol = 1e-12)
{
    if (samples.size() < 2) throw fit_error("envelope fit needs at least two samples");
    for (const auto& [r, v] : samples) {
        if (!(r >= 0.0) || !std::isfinite(r) || !std::isfinite(v)) throw fit_error("samples must be finite with r >= 0");
        if (force_zero_at_zero && v < 0.0) throw fit_error("negative sample value with zero anchoring");
        if (force_zero_at_zero && r == 0.0 && v > zero_tol) throw fit_error("sample at r = 0 exceeds the zero tolerance");
    }
    std::stable_sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<double> k, v;
    for (const auto& [r, val] : samples) {
        if (!k.empty() && k.back() == r) v.back() = std::max(v.back(), val);
        else {
            k.push_back(r);
            v.push_back(val);
        }
    }
    for (std::size_t i = 1; i < v.size(); ++i) v[i] = std::max(v[i], v[i - 1]);
    if (force_zero_at_zero) {
        if (k.front() == 0.0) v.front() = 0.0;
        else {
            k.insert(k.begin(), 0.0);
            v.insert(v.begin(), 0.0);
        }
        for (double& x : v) x = std::max(x, 0.0);
    } else if (k.front() > 0.0) {
        k.insert(k.begin(), 0.0);
        v.insert(v.begin(), v.front());
    }
    if (k.size() < 2) {
        k.push_back(k.front() + 1.0);
        v.push_back(v.front());
    }
    for (std::size_t i = 0; i < k.size(); ++i) v[i] += eps_slope * k[i];
    if (!force_zero_at_zero) {
        const double lo = *std::min_element(v.begin(), v.end());
        if (lo < 0.0) for (double& x : v) x -= lo;
    }
    return fn::table(std::move(k), std::move(v));
}

// ===================================================================
// printing and serialization
// ===================================================================

namespace detail {

inline std::string num(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

} // namespace detail

inline std::string describe(const KLFn& b);

/// Compact human-readable formula.
inline std::string describe(const ScalarFn& f)
{
    const auto& n = f.node();
    switch (n.kind) {
    case ScalarKind::identity: return "r";
    case ScalarKind::power: return "r^" + detail::num(n.param);
    case ScalarKind::scale: return detail::num(n.param) + "*r";
    case ScalarKind::exp_decay: return "exp(-" + detail::num(n.param) + "*r)";
    case ScalarKind::saturation: return "sat(r)";
    case ScalarKind::constant: return detail::num(n.param);
    case ScalarKind::compose: return describe(n.children[0]) + " o (" + describe(n.children[1]) + ")";
    case ScalarKind::sum: {
        std::string s = "(";
        for (std::size_t i = 0; i < n.children.size(); ++i) s += (i ? " + " : "") + describe(n.children[i]);
        return s + ")";
    }
    case ScalarKind::max: {
        std::string s = "max(";
        for (std::size_t i = 0; i < n.children.size(); ++i) s += (i ? ", " : "") + describe(n.children[i]);
        return s + ")";
    }
    case ScalarKind::table: return "table[" + std::to_string(n.knots.size()) + " knots]";
    case ScalarKind::scale_arg: return "(" + describe(n.children[0]) + ")(" + detail::num(n.param) + "*r)";
    case ScalarKind::scale_val: return detail::num(n.param) + "*(" + describe(n.children[0]) + ")";
    case ScalarKind::kl_slice: return "[" + describe(n.kl[0]) + "](r, " + detail::num(n.param) + ")";
    }
    return "?";
}

inline std::string describe(const KLFn& b)
{
    const auto& n = b.node();
    switch (n.kind) {
    case KLKind::separable: return "(" + describe(n.fns[0]) + ")*lambda[" + describe(n.fns[1]) + "](t)";
    case KLKind::min: return "min(" + describe(n.children[0]) + ", " + describe(n.children[1]) + ")";
    case KLKind::max: return "max(" + describe(n.children[0]) + ", " + describe(n.children[1]) + ")";
    case KLKind::sum: return "(" + describe(n.children[0]) + " + " + describe(n.children[1]) + ")";
    case KLKind::piecewise_exp:
        return "pwexp[" + std::to_string(n.knots.size()) + " knots, base " + detail::num(n.param) + "](t)*(" +
               describe(n.fns[0]) + ")";
    case KLKind::outer: return "(" + describe(n.fns[0]) + ") o beta[" + describe(n.children[0]) + "]";
    case KLKind::inner:
        return "beta[" + describe(n.children[0]) + "](" + describe(n.fns[0]) + ", " + detail::num(n.param) + "*t)";
    }
    return "?";
}

inline const char* to_string(ScalarKind k)
{
    switch (k) {
    case ScalarKind::identity: return "identity";
    case ScalarKind::power: return "power";
    case ScalarKind::scale: return "scale";
    case ScalarKind::exp_decay: return "exp_decay";
    case ScalarKind::saturation: return "saturation";
    case ScalarKind::constant: return "constant";
    case ScalarKind::compose: return "compose";
    case ScalarKind::sum: return "sum";
    case ScalarKind::max: return "max";
    case ScalarKind::table: return "table";
    case ScalarKind::scale_arg: return "scale_arg";
    case ScalarKind::scale_val: return "scale_val";
    case ScalarKind::kl_slice: return "kl_slice";
    }
    return "?";
}

inline const char* to_string(KLKind k)
{
    switch (k) {
    case KLKind::separable: return "separable";
    case KLKind::min: return "min";
    case KLKind::max: return "max";
    case KLKind::sum: return "sum";
    case KLKind::piecewise_exp: return "piecewise_exp";
    case KLKind::outer: return "outer";
    case KLKind::inner: return "inner";
    }
    return "?";
}

inline json to_json(const KLFn& b);

inline json to_json(const ScalarFn& f)
{
    const auto& n = f.node();
    json j;
    j["kind"] = to_string(n.kind);
    j["class"] = to_string(n.cls);
    switch (n.kind) {
    case ScalarKind::power:
    case ScalarKind::scale:
    case ScalarKind::exp_decay:
    case ScalarKind::constant:
    case ScalarKind::scale_arg:
    case ScalarKind::scale_val:
    case ScalarKind::kl_slice: j["values"] = json::array({n.param}); break;
    case ScalarKind::table:
        j["knots"] = n.knots;
        j["values"] = n.values;
        if (n.param > 0.0) j["tail"] = n.param;
        break;
    default: break;
    }
    if (!n.children.empty()) {
        json c = json::array();
        for (const auto& ch : n.children) c.push_back(to_json(ch));
        j["children"] = c;
    }
    if (!n.kl.empty()) j["children"] = json::array({to_json(n.kl[0])});
    return j;
}

inline json to_json(const KLFn& b)
{
    const auto& n = b.node();
    json j;
    j["kind"] = to_string(n.kind);
    j["class"] = n.kl ? "KL" : "generic";
    json c = json::array();
    switch (n.kind) {
    case KLKind::separable: c = {to_json(n.fns[0]), to_json(n.fns[1])}; break;
    case KLKind::min:
    case KLKind::max:
    case KLKind::sum: c = {to_json(n.children[0]), to_json(n.children[1])}; break;
    case KLKind::piecewise_exp:
        c = {to_json(n.fns[0])};
        j["knots"] = n.knots;
        j["values"] = json::array({n.param});
        break;
    case KLKind::outer: c = {to_json(n.fns[0]), to_json(n.children[0])}; break;
    case KLKind::inner:
        c = {to_json(n.children[0]), to_json(n.fns[0])};
        j["values"] = json::array({n.param});
        break;
    }
    j["children"] = c;
    return j;
}

inline KLFn kl_from_json(const json& j);

inline ScalarFn scalar_from_json(const json& j)
{
    const std::string kind = j.at("kind").get<std::string>();
    auto param = [&] { return j.at("values").at(0).get<double>(); };
    auto child = [&](std::size_t i) { return scalar_from_json(j.at("children").at(i)); };
    if (kind == "identity") return fn::identity();
    if (kind == "power") return fn::power(param());
    if (kind == "scale") return fn::scale(param());
    if (kind == "exp_decay") return fn::exp_decay(param());
    if (kind == "saturation") return fn::saturation();
    if (kind == "constant") return fn::constant(param());
    if (kind == "table")
        return fn::table(j.at("knots").get<std::vector<double>>(), j.at("values").get<std::vector<double>>(),
                         j.value("tail", 0.0));
    if (kind == "scale_arg") return scale_arg(child(0), param());
    if (kind == "scale_val") return scale_val(child(0), param());
    if (kind == "kl_slice") return kl_slice(kl_from_json(j.at("children").at(0)), param());
    if (kind == "compose" || kind == "sum" || kind == "max") {
        const auto& cs = j.at("children");
        if (cs.size() < 2) throw domain_error(kind + " node needs two children");
        ScalarFn acc = scalar_from_json(cs[0]);
        for (std::size_t i = 1; i < cs.size(); ++i) {
            const ScalarFn nxt = scalar_from_json(cs[i]);
            acc = kind == "compose" ? compose(acc, nxt) : kind == "sum" ? add(acc, nxt) : maximum(acc, nxt);
        }
        return acc;
    }
    throw domain_error("unknown scalar function kind '" + kind + "'");
}

inline KLFn kl_from_json(const json& j)
{
    const std::string kind = j.at("kind").get<std::string>();
    const auto& cs = j.at("children");
    if (kind == "separable") return kl::separable(scalar_from_json(cs.at(0)), scalar_from_json(cs.at(1)));
    if (kind == "min") return kl::minimum(kl_from_json(cs.at(0)), kl_from_json(cs.at(1)));
    if (kind == "max") return kl::maximum(kl_from_json(cs.at(0)), kl_from_json(cs.at(1)));
    if (kind == "sum") return kl::sum(kl_from_json(cs.at(0)), kl_from_json(cs.at(1)));
    if (kind == "piecewise_exp")
        return build_piecewise_kl({j.at("knots").get<std::vector<double>>(), scalar_from_json(cs.at(0)),
                                   j.at("values").at(0).get<double>()});
    if (kind == "outer") return kl::outer(scalar_from_json(cs.at(0)), kl_from_json(cs.at(1)));
    if (kind == "inner")
        return kl::inner(kl_from_json(cs.at(0)), scalar_from_json(cs.at(1)), j.at("values").at(0).get<double>());
    throw domain_error("unknown KL function kind '" + kind + "'");
}

} // namespace ioslab
