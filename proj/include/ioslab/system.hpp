#pragma once

// Control systems with outputs, fixed-step simulation and axiom residuals.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ioslab/errors.hpp"
#include "ioslab/signal.hpp"

namespace ioslab {

enum class TimeSet { continuous, discrete };

using ConstSpan = std::span<const double>;
using MutSpan = std::span<double>;

/// Transition evaluator plus output map. For discrete time `rhs` writes the next state.
struct SystemModel {
    std::string name;
    TimeSet time_set = TimeSet::continuous;
    std::size_t state_dim = 0;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::optional<std::size_t> truncation;  // declared l2 truncation order
    bool finite_dim = true;

    std::function<void(ConstSpan x, ConstSpan u, MutSpan dx)> rhs;
    std::function<void(ConstSpan x, ConstSpan u, MutSpan y)> output;
    std::function<Vec(double t, const Vec& x0, const InputSignal& u)> analytic_flow;

    // Coordinate hooks for systems not stored in Cartesian coordinates.
    std::function<double(ConstSpan x)> norm;                // default: Euclidean
    std::function<Vec(ConstSpan x)> cartesian;              // default: identity
    std::function<Vec(ConstSpan dir, double r)> from_cartesian_dir;  // default: r * dir
    std::size_t sample_dim = 0;                             // Cartesian dimension (0: state_dim)

    std::string notes;
};

[[nodiscard]] inline double state_norm(const SystemModel& s, ConstSpan x)
{
    return s.norm ? s.norm(x) : euclid_norm(x);
}

[[nodiscard]] inline std::size_t sampling_dim(const SystemModel& s)
{
    return s.sample_dim ? s.sample_dim : s.state_dim;
}

/// State with Cartesian norm r in direction dir.
[[nodiscard]] inline Vec state_from_direction(const SystemModel& s, ConstSpan dir, double r)
{
    if (s.from_cartesian_dir) return s.from_cartesian_dir(dir, r);
    Vec x(dir.size());
    for (std::size_t i = 0; i < dir.size(); ++i) x[i] = r * dir[i];
    return x;
}

[[nodiscard]] inline Vec eval_output(const SystemModel& s, ConstSpan x, ConstSpan u)
{
    Vec y(s.output_dim);
    s.output(x, u, y);
    return y;
}

/// Wraps a system so that it outputs its (Cartesian) state.
[[nodiscard]] inline SystemModel full_state(SystemModel s)
{
    const std::size_t dim = s.sample_dim ? s.sample_dim : s.state_dim;
    auto cart = s.cartesian;
    s.output = [cart](ConstSpan x, ConstSpan, MutSpan y) {
        if (cart) {
            const Vec c = cart(x);
            std::copy(c.begin(), c.end(), y.begin());
        } else {
            std::copy(x.begin(), x.end(), y.begin());
        }
    };
    s.output_dim = dim;
    s.name = "full_state(" + s.name + ")";
    return s;
}

enum class Method { rk4, euler, rk4_adaptive };

inline const char* to_string(Method m)
{
    switch (m) {
    case Method::rk4: return "rk4";
    case Method::euler: return "euler";
    case Method::rk4_adaptive: return "rk4_adaptive";
    }
    return "?";
}

[[nodiscard]] inline Method method_from_string(const std::string& s)
{
    if (s == "rk4") return Method::rk4;
    if (s == "euler") return Method::euler;
    if (s == "rk4_adaptive") return Method::rk4_adaptive;
    throw domain_error("unknown integration method '" + s + "'");
}

struct SimPlan {
    double horizon = 10.0;
    double step = 1e-2;
    Method method = Method::rk4;
    double blow_up_threshold = 1e9;
    int refinement = 0;             // step-halving levels for refinement_errors
    bool attach_oracle = false;
    double adaptive_tol = 1e-9;     // local error target of rk4_adaptive (relative + absolute)
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> outputs;
    std::optional<double> blow_up;
    double step = 0.0;
    Method method = Method::rk4;
    std::vector<Vec> oracle_states;  // analytic flow at `times` when requested

    [[nodiscard]] std::size_t size() const { return times.size(); }
};

namespace detail {

struct Integrator {
    const SystemModel& sys;
    std::size_t n;
    Vec k1, k2, k3, k4, tmp;

    explicit Integrator(const SystemModel& s)
        : sys(s), n(s.state_dim), k1(n), k2(n), k3(n), k4(n), tmp(n) {}

    void check_rhs(const Vec& k, double t)
    {
        for (double v : k)
            if (!std::isfinite(v))
                throw integration_error(sys.name + ": right-hand side is not finite at t = " + std::to_string(t));
    }

    void rk4(const Vec& x, ConstSpan u, double h, Vec& out, double t)
    {
        sys.rhs(x, u, k1);
        check_rhs(k1, t);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
        sys.rhs(tmp, u, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
        sys.rhs(tmp, u, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
        sys.rhs(tmp, u, k4);
        for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }

    void euler(const Vec& x, ConstSpan u, double h, Vec& out, double t)
    {
        sys.rhs(x, u, k1);
        check_rhs(k1, t);
        for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + h * k1[i];
    }
};

inline bool finite_all(const Vec& x)
{
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

/// Union of the uniform grid, signal breakpoints and the horizon.
inline std::vector<double> time_grid(double horizon, double step, const InputSignal& u)
{
    std::vector<double> g;
    const auto steps = static_cast<long long>(std::floor(horizon / step));
    for (long long k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * step;
        if (t < horizon) g.push_back(t);
    }
    for (double b : u.breakpoints())
        if (b > 0.0 && b < horizon) g.push_back(b);
    g.push_back(horizon);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

} // namespace detail

/// Numerical transition map on [0, min(horizon, blow-up)].
[[nodiscard]] inline Trajectory simulate(const SystemModel& sys, const Vec& x0, const InputSignal& u, const SimPlan& plan)
{
    if (x0.size() != sys.state_dim) throw domain_error(sys.name + ": initial state has wrong dimension");
    if (u.dim() != sys.input_dim) throw domain_error(sys.name + ": input has wrong dimension");
    if (!(plan.horizon > 0.0) || !(plan.step > 0.0)) throw domain_error("simulation horizon and step must be positive");

    Trajectory tr;
    tr.step = plan.step;
    tr.method = plan.method;
    tr.times.push_back(0.0);
    tr.states.push_back(x0);

    auto over = [&](const Vec& x) { return !detail::finite_all(x) || state_norm(sys, x) > plan.blow_up_threshold; };

    if (sys.time_set == TimeSet::discrete) {
        const auto steps = static_cast<long long>(std::floor(plan.horizon));
        Vec next(sys.state_dim);
        for (long long k = 0; k < steps; ++k) {
            const double t = static_cast<double>(k);
            sys.rhs(tr.states.back(), u.value_at(t), next);
            if (over(next)) {
                tr.blow_up = t + 1.0;
                break;
            }
            tr.times.push_back(t + 1.0);
            tr.states.push_back(next);
        }
    } else {
        detail::Integrator integ(sys);
        const std::vector<double> grid = detail::time_grid(plan.horizon, plan.step, u);
        Vec x = x0, next(sys.state_dim), half(sys.state_dim), full(sys.state_dim), two(sys.state_dim);
        double h_adapt = plan.step;
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
            const double t0 = grid[i], t1 = grid[i + 1];
            const Vec& uv = u.value_at(t0);
            bool blew = false;
            if (plan.method == Method::rk4) {
                integ.rk4(x, uv, t1 - t0, next, t0);
                blew = over(next);
            } else if (plan.method == Method::euler) {
                integ.euler(x, uv, t1 - t0, next, t0);
                blew = over(next);
            } else {
                double t = t0;
                next = x;
                while (t < t1 && !blew) {
                    const double h = std::min(h_adapt, t1 - t);
                    integ.rk4(next, uv, h, full, t);
                    integ.rk4(next, uv, 0.5 * h, half, t);
                    integ.rk4(half, uv, 0.5 * h, two, t + 0.5 * h);
                    if (over(two) || over(full)) {
                        if (h < 1e-12) {
                            blew = true;
                            break;
                        }
                        h_adapt = 0.25 * h;
                        continue;
                    }
                    double err = 0.0;
                    for (std::size_t j = 0; j < two.size(); ++j)
                        err = std::max(err, std::abs(two[j] - full[j]) /
                                                (plan.adaptive_tol * (1.0 + std::abs(two[j]))));
                    err /= 15.0;
                    if (err <= 1.0 || h < 1e-12) {
                        t += h;
                        next = two;
                        const double grow = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 4.0;
                        h_adapt = std::min(plan.step, h * std::clamp(grow, 0.2, 4.0));
                    } else {
                        h_adapt = h * std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
                    }
                }
            }
            if (blew) {
                tr.blow_up = t1;
                break;
            }
            x = next;
            tr.times.push_back(t1);
            tr.states.push_back(x);
        }
    }

    tr.outputs.reserve(tr.states.size());
    for (std::size_t k = 0; k < tr.states.size(); ++k)
        tr.outputs.push_back(eval_output(sys, tr.states[k], u.value_at(tr.times[k])));

    if (plan.attach_oracle && sys.analytic_flow) {
        tr.oracle_states.reserve(tr.times.size());
        for (double t : tr.times) tr.oracle_states.push_back(sys.analytic_flow(t, x0, u));
    }
    return tr;
}

/// State at time t (t = 0 returns x0 without integrating).
[[nodiscard]] inline Vec flow(const SystemModel& sys, double t, const Vec& x0, const InputSignal& u, SimPlan plan)
{
    if (t == 0.0) return x0;
    plan.horizon = t;
    const Trajectory tr = simulate(sys, x0, u, plan);
    if (tr.blow_up) throw blow_up_error(sys.name + ": trajectory blew up", *tr.blow_up);
    return tr.states.back();
}

// ===================================================================
// axioms
// ===================================================================

struct AxiomSample {
    Vec x0;
    InputSignal u;
    double t = 0.0;
    double s = 0.0;
};

struct AxiomReport {
    double identity = 0.0;
    double causality = 0.0;
    double cocycle = 0.0;
    std::size_t flagged = 0;  // samples skipped because of blow-up
    std::size_t checked = 0;
    double tolerance = 1e-6;
    [[nodiscard]] bool passes() const
    {
        return identity == 0.0 && causality <= tolerance && cocycle <= tolerance;
    }
};

[[nodiscard]] inline double max_abs_diff(const Vec& a, const Vec& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Identity, causality and cocycle residuals over the given samples.
[[nodiscard]] inline AxiomReport check_axioms(const SystemModel& sys, const std::vector<AxiomSample>& samples,
                                              const SimPlan& plan, double tolerance = 1e-6)
{
    if (samples.empty()) throw domain_error("axiom check needs at least one sample");
    AxiomReport rep;
    rep.tolerance = tolerance;
    for (const auto& smp : samples) {
        try {
            SimPlan p0 = plan;
            p0.horizon = std::max(plan.step, smp.t);
            const Trajectory tr0 = simulate(sys, smp.x0, smp.u, p0);
            rep.identity = std::max(rep.identity, max_abs_diff(tr0.states.front(), smp.x0));

            const Vec a = flow(sys, smp.t, smp.x0, smp.u, plan);
            const Vec b = flow(sys, smp.t, smp.x0, restrict(smp.u, 0.0, smp.t), plan);
            rep.causality = std::max(rep.causality, max_abs_diff(a, b));

            const Vec whole = flow(sys, smp.t + smp.s, smp.x0, smp.u, plan);
            const Vec split = flow(sys, smp.s, a, shift(smp.u, smp.t), plan);
            rep.cocycle = std::max(rep.cocycle, max_abs_diff(whole, split));
            ++rep.checked;
        } catch (const blow_up_error&) {
            ++rep.flagged;
        }
    }
    return rep;
}

/// Max state error against the analytic flow (or the finest level) for step, step/2, ...
[[nodiscard]] inline std::vector<double> refinement_errors(const SystemModel& sys, const Vec& x0, const InputSignal& u,
                                                           SimPlan plan, int levels)
{
    std::vector<Trajectory> runs;
    for (int l = 0; l <= levels; ++l) {
        SimPlan p = plan;
        p.step = plan.step / std::pow(2.0, l);
        p.attach_oracle = static_cast<bool>(sys.analytic_flow);
        runs.push_back(simulate(sys, x0, u, p));
    }
    std::vector<double> errs;
    for (int l = 0; l <= levels; ++l) {
        const Trajectory& tr = runs[static_cast<std::size_t>(l)];
        const Vec& ref = sys.analytic_flow ? tr.oracle_states.back() : runs.back().states.back();
        errs.push_back(max_abs_diff(tr.states.back(), ref));
    }
    return errs;
}

/// CSV with header t, x_0..x_{n-1}, y_0..y_{m-1}, blowup_flag.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr)
{
    const std::size_t n = tr.states.empty() ? 0 : tr.states.front().size();
    const std::size_t m = tr.outputs.empty() ? 0 : tr.outputs.front().size();
    os << "t";
    for (std::size_t i = 0; i < n; ++i) os << ",x_" << i;
    for (std::size_t j = 0; j < m; ++j) os << ",y_" << j;
    os << ",blowup_flag\n";
    os.precision(17);
    for (std::size_t k = 0; k < tr.size(); ++k) {
        os << tr.times[k];
        for (double v : tr.states[k]) os << ',' << v;
        for (double v : tr.outputs[k]) os << ',' << v;
        os << ',' << ((tr.blow_up && k + 1 == tr.size()) ? 1 : 0) << '\n';
    }
}

} // namespace ioslab
