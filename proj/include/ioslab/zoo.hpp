#pragma once

// Built-in example systems with closed forms, expected verdicts and witness recipes.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ioslab/errors.hpp"
#include "ioslab/property.hpp"
#include "ioslab/signal.hpp"
#include "ioslab/system.hpp"

namespace ioslab::zoo {

enum class Expect { holds, fails, unknown };

inline const char* to_string(Expect e)
{
    switch (e) {
    case Expect::holds: return "holds";
    case Expect::fails: return "fails";
    case Expect::unknown: return "unknown";
    }
    return "?";
}

struct ZooParams {
    std::size_t n = 64;          // l2 truncation order
    double sat_scale = 4.0;      // SAT_POLAR witness radius c = sat_scale * e^{pi/2}
    double ladder_tau = 10.0;    // L2_TIMEWARP ladder target time
    std::size_t ladder_j = 0;    // ladder coordinate (0: use n)
};

/// Replayable trajectory that refutes the listed properties.
struct WitnessRecipe {
    enum class Kind { peak, persist };

    std::vector<PropertyId> properties;
    Vec x0;
    InputSignal u;
    std::vector<double> times;   // peak: measure >= lower at each time; persist: on all of [0, times.back()]
    Kind kind = Kind::peak;
    std::string measure = "output";
    double lower = 0.0;
    double reference_bound = 0.0;  // certificates bounding the measure below this value at the sample are refuted
    std::optional<double> initial_output_max;
    std::string note;
};

struct ReplayResult {
    bool confirmed = false;
    double observed = 0.0;        // smallest measure over the recipe times
    double t = 0.0;               // time attaining `observed`
    double initial_output = 0.0;
    std::string detail;
};

struct ZooEntry {
    std::string id;
    std::string title;
    std::string notes;
    bool finite_dim = true;
    std::map<PropertyId, Expect> expected;
    std::vector<WitnessRecipe> witnesses;
};

// ===================================================================
// closed-form helpers
// ===================================================================

/// Blow-up time of z' = -2z + z^2, z(0) = c > 2.
[[nodiscard]] inline double riccati_blowup_time(double c)
{
    if (!(c > 2.0)) throw domain_error("Riccati seed must exceed 2");
    return 0.5 * std::log(c / (c - 2.0));
}

/// Seed c with blow-up at time 1, found by bisection on the closed-form blow-up time.
[[nodiscard]] inline double riccati_seed()
{
    static const double c = [] {
        double lo = 2.0 + 1e-12, hi = 10.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (riccati_blowup_time(mid) > 1.0) lo = mid;  // blow-up time decreases in c
            else hi = mid;
        }
        return 0.5 * (lo + hi);
    }();
    return c;
}

/// Radius d = 2 sqrt(c^2 + 4e^2) of the ball holding every seed x^j.
[[nodiscard]] inline double l2_ball_radius()
{
    const double c = riccati_seed();
    return 2.0 * std::sqrt(c * c + 4.0 * std::numbers::e * std::numbers::e);
}

/// Seed x^j: x_0 = 2e, x_j = c, other coordinates 0.
[[nodiscard]] inline Vec l2_seed(std::size_t n, std::size_t j)
{
    if (j < 1 || j > n) throw domain_error("seed index must lie in 1..n");
    Vec x(n + 1, 0.0);
    x[0] = 2.0 * std::numbers::e;
    x[j] = riccati_seed();
    return x;
}

/// Integration settings used for witness replay (stiff near the l2 seeds).
[[nodiscard]] inline SimPlan witness_sim_plan()
{
    SimPlan p;
    p.step = 1e-3;
    p.method = Method::rk4_adaptive;
    p.adaptive_tol = 1e-10;
    return p;
}

// ===================================================================
// systems
// ===================================================================

namespace detail {

inline double sat(double v) { return std::min(v, 1.0); }

inline void polar_hooks(SystemModel& s)
{
    s.sample_dim = 2;
    s.norm = [](ConstSpan x) { return std::abs(x[1]); };
    s.cartesian = [](ConstSpan x) { return Vec{x[1] * std::cos(x[0]), x[1] * std::sin(x[0])}; };
    s.from_cartesian_dir = [](ConstSpan d, double r) { return Vec{std::atan2(d[1], d[0]), r}; };
}

inline SystemModel l2_system(std::size_t n, bool warp)
{
    if (n < 2) throw domain_error("l2 truncation order must be at least 2");
    SystemModel s;
    s.name = warp ? "l2_timewarp" : "l2_blowup";
    s.state_dim = n + 1;
    s.output_dim = n + 1;
    s.input_dim = warp ? 1 : 0;
    s.truncation = n;
    s.finite_dim = false;
    s.rhs = [n, warp](ConstSpan x, ConstSpan u, MutSpan dx) {
        const double k = warp ? 1.0 / (1.0 + u[0] * u[0]) : 1.0;
        const double x0 = x[0];
        dx[0] = -k * x0;
        for (std::size_t i = 1; i <= n; ++i) {
            const double xi = x[i];
            const double inv = 1.0 / (static_cast<double>(i) * static_cast<double>(i));
            dx[i] = k * (-xi + xi * xi * x0 - xi * std::abs(xi) - inv * xi * xi * xi);
        }
    };
    s.output = [](ConstSpan x, ConstSpan, MutSpan y) { std::copy(x.begin(), x.end(), y.begin()); };
    s.notes = "truncated to coordinates 0.." + std::to_string(n) +
              "; unboundedness is demonstrated only up to index n";
    return s;
}

} // namespace detail

/// x' = -x, y = sin(x).
[[nodiscard]] inline SystemModel sin_output()
{
    SystemModel s;
    s.name = "sin_output";
    s.state_dim = s.output_dim = 1;
    s.rhs = [](ConstSpan x, ConstSpan, MutSpan dx) { dx[0] = -x[0]; };
    s.output = [](ConstSpan x, ConstSpan, MutSpan y) { y[0] = std::sin(x[0]); };
    s.analytic_flow = [](double t, const Vec& x0, const InputSignal&) { return Vec{x0[0] * std::exp(-t)}; };
    return s;
}

/// Polar state (theta, rho): theta' = 1, rho' = 0, y = rho cos(theta).
[[nodiscard]] inline SystemModel rotation()
{
    SystemModel s;
    s.name = "rotation";
    s.state_dim = 2;
    s.output_dim = 1;
    s.rhs = [](ConstSpan x, ConstSpan, MutSpan dx) {
        dx[0] = x[1] == 0.0 ? 0.0 : 1.0;
        dx[1] = 0.0;
    };
    s.output = [](ConstSpan x, ConstSpan, MutSpan y) { y[0] = x[1] * std::cos(x[0]); };
    s.analytic_flow = [](double t, const Vec& x0, const InputSignal&) {
        return Vec{x0[1] == 0.0 ? x0[0] : x0[0] + t, x0[1]};
    };
    detail::polar_hooks(s);
    return s;
}

/// Polar state (theta, rho): theta' = sat(1/rho), rho' = -sat(rho),
/// y = sqrt(x1^2 + sat(x2^2)) in Cartesian coordinates.
[[nodiscard]] inline SystemModel sat_polar()
{
    SystemModel s;
    s.name = "sat_polar";
    s.state_dim = 2;
    s.output_dim = 1;
    s.rhs = [](ConstSpan x, ConstSpan, MutSpan dx) {
        const double rho = x[1];
        if (rho <= 0.0) {
            dx[0] = dx[1] = 0.0;
            return;
        }
        dx[0] = detail::sat(1.0 / rho);
        dx[1] = -detail::sat(rho);
    };
    s.output = [](ConstSpan x, ConstSpan, MutSpan y) {
        const double x1 = x[1] * std::cos(x[0]), x2 = x[1] * std::sin(x[0]);
        y[0] = std::sqrt(x1 * x1 + detail::sat(x2 * x2));
    };
    s.analytic_flow = [](double t, const Vec& x0, const InputSignal&) {
        double theta = x0[0], rho = x0[1];
        if (rho <= 0.0) return x0;
        double left = t;
        if (rho > 1.0) {
            const double run = std::min(left, rho - 1.0);  // linear phase rho' = -1, theta' = 1/rho
            theta += std::log(rho / (rho - run));
            rho -= run;
            left -= run;
        }
        if (left > 0.0) {  // exponential phase rho' = -rho, theta' = 1
            theta += left;
            rho *= std::exp(-left);
        }
        return Vec{theta, rho};
    };
    detail::polar_hooks(s);
    return s;
}

[[nodiscard]] inline SystemModel l2_blowup(std::size_t n = 64) { return detail::l2_system(n, false); }

/// L2_BLOWUP with its vector field scaled by 1 / (1 + u^2).
[[nodiscard]] inline SystemModel l2_timewarp(std::size_t n = 64) { return detail::l2_system(n, true); }

/// x' = -x + u, y = x, with the variation-of-constants flow.
[[nodiscard]] inline SystemModel lin_scalar()
{
    SystemModel s;
    s.name = "lin_scalar";
    s.state_dim = s.input_dim = s.output_dim = 1;
    s.rhs = [](ConstSpan x, ConstSpan u, MutSpan dx) { dx[0] = -x[0] + u[0]; };
    s.output = [](ConstSpan x, ConstSpan, MutSpan y) { y[0] = x[0]; };
    s.analytic_flow = [](double t, const Vec& x0, const InputSignal& u) {
        double x = x0[0], t0 = 0.0;
        const auto& b = u.breakpoints();
        for (std::size_t k = 0; k < b.size() && b[k] < t; ++k) {
            const double t1 = k + 1 < b.size() ? std::min(b[k + 1], t) : t;
            const double v = u.values()[k][0];
            x = v + (x - v) * std::exp(-(t1 - t0));
            t0 = t1;
        }
        return Vec{x};
    };
    return s;
}

// ===================================================================
// registry
// ===================================================================

inline const std::vector<std::string>& ids()
{
    static const std::vector<std::string> v{"sin_output", "rotation", "sat_polar", "l2_blowup", "l2_timewarp", "lin_scalar"};
    return v;
}

/// Lower-cases and strips an optional "zoo:" prefix.
[[nodiscard]] inline std::string normalize_id(std::string id)
{
    for (char& c : id) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (id.rfind("zoo:", 0) == 0) id = id.substr(4);
    return id;
}

namespace detail {

inline constexpr const char* wrap_prefix = "full_state:";

inline void check_params(const ZooParams& p)
{
    if (p.n < 2) throw domain_error("l2 truncation order must be at least 2");
    if (!(p.sat_scale > 1.0)) throw domain_error("sat_scale must exceed 1 (c > e^{pi/2})");
    if (!(p.ladder_tau >= 1.0)) throw domain_error("ladder_tau must be at least 1");
    if (p.ladder_j > p.n) throw domain_error("ladder_j must not exceed n");
}

} // namespace detail

/// System for a zoo id; "full_state:<id>" wraps the system to output its state.
[[nodiscard]] inline SystemModel make_example(const std::string& raw_id, const ZooParams& params = {})
{
    detail::check_params(params);
    const std::string id = normalize_id(raw_id);
    if (id.rfind(detail::wrap_prefix, 0) == 0) return full_state(make_example(id.substr(11), params));
    if (id == "sin_output") return sin_output();
    if (id == "rotation") return rotation();
    if (id == "sat_polar") return sat_polar();
    if (id == "l2_blowup") return l2_blowup(params.n);
    if (id == "l2_timewarp") return l2_timewarp(params.n);
    if (id == "lin_scalar") return lin_scalar();
    throw lookup_error("unknown zoo id '" + raw_id + "'");
}

/// First grid time at which coordinate j of the L2_BLOWUP trajectory from x^j reaches j.
[[nodiscard]] inline double l2_crossing_time(std::size_t n, std::size_t j)
{
    SimPlan plan = witness_sim_plan();
    plan.horizon = 1.0;
    const Trajectory tr = simulate(l2_blowup(n), l2_seed(n, j), InputSignal::zero(0), plan);
    for (std::size_t k = 0; k < tr.size(); ++k)
        if (tr.states[k][j] >= static_cast<double>(j)) return tr.times[k];
    throw lookup_error("coordinate " + std::to_string(j) + " did not reach " + std::to_string(j) + " before t = 1");
}

namespace detail {

using P = PropertyId;

inline std::map<PropertyId, Expect> expect_all(Expect e)
{
    std::map<PropertyId, Expect> m;
    for (PropertyId p : all_properties) m[p] = e;
    return m;
}

inline std::map<PropertyId, Expect> holds_except(std::initializer_list<PropertyId> failing)
{
    auto m = expect_all(Expect::holds);
    for (PropertyId p : failing) m[p] = Expect::fails;
    return m;
}

inline WitnessRecipe recipe(std::vector<PropertyId> props, Vec x0, InputSignal u, std::vector<double> times,
                            double lower, double reference, std::string note)
{
    WitnessRecipe w;
    w.properties = std::move(props);
    w.x0 = std::move(x0);
    w.u = std::move(u);
    w.times = std::move(times);
    w.lower = lower;
    w.reference_bound = reference;
    w.note = std::move(note);
    return w;
}

inline std::vector<PropertyId> l2_failing(bool warp)
{
    std::vector<PropertyId> v{P::BORS, P::OUGS, P::OUGB, P::IOS, P::ISS, P::OCAG,
                              P::IOPS, P::OL, P::OOUGB, P::OBORS};
    if (warp) v.push_back(P::OGUAG);
    return v;
}

} // namespace detail

/// Entry with expected verdicts and witness recipes.
[[nodiscard]] inline ZooEntry entry(const std::string& raw_id, const ZooParams& params = {})
{
    using detail::P;
    detail::check_params(params);
    const std::string id = normalize_id(raw_id);
    constexpr double pi = std::numbers::pi;
    ZooEntry e;
    e.id = id;

    if (id.rfind(detail::wrap_prefix, 0) == 0) {
        const ZooEntry base = entry(id.substr(11), params);
        e.title = "full-state output wrap of " + base.id;
        e.finite_dim = base.finite_dim;
        e.expected = detail::expect_all(base.id == "lin_scalar" ? Expect::holds : Expect::unknown);
        e.notes = "output h(x, u) = x; IOS coincides with ISS";
        return e;
    }

    if (id == "sin_output") {
        e.title = "x' = -x, y = sin(x): IOS but not OL";
        e.notes = "flow x0 e^{-t}; |y(t)| <= e^{-t}|x0|; from x0 = pi, y(0) = 0 and y(1) = sin(pi/e)";
        e.expected = detail::holds_except({P::OL});
        auto w = detail::recipe({P::OL}, {pi}, InputSignal::zero(0), {1.0}, 0.9, 0.0,
                                "y(0) = sin(pi) = 0 while y(1) = sin(pi e^{-1}) ~ 0.9151");
        w.initial_output_max = 1e-3;
        e.witnesses.push_back(w);
    } else if (id == "rotation") {
        e.title = "theta' = 1, rho' = 0, y = rho cos(theta): OGULIM, OOULIM, OUGS but neither IOS nor OL";
        e.notes = "y(t) = rho0 cos(t + theta0); y = 0 within time pi; y returns to rho0 at t = 2 pi N - theta0";
        e.expected = detail::holds_except({P::IOS, P::ISS, P::IOPS, P::OL, P::LOCAL_OL, P::OOUGB, P::OBORS,
                                           P::OAG, P::OUAG, P::OGUAG, P::OCAG});
        const InputSignal u0 = InputSignal::zero(0);
        auto ol = detail::recipe({P::OL}, {pi / 2, 1.0}, u0, {1.5 * pi}, 1.0, 0.0,
                                 "x0 = (0, 1): y(0) = 0, y(3 pi / 2) = 1");
        ol.initial_output_max = 1e-12;
        auto local = detail::recipe({P::LOCAL_OL}, {pi / 2, 0.05}, u0, {1.5 * pi}, 0.05, 0.0,
                                    "same orbit with rho0 = 0.05 inside any ball of radius > 0.05");
        local.initial_output_max = 1e-12;
        auto rec = detail::recipe({P::IOS, P::OUAG, P::OGUAG, P::OAG, P::OCAG}, {pi / 2, 1.0}, u0,
                                  {1.5 * pi, 3.5 * pi}, 1.0, 0.99,
                                  "y returns to rho0 = 1 at t = 3 pi / 2 + 2 pi k; no decay");
        auto state = detail::recipe({P::ISS}, {pi / 2, 1.0}, u0, {3.5 * pi}, 1.0, 0.99, "state norm stays rho0 = 1");
        state.kind = WitnessRecipe::Kind::persist;
        state.measure = "state";
        auto big = detail::recipe({P::IOPS, P::OOUGB, P::OBORS}, {pi / 2, 100.0}, u0, {1.5 * pi, 7.5 * pi}, 100.0,
                                  99.0, "zero initial output, output 100 at t = 3 pi / 2 and again at 15 pi / 2");
        big.initial_output_max = 1e-9;
        e.witnesses = {ol, local, rec, state, big};
    } else if (id == "sat_polar") {
        const double c = params.sat_scale * std::exp(pi / 2);
        const double tstar = c * (1.0 - std::exp(-pi / 2));
        e.title = "theta' = sat(1/rho), rho' = -sat(rho): OGULIM, local OL, OBORS but not OL";
        e.notes = "for rho0 > 1: rho = rho0 - t, theta = theta0 + ln(rho0 / (rho0 - t)); y <= y(0) + t; "
                  "x0 = (0, c), c = " + std::to_string(c) + ": y(0) = 1, y(t*) = c e^{-pi/2} at t* = c (1 - e^{-pi/2})";
        e.expected = detail::holds_except({P::OL, P::OOUGB, P::OOULIM});
        auto ol = detail::recipe({P::OL, P::OOUGB}, {pi / 2, c}, InputSignal::zero(0), {tstar},
                                 params.sat_scale * 0.95, 1.0, "initial output 1, output c e^{-pi/2} at t*");
        ol.initial_output_max = 1.0 + 1e-9;
        auto lim = detail::recipe({P::OOULIM}, {pi / 2, c}, InputSignal::zero(0), {c - 2.0}, 1.0, 0.9,
                                  "initial output 1 but y >= min(rho, 1) = 1 until rho reaches 1");
        lim.kind = WitnessRecipe::Kind::persist;
        lim.initial_output_max = 1.0 + 1e-9;
        e.witnesses = {ol, lim};
    } else if (id == "l2_blowup" || id == "l2_timewarp") {
        const bool warp = id == "l2_timewarp";
        const std::size_t n = params.n;
        e.finite_dim = false;
        e.title = warp ? "time-warped l2 system: OUAG but neither OGUAG nor BORS"
                       : "l2 system: FC, 0-UGATT, 0-UAS but not BORS";
        e.notes = "truncated to N = " + std::to_string(n) + "; seed c = " + std::to_string(riccati_seed()) +
                  " (z' = -2z + z^2 blows up at 1); x^j in the ball of radius d = " + std::to_string(l2_ball_radius()) +
                  "; full-state output";
        e.expected = detail::holds_except({});
        for (PropertyId p : detail::l2_failing(warp)) e.expected[p] = Expect::fails;
        const double tau_n = l2_crossing_time(n, n);
        e.witnesses.push_back(detail::recipe(detail::l2_failing(false), l2_seed(n, n),
                                             InputSignal::zero(warp ? 1 : 0), {tau_n}, static_cast<double>(n),
                                             static_cast<double>(n) - 1.0,
                                             "x_n(tau_n) >= n from a seed of norm d/2 (finite shadow: j <= N)"));
        if (warp) {
            const std::size_t j = params.ladder_j ? params.ladder_j : n;
            const double tau_j = l2_crossing_time(n, j);
            const double level = std::sqrt(params.ladder_tau / tau_j - 1.0);
            e.witnesses.push_back(detail::recipe({P::OGUAG}, l2_seed(n, j), InputSignal::constant({level}),
                                                 {params.ladder_tau}, static_cast<double>(j),
                                                 static_cast<double>(j) - 1.0,
                                                 "constant input sqrt(tau / tau_j - 1) stretches time so that "
                                                 "y(tau) = x^j(tau_j) >= j"));
        }
    } else if (id == "lin_scalar") {
        e.title = "x' = -x + u, y = x: positive control";
        e.notes = "x(t) = e^{-t} x0 + (1 - e^{-t}) u for constant u; |x(t)| <= e^{-t}|x0| + ||u||";
        e.expected = detail::expect_all(Expect::holds);
    } else {
        throw lookup_error("unknown zoo id '" + raw_id + "'");
    }
    return e;
}

/// First recipe refuting the property; lookup_error when none is recorded.
[[nodiscard]] inline WitnessRecipe known_witness(const ZooEntry& e, PropertyId p)
{
    for (const auto& w : e.witnesses)
        if (std::find(w.properties.begin(), w.properties.end(), p) != w.properties.end()) return w;
    throw lookup_error("no witness recorded for " + std::string(to_string(p)) + " on " + e.id);
}

[[nodiscard]] inline WitnessRecipe known_witness(const std::string& id, PropertyId p, const ZooParams& params = {})
{
    return known_witness(entry(id, params), p);
}

// ===================================================================
// replay
// ===================================================================

namespace detail {

inline double measure_of(const SystemModel& sys, const std::string& measure, const Vec& x, const Vec& u)
{
    if (measure == "state") return state_norm(sys, x);
    return euclid_norm(eval_output(sys, x, u));
}

} // namespace detail

/// Simulates the recipe and checks the recorded lower bound (relative tolerance 1e-3).
[[nodiscard]] inline ReplayResult replay(const SystemModel& sys, const WitnessRecipe& w,
                                         const SimPlan& plan = witness_sim_plan())
{
    ReplayResult r;
    r.initial_output = euclid_norm(eval_output(sys, w.x0, w.u.value_at(0.0)));
    r.observed = inf;
    try {
        if (w.kind == WitnessRecipe::Kind::peak) {
            for (double t : w.times) {
                const Vec x = flow(sys, t, w.x0, w.u, plan);
                const double m = detail::measure_of(sys, w.measure, x, w.u.value_at(t));
                if (m < r.observed) {
                    r.observed = m;
                    r.t = t;
                }
            }
        } else {
            SimPlan p = plan;
            p.horizon = w.times.back();
            const Trajectory tr = simulate(sys, w.x0, w.u, p);
            if (tr.blow_up) throw blow_up_error("replay blew up", *tr.blow_up);
            for (std::size_t k = 0; k < tr.size(); ++k) {
                const double m = detail::measure_of(sys, w.measure, tr.states[k], w.u.value_at(tr.times[k]));
                if (m < r.observed) {
                    r.observed = m;
                    r.t = tr.times[k];
                }
            }
        }
    } catch (const blow_up_error& e) {
        r.detail = "blow-up at t = " + std::to_string(e.time);
        return r;
    }
    const bool level = r.observed >= w.lower * (1.0 - 1e-3);
    const bool start = !w.initial_output_max || r.initial_output <= *w.initial_output_max;
    r.confirmed = level && start;
    if (!level) r.detail = "observed " + std::to_string(r.observed) + " below " + std::to_string(w.lower);
    else if (!start) r.detail = "initial output " + std::to_string(r.initial_output) + " too large";
    return r;
}

// ===================================================================
// description
// ===================================================================

inline json to_json(const WitnessRecipe& w)
{
    json props = json::array();
    for (PropertyId p : w.properties) props.push_back(ioslab::to_string(p));
    json j{{"properties", props},
           {"x0", w.x0},
           {"u", ioslab::to_json(w.u)},
           {"times", w.times},
           {"kind", w.kind == WitnessRecipe::Kind::peak ? "peak" : "persist"},
           {"measure", w.measure},
           {"lower", w.lower},
           {"reference_bound", w.reference_bound},
           {"note", w.note}};
    if (w.initial_output_max) j["initial_output_max"] = *w.initial_output_max;
    return j;
}

inline json describe(const ZooEntry& e)
{
    json expected = json::object();
    for (const auto& [p, x] : e.expected) expected[ioslab::to_string(p)] = to_string(x);
    json wit = json::array();
    for (const auto& w : e.witnesses) wit.push_back(to_json(w));
    return {{"schema", schema_version}, {"id", e.id},         {"title", e.title},     {"notes", e.notes},
            {"finite_dim", e.finite_dim}, {"expected", expected}, {"witnesses", wit}};
}

} // namespace ioslab::zoo
