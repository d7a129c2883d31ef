#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "ioslab/property.hpp"
#include "ioslab/system.hpp"

namespace ioslab {

// ===================================================================
// sampling plan
// ===================================================================

/// Hand-picked probe appended to the plan (e.g. a known blow-up seed).
struct ExtraProbe {
    Vec x0;
    InputSignal u;
    std::string note;
};

struct SamplingPlan {
    std::vector<double> r_grid{0.1, 0.5, 1.0, 2.0, 5.0};  // state radii (the origin is always probed)
    std::vector<double> s_grid{0.0, 0.5, 1.0, 2.0};       // input sup norms
    std::vector<double> eps_grid{0.1, 0.5};
    std::vector<double> t_grid;    // time axis of mu tables (empty: quarters of the horizon)
    std::vector<double> tau_grid;  // tau axis of OCEP delta tables (empty: t_grid)
    SimPlan sim{};
    std::size_t directions = 4;    // per radius; 1-D samplings always use +1 and -1
    bool step_inputs = true;
    std::size_t random_inputs = 1; // seeded piecewise-constant signals per s
    std::uint64_t seed = 1;
    double delta_margin = 1e-4;
    double s_max = 0.0;            // top of the uniform-in-u ladder (0: last s)
    double local_radius = 0.9;
    std::size_t shell_count = 0;   // zero-input probes sampled for small initial outputs
    double shell_scale = 4.0;      // shell candidates reach shell_scale * max r
    std::vector<ExtraProbe> extra_probes;
    unsigned threads = 0;          // 0: hardware concurrency (capped at 8)
};

[[nodiscard]] inline std::vector<double> effective_t_grid(const SamplingPlan& p)
{
    if (!p.t_grid.empty()) return p.t_grid;
    const double T = p.sim.horizon;
    return {0.25 * T, 0.5 * T, 0.75 * T, T};
}

[[nodiscard]] inline std::vector<double> effective_tau_grid(const SamplingPlan& p)
{
    return p.tau_grid.empty() ? effective_t_grid(p) : p.tau_grid;
}

[[nodiscard]] inline double effective_s_max(const SamplingPlan& p)
{
    return p.s_max > 0.0 ? p.s_max : p.s_grid.back();
}

inline void validate(const SamplingPlan& p)
{
    auto increasing = [](const std::vector<double>& g, const char* name, bool allow_zero) {
        if (g.empty()) throw domain_error(std::string(name) + " must be nonempty");
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i]) || g[i] < 0.0 || (!allow_zero && g[i] == 0.0))
                throw domain_error(std::string(name) + " values must be finite and " + (allow_zero ? "nonnegative" : "positive"));
            if (i > 0 && !(g[i] > g[i - 1])) throw domain_error(std::string(name) + " must be strictly increasing");
        }
    };
    increasing(p.r_grid, "r_grid", false);
    increasing(p.s_grid, "s_grid", true);
    increasing(p.eps_grid, "eps_grid", false);
    if (!p.t_grid.empty()) increasing(p.t_grid, "t_grid", false);
    if (!p.tau_grid.empty()) increasing(p.tau_grid, "tau_grid", false);
    if (!(p.sim.horizon > 0.0) || !(p.sim.step > 0.0)) throw domain_error("horizon and step must be positive");
    if (p.directions == 0) throw domain_error("directions must be at least 1");
    if (!(p.delta_margin >= 0.0)) throw domain_error("delta_margin must be nonnegative");
    if (!(p.local_radius > 0.0)) throw domain_error("local_radius must be positive");
    if (p.s_max < 0.0) throw domain_error("s_max must be nonnegative");
}

inline json to_json(const SamplingPlan& p)
{
    json extras = json::array();
    for (const auto& e : p.extra_probes) extras.push_back({{"x0", e.x0}, {"u", to_json(e.u)}, {"note", e.note}});
    return {{"r_grid", p.r_grid},
            {"s_grid", p.s_grid},
            {"eps_grid", p.eps_grid},
            {"t_grid", p.t_grid},
            {"tau_grid", p.tau_grid},
            {"horizon", p.sim.horizon},
            {"step", p.sim.step},
            {"method", to_string(p.sim.method)},
            {"blow_up_threshold", p.sim.blow_up_threshold},
            {"adaptive_tol", p.sim.adaptive_tol},
            {"directions", p.directions},
            {"step_inputs", p.step_inputs},
            {"random_inputs", p.random_inputs},
            {"seed", p.seed},
            {"delta_margin", p.delta_margin},
            {"s_max", p.s_max},
            {"local_radius", p.local_radius},
            {"shell_count", p.shell_count},
            {"shell_scale", p.shell_scale},
            {"extra_probes", extras},
            {"threads", p.threads}};
}

/// Overrides the fields present in j on top of base.
[[nodiscard]] inline SamplingPlan plan_from_json(const json& j, SamplingPlan p = {})
{
    auto grid = [&](const char* k, std::vector<double>& g) {
        if (j.contains(k)) g = j.at(k).get<std::vector<double>>();
    };
    grid("r_grid", p.r_grid);
    grid("s_grid", p.s_grid);
    grid("eps_grid", p.eps_grid);
    grid("t_grid", p.t_grid);
    grid("tau_grid", p.tau_grid);
    p.sim.horizon = j.value("horizon", p.sim.horizon);
    p.sim.step = j.value("step", p.sim.step);
    if (j.contains("method")) p.sim.method = method_from_string(j.at("method").get<std::string>());
    p.sim.blow_up_threshold = j.value("blow_up_threshold", p.sim.blow_up_threshold);
    p.sim.adaptive_tol = j.value("adaptive_tol", p.sim.adaptive_tol);
    p.directions = j.value("directions", p.directions);
    p.step_inputs = j.value("step_inputs", p.step_inputs);
    p.random_inputs = j.value("random_inputs", p.random_inputs);
    p.seed = j.value("seed", p.seed);
    p.delta_margin = j.value("delta_margin", p.delta_margin);
    p.s_max = j.value("s_max", p.s_max);
    p.local_radius = j.value("local_radius", p.local_radius);
    p.shell_count = j.value("shell_count", p.shell_count);
    p.shell_scale = j.value("shell_scale", p.shell_scale);
    p.threads = j.value("threads", p.threads);
    if (j.contains("extra_probes")) {
        p.extra_probes.clear();
        for (const auto& e : j.at("extra_probes"))
            p.extra_probes.push_back({e.at("x0").get<Vec>(), signal_from_json(e.at("u")), e.value("note", std::string())});
    }
    validate(p);
    return p;
}

/// FNV-1a over the plan JSON (without the thread count) and the system name.
[[nodiscard]] inline std::string plan_hash(const SamplingPlan& p, const std::string& system_name)
{
    json j = to_json(p);
    j.erase("threads");
    j["system"] = system_name;
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ===================================================================
// probes
// ===================================================================

struct ProbeSpec {
    Vec x0;
    InputSignal u;
    double r = 0.0;  // nominal state norm
    double s = 0.0;  // input sup norm
    bool shell = false;
};

/// One simulated (x0, u) with the norm series every checker needs.
struct ProbeRun {
    std::size_t index = 0;
    Vec x0;
    InputSignal u;
    double r = 0.0;
    double s = 0.0;
    double y0 = 0.0;  // |y(0, x0, u)|
    bool shell = false;
    std::vector<double> times;
    std::vector<double> ynorm;
    std::vector<double> xnorm;
    std::vector<double> unorm;  // |u(t)|
    std::vector<double> usup;   // |u restricted to [0, t]|
    std::vector<double> ysup;   // sup of |y| over [0, t]
    std::optional<double> blow_up;

    [[nodiscard]] double ymax() const { return ysup.empty() ? 0.0 : ysup.back(); }
    [[nodiscard]] double xmax() const { return xnorm.empty() ? 0.0 : *std::max_element(xnorm.begin(), xnorm.end()); }
};

struct ProbeSet {
    std::vector<ProbeRun> runs;
    std::string plan_hash;
    double horizon = 0.0;

    [[nodiscard]] std::size_t blow_ups() const
    {
        return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const auto& r) { return r.blow_up.has_value(); }));
    }
};

namespace detail {

inline unsigned worker_count(unsigned requested)
{
    if (requested > 0) return requested;
    return std::clamp(std::thread::hardware_concurrency(), 1U, 8U);
}

/// Runs f(i) for i in [0, n) on a small pool; the first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f)
{
    const unsigned w = std::min<std::size_t>(worker_count(threads), std::max<std::size_t>(n, 1));
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard lk(mu);
                if (!err) err = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < w; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

inline InputSignal random_piecewise(std::mt19937_64& rng, std::size_t dim, double s, double horizon)
{
    std::uniform_int_distribution<int> pieces(1, 8);
    std::uniform_real_distribution<double> when(0.0, horizon);
    std::normal_distribution<double> g;
    const int n = pieces(rng);
    std::vector<double> b{0.0};
    for (int k = 1; k < n; ++k) b.push_back(when(rng));
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    std::vector<Vec> v(b.size(), Vec(dim));
    double top = 0.0;
    for (auto& x : v) {
        for (auto& c : x) c = g(rng);
        top = std::max(top, euclid_norm(x));
    }
    if (top == 0.0) {
        v.front().assign(dim, 0.0);
        v.front()[0] = 1.0;
        top = 1.0;
    }
    for (auto& x : v)
        for (auto& c : x) c *= s / top;
    return InputSignal(dim, std::move(b), std::move(v));
}

inline Vec unit(std::size_t d, std::size_t i, double sign)
{
    Vec e(d, 0.0);
    e[i] = sign;
    return e;
}

} // namespace detail

/// Unit sampling directions: +e0, -e0, then seeded Gaussian directions.
[[nodiscard]] inline std::vector<Vec> plan_directions(const SystemModel& sys, const SamplingPlan& plan)
{
    const std::size_t d = sampling_dim(sys);
    if (d == 1) return {Vec{1.0}, Vec{-1.0}};
    std::vector<Vec> dirs{detail::unit(d, 0, 1.0)};
    if (plan.directions >= 2) dirs.push_back(detail::unit(d, 0, -1.0));
    std::mt19937_64 rng(plan.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> g;
    while (dirs.size() < plan.directions) {
        Vec v(d);
        for (auto& c : v) c = g(rng);
        const double n = euclid_norm(v);
        if (n < 1e-12) continue;
        for (auto& c : v) c /= n;
        dirs.push_back(std::move(v));
    }
    return dirs;
}

/// Input family for one sup norm s: constants +-s e0, a step on [0, T/4), seeded random signals.
[[nodiscard]] inline std::vector<InputSignal> plan_inputs(const SystemModel& sys, const SamplingPlan& plan, double s,
                                                         std::mt19937_64& rng)
{
    const std::size_t m = sys.input_dim;
    if (s == 0.0 || m == 0) return {InputSignal::zero(m)};
    std::vector<InputSignal> out{InputSignal::constant(detail::unit(m, 0, s)),
                                 InputSignal::constant(detail::unit(m, 0, -s))};
    if (plan.step_inputs)
        out.emplace_back(m, std::vector<double>{0.0, 0.25 * plan.sim.horizon}, std::vector<Vec>{detail::unit(m, 0, s), Vec(m, 0.0)});
    for (std::size_t k = 0; k < plan.random_inputs; ++k)
        out.push_back(detail::random_piecewise(rng, m, s, plan.sim.horizon));
    return out;
}

/// Deterministic expansion of the plan into probes.
[[nodiscard]] inline std::vector<ProbeSpec> expand_probes(const SystemModel& sys, const SamplingPlan& plan)
{
    validate(plan);
    std::vector<ProbeSpec> out;
    const auto dirs = plan_directions(sys, plan);
    std::mt19937_64 rng(plan.seed);
    for (double s : plan.s_grid) {
        if (s > 0.0 && sys.input_dim == 0) continue;
        const auto inputs = plan_inputs(sys, plan, s, rng);
        for (const auto& u : inputs) {
            out.push_back({state_from_direction(sys, dirs.front(), 0.0), u, 0.0, s, false});
            for (double r : plan.r_grid)
                for (const auto& d : dirs) out.push_back({state_from_direction(sys, d, r), u, r, s, false});
        }
    }
    if (plan.shell_count > 0) {
        // log-spaced radii with random directions; kept when the initial output is small
        const std::size_t d = sampling_dim(sys);
        std::mt19937_64 srng(plan.seed + 17);
        std::normal_distribution<double> g;
        std::uniform_real_distribution<double> lr(std::log(plan.r_grid.front()), std::log(plan.shell_scale * plan.r_grid.back()));
        const InputSignal u0 = InputSignal::zero(sys.input_dim);
        for (std::size_t k = 0; k < plan.shell_count; ++k) {
            Vec v(d);
            for (auto& c : v) c = g(srng);
            const double n = euclid_norm(v);
            const double r = std::exp(lr(srng));
            if (n < 1e-12) continue;
            for (auto& c : v) c /= n;
            const Vec x0 = state_from_direction(sys, v, r);
            if (euclid_norm(eval_output(sys, x0, u0.value_at(0.0))) <= plan.r_grid.back())
                out.push_back({x0, u0, state_norm(sys, x0), 0.0, true});
        }
    }
    for (const auto& e : plan.extra_probes) out.push_back({e.x0, e.u, state_norm(sys, e.x0), e.u.sup_norm(), false});
    return out;
}

/// Simulates one probe and records the norm series.
[[nodiscard]] inline ProbeRun run_probe(const SystemModel& sys, const ProbeSpec& spec, const SimPlan& sim, std::size_t index = 0)
{
    ProbeRun p;
    p.index = index;
    p.x0 = spec.x0;
    p.u = spec.u;
    p.r = spec.r;
    p.s = spec.s;
    p.shell = spec.shell;
    const Trajectory tr = simulate(sys, spec.x0, spec.u, sim);
    p.blow_up = tr.blow_up;
    p.times = tr.times;
    const std::size_t n = tr.size();
    p.ynorm.resize(n);
    p.xnorm.resize(n);
    p.unorm.resize(n);
    p.usup.resize(n);
    p.ysup.resize(n);
    double ys = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        p.ynorm[k] = euclid_norm(tr.outputs[k]);
        p.xnorm[k] = state_norm(sys, tr.states[k]);
        p.unorm[k] = euclid_norm(spec.u.value_at(tr.times[k]));
        p.usup[k] = spec.u.sup_norm_until(tr.times[k]);
        ys = std::max(ys, p.ynorm[k]);
        p.ysup[k] = ys;
    }
    p.y0 = n > 0 ? p.ynorm[0] : euclid_norm(eval_output(sys, spec.x0, spec.u.value_at(0.0)));
    return p;
}

[[nodiscard]] inline ProbeSet run_probes(const SystemModel& sys, const SamplingPlan& plan)
{
    const auto specs = expand_probes(sys, plan);
    ProbeSet set;
    set.runs.resize(specs.size());
    set.plan_hash = plan_hash(plan, sys.name);
    set.horizon = plan.sim.horizon;
    detail::parallel_for(specs.size(), plan.threads, [&](std::size_t i) { set.runs[i] = run_probe(sys, specs[i], plan.sim, i); });
    return set;
}

// ===================================================================
// verification
// ===================================================================

namespace detail {

struct ProbeCheck {
    std::size_t checked = 0;
    double slack = inf;
    double t = 0.0;
    double observed = 0.0;
    double bound = 0.0;

    void add(double b, double obs, double time)
    {
        ++checked;
        const double sl = b - obs;
        if (sl < slack) {
            slack = sl;
            t = time;
            observed = obs;
            bound = b;
        }
    }
};

struct CheckContext {
    double eps_hi = 0.5;  // OAG proxy tolerance
    double eps_lo = 0.1;  // OLIM proxy tolerance
};

inline bool within(double v, double limit) { return v <= limit * (1.0 + 1e-12) + 1e-300; }

/// Index of the smallest axis value >= x, if any.
inline std::optional<std::size_t> axis_ceil(const std::vector<double>& ax, double x)
{
    const double tol = 1e-12 * std::max(1.0, std::abs(x));
    const auto it = std::lower_bound(ax.begin(), ax.end(), x - tol);
    if (it == ax.end()) return std::nullopt;
    return static_cast<std::size_t>(it - ax.begin());
}

/// Worst slack of one probe against the certificate's defining inequality.
inline ProbeCheck check_probe(const Certificate& c, const ProbeRun& p, const CheckContext& ctx)
{
    using P = PropertyId;
    ProbeCheck pc;
    const std::size_t n = p.times.size();
    const auto& t = p.times;
    const auto& y = p.ynorm;
    auto gam = [&](double s) { return c.gamma(s); };
    auto each = [&](auto&& bound, const std::vector<double>& obs) {
        for (std::size_t k = 0; k < n; ++k) pc.add(bound(k), obs[k], t[k]);
    };
    const bool local = within(p.r, c.radius) && within(p.s, c.radius);

    switch (c.property) {
    case P::FC: break;
    case P::IOS:
    case P::IOPS: {
        const double off = gam(p.s) + (c.property == P::IOPS ? c.c : 0.0);
        each([&](std::size_t k) { return c.beta(p.r, t[k]) + off; }, y);
        break;
    }
    case P::OCAG: each([&](std::size_t k) { return c.beta(p.r + c.c, t[k]) + gam(p.s); }, y); break;
    case P::ISS: each([&](std::size_t k) { return c.beta(p.r, t[k]) + gam(p.s); }, p.xnorm); break;
    case P::IOSS:
        each([&](std::size_t k) { return c.beta(p.r, t[k]) + gam(p.usup[k]) + c.gamma2(p.ysup[k]); }, p.xnorm);
        break;
    case P::OL: {
        const double b = c.sigma(p.y0) + gam(p.s);
        each([&](std::size_t) { return b; }, y);
        break;
    }
    case P::LOCAL_OL:
        if (local) {
            const double b = c.sigma(p.y0) + gam(p.s);
            each([&](std::size_t) { return b; }, y);
        }
        break;
    case P::OUGS: {
        const double b = c.sigma(p.r) + gam(p.s);
        each([&](std::size_t) { return b; }, y);
        break;
    }
    case P::OULS:
        if (is_epsilon_delta(c)) {
            const auto& tb = *c.table;
            for (std::size_t i = 0; i < tb.axes[0].size(); ++i) {
                const double delta = tb.values[i];
                if (!within(p.r, delta) || !within(p.s, delta)) continue;
                const double eps = tb.axes[0][i];
                each([&](std::size_t) { return eps; }, y);
            }
        } else if (local) {
            const double b = c.sigma(p.r) + gam(p.s);
            each([&](std::size_t) { return b; }, y);
        }
        break;
    case P::OUGB: {
        const double b = c.sigma(p.r) + gam(p.s) + c.c;
        each([&](std::size_t) { return b; }, y);
        break;
    }
    case P::OOUGB: {
        const double b = c.sigma(p.y0) + gam(p.s) + c.c;
        each([&](std::size_t) { return b; }, y);
        break;
    }
    case P::H_BOUNDED:
    case P::H_K_BOUNDED: {
        const double off = c.property == P::H_BOUNDED ? c.c : 0.0;
        each([&](std::size_t k) { return c.sigma(p.xnorm[k]) + gam(p.unorm[k]) + off; }, y);
        break;
    }
    case P::OAG: {
        if (n == 0) break;
        const double from = 0.75 * t.back();
        const double b = ctx.eps_hi + gam(p.s);
        for (std::size_t k = 0; k < n; ++k)
            if (t[k] >= from) pc.add(b, y[k], t[k]);
        break;
    }
    case P::OLIM: {
        if (n == 0) break;
        const auto it = std::min_element(y.begin(), y.end());
        pc.add(ctx.eps_lo + gam(p.s), *it, t[static_cast<std::size_t>(it - y.begin())]);
        break;
    }
    case P::OUAG:
    case P::OGUAG:
    case P::OULIM:
    case P::OGULIM:
    case P::OOULIM: {
        const auto& tb = *c.table;
        const bool uniform = c.property == P::OGUAG || c.property == P::OGULIM || c.property == P::OOULIM;
        const bool lim = c.property == P::OULIM || c.property == P::OGULIM || c.property == P::OOULIM;
        const double rr = c.property == P::OOULIM ? p.y0 : p.r;
        const auto ir = axis_ceil(tb.axes[1], rr);
        if (!ir) break;
        std::optional<std::size_t> is = std::size_t{0};
        if (!uniform) is = axis_ceil(tb.axes[2], p.s);
        if (!is) break;
        for (std::size_t ie = 0; ie < tb.axes[0].size(); ++ie) {
            const double tau = uniform ? tb.values[tb.flat(std::vector<std::size_t>{ie, *ir})]
                                       : tb.values[tb.flat(std::vector<std::size_t>{ie, *ir, *is})];
            if (!std::isfinite(tau)) continue;
            const double b = tb.axes[0][ie] + gam(p.s);
            if (!lim) {
                for (std::size_t k = 0; k < n; ++k)
                    if (t[k] >= tau * (1.0 - 1e-12)) pc.add(b, y[k], t[k]);
            } else {
                double best = inf, at = 0.0;
                for (std::size_t k = 0; k < n && t[k] <= tau * (1.0 + 1e-12); ++k)
                    if (y[k] < best) {
                        best = y[k];
                        at = t[k];
                    }
                const bool covered = n > 0 && !p.blow_up && t.back() >= tau * (1.0 - 1e-12);
                if (covered || best <= b) pc.add(b, best, at);
            }
        }
        break;
    }
    case P::OCEP: {
        const auto& tb = *c.table;
        for (std::size_t ie = 0; ie < tb.axes[0].size(); ++ie)
            for (std::size_t it = 0; it < tb.axes[1].size(); ++it) {
                const double delta = tb.values[tb.flat(std::vector<std::size_t>{ie, it})];
                if (!within(p.r, delta) || !within(p.s, delta)) continue;
                const double tau = tb.axes[1][it], eps = tb.axes[0][ie];
                for (std::size_t k = 0; k < n && t[k] <= tau * (1.0 + 1e-12); ++k) pc.add(eps, y[k], t[k]);
            }
        break;
    }
    case P::BORS:
    case P::OBORS: {
        const auto& tb = *c.table;
        const auto ir = axis_ceil(tb.axes[0], c.property == P::OBORS ? p.y0 : p.r);
        const auto is = axis_ceil(tb.axes[1], p.s);
        if (!ir || !is) break;
        const auto& ta = tb.axes[2];
        std::size_t it = 0;
        for (std::size_t k = 0; k < n; ++k) {
            while (it < ta.size() && ta[it] < t[k] * (1.0 - 1e-12)) ++it;
            if (it == ta.size()) break;
            pc.add(tb.values[tb.flat(std::vector<std::size_t>{*ir, *is, it})], y[k], t[k]);
        }
        break;
    }
    }
    return pc;
}

inline const char* measure_of(PropertyId p) { return is_state_property(p) ? "state" : "output"; }

inline void annotate(Verdict& v, const SamplingPlan& plan)
{
    using P = PropertyId;
    if (v.property == P::OGUAG || v.property == P::OGULIM || v.property == P::OOULIM)
        v.notes.push_back("uniform in u only up to s_max = " + std::to_string(effective_s_max(plan)));
    if (v.property == P::OAG)
        v.notes.push_back("proxy: tail window [3T/4, T] with eps = " + std::to_string(plan.eps_grid.back()));
    if (v.property == P::OLIM)
        v.notes.push_back("proxy: minimum over [0, T] with eps = " + std::to_string(plan.eps_grid.front()));
}

} // namespace detail

/// Checks the certificate on already simulated probes.
[[nodiscard]] inline Verdict verify(const Certificate& cert, const ProbeSet& probes, const SamplingPlan& plan)
{
    validate(cert);
    Verdict v;
    v.property = cert.property;
    v.plan_hash = probes.plan_hash;
    v.fc_failures = probes.blow_ups();
    detail::annotate(v, plan);

    if (cert.property == PropertyId::FC) {
        v.samples = probes.runs.size();
        if (v.fc_failures == 0) {
            v.status = Status::certified;
            v.reason = "no blow-up within the horizon";
            return v;
        }
        const auto& p = *std::find_if(probes.runs.begin(), probes.runs.end(), [](const auto& r) { return r.blow_up.has_value(); });
        v.status = Status::falsified;
        v.slack = -inf;
        v.reason = "trajectory blew up at t = " + std::to_string(*p.blow_up);
        v.witness = Witness{p.x0, p.u, *p.blow_up, p.xnorm.empty() ? 0.0 : p.xnorm.back(), plan.sim.blow_up_threshold,
                            0.0, "state", p.index};
        v.witness->margin = inf;
        return v;
    }

    const detail::CheckContext ctx{plan.eps_grid.back(), plan.eps_grid.front()};
    std::vector<detail::ProbeCheck> checks(probes.runs.size());
    detail::parallel_for(checks.size(), plan.threads, [&](std::size_t i) { checks[i] = detail::check_probe(cert, probes.runs[i], ctx); });

    std::optional<std::size_t> worst;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        v.samples += checks[i].checked;
        if (checks[i].checked == 0) continue;
        if (!worst || checks[i].slack < checks[*worst].slack) worst = i;
    }
    if (!worst) {
        v.reason = "no sample falls inside the certificate's region";
        return v;
    }
    const auto& w = checks[*worst];
    v.slack = w.slack;
    if (w.slack < -plan.delta_margin) {
        const auto& p = probes.runs[*worst];
        v.status = Status::falsified;
        v.witness = Witness{p.x0, p.u, w.t, w.observed, w.bound, w.observed - w.bound, detail::measure_of(cert.property), p.index};
        v.reason = "bound violated by " + std::to_string(-w.slack);
    } else if (v.fc_failures > 0) {
        v.reason = std::to_string(v.fc_failures) + " probe(s) blew up; bound holds on the recorded samples";
    } else {
        v.status = Status::certified;
        v.reason = "bound holds on all sampled points";
    }
    return v;
}

[[nodiscard]] inline Verdict verify(const SystemModel& sys, const Certificate& cert, const SamplingPlan& plan)
{
    validate(cert);
    return verify(cert, run_probes(sys, plan), plan);
}

/// Identity gains, beta = r e^{-t}, c = 1, and tables claiming tau = T/2, mu = r + s + 1, delta = eps / 2.
[[nodiscard]] inline Certificate default_certificate(PropertyId p, const SamplingPlan& plan)
{
    using P = PropertyId;
    Certificate c;
    c.property = p;
    const std::string f = required_fields(p).fields;
    if (f.find('b') != std::string::npos) c.beta = kl::exponential(1.0);
    if (f.find('s') != std::string::npos) c.sigma = fn::identity();
    if (f.find('g') != std::string::npos) c.gamma = fn::identity();
    if (f.find('h') != std::string::npos) c.gamma2 = fn::identity();
    if (f.find('c') != std::string::npos) c.c = 1.0;
    if (f.find('r') != std::string::npos) c.radius = plan.local_radius;
    std::vector<double> r_axis = plan.r_grid, s_axis = plan.s_grid;
    switch (p) {
    case P::OUAG:
    case P::OULIM: c.table = GridTable({"eps", "r", "s"}, {plan.eps_grid, r_axis, s_axis}, 0.5 * plan.sim.horizon); break;
    case P::OGUAG:
    case P::OGULIM:
    case P::OOULIM: c.table = GridTable({"eps", "r"}, {plan.eps_grid, r_axis}, 0.5 * plan.sim.horizon); break;
    case P::OCEP: {
        c.table = GridTable({"eps", "tau"}, {plan.eps_grid, effective_tau_grid(plan)});
        for (std::size_t k = 0; k < c.table->cells(); ++k) c.table->values[k] = 0.5 * plan.eps_grid[c.table->unflat(k)[0]];
        break;
    }
    case P::BORS:
    case P::OBORS: {
        c.table = GridTable({"r", "s", "t"}, {r_axis, s_axis, effective_t_grid(plan)});
        for (std::size_t k = 0; k < c.table->cells(); ++k) {
            const auto i = c.table->unflat(k);
            c.table->values[k] = r_axis[i[0]] + s_axis[i[1]] + 1.0;
        }
        break;
    }
    default: break;
    }
    c.note = "default candidate";
    return c;
}

// ===================================================================
// falsification
// ===================================================================

namespace detail {

struct Candidate {
    Vec dir;
    double radius = 0.0;
    double amp = 0.0;  // signed constant input along e0
    ProbeCheck check;
    ProbeRun run;
};

} // namespace detail

/// Plan probes, then a radial sweep, then pattern-search refinement of the best
/// starts. budget counts simulations beyond the plan probes.
[[nodiscard]] inline Verdict falsify(const SystemModel& sys, const Certificate& cert, std::size_t budget, const SamplingPlan& plan)
{
    validate(cert);
    const ProbeSet probes = run_probes(sys, plan);
    Verdict v = verify(cert, probes, plan);
    if (v.falsified() || cert.property == PropertyId::FC) {
        v.notes.push_back("stage: plan probes");
        return v;
    }

    const detail::CheckContext ctx{plan.eps_grid.back(), plan.eps_grid.front()};
    const std::size_t d = sampling_dim(sys);
    const std::size_t m = sys.input_dim;
    std::size_t used = 0, next_index = probes.runs.size();
    double best_slack = v.slack;

    auto evaluate = [&](detail::Candidate& c) {
        ++used;
        const InputSignal u = (m == 0 || c.amp == 0.0) ? InputSignal::zero(m) : InputSignal::constant(detail::unit(m, 0, c.amp));
        const Vec x0 = state_from_direction(sys, c.dir, c.radius);
        c.run = run_probe(sys, {x0, u, state_norm(sys, x0), std::abs(c.amp), false}, plan.sim, next_index++);
        c.check = detail::check_probe(cert, c.run, ctx);
        if (c.check.checked == 0) c.check.slack = inf;
    };

    // radial sweep over plan directions and constant inputs
    const auto dirs = plan_directions(sys, plan);
    std::vector<double> amps{0.0};
    if (m > 0) {
        amps.push_back(effective_s_max(plan));
        amps.push_back(-effective_s_max(plan));
    }
    const std::size_t per_radius = dirs.size() * amps.size();
    const std::size_t n_r = std::clamp<std::size_t>(budget / 2 / std::max<std::size_t>(per_radius, 1), 8, 200);
    const double lo = std::log(plan.r_grid.front() / 10.0), hi = std::log(plan.r_grid.back() * 10.0);
    std::vector<detail::Candidate> sweep;
    for (std::size_t i = 0; i < n_r && used < budget; ++i) {
        const double r = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_r - 1));
        for (const auto& dir : dirs)
            for (double a : amps) {
                if (used >= budget) break;
                detail::Candidate c{dir, r, a, {}, {}};
                evaluate(c);
                sweep.push_back(std::move(c));
            }
    }
    if (sweep.empty()) {
        v.reason = "budget exhausted, worst slack = " + std::to_string(best_slack);
        return v;
    }

    // near-best starts first, smaller radii preferred within a slack bucket
    double top = inf;
    for (const auto& c : sweep) top = std::min(top, c.check.slack);
    const double bucket = std::max(plan.delta_margin, 0.05 * std::abs(top));
    std::vector<std::size_t> order(sweep.size());
    std::iota(order.begin(), order.end(), 0);
    auto key = [&](std::size_t i) { return std::floor(sweep[i].check.slack / bucket); };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (key(a) != key(b)) return key(a) < key(b);
        return sweep[a].radius < sweep[b].radius;
    });
    const std::size_t starts = std::min<std::size_t>(6, order.size());
    std::mt19937_64 rng(plan.seed + 99);
    std::normal_distribution<double> g;

    std::optional<detail::Candidate> best;
    for (std::size_t si = 0; si < starts; ++si) {
        detail::Candidate cur = sweep[order[si]];
        const std::size_t share = used + (budget > used ? (budget - used) / (starts - si) : 0);
        double h = 0.1;
        while (used < share && h > 1e-7) {
            std::vector<detail::Candidate> moves;
            for (double f : {1.0 + h, 1.0 - h}) {
                detail::Candidate c = cur;
                c.radius = cur.radius * f;
                moves.push_back(c);
                if (m > 0 && cur.amp != 0.0) {
                    detail::Candidate a = cur;
                    a.amp = cur.amp * f;
                    moves.push_back(a);
                }
            }
            if (d > 1) {
                detail::Candidate c = cur;
                for (auto& x : c.dir) x += h * g(rng);
                const double n = euclid_norm(c.dir);
                if (n > 1e-12) {
                    for (auto& x : c.dir) x /= n;
                    moves.push_back(c);
                }
            }
            bool improved = false;
            for (auto& c : moves) {
                if (used >= share) break;
                evaluate(c);
                if (c.check.slack < cur.check.slack) {
                    cur = std::move(c);
                    improved = true;
                }
            }
            if (!improved) h *= 0.5;
        }
        const bool better = !best || cur.check.slack < best->check.slack - plan.delta_margin ||
                            (cur.check.slack <= best->check.slack + plan.delta_margin && cur.radius < best->radius &&
                             cur.check.slack < -plan.delta_margin);
        if (better) best = std::move(cur);
    }

    for (const auto& c : sweep)
        if (!best || c.check.slack < best->check.slack - plan.delta_margin) best = c;
    if (best && best->check.slack < -plan.delta_margin) {
        const auto& w = best->check;
        v.status = Status::falsified;
        v.slack = w.slack;
        v.samples += used;
        v.witness = Witness{best->run.x0, best->run.u, w.t, w.observed, w.bound, w.observed - w.bound,
                            detail::measure_of(cert.property), best->run.index};
        v.reason = "bound violated by " + std::to_string(-w.slack);
        v.notes.push_back("stage: search (" + std::to_string(used) + " simulations)");
        return v;
    }
    if (best) best_slack = std::min(best_slack, best->check.slack);
    v.samples += used;
    v.status = Status::inconclusive;
    v.slack = best_slack;
    v.reason = "budget exhausted, worst slack = " + std::to_string(best_slack);
    return v;
}

// ===================================================================
// estimation
// ===================================================================

enum class TauMode { uag, lim };

inline const char* to_string(TauMode m) { return m == TauMode::uag ? "UAG" : "LIM"; }

/// Empirical tau over (eps, r[, s]); UAG: bound holds for all t >= tau, LIM: for some t <= tau.
struct ConvergenceTimeTable {
    GridTable tau;
    TauMode mode = TauMode::uag;
};

/// Empirical mu over (r, s, t) with growth diagnostics.
struct ReachabilityBound {
    GridTable mu;
    bool diverging = false;
    std::vector<std::string> diagnostics;
};

namespace detail {

using Samples = std::vector<std::pair<double, double>>;

/// Reduces many (x, v) points to at most max_knots while keeping the envelope dominating.
inline Samples thin(Samples pts, std::size_t max_knots = 256)
{
    std::sort(pts.begin(), pts.end());
    Samples zero, pos;
    for (const auto& p : pts) (p.first == 0.0 ? zero : pos).push_back(p);
    Samples out;
    if (!zero.empty()) out.push_back({0.0, zero.back().second});
    if (pos.empty()) return out;
    std::vector<double> xs, run;  // distinct x and running max
    double mx = -inf;
    for (const auto& [x, v] : pos) {
        mx = std::max(mx, v);
        if (!xs.empty() && xs.back() == x) run.back() = mx;
        else {
            xs.push_back(x);
            run.push_back(mx);
        }
    }
    if (xs.size() <= max_knots) {
        for (std::size_t i = 0; i < xs.size(); ++i) out.push_back({xs[i], run[i]});
        return out;
    }
    const std::size_t stride = (xs.size() + max_knots - 2) / (max_knots - 1);
    std::vector<std::size_t> edges;
    for (std::size_t i = 0; i < xs.size(); i += stride) edges.push_back(i);
    if (edges.back() != xs.size() - 1) edges.push_back(xs.size() - 1);
    // knot at edge i carries the running max up to edge i + 1
    for (std::size_t e = 0; e < edges.size(); ++e)
        out.push_back({xs[edges[e]], run[edges[std::min(e + 1, edges.size() - 1)]]});
    return out;
}

/// Envelope anchored at the origin; zero function when there is no data.
inline ScalarFn envelope0(Samples pts)
{
    if (pts.empty()) return fn::zero();
    pts = thin(std::move(pts));
    if (pts.size() < 2) pts.push_back({0.0, 0.0});
    return fit_monotone_envelope(std::move(pts), true, default_eps_slope, 1e-9);
}

/// Envelope with an offset: returns (sigma in K-infinity, c = envelope(0)).
inline std::pair<ScalarFn, double> offset_envelope(Samples pts)
{
    if (pts.empty()) throw fit_error("no samples for the offset envelope");
    pts = thin(std::move(pts));
    if (pts.size() < 2) pts.push_back({pts.front().first + 1.0, pts.front().second});
    const ScalarFn env = fit_monotone_envelope(std::move(pts), false);
    const auto& n = env.node();
    std::vector<double> vals = n.values;
    const double c = vals.front();
    for (double& v : vals) v -= c;
    vals.front() = 0.0;
    return {fn::table(n.knots, std::move(vals)), std::max(c, 1e-9)};
}

inline std::vector<const ProbeRun*> usable(const ProbeSet& ps)
{
    std::vector<const ProbeRun*> out;
    for (const auto& r : ps.runs)
        if (!r.blow_up) out.push_back(&r);
    return out;
}

inline const std::vector<double>& measure(const ProbeRun& p, bool state) { return state ? p.xnorm : p.ynorm; }

inline double series_max(const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

/// Separable KL sigma(r) lambda(t) dominating the zero-input runs.
inline KLFn fit_separable_kl(const std::vector<const ProbeRun*>& runs, bool state, std::size_t knots = 80)
{
    Samples pts;
    double T = inf;
    for (const auto* p : runs) {
        if (p->s != 0.0) continue;
        pts.push_back({p->r, series_max(measure(*p, state))});
        if (!p->times.empty()) T = std::min(T, p->times.back());
    }
    if (pts.empty() || !std::isfinite(T)) throw fit_error("no zero-input samples for the KL fit");
    const ScalarFn sigma = envelope0(pts);

    std::vector<double> tk(knots + 1), v(knots + 1, 0.0);
    for (std::size_t i = 0; i <= knots; ++i) tk[i] = T * static_cast<double>(i) / static_cast<double>(knots);
    bool any = false;
    for (const auto* p : runs) {
        if (p->s != 0.0 || p->r == 0.0) continue;
        any = true;
        const auto& m = measure(*p, state);
        const double scale = sigma(p->r);
        std::vector<double> suffix(m.size());
        double acc = 0.0;
        for (std::size_t k = m.size(); k-- > 0;) {
            acc = std::max(acc, m[k] / scale);
            suffix[k] = acc;
        }
        std::size_t k = 0;
        for (std::size_t i = 0; i <= knots; ++i) {
            const double from = i == 0 ? 0.0 : tk[i - 1];
            while (k < p->times.size() && p->times[k] < from * (1.0 - 1e-12)) ++k;
            if (k < suffix.size()) v[i] = std::max(v[i], suffix[k]);
        }
    }
    if (!any) throw fit_error("no nonzero zero-input samples for the KL fit");
    v.back() = std::max(v.back(), 1e-12);
    for (std::size_t i = knots; i-- > 0;) v[i] = std::max(v[i], v[i + 1] * (1.0 + 1e-6));
    if (v.back() > 0.5)
        throw fit_error("no uniform decay within the horizon (lambda(T) = " + std::to_string(v.back()) + ")");
    const double rate = std::log(v[knots - 1] / v[knots]) / (tk[knots] - tk[knots - 1]);
    return kl::separable(sigma, fn::table(tk, v, rate));
}

inline TauMode tau_mode(PropertyId p)
{
    return (p == PropertyId::OUAG || p == PropertyId::OGUAG) ? TauMode::uag : TauMode::lim;
}

/// Per-probe tau for threshold b: UAG first grid time after the last violation, LIM first hit.
inline double probe_tau(const ProbeRun& p, double b, TauMode mode)
{
    const auto& y = p.ynorm;
    if (mode == TauMode::uag) {
        if (p.blow_up) return inf;
        std::optional<std::size_t> last;
        for (std::size_t k = 0; k < y.size(); ++k)
            if (y[k] > b) last = k;
        if (!last) return 0.0;
        return *last + 1 < y.size() ? p.times[*last + 1] : inf;
    }
    for (std::size_t k = 0; k < y.size(); ++k)
        if (y[k] <= b) return p.times[k];
    return inf;
}

} // namespace detail

/// tau table over (eps, r, s) or (eps, r) when uniform_in_s; OOULIM-style tables index r by |y(0)|.
/// Throws fit_error naming the first cell whose trajectories do not settle within the horizon.
[[nodiscard]] inline ConvergenceTimeTable build_tau_table(const ProbeSet& probes, const ScalarFn& gamma, TauMode mode,
                                                          bool uniform_in_s, bool by_initial_output, const SamplingPlan& plan)
{
    std::vector<double> r_axis = plan.r_grid;
    std::vector<double> s_axis = plan.s_grid;
    ConvergenceTimeTable out;
    out.mode = mode;
    out.tau = uniform_in_s ? GridTable({"eps", "r"}, {plan.eps_grid, r_axis}) : GridTable({"eps", "r", "s"}, {plan.eps_grid, r_axis, s_axis});
    const double s_top = effective_s_max(plan);
    for (std::size_t k = 0; k < out.tau.cells(); ++k) {
        const auto idx = out.tau.unflat(k);
        const double eps = plan.eps_grid[idx[0]], r = r_axis[idx[1]];
        const double s = uniform_in_s ? s_top : s_axis[idx[2]];
        double tau = 0.0;
        for (const auto& p : probes.runs) {
            const double rr = by_initial_output ? p.y0 : p.r;
            if (!detail::within(rr, r) || !detail::within(p.s, s)) continue;
            const double pt = detail::probe_tau(p, eps + gamma(p.s), mode);
            if (!std::isfinite(pt)) {
                char buf[256];
                std::snprintf(buf, sizeof buf, "horizon too short: probe %zu (r = %g, s = %g) never %s eps = %g", p.index,
                              p.r, p.s, mode == TauMode::uag ? "settles below" : "dips below", eps);
                throw fit_error(buf);
            }
            tau = std::max(tau, pt);
        }
        out.tau.values[k] = tau;
    }
    const std::vector<int> dirs = uniform_in_s ? std::vector<int>{-1, 1} : std::vector<int>{-1, 1, 1};
    out.tau.rectify(dirs, true);
    return out;
}

/// mu(r, s, t) = sup |y| (or |y| indexed by |y(0)|) over probes inside the (r, s) ball up to t; inf after blow-up.
[[nodiscard]] inline ReachabilityBound reachability_from(const ProbeSet& probes, const SamplingPlan& plan, bool by_initial_output = false)
{
    ReachabilityBound rb;
    const auto ts = effective_t_grid(plan);
    rb.mu = GridTable({"r", "s", "t"}, {plan.r_grid, plan.s_grid, ts});
    for (const auto& p : probes.runs) {
        const double rr = by_initial_output ? p.y0 : p.r;
        const auto ir = detail::axis_ceil(plan.r_grid, rr);
        const auto is = detail::axis_ceil(plan.s_grid, p.s);
        if (!ir || !is) continue;
        for (std::size_t it = 0; it < ts.size(); ++it) {
            double v;
            if (p.blow_up && *p.blow_up <= ts[it]) v = inf;
            else {
                const auto end = std::upper_bound(p.times.begin(), p.times.end(), ts[it] * (1.0 + 1e-12));
                const auto k = static_cast<std::size_t>(end - p.times.begin());
                v = k == 0 ? 0.0 : p.ysup[k - 1];
            }
            double& cell = rb.mu.values[rb.mu.flat(std::vector<std::size_t>{*ir, *is, it})];
            cell = std::max(cell, v);
        }
    }
    rb.mu.rectify(std::vector<int>{1, 1, 1}, true);
    const auto& ra = plan.r_grid;
    for (std::size_t is = 0; is < plan.s_grid.size(); ++is)
        for (std::size_t it = 0; it < ts.size(); ++it)
            for (std::size_t ir = 1; ir < ra.size(); ++ir) {
                const double a = rb.mu.values[rb.mu.flat(std::vector<std::size_t>{ir - 1, is, it})];
                const double b = rb.mu.values[rb.mu.flat(std::vector<std::size_t>{ir, is, it})];
                const bool jump = !std::isfinite(b) || (a > 0.0 && b / a > 4.0 * ra[ir] / ra[ir - 1] && b > 2.0 * ra[ir]);
                if (!jump) continue;
                rb.diverging = true;
                char buf[200];
                std::snprintf(buf, sizeof buf, "mu jumps from %g to %g between r = %g and r = %g (s = %g, t = %g)", a, b,
                              ra[ir - 1], ra[ir], plan.s_grid[is], ts[it]);
                rb.diagnostics.emplace_back(buf);
            }
    return rb;
}

[[nodiscard]] inline ReachabilityBound build_reachability_bound(const SystemModel& sys, const SamplingPlan& plan)
{
    return reachability_from(run_probes(sys, plan), plan);
}

/// Fits the property's parameters from the probes; the result verifies on the same probes.
/// Throws fit_error when the data does not determine a valid certificate.
[[nodiscard]] inline Certificate estimate_gain(PropertyId prop, const ProbeSet& probes, const SamplingPlan& plan)
{
    using P = PropertyId;
    using detail::Samples;
    const auto runs = detail::usable(probes);
    Certificate c;
    c.property = prop;
    const double rad = plan.local_radius;
    auto local = [&](const ProbeRun* p) { return detail::within(p->r, rad) && detail::within(p->s, rad); };

    // gamma from residuals sup_t (m - base(p, t))+ over input-driven probes
    auto residual_gamma = [&](auto&& base, bool state, auto&& keep) {
        Samples pts;
        for (const auto* p : runs) {
            if (p->s == 0.0 || !keep(p)) continue;
            const auto& m = detail::measure(*p, state);
            double worst = 0.0;
            for (std::size_t k = 0; k < m.size(); ++k) worst = std::max(worst, m[k] - base(p, k));
            pts.push_back({p->s, worst});
        }
        return detail::envelope0(pts);
    };
    auto all = [](const ProbeRun*) { return true; };

    switch (prop) {
    case P::FC: c.note = "no blow-up observed"; break;
    case P::IOS:
    case P::ISS:
    case P::IOPS:
    case P::OCAG:
    case P::IOSS: {
        const bool state = prop == P::ISS || prop == P::IOSS;
        c.beta = detail::fit_separable_kl(runs, state);
        c.gamma = residual_gamma([&](const ProbeRun* p, std::size_t k) { return c.beta(p->r, p->times[k]); }, state, all);
        if (prop == P::IOSS) {
            c.gamma2 = fn::zero();
            c.note = "output gain not identified; fitted as the ISS bound";
        }
        break;
    }
    case P::OUGS:
    case P::OULS:
    case P::OL:
    case P::LOCAL_OL: {
        const bool by_y0 = prop == P::OL || prop == P::LOCAL_OL;
        const bool loc = prop == P::OULS || prop == P::LOCAL_OL;
        Samples pts;
        for (const auto* p : runs)
            if (p->s == 0.0 && (!loc || local(p))) pts.push_back({by_y0 ? p->y0 : p->r, p->ymax()});
        c.sigma = detail::envelope0(pts);
        c.gamma = residual_gamma([&](const ProbeRun* p, std::size_t) { return c.sigma(by_y0 ? p->y0 : p->r); }, false,
                                 [&](const ProbeRun* p) { return !loc || local(p); });
        if (loc) c.radius = rad;
        break;
    }
    case P::OUGB:
    case P::OOUGB: {
        const bool by_y0 = prop == P::OOUGB;
        Samples pts;
        for (const auto* p : runs)
            if (p->s == 0.0) pts.push_back({by_y0 ? p->y0 : p->r, p->ymax()});
        std::tie(c.sigma, c.c) = detail::offset_envelope(pts);
        c.gamma = residual_gamma([&](const ProbeRun* p, std::size_t) { return c.sigma(by_y0 ? p->y0 : p->r) + c.c; }, false, all);
        break;
    }
    case P::H_BOUNDED:
    case P::H_K_BOUNDED: {
        Samples pts;
        for (const auto* p : runs)
            for (std::size_t k = 0; k < p->times.size(); ++k) pts.push_back({std::max(p->xnorm[k], p->unorm[k]), p->ynorm[k]});
        if (prop == P::H_BOUNDED) {
            std::tie(c.sigma, c.c) = detail::offset_envelope(pts);
        } else {
            c.sigma = detail::envelope0(pts);
            if (c.sigma.is_zero()) c.sigma = fn::scale(default_eps_slope);
        }
        c.gamma = c.sigma;
        break;
    }
    case P::OAG:
    case P::OLIM: {
        const bool tail = prop == P::OAG;
        Samples pts;
        for (const auto* p : runs) {
            if (p->times.empty()) continue;
            double v;
            if (tail) {
                v = 0.0;
                for (std::size_t k = 0; k < p->times.size(); ++k)
                    if (p->times[k] >= 0.75 * p->times.back()) v = std::max(v, p->ynorm[k]);
            } else {
                v = *std::min_element(p->ynorm.begin(), p->ynorm.end());
            }
            const double eps = tail ? plan.eps_grid.back() : plan.eps_grid.front();
            if (p->s == 0.0 && v > eps)
                throw fit_error(std::string(tail ? "output tail" : "output minimum") + " of zero-input probe " +
                                std::to_string(p->index) + " exceeds eps = " + std::to_string(eps));
            if (p->s > 0.0) pts.push_back({p->s, v});
        }
        c.gamma = detail::envelope0(pts);
        break;
    }
    case P::OUAG:
    case P::OGUAG:
    case P::OULIM:
    case P::OGULIM:
    case P::OOULIM: {
        const TauMode mode = detail::tau_mode(prop);
        Samples pts;
        for (const auto* p : runs) {
            if (p->s == 0.0 || p->times.empty()) continue;
            double v = mode == TauMode::uag ? 0.0 : inf;
            for (std::size_t k = 0; k < p->times.size(); ++k) {
                if (mode == TauMode::uag && p->times[k] >= 0.5 * p->times.back()) v = std::max(v, p->ynorm[k]);
                if (mode == TauMode::lim) v = std::min(v, p->ynorm[k]);
            }
            pts.push_back({p->s, v});
        }
        c.gamma = detail::envelope0(pts);
        const bool uniform = prop == P::OGUAG || prop == P::OGULIM || prop == P::OOULIM;
        c.table = build_tau_table(probes, c.gamma, mode, uniform, prop == P::OOULIM, plan).tau;
        if (uniform) c.note = "uniform in u up to s_max = " + std::to_string(effective_s_max(plan));
        break;
    }
    case P::OCEP: {
        const auto taus = effective_tau_grid(plan);
        GridTable tb({"eps", "tau"}, {plan.eps_grid, taus});
        std::vector<const ProbeRun*> sorted = runs;
        auto size = [](const ProbeRun* p) { return std::max(p->r, p->s); };
        std::stable_sort(sorted.begin(), sorted.end(), [&](auto a, auto b) { return size(a) < size(b); });
        double smallest = inf;
        for (const auto* p : sorted)
            if (size(p) > 0.0) smallest = std::min(smallest, size(p));
        if (!std::isfinite(smallest)) throw fit_error("no probes away from the origin");
        for (std::size_t k = 0; k < tb.cells(); ++k) {
            const auto idx = tb.unflat(k);
            const double eps = plan.eps_grid[idx[0]], tau = taus[idx[1]];
            // delta: largest probe size below the first failing one
            double fail = inf;
            for (const auto* p : sorted) {
                double peak = 0.0;
                for (std::size_t j = 0; j < p->times.size() && p->times[j] <= tau * (1.0 + 1e-12); ++j) peak = std::max(peak, p->ynorm[j]);
                if (peak <= eps) continue;
                if (size(p) == 0.0) throw fit_error("the origin violates eps = " + std::to_string(eps));
                fail = size(p);
                break;
            }
            double delta = 0.0;
            for (const auto* p : sorted)
                if (size(p) < fail) delta = std::max(delta, size(p));
            if (delta == 0.0) delta = 0.5 * std::min(fail, smallest);
            tb.values[k] = delta;
        }
        tb.rectify(std::vector<int>{1, -1}, false);
        c.table = std::move(tb);
        break;
    }
    case P::BORS:
    case P::OBORS: c.table = reachability_from(probes, plan, prop == P::OBORS).mu; break;
    }
    validate(c);
    return c;
}

[[nodiscard]] inline Certificate estimate_gain(const SystemModel& sys, PropertyId prop, const SamplingPlan& plan)
{
    return estimate_gain(prop, run_probes(sys, plan), plan);
}

struct TauEstimate {
    std::optional<double> tau;
    std::string reason;
};

/// Smallest grid time after which (UAG) or by which (LIM) every sampled trajectory
/// in the (r, s) ball meets eps + gamma(|u|).
[[nodiscard]] inline TauEstimate estimate_tau(const ProbeSet& probes, double eps, double r, double s, TauMode mode, const ScalarFn& gamma)
{
    double tau = 0.0;
    for (const auto& p : probes.runs) {
        if (!detail::within(p.r, r) || !detail::within(p.s, s)) continue;
        const double pt = detail::probe_tau(p, eps + gamma(p.s), mode);
        if (!std::isfinite(pt)) {
            char buf[200];
            std::snprintf(buf, sizeof buf, "probe %zu (r = %g, s = %g) %s eps = %g within the horizon", p.index, p.r, p.s,
                          mode == TauMode::uag ? "does not settle below" : "never dips below", eps);
            return {std::nullopt, buf};
        }
        tau = std::max(tau, pt);
    }
    return {tau, ""};
}

[[nodiscard]] inline TauEstimate estimate_tau(const SystemModel& sys, double eps, double r, double s, TauMode mode,
                                              const SamplingPlan& plan, const ScalarFn& gamma = fn::zero())
{
    return estimate_tau(run_probes(sys, plan), eps, r, s, mode, gamma);
}

/// inf{t >= 0 : |y(t)| < radius}, bisected between bracketing grid points; +inf if never within the horizon.
[[nodiscard]] inline double first_crossing_time(const SystemModel& sys, const Vec& x0, const InputSignal& u, double radius, const SimPlan& sim)
{
    if (!(radius > 0.0)) throw domain_error("target radius must be positive");
    const Trajectory tr = simulate(sys, x0, u, sim);
    auto ynorm = [&](std::size_t k) { return euclid_norm(tr.outputs[k]); };
    if (tr.size() > 0 && ynorm(0) < radius) return 0.0;
    for (std::size_t k = 1; k < tr.size(); ++k) {
        if (ynorm(k) >= radius) continue;
        double lo = tr.times[k - 1], hi = tr.times[k];
        const Vec& xa = tr.states[k - 1];
        const InputSignal ua = shift(u, lo);
        SimPlan fine = sim;
        fine.step = std::min(sim.step, (hi - lo) / 8.0);
        const double base = lo;
        for (int it = 0; it < 60 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            const Vec xm = flow(sys, mid - base, xa, ua, fine);
            if (euclid_norm(eval_output(sys, xm, u.value_at(mid))) < radius) hi = mid;
            else lo = mid;
        }
        return hi;
    }
    if (tr.blow_up) throw blow_up_error(sys.name + ": blew up before reaching the target ball", *tr.blow_up);
    return inf;
}

/// OULS certificate (sigma, gamma, r) to its eps-delta form delta(eps) = min{sigma^-1(eps/2), gamma^-1(eps/2), r}.
[[nodiscard]] inline Certificate to_epsilon_delta(const Certificate& c, const std::vector<double>& eps_grid)
{
    if (c.property != PropertyId::OULS || is_epsilon_delta(c)) throw class_error("conversion needs a K-function OULS certificate");
    validate(c);
    Certificate out;
    out.property = PropertyId::OULS;
    out.radius = c.radius;
    GridTable tb({"eps"}, {eps_grid});
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        const double h = 0.5 * eps_grid[i];
        double d = c.radius;
        if (!c.sigma.is_zero()) d = std::min(d, invert(c.sigma, h));
        if (!c.gamma.is_zero()) d = std::min(d, invert(c.gamma, h));
        tb.values[i] = d;
    }
    out.table = std::move(tb);
    out.note = "eps-delta form";
    validate(out);
    return out;
}

} // namespace ioslab
