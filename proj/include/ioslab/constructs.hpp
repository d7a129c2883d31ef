#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ioslab/cmpfun.hpp"
#include "ioslab/errors.hpp"
#include "ioslab/property.hpp"

namespace ioslab {

/// One certificate transformation: inputs, result and the formula derivation.
struct ConstructionRecord {
    std::string name;
    std::vector<Certificate> inputs;
    Certificate output;
    std::string trace;
};

inline json to_json(const ConstructionRecord& r)
{
    json in = json::array();
    for (const auto& c : r.inputs) in.push_back(to_json(c));
    return {{"schema", schema_version}, {"name", r.name}, {"inputs", in}, {"output", to_json(r.output)}, {"trace", r.trace}};
}

/// Offset decomposition sigma1(|x|) + gamma1(|u|) + c of a bounded output map.
struct HBound {
    ScalarFn sigma1;
    ScalarFn gamma1;
    double c = 0.0;
};

/// Gain inflated to gamma(e r) together with the merged shell time.
struct UniformGain {
    ScalarFn gamma;
    double tau = 0.0;
    std::size_t k_star = 0;
    std::string trace;
};

namespace detail {

using std::numbers::e;

inline void expect_property(const Certificate& c, std::initializer_list<PropertyId> ok, const char* op)
{
    for (PropertyId p : ok)
        if (c.property == p) {
            validate(c);
            return;
        }
    std::string want;
    for (PropertyId p : ok) want += (want.empty() ? "" : " or ") + std::string(to_string(p));
    throw domain_error(std::string(op) + ": expected a " + want + " certificate, got " + to_string(c.property));
}

inline std::optional<std::size_t> grid_floor(const std::vector<double>& ax, double x)
{
    const double tol = 1e-12 * std::max(1.0, std::abs(x));
    const auto it = std::upper_bound(ax.begin(), ax.end(), x + tol);
    if (it == ax.begin()) return std::nullopt;
    return static_cast<std::size_t>(it - ax.begin()) - 1;
}

inline std::optional<std::size_t> grid_ceil(const std::vector<double>& ax, double x)
{
    const double tol = 1e-12 * std::max(1.0, std::abs(x));
    const auto it = std::lower_bound(ax.begin(), ax.end(), x - tol);
    if (it == ax.end()) return std::nullopt;
    return static_cast<std::size_t>(it - ax.begin());
}

/// Coordinate of a conservative cell lookup: floor for axes along which the
/// table decreases (eps in a tau table), ceil otherwise.
struct Pick {
    double x;
    bool floor = false;
};

/// Table entry at the conservative cell for the point; a point outside the
/// grid or an infinite entry is a gap.
inline double cell(const GridTable& t, const std::vector<Pick>& p, const std::string& what)
{
    std::vector<std::size_t> idx(p.size());
    for (std::size_t a = 0; a < p.size(); ++a) {
        const auto i = p[a].floor ? grid_floor(t.axes[a], p[a].x) : grid_ceil(t.axes[a], p[a].x);
        if (!i)
            throw table_gap_error(what + ": " + t.names[a] + " = " + detail::num(p[a].x) + " lies " +
                                  (p[a].floor ? "below the first" : "beyond the last") + " grid value");
        idx[a] = *i;
    }
    const double v = t.values[t.flat(idx)];
    if (!std::isfinite(v)) {
        std::string at;
        for (std::size_t a = 0; a < p.size(); ++a) at += (a ? ", " : "") + t.names[a] + " = " + detail::num(t.axes[a][idx[a]]);
        throw table_gap_error(what + ": no finite entry at (" + at + ")");
    }
    return v;
}

inline bool same(const ScalarFn& a, const ScalarFn& b) { return to_json(a) == to_json(b); }
inline bool same(const KLFn& a, const KLFn& b) { return to_json(a) == to_json(b); }

/// Pointwise max of two gains, recorded in the trace when they differ.
inline ScalarFn merged_gain(const ScalarFn& a, const ScalarFn& b, std::ostringstream& tr)
{
    if (same(a, b)) return a;
    tr << "gains merged by pointwise max: max{" << describe(a) << ", " << describe(b) << "}\n";
    return maximum(a, b);
}

/// Piecewise-linear K-infinity function through (0,0) and the given points;
/// running max plus a small slope keeps it strictly increasing.
inline ScalarFn k_inf_table(std::vector<double> knots, std::vector<double> values)
{
    std::vector<double> k{0.0}, v{0.0};
    for (std::size_t i = 0; i < knots.size(); ++i) {
        if (knots[i] <= 0.0) continue;
        k.push_back(knots[i]);
        v.push_back(std::max(values[i], v.back()));
    }
    if (k.size() < 2) {
        k.push_back(1.0);
        v.push_back(0.0);
    }
    for (std::size_t i = 0; i < k.size(); ++i) v[i] += default_eps_slope * k[i];
    return fn::table(std::move(k), std::move(v));
}

/// Adds eps_slope * r when f is only class K so the result can be inverted or used as eps0.
inline ScalarFn ensure_k_inf(const ScalarFn& f)
{
    if (f.declared_class() == FnClass::k_inf) return f;
    return add(f, fn::scale(default_eps_slope));
}

/// max{a, b} + c min{r / rho, 1}: the case-split merge, continuous at rho.
inline ScalarFn case_split(const ScalarFn& a, const ScalarFn& b, double c, double rho)
{
    const ScalarFn m = maximum(a, b);
    if (c == 0.0) return m;
    return ensure_k_inf(add(m, scale_val(scale_arg(fn::saturation(), 1.0 / rho), c)));
}

/// r -> r + c.
inline ScalarFn shifted(double c) { return c == 0.0 ? fn::identity() : add(fn::identity(), fn::constant(c)); }

/// Largest eps grid value not above the target.
inline double eps_at_most(const std::vector<double>& ax, double target, const char* op)
{
    const auto i = grid_floor(ax, target);
    if (!i) throw table_gap_error(std::string(op) + ": no eps grid value <= " + detail::num(target));
    return ax[*i];
}

/// Knot times tau_n for levels eps_n(r) = e^{-n} eps0(r), independent of r:
/// tau_n is the max over radius cells of the table time at the cell's lower edge
/// (the first cell uses its own grid value). Levels stop at the first one that
/// would need eps below the grid.
struct Knots {
    std::vector<double> taus;
    std::size_t levels = 0;
    std::string note;
};

template <class TauAt>
Knots level_knots(const std::vector<double>& r_axis, const ScalarFn& eps0, double shift, TauAt tau_at)
{
    std::vector<double> raw;
    std::string stop;
    for (std::size_t n = 1; n <= 64; ++n) {
        double tn = 0.0;
        bool ok = true;
        for (std::size_t j = 0; j < r_axis.size() && ok; ++j) {
            const double edge = r_axis[j == 0 ? 0 : j - 1] + shift;
            if (edge == 0.0) continue;  // only r = 0, where the t = 0 bound already applies
            const double level = std::exp(-static_cast<double>(n)) * eps0(edge);
            try {
                tn = std::max(tn, tau_at(level, r_axis[j]));
            } catch (const table_gap_error& err) {
                ok = false;
                stop = err.what();
            }
        }
        if (!ok) break;
        raw.push_back(tn);
    }
    if (raw.empty()) throw table_gap_error("first decay level already needs extrapolation (" + stop + ")");
    Knots k;
    k.levels = raw.size();
    k.taus = {0.0};
    for (double t : raw)
        if (t > k.taus.back()) k.taus.push_back(t);
    if (k.taus.size() < 2) {
        k.taus.push_back(1.0);
        k.note = "all level times are 0; unit knot spacing used\n";
    }
    k.note += "levels n = 1.." + std::to_string(k.levels) + ", knots {";
    for (std::size_t i = 0; i < k.taus.size(); ++i) k.note += (i ? ", " : "") + detail::num(k.taus[i]);
    k.note += "}; past the last knot the last segment rate continues";
    if (!stop.empty()) k.note += " (deeper levels stop: " + stop + ")";
    k.note += "\n";
    return k;
}

inline ConstructionRecord record(std::string name, std::vector<Certificate> in, Certificate out, const std::ostringstream& tr)
{
    validate(out);
    return {std::move(name), std::move(in), std::move(out), tr.str()};
}

} // namespace detail

/// (sigma1, gamma1, c) of an H_BOUNDED or H_K_BOUNDED certificate.
[[nodiscard]] inline HBound hbound_of(const Certificate& c)
{
    detail::expect_property(c, {PropertyId::H_BOUNDED, PropertyId::H_K_BOUNDED}, "hbound");
    return {c.sigma, c.gamma, c.property == PropertyId::H_BOUNDED ? c.c : 0.0};
}

// ===================================================================
// bound decomposition and gain rescaling
// ===================================================================

/// sigma1 = gamma1 = mu(r, r) - mu(0, 0), c = mu(0, 0) for a rank-2 bound table
/// (diagonal taken at the union of both axes; mu(0,0) at the first cell).
[[nodiscard]] inline ConstructionRecord decompose_bound(const GridTable& mu)
{
    if (mu.rank() != 2) throw domain_error("decompose_bound: table must have rank 2");
    for (std::size_t k = 0; k < mu.cells(); ++k) {
        const auto idx = mu.unflat(k);
        const double v = mu.values[k];
        if (!std::isfinite(v)) throw domain_error("decompose_bound: bound table has an infinite entry");
        for (std::size_t a = 0; a < 2; ++a) {
            if (idx[a] == 0) continue;
            auto j = idx;
            --j[a];
            if (mu.values[mu.flat(j)] > v * (1.0 + 1e-12) + 1e-12)
                throw domain_error("decompose_bound: bound is not monotone along " + mu.names[a]);
        }
    }
    const double top = std::min(mu.axes[0].back(), mu.axes[1].back());
    std::vector<double> diag;
    for (const auto& ax : mu.axes)
        for (double x : ax)
            if (x <= top) diag.push_back(x);
    std::sort(diag.begin(), diag.end());
    diag.erase(std::unique(diag.begin(), diag.end()), diag.end());

    const double c = mu.values[0];
    std::vector<double> vals;
    for (double d : diag) vals.push_back(detail::cell(mu, {{d}, {d}}, "decompose_bound") - c);
    Certificate out;
    out.property = PropertyId::H_BOUNDED;
    out.sigma = detail::k_inf_table(diag, vals);
    out.gamma = out.sigma;
    out.c = c;
    std::ostringstream tr;
    tr << "sigma1(r) = gamma1(r) = mu(r,r) - mu(0,0) on the diagonal {";
    for (std::size_t i = 0; i < diag.size(); ++i) tr << (i ? ", " : "") << detail::num(diag[i]);
    tr << "}\nc = mu(0,0) = " << detail::num(c) << "\n";
    return detail::record("decompose_bound", {}, std::move(out), tr);
}

/// Same decomposition for the time slice at t of a BORS or OBORS table.
[[nodiscard]] inline ConstructionRecord decompose_bound(const Certificate& bors, double t)
{
    detail::expect_property(bors, {PropertyId::BORS, PropertyId::OBORS}, "decompose_bound");
    const GridTable& tb = *bors.table;
    const auto it = detail::grid_ceil(tb.axes[2], t);
    if (!it) throw table_gap_error("decompose_bound: t = " + detail::num(t) + " beyond the time axis");
    GridTable slice({tb.names[0], tb.names[1]}, {tb.axes[0], tb.axes[1]});
    for (std::size_t i = 0; i < tb.axes[0].size(); ++i)
        for (std::size_t j = 0; j < tb.axes[1].size(); ++j)
            slice.at({i, j}) = tb.values[tb.flat(std::vector<std::size_t>{i, j, *it})];
    auto rec = decompose_bound(slice);
    rec.inputs = {bors};
    rec.trace = "slice t = " + detail::num(tb.axes[2][*it]) + "\n" + rec.trace;
    return rec;
}

/// gamma(e r) with the shell times merged up to the first shell k* where
/// gamma(e^{-k+1} s) <= eps/2. shell_taus[k] belongs to the shell e^{-k} s.
[[nodiscard]] inline UniformGain uniformize_gain(const ScalarFn& gamma, double s, double eps, const std::vector<double>& shell_taus)
{
    if (shell_taus.empty()) throw domain_error("uniformize_gain: empty shell table");
    if (!(s >= 0.0) || !(eps > 0.0)) throw domain_error("uniformize_gain: need s >= 0 and eps > 0");
    std::size_t k = 0;
    while (gamma(std::exp(1.0 - static_cast<double>(k)) * s) > eps / 2.0) {
        if (++k > 4096) throw domain_error("uniformize_gain: gamma does not drop below eps/2");
    }
    if (k >= shell_taus.size())
        throw table_gap_error("uniformize_gain: k* = " + std::to_string(k) + " needs more shells than the " +
                              std::to_string(shell_taus.size()) + " given");
    UniformGain g;
    g.gamma = scale_arg(gamma, detail::e);
    g.k_star = k;
    g.tau = *std::max_element(shell_taus.begin(), shell_taus.begin() + static_cast<std::ptrdiff_t>(k) + 1);
    std::ostringstream tr;
    tr << "k* = " << k << " (smallest k with gamma(e^{-k+1} s) <= eps/2)\n"
       << "tau = max over shells 0.." << k << " = " << detail::num(g.tau) << "\ngamma~ = gamma(e r)\n";
    g.trace = tr.str();
    return g;
}

// ===================================================================
// certificate transformers
// ===================================================================

/// OULIM + bounded output map -> OGULIM: R = gamma^-1(sigma1(r) + c),
/// gamma~ = gamma + gamma1, tau~(eps, r) = tau(eps, r, R(r)).
[[nodiscard]] inline ConstructionRecord ogulim_from_oulim(const Certificate& oulim, const Certificate& hb)
{
    detail::expect_property(oulim, {PropertyId::OULIM}, "ogulim_from_oulim");
    const HBound h = hbound_of(hb);
    if (oulim.gamma.declared_class() != FnClass::k_inf)
        throw class_error("ogulim_from_oulim: gamma must be class K-infinity to invert");
    const GridTable& tb = *oulim.table;
    GridTable out_t({"eps", "r"}, {tb.axes[0], tb.axes[1]});
    std::ostringstream tr;
    tr << "R(r) = gamma^-1(sigma1(r) + c), c = " << detail::num(h.c) << "\n";
    for (std::size_t j = 0; j < tb.axes[1].size(); ++j) {
        const double r = tb.axes[1][j];
        const double R = invert(oulim.gamma, h.sigma1(r) + h.c);
        tr << "  r = " << detail::num(r) << ": R = " << detail::num(R) << "\n";
        for (std::size_t i = 0; i < tb.axes[0].size(); ++i) {
            const auto is = detail::grid_ceil(tb.axes[2], R);
            if (!is) throw table_gap_error("ogulim_from_oulim: s = " + detail::num(R) + " (R at r = " + detail::num(r) + ") beyond the s axis");
            out_t.at({i, j}) = tb.values[tb.flat(std::vector<std::size_t>{i, j, *is})];
        }
    }
    Certificate out;
    out.property = PropertyId::OGULIM;
    out.gamma = add(oulim.gamma, h.gamma1);
    out.table = std::move(out_t);
    tr << "gamma~ = gamma + gamma1 = " << describe(out.gamma) << "\ntau~(eps, r) = tau(eps, r, R(r))\n";
    return detail::record("ogulim_from_oulim", {oulim, hb}, std::move(out), tr);
}

/// Mean of the step function tau over [r, 2r] (cells taken at their ceil);
/// beyond the last cell the last value is held.
[[nodiscard]] inline double smoothed_tau(const std::vector<double>& r_axis, const std::vector<double>& tau, double r)
{
    if (r_axis.empty() || r_axis.size() != tau.size()) throw domain_error("smoothed_tau: mismatched table");
    auto at = [&](double x) {
        const auto i = detail::grid_ceil(r_axis, x);
        return i ? tau[*i] : tau.back();
    };
    if (r <= 0.0) return at(0.0);
    std::vector<double> cuts{r};
    for (double x : r_axis)
        if (x > r && x < 2.0 * r) cuts.push_back(x);
    cuts.push_back(2.0 * r);
    double acc = 0.0;
    for (std::size_t k = 1; k < cuts.size(); ++k) acc += (cuts[k] - cuts[k - 1]) * at(0.5 * (cuts[k] + cuts[k - 1]));
    return std::max(acc / r, at(r));
}

/// OUAG + BORS -> OUGB: sigma~(r) = mu(r, r, tau(r)) with tau at eps <= 1 and s = r,
/// sigma = sigma~ - sigma~(0), c = max{sigma~(0), 1}, gamma' = max{gamma, sigma}.
[[nodiscard]] inline ConstructionRecord ougb_from_ouag_bors(const Certificate& ouag, const Certificate& bors)
{
    detail::expect_property(ouag, {PropertyId::OUAG}, "ougb_from_ouag_bors");
    detail::expect_property(bors, {PropertyId::BORS}, "ougb_from_ouag_bors");
    const GridTable& tt = *ouag.table;
    const GridTable& mu = *bors.table;
    const double eps = detail::eps_at_most(tt.axes[0], 1.0, "ougb_from_ouag_bors");
    std::vector<double> radii{0.0};
    for (double r : mu.axes[0])
        if (r > 0.0) radii.push_back(r);
    std::vector<double> tau;
    for (double r : radii) tau.push_back(detail::cell(tt, {{eps, true}, {r}, {r}}, "ougb_from_ouag_bors tau"));
    for (std::size_t i = 1; i < tau.size(); ++i) tau[i] = std::max(tau[i], tau[i - 1]);

    std::ostringstream tr;
    tr << "tau(r) = tau(" << detail::num(eps) << ", r, r), smoothed by (1/r) int_r^2r tau\n";
    std::vector<double> sig;
    for (std::size_t i = 0; i < radii.size(); ++i) {
        const double r = radii[i];
        const double tb = smoothed_tau(radii, tau, r);
        const double v = detail::cell(mu, {{r}, {r}, {tb}}, "ougb_from_ouag_bors mu(r, r, tau(r)) at r = " + detail::num(r));
        sig.push_back(v);
        tr << "  r = " << detail::num(r) << ": tau = " << detail::num(tau[i]) << ", tau_bar = " << detail::num(tb) << ", sigma~ = " << detail::num(v) << "\n";
    }
    const double s0 = sig.front();
    std::vector<double> shifted_vals;
    for (double v : sig) shifted_vals.push_back(v - s0);
    Certificate out;
    out.property = PropertyId::OUGB;
    out.sigma = detail::k_inf_table(radii, shifted_vals);
    out.c = std::max(s0, 1.0);
    out.gamma = maximum(ouag.gamma, out.sigma);
    tr << "sigma = sigma~ - sigma~(0), c = max{" << detail::num(s0) << ", 1} = " << detail::num(out.c) << "\ngamma' = max{gamma, sigma}\n";
    return detail::record("ougb_from_ouag_bors", {ouag, bors}, std::move(out), tr);
}

/// OGUAG + OUGB -> OCAG: eps0 = sigma + id, eps_n = e^{-n} eps0, tau_0 = 0,
/// tau_n = tau(eps_n(r), r); beta from the piecewise-exponential builder, evaluated at |x| + c.
[[nodiscard]] inline ConstructionRecord ocag_from_oguag(const Certificate& oguag, const Certificate& ougb)
{
    detail::expect_property(oguag, {PropertyId::OGUAG}, "ocag_from_oguag");
    detail::expect_property(ougb, {PropertyId::OUGB}, "ocag_from_oguag");
    const GridTable& tt = *oguag.table;
    const ScalarFn eps0 = add(ougb.sigma, fn::identity());
    const auto k = detail::level_knots(tt.axes[1], eps0, ougb.c, [&](double level, double r) {
        return detail::cell(tt, {{level, true}, {r}}, "ocag_from_oguag tau");
    });
    std::ostringstream tr;
    tr << "eps0(r) = sigma(r) + r, eps_n = e^{-n} eps0, tau_n = max over r cells of tau(eps_n(r_lower + c), r)\n" << k.note;
    Certificate out;
    out.property = PropertyId::OCAG;
    out.beta = build_piecewise_kl({k.taus, eps0, detail::e});
    out.c = ougb.c;
    out.gamma = detail::merged_gain(oguag.gamma, ougb.gamma, tr);
    tr << "beta(r, tau_n) = e^{-(n-1)} eps0(r); bound beta(|x| + c, t) with c = " << detail::num(out.c) << "\n";
    return detail::record("ocag_from_oguag", {oguag, ougb}, std::move(out), tr);
}

/// OCAG -> IOpS: beta'(r, t) = beta(2r, t), c~ = beta(2c, 0).
[[nodiscard]] inline ConstructionRecord iops_from_ocag(const Certificate& ocag)
{
    detail::expect_property(ocag, {PropertyId::OCAG}, "iops_from_ocag");
    Certificate out;
    out.property = PropertyId::IOPS;
    out.beta = kl::inner(ocag.beta, fn::scale(2.0));
    out.gamma = ocag.gamma;
    out.c = ocag.beta(2.0 * ocag.c, 0.0);
    std::ostringstream tr;
    tr << "beta'(r, t) = beta(2r, t)\nc~ = beta(2c, 0) = " << detail::num(out.c) << "\n";
    return detail::record("iops_from_ocag", {ocag}, std::move(out), tr);
}

/// OUGB + OULS -> OUGS by the case split at the OULS radius rho:
/// sigma = max{sigma1, sigma2} + c min{s / rho, 1}, same for gamma.
[[nodiscard]] inline ConstructionRecord ougs_from_ougb_ouls(const Certificate& ougb, const Certificate& ouls)
{
    detail::expect_property(ougb, {PropertyId::OUGB}, "ougs_from_ougb_ouls");
    detail::expect_property(ouls, {PropertyId::OULS}, "ougs_from_ougb_ouls");
    if (is_epsilon_delta(ouls)) throw domain_error("ougs_from_ougb_ouls: needs the (sigma, gamma, r) form of OULS");
    Certificate out;
    out.property = PropertyId::OUGS;
    out.sigma = detail::case_split(ougb.sigma, ouls.sigma, ougb.c, ouls.radius);
    out.gamma = detail::case_split(ougb.gamma, ouls.gamma, ougb.c, ouls.radius);
    std::ostringstream tr;
    tr << "case split at r = " << detail::num(ouls.radius) << ": below, max{sigma1, sigma2}; above, sigma1 + c with c = " << detail::num(ougb.c)
       << "\nenvelope sigma = max{sigma1, sigma2} + c min{s / r, 1} (continuous, class K-infinity); same for gamma\n";
    return detail::record("ougs_from_ougb_ouls", {ougb, ouls}, std::move(out), tr);
}

/// OCAG + OUGS -> IOS: beta~(r, t) = min{(1 + e^{-t}) sigma(r), beta(r + c, t)}.
[[nodiscard]] inline ConstructionRecord ios_from_ocag_ougs(const Certificate& ocag, const Certificate& ougs)
{
    detail::expect_property(ocag, {PropertyId::OCAG}, "ios_from_ocag_ougs");
    detail::expect_property(ougs, {PropertyId::OUGS}, "ios_from_ocag_ougs");
    std::ostringstream tr;
    const KLFn growth = kl::sum(kl::separable(ougs.sigma, fn::constant(1.0)), kl::separable(ougs.sigma, fn::exp_decay(1.0)));
    Certificate out;
    out.property = PropertyId::IOS;
    out.beta = kl::minimum_sampled(growth, kl::inner(ocag.beta, detail::shifted(ocag.c)));
    out.gamma = detail::merged_gain(ocag.gamma, ougs.gamma, tr);
    tr << "beta~(r, t) = min{(1 + e^{-t}) sigma(r), beta(r + " << detail::num(ocag.c) << ", t)}\n";
    return detail::record("ios_from_ocag_ougs", {ocag, ougs}, std::move(out), tr);
}

/// OULIM + OL + K-bounded output map -> IOS:
/// eps0 = sigma o 2 sigma1 + sigma o 2 gamma1 + gamma, beta(r, t) = sigma(2 p(t) eps0(r)) with the
/// piecewise-exponential profile p over tau_n = tau(eps_n(r), r, r), gamma~ = sigma o 2(gamma + eps0) + gamma.
[[nodiscard]] inline ConstructionRecord ios_from_oulim_ol(const Certificate& oulim, const Certificate& ol, const Certificate& hb)
{
    detail::expect_property(oulim, {PropertyId::OULIM}, "ios_from_oulim_ol");
    detail::expect_property(ol, {PropertyId::OL}, "ios_from_oulim_ol");
    const HBound h = hbound_of(hb);
    if (h.c != 0.0) throw domain_error("ios_from_oulim_ol: output map bound must have c = 0 (K-bounded)");
    std::ostringstream tr;
    const ScalarFn gamma = detail::merged_gain(oulim.gamma, ol.gamma, tr);
    const ScalarFn& sigma = ol.sigma;
    const ScalarFn eps0 = detail::ensure_k_inf(
        add(add(compose(sigma, scale_val(h.sigma1, 2.0)), compose(sigma, scale_val(h.gamma1, 2.0))), gamma));
    const GridTable& tt = *oulim.table;
    const auto k = detail::level_knots(tt.axes[1], eps0, 0.0, [&](double level, double r) {
        return detail::cell(tt, {{level, true}, {r}, {r}}, "ios_from_oulim_ol tau");
    });
    tr << "eps0 = sigma o 2 sigma1 + sigma o 2 gamma1 + gamma = " << describe(eps0) << "\n" << k.note;
    const ScalarFn sigma2 = scale_arg(sigma, 2.0);
    Certificate out;
    out.property = PropertyId::IOS;
    out.beta = kl::outer(sigma2, build_piecewise_kl({k.taus, eps0, detail::e}));
    out.gamma = add(compose(sigma, scale_val(add(gamma, eps0), 2.0)), gamma);
    tr << "sigma~ = sigma(2 .), beta(r, t) = sigma~(p(t) eps0(r))\ngamma~ = sigma o 2(gamma + eps0) + gamma\n";
    return detail::record("ios_from_oulim_ol", {oulim, ol, hb}, std::move(out), tr);
}

/// OUAG + OCEP -> OULS in eps-delta form: delta~(eps) = min{delta(eps, T), 1, gamma^-1(eps/2)}
/// with T = tau(eps/2, 1, 1).
[[nodiscard]] inline ConstructionRecord ouls_from_ouag_ocep(const Certificate& ouag, const Certificate& ocep)
{
    detail::expect_property(ouag, {PropertyId::OUAG}, "ouls_from_ouag_ocep");
    detail::expect_property(ocep, {PropertyId::OCEP}, "ouls_from_ouag_ocep");
    const GridTable& tt = *ouag.table;
    const GridTable& dt = *ocep.table;
    std::ostringstream tr;
    tr << "T = tau(eps/2, 1, 1), delta~ = min{delta(eps, T), 1, gamma^-1(eps/2)}\n";
    std::vector<double> eps_kept, delta_kept;
    std::string gap;
    for (std::size_t i = 0; i < dt.axes[0].size(); ++i) {
        const double eps = dt.axes[0][i];
        try {
            const double T = detail::cell(tt, {{eps / 2.0, true}, {1.0}, {1.0}}, "ouls_from_ouag_ocep tau");
            const auto it = detail::grid_ceil(dt.axes[1], T);
            if (!it) throw table_gap_error("ouls_from_ouag_ocep: tau = " + detail::num(T) + " beyond the delta table");
            const double d = dt.values[dt.flat(std::vector<std::size_t>{i, *it})];
            const double ginv = ouag.gamma.is_zero() ? inf : invert(ouag.gamma, eps / 2.0);
            const double dd = std::min({d, 1.0, ginv});
            tr << "  eps = " << detail::num(eps) << ": T = " << detail::num(T) << ", delta = " << detail::num(d) << ", gamma^-1 = " << detail::num(ginv)
               << " -> " << detail::num(dd) << "\n";
            if (dd > 0.0) {
                eps_kept.push_back(eps);
                delta_kept.push_back(dd);
            }
        } catch (const table_gap_error& err) {
            gap = err.what();
            tr << "  eps = " << detail::num(eps) << ": skipped (" << gap << ")\n";
        }
    }
    if (eps_kept.empty()) throw table_gap_error("ouls_from_ouag_ocep: no eps value is evaluable (" + gap + ")");
    GridTable out_t({"eps"}, {eps_kept});
    out_t.values = delta_kept;
    out_t.rectify(std::vector<int>{1}, false);
    Certificate out;
    out.property = PropertyId::OULS;
    out.table = std::move(out_t);
    return detail::record("ouls_from_ouag_ocep", {ouag, ocep}, std::move(out), tr);
}

/// OOULIM + local OL + OBORS -> OL. R(r) = mu(r, r, 1), gamma~ = max{id, 2 gamma},
/// sigma~(r) = mu(R(r), gamma~^-1(r), tau(r)) with tau at eps <= 1, OOUGB sigma = sigma~ - sigma~(0),
/// then the case-split merge with the local OL certificate.
[[nodiscard]] inline ConstructionRecord ol_from_ooulim_localol_obors(const Certificate& ooulim, const Certificate& local,
                                                                     const Certificate& obors)
{
    detail::expect_property(ooulim, {PropertyId::OOULIM}, "ol_from_ooulim_localol_obors");
    detail::expect_property(local, {PropertyId::LOCAL_OL}, "ol_from_ooulim_localol_obors");
    detail::expect_property(obors, {PropertyId::OBORS}, "ol_from_ooulim_localol_obors");
    std::ostringstream tr;
    const GridTable& tt = *ooulim.table;
    const GridTable& mu = *obors.table;
    const ScalarFn gamma = detail::merged_gain(ooulim.gamma, local.gamma, tr);
    const ScalarFn gt = maximum(fn::identity(), scale_val(gamma, 2.0));
    if (gt.declared_class() != FnClass::k_inf) throw class_error("ol_from_ooulim_localol_obors: gamma~ is not invertible");
    const double eps = detail::eps_at_most(tt.axes[0], 1.0, "ol_from_ooulim_localol_obors");
    tr << "R(r) = mu(r, r, 1), gamma~ = max{r, 2 gamma(r)}, tau(r) = tau(" << detail::num(eps) << ", r)\n";

    std::vector<double> radii{0.0};
    for (double r : tt.axes[1])
        if (r > 0.0) radii.push_back(r);
    std::vector<double> sig;
    for (double r : radii) {
        const std::string at = "ol_from_ooulim_localol_obors at r = " + detail::num(r);
        const double R = detail::cell(mu, {{r}, {r}, {1.0}}, at + " R");
        const double tau = detail::cell(tt, {{eps, true}, {r}}, at + " tau");
        const double v = detail::cell(mu, {{R}, {invert(gt, r)}, {tau}}, at + " sigma~");
        sig.push_back(v);
        tr << "  r = " << detail::num(r) << ": R = " << detail::num(R) << ", tau = " << detail::num(tau) << ", sigma~ = " << detail::num(v) << "\n";
    }
    const double s0 = sig.front();
    for (double& v : sig) v -= s0;
    const ScalarFn sigma_o = detail::k_inf_table(radii, sig);
    const double c = std::max(s0, eps);
    const ScalarFn gamma_o = maximum(gt, sigma_o);
    tr << "OOUGB: sigma = sigma~ - sigma~(0), c = max{sigma~(0), eps} = " << detail::num(c) << ", gamma = max{gamma~, sigma}\n";

    Certificate out;
    out.property = PropertyId::OL;
    out.sigma = detail::case_split(sigma_o, local.sigma, c, local.radius);
    out.gamma = detail::case_split(gamma_o, local.gamma, c, local.radius);
    tr << "merge with local OL (r = " << detail::num(local.radius) << "): max{., .} + c min{s / r, 1}\n";
    return detail::record("ol_from_ooulim_localol_obors", {ooulim, local, obors}, std::move(out), tr);
}

/// ISS + K-bounded output map -> IOS: beta~ = sigma1 o (2 beta), gamma~ = sigma1 o (2 gamma) + gamma1.
[[nodiscard]] inline ConstructionRecord ios_from_iss_kbounded(const Certificate& iss, const Certificate& hb)
{
    detail::expect_property(iss, {PropertyId::ISS}, "ios_from_iss_kbounded");
    const HBound h = hbound_of(hb);
    if (h.c != 0.0) throw domain_error("ios_from_iss_kbounded: output map bound must have c = 0 (K-bounded)");
    if (!is_k_family(h.sigma1.declared_class())) throw class_error("ios_from_iss_kbounded: sigma1 must be class K");
    Certificate out;
    out.property = PropertyId::IOS;
    out.beta = kl::outer(scale_arg(h.sigma1, 2.0), iss.beta);
    out.gamma = add(compose(h.sigma1, scale_val(iss.gamma, 2.0)), h.gamma1);
    std::ostringstream tr;
    tr << "beta~ = sigma1 o (2 beta)\ngamma~ = sigma1 o (2 gamma) + gamma1 = " << describe(out.gamma) << "\n";
    return detail::record("ios_from_iss_kbounded", {iss, hb}, std::move(out), tr);
}

/// IOS + IOSS -> ISS with shared beta:
/// sigma = beta(., 0) + gamma2(2 beta(., 0)), gamma^ = gamma1 + gamma2 o (2 gamma),
/// beta~(s, t) = beta(2 sigma(s), t/2) + gamma2 o (2 beta(s, t/2)),
/// gamma~ = beta(2 gamma^, 0) + gamma1 + gamma2 o (2 gamma).
[[nodiscard]] inline ConstructionRecord iss_from_ios_ioss(const Certificate& ios, const Certificate& ioss)
{
    detail::expect_property(ios, {PropertyId::IOS}, "iss_from_ios_ioss");
    detail::expect_property(ioss, {PropertyId::IOSS}, "iss_from_ios_ioss");
    std::ostringstream tr;
    KLFn beta = ios.beta;
    if (!detail::same(ios.beta, ioss.beta)) {
        beta = kl::maximum(ios.beta, ioss.beta);
        tr << "beta merged by pointwise max of the two certificates\n";
    }
    const ScalarFn& g = ios.gamma;
    const ScalarFn& g1 = ioss.gamma;
    const ScalarFn& g2 = ioss.gamma2;
    const ScalarFn b0 = kl_slice(beta, 0.0);
    const ScalarFn sigma = add(b0, compose(g2, scale_val(b0, 2.0)));
    const ScalarFn ghat = add(g1, compose(g2, scale_val(g, 2.0)));
    KLFn bt = kl::inner(beta, scale_val(sigma, 2.0), 0.5);
    if (!g2.is_zero()) bt = kl::sum(bt, kl::outer(scale_arg(g2, 2.0), kl::inner(beta, fn::identity(), 0.5)));
    Certificate out;
    out.property = PropertyId::ISS;
    out.beta = bt;
    out.gamma = add(add(compose(b0, scale_val(ghat, 2.0)), g1), compose(g2, scale_val(g, 2.0)));
    tr << "sigma = beta(., 0) + gamma2(2 beta(., 0)) = " << describe(sigma) << "\ngamma^ = gamma1 + gamma2 o (2 gamma) = "
       << describe(ghat) << "\nbeta~(s, t) = beta(2 sigma(s), t/2) + gamma2 o (2 beta(s, t/2))\n"
       << "gamma~ = beta(2 gamma^, 0) + gamma1 + gamma2 o (2 gamma)\n";
    return detail::record("iss_from_ios_ioss", {ios, ioss}, std::move(out), tr);
}

// ===================================================================
// dispatch by name
// ===================================================================

/// Names accepted by construct(), with their input arity.
[[nodiscard]] inline const std::vector<std::pair<std::string, std::size_t>>& construction_names()
{
    static const std::vector<std::pair<std::string, std::size_t>> names{
        {"ogulim_from_oulim", 2},           {"ougb_from_ouag_bors", 2}, {"ocag_from_oguag", 2},
        {"iops_from_ocag", 1},              {"ougs_from_ougb_ouls", 2}, {"ios_from_ocag_ougs", 2},
        {"ios_from_oulim_ol", 3},           {"ouls_from_ouag_ocep", 2}, {"ol_from_ooulim_localol_obors", 3},
        {"ios_from_iss_kbounded", 2},       {"iss_from_ios_ioss", 2},
    };
    return names;
}

/// Runs the named certificate transformer on its inputs, in the documented order.
[[nodiscard]] inline ConstructionRecord construct(const std::string& name, const std::vector<Certificate>& in)
{
    const auto& names = construction_names();
    const auto it = std::find_if(names.begin(), names.end(), [&](const auto& p) { return p.first == name; });
    if (it == names.end()) throw lookup_error("unknown construction '" + name + "'");
    if (in.size() != it->second)
        throw domain_error(name + " takes " + std::to_string(it->second) + " certificates, got " + std::to_string(in.size()));
    if (name == "ogulim_from_oulim") return ogulim_from_oulim(in[0], in[1]);
    if (name == "ougb_from_ouag_bors") return ougb_from_ouag_bors(in[0], in[1]);
    if (name == "ocag_from_oguag") return ocag_from_oguag(in[0], in[1]);
    if (name == "iops_from_ocag") return iops_from_ocag(in[0]);
    if (name == "ougs_from_ougb_ouls") return ougs_from_ougb_ouls(in[0], in[1]);
    if (name == "ios_from_ocag_ougs") return ios_from_ocag_ougs(in[0], in[1]);
    if (name == "ios_from_oulim_ol") return ios_from_oulim_ol(in[0], in[1], in[2]);
    if (name == "ouls_from_ouag_ocep") return ouls_from_ouag_ocep(in[0], in[1]);
    if (name == "ol_from_ooulim_localol_obors") return ol_from_ooulim_localol_obors(in[0], in[1], in[2]);
    if (name == "ios_from_iss_kbounded") return ios_from_iss_kbounded(in[0], in[1]);
    return iss_from_ios_ioss(in[0], in[1]);
}

} // namespace ioslab
