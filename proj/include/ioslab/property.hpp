#pragma once

// Property identifiers, tabulated certificate parameters, certificates and verdicts.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ioslab/cmpfun.hpp"
#include "ioslab/errors.hpp"
#include "ioslab/signal.hpp"

namespace ioslab {

inline constexpr int schema_version = 1;
inline constexpr double inf = std::numeric_limits<double>::infinity();

// ===================================================================
// property identifiers
// ===================================================================

enum class PropertyId {
    FC, OCEP, BORS, OBORS, H_BOUNDED, H_K_BOUNDED, IOS, ISS, IOPS, OL, LOCAL_OL, OULS,
    OUGS, OUGB, OOUGB, OAG, OUAG, OGUAG, OCAG, OLIM, OULIM, OGULIM, OOULIM, IOSS
};

inline constexpr std::array<PropertyId, 24> all_properties{
    PropertyId::FC, PropertyId::OCEP, PropertyId::BORS, PropertyId::OBORS, PropertyId::H_BOUNDED,
    PropertyId::H_K_BOUNDED, PropertyId::IOS, PropertyId::ISS, PropertyId::IOPS, PropertyId::OL,
    PropertyId::LOCAL_OL, PropertyId::OULS, PropertyId::OUGS, PropertyId::OUGB, PropertyId::OOUGB,
    PropertyId::OAG, PropertyId::OUAG, PropertyId::OGUAG, PropertyId::OCAG, PropertyId::OLIM,
    PropertyId::OULIM, PropertyId::OGULIM, PropertyId::OOULIM, PropertyId::IOSS};

inline const char* to_string(PropertyId p)
{
    switch (p) {
    case PropertyId::FC: return "FC";
    case PropertyId::OCEP: return "OCEP";
    case PropertyId::BORS: return "BORS";
    case PropertyId::OBORS: return "OBORS";
    case PropertyId::H_BOUNDED: return "H_BOUNDED";
    case PropertyId::H_K_BOUNDED: return "H_K_BOUNDED";
    case PropertyId::IOS: return "IOS";
    case PropertyId::ISS: return "ISS";
    case PropertyId::IOPS: return "IOPS";
    case PropertyId::OL: return "OL";
    case PropertyId::LOCAL_OL: return "LOCAL_OL";
    case PropertyId::OULS: return "OULS";
    case PropertyId::OUGS: return "OUGS";
    case PropertyId::OUGB: return "OUGB";
    case PropertyId::OOUGB: return "OOUGB";
    case PropertyId::OAG: return "OAG";
    case PropertyId::OUAG: return "OUAG";
    case PropertyId::OGUAG: return "OGUAG";
    case PropertyId::OCAG: return "OCAG";
    case PropertyId::OLIM: return "OLIM";
    case PropertyId::OULIM: return "OULIM";
    case PropertyId::OGULIM: return "OGULIM";
    case PropertyId::OOULIM: return "OOULIM";
    case PropertyId::IOSS: return "IOSS";
    }
    return "?";
}

/// Case-insensitive; also accepts "IOpS" and "local-OL" style spellings.
inline PropertyId property_from_string(std::string s)
{
    for (char& c : s) c = c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (PropertyId p : all_properties)
        if (s == to_string(p)) return p;
    throw lookup_error("unknown property '" + s + "'");
}

/// Properties whose bound involves the state norm instead of the output norm.
inline bool is_state_property(PropertyId p) { return p == PropertyId::ISS || p == PropertyId::IOSS; }

// ===================================================================
// tabulated parameters
// ===================================================================

/// Values on a rectilinear grid, row-major with the last axis fastest.
/// +inf is allowed and means "no finite value is claimed".
struct GridTable {
    std::vector<std::string> names;
    std::vector<std::vector<double>> axes;
    std::vector<double> values;

    GridTable() = default;

    GridTable(std::vector<std::string> axis_names, std::vector<std::vector<double>> axis_values, double fill = 0.0)
        : names(std::move(axis_names)), axes(std::move(axis_values))
    {
        if (names.size() != axes.size() || axes.empty()) throw domain_error("table needs one name per axis");
        std::size_t n = 1;
        for (const auto& a : axes) {
            if (a.empty()) throw domain_error("table axes must be nonempty");
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (!std::isfinite(a[i])) throw domain_error("table axis values must be finite");
                if (i > 0 && !(a[i] > a[i - 1])) throw domain_error("table axes must be strictly increasing");
            }
            n *= a.size();
        }
        values.assign(n, fill);
    }

    [[nodiscard]] std::size_t rank() const { return axes.size(); }
    [[nodiscard]] std::size_t cells() const { return values.size(); }

    [[nodiscard]] std::size_t flat(std::span<const std::size_t> idx) const
    {
        std::size_t k = 0;
        for (std::size_t a = 0; a < axes.size(); ++a) k = k * axes[a].size() + idx[a];
        return k;
    }

    [[nodiscard]] std::vector<std::size_t> unflat(std::size_t k) const
    {
        std::vector<std::size_t> idx(axes.size());
        for (std::size_t a = axes.size(); a-- > 0;) {
            idx[a] = k % axes[a].size();
            k /= axes[a].size();
        }
        return idx;
    }

    [[nodiscard]] double& at(std::initializer_list<std::size_t> idx) { return values[flat(std::vector<std::size_t>(idx))]; }
    [[nodiscard]] double at(std::initializer_list<std::size_t> idx) const { return values[flat(std::vector<std::size_t>(idx))]; }

    /// Multilinear interpolation; points outside the grid are rejected.
    [[nodiscard]] double interpolate(std::span<const double> p) const
    {
        if (p.size() != axes.size()) throw domain_error("table lookup has wrong rank");
        std::vector<std::size_t> lo(axes.size());
        std::vector<double> w(axes.size());
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const auto& ax = axes[a];
            if (!(p[a] >= ax.front() - 1e-12 * std::abs(ax.front())) || !(p[a] <= ax.back() + 1e-12 * std::abs(ax.back())))
                throw table_gap_error("lookup " + names[a] + " = " + std::to_string(p[a]) + " outside [" +
                                      std::to_string(ax.front()) + ", " + std::to_string(ax.back()) + "]");
            if (ax.size() == 1) {
                lo[a] = 0;
                w[a] = 0.0;
                continue;
            }
            const double x = std::clamp(p[a], ax.front(), ax.back());
            std::size_t i = static_cast<std::size_t>(std::upper_bound(ax.begin(), ax.end(), x) - ax.begin());
            i = std::clamp<std::size_t>(i, 1, ax.size() - 1) - 1;
            lo[a] = i;
            w[a] = (x - ax[i]) / (ax[i + 1] - ax[i]);
        }
        double acc = 0.0;
        const std::size_t corners = std::size_t{1} << axes.size();
        std::vector<std::size_t> idx(axes.size());
        for (std::size_t m = 0; m < corners; ++m) {
            double weight = 1.0;
            for (std::size_t a = 0; a < axes.size(); ++a) {
                const bool up = (m >> a) & 1U;
                if (up && axes[a].size() == 1) {
                    weight = 0.0;
                    break;
                }
                idx[a] = lo[a] + (up ? 1 : 0);
                weight *= up ? w[a] : 1.0 - w[a];
            }
            if (weight == 0.0) continue;
            const double v = values[flat(idx)];
            if (std::isinf(v)) return inf;
            acc += weight * v;
        }
        return acc;
    }

    /// Value at the smallest grid point dominating p on every axis (points below
    /// the first grid value use the first one). Sound for nondecreasing tables.
    [[nodiscard]] double ceil_lookup(std::span<const double> p) const
    {
        if (p.size() != axes.size()) throw domain_error("table lookup has wrong rank");
        std::vector<std::size_t> idx(axes.size());
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const auto& ax = axes[a];
            const double tol = 1e-12 * std::max(1.0, std::abs(p[a]));
            const auto it = std::lower_bound(ax.begin(), ax.end(), p[a] - tol);
            if (it == ax.end())
                throw table_gap_error("lookup " + names[a] + " = " + std::to_string(p[a]) + " beyond last grid value " +
                                      std::to_string(ax.back()));
            idx[a] = static_cast<std::size_t>(it - ax.begin());
        }
        return values[flat(idx)];
    }

    /// Enforces monotonicity per axis: dir +1 nondecreasing, -1 nonincreasing, 0 untouched.
    /// raise = true only increases entries (upper-bound tables such as tau or mu);
    /// raise = false only decreases them (delta tables).
    void rectify(std::span<const int> dirs, bool raise)
    {
        if (dirs.size() != axes.size()) throw domain_error("rectify needs one direction per axis");
        for (std::size_t a = 0; a < axes.size(); ++a) {
            if (dirs[a] == 0) continue;
            const bool forward = (dirs[a] > 0) == raise;  // prefix pass when true
            const std::size_t n = axes[a].size();
            for (std::size_t k = 0; k < values.size(); ++k) {
                auto idx = unflat(k);
                if (idx[a] != 0) continue;
                std::vector<std::size_t> j = idx;
                auto step = [&](std::size_t from, std::size_t to) {
                    j[a] = from;
                    const double prev = values[flat(j)];
                    j[a] = to;
                    double& cur = values[flat(j)];
                    cur = raise ? std::max(cur, prev) : std::min(cur, prev);
                };
                if (forward)
                    for (std::size_t i = 1; i < n; ++i) step(i - 1, i);
                else
                    for (std::size_t i = n - 1; i-- > 0;) step(i + 1, i);
            }
        }
    }

    [[nodiscard]] double max_finite() const
    {
        double m = -inf;
        for (double v : values)
            if (std::isfinite(v)) m = std::max(m, v);
        return m;
    }

    bool operator==(const GridTable&) const = default;
};

inline json to_json(const GridTable& t)
{
    json axes = json::array();
    for (std::size_t a = 0; a < t.axes.size(); ++a) axes.push_back({{"name", t.names[a]}, {"values", t.axes[a]}});
    json vals = json::array();
    for (double v : t.values) vals.push_back(std::isinf(v) ? json(nullptr) : json(v));
    return {{"axes", axes}, {"values", vals}};
}

inline GridTable grid_table_from_json(const json& j)
{
    std::vector<std::string> names;
    std::vector<std::vector<double>> axes;
    for (const auto& a : j.at("axes")) {
        names.push_back(a.at("name").get<std::string>());
        axes.push_back(a.at("values").get<std::vector<double>>());
    }
    GridTable t(std::move(names), std::move(axes));
    const auto& vals = j.at("values");
    if (vals.size() != t.cells()) throw domain_error("table value count does not match its axes");
    for (std::size_t k = 0; k < t.cells(); ++k) t.values[k] = vals[k].is_null() ? inf : vals[k].get<double>();
    return t;
}

// ===================================================================
// signals
// ===================================================================

inline json to_json(const InputSignal& u)
{
    return {{"dim", u.dim()}, {"breakpoints", u.breakpoints()}, {"values", u.values()}};
}

inline InputSignal signal_from_json(const json& j)
{
    return InputSignal(j.at("dim").get<std::size_t>(), j.at("breakpoints").get<std::vector<double>>(),
                       j.at("values").get<std::vector<Vec>>());
}

// ===================================================================
// certificates
// ===================================================================

/// Parameter bundle claimed to witness one property. Which fields are used
/// depends on the property (see required_fields).
struct Certificate {
    PropertyId property = PropertyId::IOS;
    KLFn beta;
    ScalarFn sigma;
    ScalarFn gamma;
    ScalarFn gamma2;                 // IOSS output gain
    double c = 0.0;
    double radius = 0.0;             // local properties
    std::optional<GridTable> table;  // tau, delta or mu
    std::string note;
};

/// Field letters: b beta, s sigma, g gamma, h gamma2, c offset, r radius,
/// T table (axes listed after the colon).
struct FieldSpec {
    const char* fields;
    std::vector<const char*> table_axes;
};

inline FieldSpec required_fields(PropertyId p)
{
    switch (p) {
    case PropertyId::FC: return {"", {}};
    case PropertyId::OCEP: return {"T", {"eps", "tau"}};
    case PropertyId::BORS: return {"T", {"r", "s", "t"}};
    case PropertyId::OBORS: return {"T", {"r", "s", "t"}};
    case PropertyId::H_BOUNDED: return {"sgc", {}};
    case PropertyId::H_K_BOUNDED: return {"sg", {}};
    case PropertyId::IOS: return {"bg", {}};
    case PropertyId::ISS: return {"bg", {}};
    case PropertyId::IOPS: return {"bgc", {}};
    case PropertyId::OCAG: return {"bgc", {}};
    case PropertyId::OL: return {"sg", {}};
    case PropertyId::LOCAL_OL: return {"sgr", {}};
    case PropertyId::OULS: return {"sgr", {}};
    case PropertyId::OUGS: return {"sg", {}};
    case PropertyId::OUGB: return {"sgc", {}};
    case PropertyId::OOUGB: return {"sgc", {}};
    case PropertyId::OAG: return {"g", {}};
    case PropertyId::OLIM: return {"g", {}};
    case PropertyId::OUAG: return {"gT", {"eps", "r", "s"}};
    case PropertyId::OULIM: return {"gT", {"eps", "r", "s"}};
    case PropertyId::OGUAG: return {"gT", {"eps", "r"}};
    case PropertyId::OGULIM: return {"gT", {"eps", "r"}};
    case PropertyId::OOULIM: return {"gT", {"eps", "r"}};
    case PropertyId::IOSS: return {"bgh", {}};
    }
    return {"", {}};
}

/// OULS in epsilon-delta form: a delta table over eps replaces (sigma, gamma, r).
inline bool is_epsilon_delta(const Certificate& c)
{
    return c.property == PropertyId::OULS && c.table && c.table->rank() == 1 && c.table->names[0] == "eps";
}

namespace detail {

inline bool gain_class_ok(const ScalarFn& f, bool need_unbounded)
{
    const FnClass c = f.declared_class();
    return c == FnClass::zero || c == FnClass::k_inf || (!need_unbounded && c == FnClass::k);
}

} // namespace detail

/// Rejects certificates whose parameters are missing or of the wrong class.
inline void validate(const Certificate& cert)
{
    const std::string name = to_string(cert.property);
    if (is_epsilon_delta(cert)) {
        for (double v : cert.table->values)
            if (!(v > 0.0)) throw class_error(name + ": delta table entries must be positive");
        return;
    }
    const FieldSpec spec = required_fields(cert.property);
    const std::string f = spec.fields;
    const bool k_only = cert.property == PropertyId::H_BOUNDED || cert.property == PropertyId::H_K_BOUNDED;
    if (f.find('b') != std::string::npos && !(cert.beta.valid() && cert.beta.declared_kl()))
        throw class_error(name + ": beta must be class KL");
    if (f.find('s') != std::string::npos && !detail::gain_class_ok(cert.sigma, !k_only))
        throw class_error(name + ": sigma must be class " + (k_only ? "K" : "K-infinity"));
    if (f.find('g') != std::string::npos && !detail::gain_class_ok(cert.gamma, !k_only))
        throw class_error(name + ": gamma must be class " + (k_only ? "K" : "K-infinity"));
    if (f.find('h') != std::string::npos && !detail::gain_class_ok(cert.gamma2, true))
        throw class_error(name + ": gamma2 must be class K-infinity");
    if (f.find('c') != std::string::npos && !(cert.c >= 0.0 && std::isfinite(cert.c)))
        throw class_error(name + ": offset c must be finite and nonnegative");
    if (f.find('r') != std::string::npos && !(cert.radius > 0.0 && std::isfinite(cert.radius)))
        throw class_error(name + ": radius must be positive");
    if (f.find('T') != std::string::npos) {
        if (!cert.table) throw class_error(name + ": table missing");
        if (cert.table->rank() != spec.table_axes.size()) throw class_error(name + ": table has wrong rank");
        for (std::size_t a = 0; a < spec.table_axes.size(); ++a)
            if (cert.table->names[a] != spec.table_axes[a])
                throw class_error(name + ": table axis " + std::to_string(a) + " must be '" + spec.table_axes[a] + "'");
        for (double v : cert.table->values)
            if (std::isnan(v) || v < 0.0) throw class_error(name + ": table entries must be nonnegative");
    }
}

inline json to_json(const Certificate& c)
{
    json j{{"schema", schema_version}, {"property", to_string(c.property)}};
    if (c.beta.valid()) j["beta"] = to_json(c.beta);
    const std::string f = required_fields(c.property).fields;
    if (f.find('s') != std::string::npos) j["sigma"] = to_json(c.sigma);
    if (f.find('g') != std::string::npos) j["gamma"] = to_json(c.gamma);
    if (f.find('h') != std::string::npos) j["gamma2"] = to_json(c.gamma2);
    if (f.find('c') != std::string::npos) j["c"] = c.c;
    if (f.find('r') != std::string::npos) j["radius"] = c.radius;
    if (c.table) j["table"] = to_json(*c.table);
    if (!c.note.empty()) j["note"] = c.note;
    return j;
}

inline Certificate certificate_from_json(const json& j)
{
    if (j.contains("schema") && j.at("schema").get<int>() != schema_version)
        throw domain_error("unsupported certificate schema");
    Certificate c;
    c.property = property_from_string(j.at("property").get<std::string>());
    if (j.contains("beta")) c.beta = kl_from_json(j.at("beta"));
    if (j.contains("sigma")) c.sigma = scalar_from_json(j.at("sigma"));
    if (j.contains("gamma")) c.gamma = scalar_from_json(j.at("gamma"));
    if (j.contains("gamma2")) c.gamma2 = scalar_from_json(j.at("gamma2"));
    if (j.contains("c")) c.c = j.at("c").get<double>();
    if (j.contains("radius")) c.radius = j.at("radius").get<double>();
    if (j.contains("table")) c.table = grid_table_from_json(j.at("table"));
    if (j.contains("note")) c.note = j.at("note").get<std::string>();
    validate(c);
    return c;
}

// ===================================================================
// verdicts
// ===================================================================

enum class Status { certified, falsified, inconclusive };

inline const char* to_string(Status s)
{
    switch (s) {
    case Status::certified: return "certified";
    case Status::falsified: return "falsified";
    case Status::inconclusive: return "inconclusive";
    }
    return "?";
}

/// A concrete (x0, u, t) at which a claimed bound fails.
struct Witness {
    Vec x0;
    InputSignal u;
    double t = 0.0;
    double observed = 0.0;   // norm of y (or x for state properties)
    double bound = 0.0;      // value the certificate or recipe requires
    double margin = 0.0;     // observed - bound
    std::string measure = "output";
    std::size_t probe = 0;
};

struct Verdict {
    PropertyId property = PropertyId::IOS;
    Status status = Status::inconclusive;
    std::size_t samples = 0;
    double slack = inf;      // minimum slack over checked samples
    std::optional<Witness> witness;
    std::string reason;
    std::string plan_hash;
    std::size_t fc_failures = 0;
    std::vector<std::string> notes;

    [[nodiscard]] bool certified() const { return status == Status::certified; }
    [[nodiscard]] bool falsified() const { return status == Status::falsified; }
};

inline json to_json(const Witness& w)
{
    return {{"x0", w.x0}, {"u", to_json(w.u)}, {"t", w.t}, {"observed", w.observed},
            {"bound", w.bound}, {"margin", w.margin}, {"measure", w.measure}, {"probe", w.probe}};
}

inline Witness witness_from_json(const json& j)
{
    Witness w;
    w.x0 = j.at("x0").get<Vec>();
    w.u = signal_from_json(j.at("u"));
    w.t = j.at("t").get<double>();
    w.observed = j.value("observed", 0.0);
    w.bound = j.value("bound", 0.0);
    w.margin = j.value("margin", 0.0);
    w.measure = j.value("measure", std::string("output"));
    w.probe = j.value("probe", std::size_t{0});
    return w;
}

inline json to_json(const Verdict& v)
{
    json j{{"schema", schema_version},
           {"property", to_string(v.property)},
           {"status", to_string(v.status)},
           {"samples", v.samples},
           {"slack", std::isfinite(v.slack) ? json(v.slack) : json(nullptr)},
           {"plan_hash", v.plan_hash},
           {"fc_failures", v.fc_failures}};
    if (v.witness) j["witness"] = to_json(*v.witness);
    if (!v.reason.empty()) j["reason"] = v.reason;
    if (!v.notes.empty()) j["notes"] = v.notes;
    return j;
}

} // namespace ioslab
