#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ioslab/plans.hpp"
#include "ioslab/props.hpp"
#include "ioslab/zoo.hpp"

namespace ioslab {

// ===================================================================
// implication graph
// ===================================================================

/// Conjunction of properties, kept sorted.
using PropertySet = std::vector<PropertyId>;

/// from => to; `equivalence` marks edges generated from a declared equivalence.
struct Edge {
    PropertySet from;
    PropertySet to;
    std::string anchor;
    bool equivalence = false;
};

/// premises do not imply any of the conclusions; the zoo system is the counterexample.
struct NonEdge {
    PropertySet premises;
    PropertySet conclusions;
    std::string zoo_id;
    std::string anchor;
};

struct ImplicationGraph {
    std::vector<Edge> edges;
    std::vector<NonEdge> non_edges;
    std::vector<std::vector<PropertySet>> equivalences;
};

inline std::string to_string(const PropertySet& s)
{
    std::string out;
    for (PropertyId p : s) out += (out.empty() ? "" : "&") + std::string(to_string(p));
    return out;
}

inline std::string to_string(const Edge& e) { return to_string(e.from) + " => " + to_string(e.to); }

namespace detail {

inline PropertySet conj(std::initializer_list<PropertyId> ps)
{
    PropertySet s(ps);
    std::sort(s.begin(), s.end());
    return s;
}

} // namespace detail

/// The implication diagram between the stability notions, with its known non-edges.
[[nodiscard]] inline const ImplicationGraph& implication_graph()
{
    static const ImplicationGraph g = [] {
        using P = PropertyId;
        using detail::conj;
        ImplicationGraph g;
        auto imp = [&](PropertySet a, PropertySet b, const char* anchor) { g.edges.push_back({a, b, anchor, false}); };
        auto eqv = [&](std::vector<PropertySet> cls, const char* anchor) {
            g.equivalences.push_back(cls);
            for (const auto& a : cls)
                for (const auto& b : cls)
                    if (a != b) g.edges.push_back({a, b, anchor, true});
        };
        eqv({conj({P::IOS}), conj({P::OUAG, P::OCEP, P::BORS})}, "IOS superposition");
        imp(conj({P::IOS}), conj({P::OUGS}), "IOS gives uniform global stability");
        imp(conj({P::OUGS}), conj({P::OUGB}), "stability gives boundedness");
        imp(conj({P::OUGB}), conj({P::BORS}), "boundedness gives bounded reachability");
        imp(conj({P::BORS}), conj({P::H_BOUNDED}), "bounded reachability at t = 0");
        imp(conj({P::OUGS}), conj({P::OULS}), "global gives local stability");
        imp(conj({P::OULS}), conj({P::OCEP}), "local stability gives continuity at equilibrium");
        imp(conj({P::IOS}), conj({P::OCAG}), "IOS gives the offset asymptotic gain");
        imp(conj({P::OCAG}), conj({P::OGUAG}), "offset gain gives uniform attraction");
        imp(conj({P::OGUAG}), conj({P::OUAG}), "uniformity in the input drops");
        imp(conj({P::OGUAG}), conj({P::OGULIM}), "attraction gives the limit property");
        imp(conj({P::OUAG}), conj({P::OULIM}), "attraction gives the limit property");
        imp(conj({P::OGULIM}), conj({P::OULIM}), "uniformity in the input drops");
        imp(conj({P::OULIM}), conj({P::OLIM}), "uniformity drops");
        imp(conj({P::OUAG}), conj({P::OAG}), "uniformity drops");
        imp(conj({P::OAG}), conj({P::OLIM}), "asymptotic gain gives the limit property");
        eqv({conj({P::IOS, P::OL}), conj({P::OUAG, P::OL, P::H_K_BOUNDED}), conj({P::OULIM, P::OL, P::H_K_BOUNDED})},
            "IOS and OL superposition");
        eqv({conj({P::OCAG}), conj({P::OUAG, P::BORS}), conj({P::OGUAG, P::OUGB})}, "offset asymptotic gain equivalences");
        imp(conj({P::OCAG}), conj({P::IOPS}), "offset gain gives practical stability");
        eqv({conj({P::ISS, P::H_K_BOUNDED}), conj({P::IOS, P::IOSS})}, "ISS from IOS and detectability");

        g.non_edges = {
            {conj({P::IOS}), conj({P::OL}), "sin_output", "IOS does not give OL"},
            {conj({P::OGULIM, P::OOULIM, P::OUGS}), conj({P::IOS, P::OL}), "rotation",
             "uniform limit and stability give neither IOS nor OL"},
            {conj({P::OGULIM, P::LOCAL_OL, P::OBORS}), conj({P::OL}), "sat_polar",
             "local OL with bounded reachability does not give OL"},
            {conj({P::OUAG}), conj({P::OGUAG}), "l2_timewarp", "without BORS, OUAG does not give OGUAG"},
            {conj({P::FC}), conj({P::BORS}), "l2_blowup", "forward completeness with attractivity does not give BORS"},
        };
        return g;
    }();
    return g;
}

/// True when the graph has no directed cycle once each declared equivalence
/// class is merged into one node.
[[nodiscard]] inline bool acyclic_after_collapse(const ImplicationGraph& g)
{
    std::map<PropertySet, std::size_t> id;
    std::size_t next = 0;
    for (const auto& cls : g.equivalences) {
        for (const auto& n : cls) id[n] = next;
        ++next;
    }
    auto node = [&](const PropertySet& s) {
        const auto it = id.find(s);
        if (it != id.end()) return it->second;
        id[s] = next;
        return next++;
    };
    std::map<std::size_t, std::set<std::size_t>> adj;
    for (const auto& e : g.edges) {
        const std::size_t a = node(e.from), b = node(e.to);
        if (a != b) adj[a].insert(b);
    }
    std::vector<int> mark(next, 0);
    std::function<bool(std::size_t)> dfs = [&](std::size_t v) {
        mark[v] = 1;
        for (std::size_t w : adj[v]) {
            if (mark[w] == 1) return false;
            if (mark[w] == 0 && !dfs(w)) return false;
        }
        mark[v] = 2;
        return true;
    };
    for (std::size_t v = 0; v < next; ++v)
        if (mark[v] == 0 && !dfs(v)) return false;
    return true;
}

// ===================================================================
// report
// ===================================================================

/// Certified premises with a falsified conclusion along an implication edge.
struct EdgeViolation {
    Edge edge;
    PropertyId falsified = PropertyId::IOS;
    std::optional<Witness> witness;
    std::string reason;
};

struct NonEdgeConfirmation {
    NonEdge non_edge;
    bool confirmed = false;
    std::map<PropertyId, Status> premise_status;
    std::vector<std::string> details;
};

struct DiagramReport {
    std::string system;
    std::string plan_hash;
    std::vector<Verdict> verdicts;  // one per property, in declaration order
    std::vector<EdgeViolation> violations;
    std::vector<NonEdgeConfirmation> non_edges;
    std::vector<std::string> errors;
    std::string generated_at;  // the only field that varies between identical runs

    [[nodiscard]] bool passes() const { return violations.empty(); }
    [[nodiscard]] bool non_edges_confirmed() const
    {
        return std::all_of(non_edges.begin(), non_edges.end(), [](const auto& n) { return n.confirmed; });
    }
    [[nodiscard]] const Verdict& verdict(PropertyId p) const
    {
        for (const auto& v : verdicts)
            if (v.property == p) return v;
        throw lookup_error(std::string("no verdict for ") + to_string(p));
    }
};

inline json to_json(const PropertySet& s)
{
    json j = json::array();
    for (PropertyId p : s) j.push_back(to_string(p));
    return j;
}

inline json to_json(const DiagramReport& r, bool with_timestamp = true)
{
    json verdicts = json::object();
    for (const auto& v : r.verdicts) verdicts[to_string(v.property)] = to_json(v);
    json viol = json::array();
    for (const auto& v : r.violations) {
        json j{{"edge", to_string(v.edge)}, {"anchor", v.edge.anchor}, {"falsified", to_string(v.falsified)}, {"reason", v.reason}};
        if (v.witness) j["witness"] = to_json(*v.witness);
        viol.push_back(j);
    }
    json ne = json::array();
    for (const auto& n : r.non_edges) {
        json ps = json::object();
        for (const auto& [p, s] : n.premise_status) ps[to_string(p)] = to_string(s);
        ne.push_back({{"premises", to_json(n.non_edge.premises)},
                      {"conclusions", to_json(n.non_edge.conclusions)},
                      {"zoo_id", n.non_edge.zoo_id},
                      {"anchor", n.non_edge.anchor},
                      {"confirmed", n.confirmed},
                      {"premise_status", ps},
                      {"details", n.details}});
    }
    json j{{"schema", schema_version}, {"system", r.system},      {"plan_hash", r.plan_hash},  {"passes", r.passes()},
           {"verdicts", verdicts},     {"violations", viol},      {"non_edges", ne},           {"errors", r.errors}};
    if (with_timestamp) j["generated_at"] = r.generated_at;
    return j;
}

// ===================================================================
// run
// ===================================================================

struct DiagramOptions {
    std::optional<std::string> zoo_id;             // enables witness replay and non-edge confirmation
    zoo::ZooParams zoo_params;
    std::map<PropertyId, Certificate> certificates;  // user certificates take precedence
};

namespace detail {

inline Verdict witness_verdict(const zoo::WitnessRecipe& w, const zoo::ReplayResult& r, PropertyId p)
{
    Verdict v;
    v.property = p;
    v.status = Status::falsified;
    v.samples = 1;
    v.slack = w.reference_bound - r.observed;
    v.reason = "zoo witness replayed: " + w.note;
    Witness wt;
    wt.x0 = w.x0;
    wt.u = w.u;
    wt.t = r.t;
    wt.observed = r.observed;
    wt.bound = w.reference_bound;
    wt.margin = r.observed - w.reference_bound;
    wt.measure = w.measure;
    v.witness = wt;
    return v;
}

inline Verdict check_one(const SystemModel& sys, PropertyId p, const ProbeSet& probes, const SamplingPlan& plan,
                         const DiagramOptions& opt, const std::optional<zoo::ZooEntry>& ent)
{
    if (const auto it = opt.certificates.find(p); it != opt.certificates.end()) {
        Verdict v = verify(it->second, probes, plan);
        v.reason = "user certificate: " + v.reason;
        return v;
    }
    std::string replay_note;
    if (ent) {
        for (const auto& w : ent->witnesses) {
            if (std::find(w.properties.begin(), w.properties.end(), p) == w.properties.end()) continue;
            const auto r = zoo::replay(sys, w);
            if (r.confirmed) return witness_verdict(w, r, p);
            replay_note = "zoo witness did not replay: " + r.detail;
        }
    }
    Verdict v;
    v.property = p;
    try {
        const Certificate c = p == PropertyId::FC ? default_certificate(p, plan) : estimate_gain(p, probes, plan);
        v = verify(c, probes, plan);
        if (p != PropertyId::FC) v.reason = "estimated certificate: " + v.reason;
    } catch (const std::exception& err) {
        v.status = Status::inconclusive;
        v.reason = std::string("no certificate: ") + err.what();
    }
    if (!replay_note.empty()) v.notes.push_back(replay_note);
    return v;
}

inline bool all_certified(const PropertySet& s, const std::map<PropertyId, const Verdict*>& by)
{
    return std::all_of(s.begin(), s.end(), [&](PropertyId p) { return by.at(p)->certified(); });
}

} // namespace detail

/// Evaluates every property on one simulated probe set, then checks the diagram:
/// certified premises with a falsified conclusion are violations.
[[nodiscard]] inline DiagramReport run_diagram(const SystemModel& sys, const SamplingPlan& plan, const DiagramOptions& opt = {})
{
    validate(plan);
    DiagramReport rep;
    rep.system = opt.zoo_id ? zoo::normalize_id(*opt.zoo_id) : sys.name;
    std::optional<zoo::ZooEntry> ent;
    if (opt.zoo_id) ent = zoo::entry(*opt.zoo_id, opt.zoo_params);

    const ProbeSet probes = run_probes(sys, plan);
    rep.plan_hash = probes.plan_hash;
    SamplingPlan inner = plan;
    inner.threads = 1;
    rep.verdicts.resize(all_properties.size());
    std::vector<std::string> errs(all_properties.size());
    detail::parallel_for(all_properties.size(), plan.threads, [&](std::size_t i) {
        const PropertyId p = all_properties[i];
        try {
            rep.verdicts[i] = detail::check_one(sys, p, probes, inner, opt, ent);
        } catch (const std::exception& err) {
            rep.verdicts[i].property = p;
            rep.verdicts[i].status = Status::inconclusive;
            rep.verdicts[i].reason = err.what();
            errs[i] = std::string(to_string(p)) + ": " + err.what();
        }
        const bool uniform = p == PropertyId::OGUAG || p == PropertyId::OGULIM;
        auto& notes = rep.verdicts[i].notes;
        if (uniform && std::none_of(notes.begin(), notes.end(), [](const auto& n) { return n.find("s_max") != std::string::npos; }))
            notes.push_back("uniform in u only up to s_max = " + std::to_string(effective_s_max(plan)));
    });
    for (auto& e : errs)
        if (!e.empty()) rep.errors.push_back(std::move(e));

    std::map<PropertyId, const Verdict*> by;
    for (const auto& v : rep.verdicts) by[v.property] = &v;
    for (const auto& e : implication_graph().edges) {
        if (!detail::all_certified(e.from, by)) continue;
        for (PropertyId q : e.to) {
            if (std::find(e.from.begin(), e.from.end(), q) != e.from.end()) continue;
            const Verdict& v = *by.at(q);
            if (!v.falsified()) continue;
            rep.violations.push_back({e, q, v.witness, v.reason});
        }
    }

    if (ent) {
        for (const auto& ne : implication_graph().non_edges) {
            if (ne.zoo_id != ent->id) continue;
            NonEdgeConfirmation c;
            c.non_edge = ne;
            c.confirmed = true;
            for (PropertyId p : ne.premises) c.premise_status[p] = by.at(p)->status;
            for (PropertyId q : ne.conclusions) {
                std::optional<zoo::WitnessRecipe> w;
                try {
                    w = zoo::known_witness(*ent, q);
                } catch (const lookup_error&) {
                }
                if (!w) {
                    c.confirmed = false;
                    c.details.push_back(std::string("no witness recorded for ") + to_string(q));
                    continue;
                }
                const auto r = zoo::replay(sys, *w);
                c.confirmed = c.confirmed && r.confirmed;
                std::string d = std::string(to_string(q)) + (r.confirmed ? " refuted" : " not refuted") + " by " + w->note +
                                " (observed " + std::to_string(r.observed) + " at t = " + std::to_string(r.t) + ")";
                if (!r.detail.empty()) d += ": " + r.detail;
                c.details.push_back(std::move(d));
            }
            rep.non_edges.push_back(std::move(c));
        }
    }

    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    rep.generated_at = buf;
    return rep;
}

/// Diagram for a zoo system with its default plan.
[[nodiscard]] inline DiagramReport run_diagram(const std::string& zoo_id, const zoo::ZooParams& params = {},
                                               std::optional<SamplingPlan> plan = std::nullopt)
{
    DiagramOptions opt;
    opt.zoo_id = zoo_id;
    opt.zoo_params = params;
    return run_diagram(zoo::make_example(zoo_id, params), plan ? *plan : default_plan(zoo_id, params), opt);
}

} // namespace ioslab
