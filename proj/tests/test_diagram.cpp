#include <algorithm>

#include <gtest/gtest.h>

#include "ioslab/diagram.hpp"

using namespace ioslab;
using P = PropertyId;

namespace {

zoo::ZooParams fast_params()
{
    zoo::ZooParams zp;
    zp.n = 16;
    return zp;
}

const Edge* find_edge(const PropertySet& from, const PropertySet& to)
{
    for (const auto& e : implication_graph().edges)
        if (e.from == from && e.to == to) return &e;
    return nullptr;
}

} // namespace

// ===================================================================
// graph
// ===================================================================

TEST(Graph, AcyclicAfterCollapsingEquivalences)
{
    EXPECT_TRUE(acyclic_after_collapse(implication_graph()));
}

TEST(Graph, CycleOutsideEquivalenceDetected)
{
    ImplicationGraph g = implication_graph();
    g.edges.push_back({detail::conj({P::OLIM}), detail::conj({P::IOS}), "bogus", false});
    EXPECT_FALSE(acyclic_after_collapse(g));
}

TEST(Graph, EquivalencesExpandToBothDirections)
{
    const auto a = detail::conj({P::IOS});
    const auto b = detail::conj({P::OUAG, P::OCEP, P::BORS});
    ASSERT_NE(find_edge(a, b), nullptr);
    ASSERT_NE(find_edge(b, a), nullptr);
    EXPECT_TRUE(find_edge(a, b)->equivalence);
    EXPECT_NE(find_edge(detail::conj({P::IOS}), detail::conj({P::OUGS})), nullptr);
    EXPECT_EQ(find_edge(detail::conj({P::OUGS}), detail::conj({P::IOS})), nullptr);
}

TEST(Graph, EveryNonEdgeNamesAZooSystem)
{
    const auto ids = zoo::ids();
    EXPECT_EQ(implication_graph().non_edges.size(), 5u);
    for (const auto& ne : implication_graph().non_edges) {
        EXPECT_NE(std::find(ids.begin(), ids.end(), ne.zoo_id), ids.end()) << ne.zoo_id;
        EXPECT_TRUE(std::is_sorted(ne.premises.begin(), ne.premises.end()));
    }
}

TEST(Graph, NoNonEdgeContradictsAnEdge)
{
    for (const auto& ne : implication_graph().non_edges)
        for (PropertyId q : ne.conclusions)
            EXPECT_EQ(find_edge(ne.premises, detail::conj({q})), nullptr) << to_string(ne.premises);
}

// ===================================================================
// verdicts on zoo systems
// ===================================================================

TEST(Diagram, SinOutputVerdicts)
{
    const auto rep = run_diagram("sin_output", fast_params());
    EXPECT_EQ(rep.verdicts.size(), all_properties.size());
    EXPECT_TRUE(rep.verdict(P::IOS).certified()) << rep.verdict(P::IOS).reason;
    EXPECT_TRUE(rep.verdict(P::OUGS).certified());
    EXPECT_TRUE(rep.verdict(P::OULIM).certified());
    EXPECT_TRUE(rep.verdict(P::OL).falsified());
    ASSERT_TRUE(rep.verdict(P::OL).witness);
    EXPECT_GT(rep.verdict(P::OL).witness->margin, 0.0);
    EXPECT_TRUE(rep.passes());
    EXPECT_TRUE(rep.non_edges_confirmed());
}

TEST(Diagram, RotationVerdicts)
{
    const auto rep = run_diagram("rotation", fast_params());
    EXPECT_TRUE(rep.verdict(P::OUGS).certified());
    EXPECT_TRUE(rep.verdict(P::OGULIM).certified());
    EXPECT_TRUE(rep.verdict(P::IOS).falsified());
    EXPECT_TRUE(rep.verdict(P::OL).falsified());
    EXPECT_TRUE(rep.passes());
    ASSERT_EQ(rep.non_edges.size(), 1u);
    EXPECT_TRUE(rep.non_edges[0].confirmed);
    EXPECT_EQ(rep.non_edges[0].details.size(), 2u);
}

TEST(Diagram, UniformPropertiesCarrySmaxNote)
{
    const auto rep = run_diagram("lin_scalar", fast_params());
    for (PropertyId p : {P::OGUAG, P::OGULIM}) {
        const auto& n = rep.verdict(p).notes;
        EXPECT_TRUE(std::any_of(n.begin(), n.end(), [](const auto& s) { return s.find("s_max") != std::string::npos; }));
    }
}

TEST(Diagram, WholeZooHasNoViolationsAndConfirmsNonEdges)
{
    std::size_t confirmed = 0;
    for (const auto& id : zoo::ids()) {
        const auto rep = run_diagram(id, fast_params());
        EXPECT_TRUE(rep.passes()) << id << ": " << to_json(rep).dump();
        EXPECT_TRUE(rep.errors.empty()) << id;
        for (const auto& n : rep.non_edges) confirmed += n.confirmed ? 1 : 0;
    }
    EXPECT_EQ(confirmed, implication_graph().non_edges.size());
}

// ===================================================================
// injected faults
// ===================================================================

TEST(Diagram, UndersizedIosCertificateIsReportedAsViolation)
{
    DiagramOptions opt;
    opt.zoo_id = "sin_output";
    Certificate bad;
    bad.property = P::IOS;
    bad.beta = kl::outer(fn::scale(0.1), kl::exponential(1.0));
    bad.gamma = fn::zero();
    opt.certificates[P::IOS] = bad;
    const auto rep = run_diagram(zoo::sin_output(), default_plan("sin_output"), opt);
    ASSERT_TRUE(rep.verdict(P::IOS).falsified());
    EXPECT_FALSE(rep.passes());
    const auto premise = detail::conj({P::OUAG, P::OCEP, P::BORS});
    const auto it = std::find_if(rep.violations.begin(), rep.violations.end(),
                                 [&](const auto& v) { return v.edge.from == premise && v.falsified == P::IOS; });
    ASSERT_NE(it, rep.violations.end());
    ASSERT_TRUE(it->witness);
    EXPECT_GT(it->witness->observed, it->witness->bound);
    EXPECT_FALSE(to_json(rep)["violations"].empty());
}

// ===================================================================
// reproducibility
// ===================================================================

TEST(Diagram, DeterministicApartFromTimestamp)
{
    const auto a = run_diagram("sat_polar", fast_params());
    const auto b = run_diagram("sat_polar", fast_params());
    EXPECT_EQ(to_json(a, false).dump(), to_json(b, false).dump());
    EXPECT_TRUE(to_json(a).contains("generated_at"));
    EXPECT_EQ(to_json(a)["schema"], schema_version);
}

TEST(Diagram, ThreadCountDoesNotChangeReport)
{
    auto plan = default_plan("rotation", fast_params());
    DiagramOptions opt;
    opt.zoo_id = "rotation";
    opt.zoo_params = fast_params();
    const auto sys = zoo::make_example("rotation", fast_params());
    plan.threads = 1;
    const auto one = run_diagram(sys, plan, opt);
    plan.threads = 4;
    const auto four = run_diagram(sys, plan, opt);
    auto strip = [](json j) {
        j.erase("generated_at");
        return j.dump();
    };
    EXPECT_EQ(strip(to_json(one)), strip(to_json(four)));
}
