#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "ioslab/constructs.hpp"
#include "ioslab/plans.hpp"

using namespace ioslab;
using P = PropertyId;

namespace {

constexpr double e = std::numbers::e;

Certificate make(PropertyId p, ScalarFn sigma, ScalarFn gamma, KLFn beta = {}, double c = 0.0, double radius = 0.0)
{
    Certificate cert;
    cert.property = p;
    cert.sigma = std::move(sigma);
    cert.gamma = std::move(gamma);
    cert.beta = std::move(beta);
    cert.c = c;
    cert.radius = radius;
    return cert;
}

Certificate tabled(PropertyId p, GridTable t, ScalarFn gamma = fn::identity())
{
    Certificate cert;
    cert.property = p;
    cert.gamma = std::move(gamma);
    cert.table = std::move(t);
    return cert;
}

GridTable filled(std::vector<std::string> names, std::vector<std::vector<double>> axes, auto&& f)
{
    GridTable t(std::move(names), std::move(axes));
    for (std::size_t k = 0; k < t.cells(); ++k) {
        const auto idx = t.unflat(k);
        std::vector<double> p;
        for (std::size_t a = 0; a < idx.size(); ++a) p.push_back(t.axes[a][idx[a]]);
        t.values[k] = f(p);
    }
    return t;
}

// The s axis of a system without inputs carries no information; widen it so
// lookups at s > 0 resolve to the s = 0 data.
Certificate widen_s(Certificate c, std::size_t axis, std::vector<double> s_axis)
{
    GridTable& t = *c.table;
    auto axes = t.axes;
    axes[axis] = std::move(s_axis);
    GridTable w(t.names, axes);
    for (std::size_t k = 0; k < w.cells(); ++k) {
        auto idx = w.unflat(k);
        idx[axis] = 0;
        w.values[k] = t.values[t.flat(idx)];
    }
    c.table = std::move(w);
    return c;
}

SamplingPlan sin_plan()
{
    SamplingPlan p = default_plan("sin_output");
    p.eps_grid = {0.05, 0.1, 0.2, 0.5, 1.0};
    p.tau_grid = {0.5, 1.0, 2.0, 5.0, 20.0};
    return p;
}

Certificate verified(const SystemModel& sys, PropertyId p, const SamplingPlan& plan)
{
    Certificate c = estimate_gain(sys, p, plan);
    const auto v = verify(sys, c, plan);
    EXPECT_TRUE(v.certified()) << to_string(p) << ": " << v.reason;
    return c;
}

void expect_certified(const SystemModel& sys, const ConstructionRecord& rec, const SamplingPlan& plan)
{
    const auto v = verify(sys, rec.output, plan);
    EXPECT_TRUE(v.certified()) << rec.name << ": " << v.reason << "\n" << rec.trace;
}

} // namespace

// ===================================================================
// decompose_bound
// ===================================================================

TEST(Decompose, LinearBound)
{
    const std::vector<double> ax{0.0, 0.5, 1.0, 2.0, 4.0};
    for (double off : {0.0, 1.0}) {
        const auto rec = decompose_bound(filled({"r", "s"}, {ax, ax}, [&](const auto& p) { return p[0] + p[1] + off; }));
        EXPECT_EQ(rec.output.property, P::H_BOUNDED);
        EXPECT_DOUBLE_EQ(rec.output.c, off);
        for (double r : {0.0, 0.25, 1.0, 3.0, 4.0}) {
            EXPECT_NEAR(rec.output.sigma(r), 2.0 * r, 1e-8) << r;
            EXPECT_NEAR(rec.output.gamma(r), 2.0 * r, 1e-8) << r;
        }
        EXPECT_EQ(rec.output.sigma(0.0), 0.0);
        EXPECT_FALSE(rec.trace.empty());
    }
}

TEST(Decompose, NonMonotoneRejected)
{
    const std::vector<double> ax{0.0, 1.0, 2.0};
    EXPECT_THROW((void)decompose_bound(filled({"r", "s"}, {ax, ax}, [](const auto& p) { return std::abs(p[0] - 1.0) + p[1]; })),
                 domain_error);
}

TEST(Decompose, EmpiricalLinScalarBoundDominatesSamples)
{
    const auto sys = zoo::lin_scalar();
    const auto plan = default_plan("lin_scalar");
    const auto probes = run_probes(sys, plan);
    Certificate bors;
    bors.property = P::BORS;
    bors.table = reachability_from(probes, plan).mu;
    const auto rec = decompose_bound(bors, plan.sim.horizon);
    const HBound h = hbound_of(rec.output);
    for (const auto& p : probes.runs)
        EXPECT_LE(p.ymax(), h.sigma1(p.r) + h.gamma1(p.s) + h.c + 1e-9) << "r=" << p.r << " s=" << p.s;
}

// ===================================================================
// uniformize_gain
// ===================================================================

TEST(Uniformize, ShellIndexAndInflation)
{
    const auto g = uniformize_gain(fn::identity(), 1.0, 1.0, {3.0, 1.0, 2.0, 9.0});
    EXPECT_EQ(g.k_star, 2u);
    EXPECT_DOUBLE_EQ(g.tau, 3.0);
    for (double r : {0.1, 1.0, 7.0}) EXPECT_NEAR(g.gamma(r) / r, e, 1e-12);
    EXPECT_DOUBLE_EQ(uniformize_gain(fn::identity(), 1.0, 1.0, {4.0, 4.0, 4.0}).tau, 4.0);
    EXPECT_THROW((void)uniformize_gain(fn::identity(), 1.0, 1.0, {}), domain_error);
    EXPECT_THROW((void)uniformize_gain(fn::identity(), 1.0, 1.0, {1.0, 2.0}), table_gap_error);
}

// ===================================================================
// ogulim_from_oulim
// ===================================================================

TEST(Ogulim, ResolvesRadiusThroughGainInverse)
{
    // tau(eps, r, s) = s marks which s cell was used
    const auto oulim = tabled(P::OULIM, filled({"eps", "r", "s"}, {{0.5}, {1.0}, {0.5, 1.0, 2.0, 3.0}},
                                               [](const auto& p) { return p[2]; }));
    const auto rec0 = ogulim_from_oulim(oulim, make(P::H_BOUNDED, fn::identity(), fn::identity(), {}, 0.0));
    EXPECT_DOUBLE_EQ(rec0.output.table->at({0, 0}), 1.0);
    EXPECT_NEAR(rec0.output.gamma(3.0), 6.0, 1e-12);
    const auto rec1 = ogulim_from_oulim(oulim, make(P::H_BOUNDED, fn::identity(), fn::identity(), {}, 1.0));
    EXPECT_DOUBLE_EQ(rec1.output.table->at({0, 0}), 2.0);
    const auto rec3 = make(P::H_BOUNDED, fn::scale(5.0), fn::identity(), {}, 0.0);
    EXPECT_THROW((void)ogulim_from_oulim(oulim, rec3), table_gap_error);
    auto bounded = oulim;
    bounded.gamma = fn::scale(2.0);
    EXPECT_DOUBLE_EQ(ogulim_from_oulim(bounded, rec3).output.table->at({0, 0}), 3.0);
    bounded.gamma = fn::zero();
    EXPECT_THROW((void)ogulim_from_oulim(bounded, rec3), class_error);
}

TEST(Ogulim, RoundTripSinOutput)
{
    const auto sys = zoo::sin_output();
    const auto plan = sin_plan();
    Certificate oulim = verified(sys, P::OULIM, plan);
    oulim = widen_s(oulim, 2, {0.0, 1.0, 100.0});
    oulim.gamma = fn::identity();
    const auto v = verify(sys, oulim, plan);
    ASSERT_TRUE(v.certified()) << v.reason;
    const auto rec = ogulim_from_oulim(oulim, make(P::H_BOUNDED, fn::identity(), fn::zero(), {}, 0.0));
    expect_certified(sys, rec, plan);
}

// ===================================================================
// ougb_from_ouag_bors
// ===================================================================

TEST(Ougb, SubstitutionExample)
{
    const std::vector<double> ax{0.0, 1.0, 2.0, 3.0};
    const auto ouag = tabled(P::OUAG, filled({"eps", "r", "s"}, {{0.5, 1.0}, ax, ax}, [](const auto&) { return 0.0; }),
                             fn::scale(0.5));
    Certificate bors = tabled(P::BORS, filled({"r", "s", "t"}, {ax, ax, {0.0, 10.0}}, [](const auto& p) { return p[0] + p[1]; }));
    const auto rec = ougb_from_ouag_bors(ouag, bors);
    EXPECT_DOUBLE_EQ(rec.output.c, 1.0);
    for (double r : {0.5, 1.0, 2.5}) {
        EXPECT_NEAR(rec.output.sigma(r), 2.0 * r, 1e-8);
        EXPECT_NEAR(rec.output.gamma(r), 2.0 * r, 1e-8);
    }
}

TEST(Ougb, SmoothedTauDominatesTau)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(0.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> ax{0.0}, tau{d(rng)};
        for (int i = 0; i < 8; ++i) {
            ax.push_back(ax.back() + 0.1 + d(rng));
            tau.push_back(tau.back() + d(rng));
        }
        for (double r = 0.0; r <= ax.back(); r += 0.05) {
            const auto i = std::lower_bound(ax.begin(), ax.end(), r - 1e-12) - ax.begin();
            EXPECT_GE(smoothed_tau(ax, tau, r), tau[static_cast<std::size_t>(i)]);
        }
    }
}

TEST(Ougb, MissingCellNamed)
{
    const std::vector<double> ax{0.0, 1.0};
    const auto ouag = tabled(P::OUAG, filled({"eps", "r", "s"}, {{1.0}, ax, ax}, [](const auto&) { return 50.0; }));
    const auto bors = tabled(P::BORS, filled({"r", "s", "t"}, {ax, ax, {1.0, 10.0}}, [](const auto& p) { return p[0] + p[1]; }));
    try {
        (void)ougb_from_ouag_bors(ouag, bors);
        FAIL() << "expected a table gap";
    } catch (const table_gap_error& err) {
        EXPECT_NE(std::string(err.what()).find("t = 50"), std::string::npos) << err.what();
    }
}

TEST(Ougb, RoundTripLinScalar)
{
    const auto sys = zoo::lin_scalar();
    const auto plan = default_plan("lin_scalar");
    const auto rec = ougb_from_ouag_bors(verified(sys, P::OUAG, plan), verified(sys, P::BORS, plan));
    expect_certified(sys, rec, plan);
}

// ===================================================================
// ocag_from_oguag and iops_from_ocag
// ===================================================================

TEST(Ocag, KnotValues)
{
    // tau(eps, r) = -ln(eps): strictly increasing knots tau_n = n - ln(eps0(lower edge))
    const std::vector<double> eps{1e-4, 1e-3, 1e-2, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0};
    const auto oguag = tabled(P::OGUAG, filled({"eps", "r"}, {eps, {1.0}}, [](const auto& p) { return std::max(0.0, 10.0 - std::log(p[0])); }));
    const auto ougb = make(P::OUGB, fn::identity(), fn::identity(), {}, 0.0);
    const auto rec = ocag_from_oguag(oguag, ougb);
    const auto& b = rec.output.beta;
    ASSERT_EQ(b.kind(), KLKind::piecewise_exp);
    const auto& taus = b.node().knots;
    EXPECT_EQ(taus.front(), 0.0);
    for (std::size_t n = 1; n < taus.size(); ++n)
        for (double r : {0.5, 1.0, 3.0})
            EXPECT_NEAR(b(r, taus[n]), std::exp(-(static_cast<double>(n) - 1.0)) * (r + r), 1e-9 * r);
}

TEST(Ocag, ConstantTableCollapsesToOneRate)
{
    const auto oguag = tabled(P::OGUAG, filled({"eps", "r"}, {{1e-3, 0.1, 1.0, 10.0}, {1.0, 2.0}}, [](const auto&) { return 3.0; }));
    const auto rec = ocag_from_oguag(oguag, make(P::OUGB, fn::identity(), fn::identity(), {}, 1.0));
    const auto& b = rec.output.beta;
    EXPECT_EQ(b.node().knots, (std::vector<double>{0.0, 3.0}));
    for (double t : {0.0, 1.0, 3.0, 7.5, 20.0})
        for (double r : {0.5, 2.0}) EXPECT_NEAR(b(r, t) / b(r, 0.0), std::exp(-t / 3.0), 1e-12);
}

TEST(Ocag, GapRejected)
{
    const auto oguag = tabled(P::OGUAG, filled({"eps", "r"}, {{5.0}, {1.0}}, [](const auto&) { return 1.0; }));
    EXPECT_THROW((void)ocag_from_oguag(oguag, make(P::OUGB, fn::identity(), fn::identity(), {}, 0.0)), table_gap_error);
}

TEST(Ocag, RoundTripSinOutputWithIops)
{
    const auto sys = zoo::sin_output();
    const auto plan = sin_plan();
    const auto rec = ocag_from_oguag(verified(sys, P::OGUAG, plan), verified(sys, P::OUGB, plan));
    EXPECT_EQ(rec.output.beta.node().knots.front(), 0.0);
    expect_certified(sys, rec, plan);
    expect_certified(sys, iops_from_ocag(rec.output), plan);
}

TEST(Iops, Substitution)
{
    const auto ocag = make(P::OCAG, {}, fn::identity(), kl::exponential(1.0), 1.0);
    const auto rec = iops_from_ocag(ocag);
    EXPECT_DOUBLE_EQ(rec.output.c, 2.0);
    for (double t : {0.0, 1.0, 4.0}) EXPECT_NEAR(rec.output.beta(3.0, t), 6.0 * std::exp(-t), 1e-12);
    auto zero = ocag;
    zero.c = 0.0;
    EXPECT_DOUBLE_EQ(iops_from_ocag(zero).output.c, 0.0);
}

// ===================================================================
// ougs_from_ougb_ouls and ios_from_ocag_ougs
// ===================================================================

TEST(Ougs, CaseSplitEnvelope)
{
    const auto rec = ougs_from_ougb_ouls(make(P::OUGB, fn::identity(), fn::identity(), {}, 1.0),
                                         make(P::OULS, fn::identity(), fn::identity(), {}, 0.0, 1.0));
    const auto& s = rec.output.sigma;
    EXPECT_NEAR(s(1.0), 2.0, 1e-12);
    EXPECT_NEAR(s(1.0 - 1e-9), 2.0, 1e-8);
    for (double x : {0.1, 0.5, 0.9}) EXPECT_GE(s(x), x);
    for (double x : {1.0, 1.5, 4.0}) EXPECT_GE(s(x), x + 1.0);
    EXPECT_TRUE(sampled_class_check(s, FnClass::k_inf));

    const auto flat = ougs_from_ougb_ouls(make(P::OUGB, fn::identity(), fn::identity(), {}, 0.0),
                                          make(P::OULS, fn::scale(2.0), fn::power(2.0), {}, 0.0, 1.0));
    for (double x : {0.3, 1.0, 5.0}) {
        EXPECT_NEAR(flat.output.sigma(x), std::max(x, 2.0 * x), 1e-12);
        EXPECT_NEAR(flat.output.gamma(x), std::max(x, x * x), 1e-12);
    }
}

TEST(Ougs, RoundTripSinOutput)
{
    const auto sys = zoo::sin_output();
    const auto plan = sin_plan();
    const auto rec = ougs_from_ougb_ouls(verified(sys, P::OUGB, plan), verified(sys, P::OULS, plan));
    expect_certified(sys, rec, plan);
}

TEST(IosFromOcagOugs, MinForm)
{
    const auto rec = ios_from_ocag_ougs(make(P::OCAG, {}, fn::identity(), kl::exponential(1.0), 1.0),
                                        make(P::OUGS, fn::scale(3.0), fn::identity()));
    const auto& b = rec.output.beta;
    for (double r : {0.5, 2.0}) EXPECT_NEAR(b(r, 0.0), std::min(6.0 * r, r + 1.0), 1e-12);
    EXPECT_LE(b(1.0, 50.0), 1e-6);
    EXPECT_TRUE(b.declared_kl());
    EXPECT_TRUE(kl_sampled_check(b).ok());
}

TEST(IosFromOcagOugs, RoundTripSinOutput)
{
    const auto sys = zoo::sin_output();
    const auto plan = sin_plan();
    const auto rec = ios_from_ocag_ougs(verified(sys, P::OCAG, plan), verified(sys, P::OUGS, plan));
    expect_certified(sys, rec, plan);
}

// ===================================================================
// ios_from_oulim_ol
// ===================================================================

TEST(IosFromOulimOl, IdentityGains)
{
    const std::vector<double> eps{1e-3, 1e-2, 0.1, 1.0, 10.0};
    const auto oulim = tabled(P::OULIM, filled({"eps", "r", "s"}, {eps, {1.0, 2.0}, {1.0, 2.0}},
                                               [](const auto& p) { return std::max(0.0, 3.0 - std::log(p[0])); }));
    const auto rec = ios_from_oulim_ol(oulim, make(P::OL, fn::identity(), fn::identity()),
                                       make(P::H_K_BOUNDED, fn::identity(), fn::identity()));
    for (double v : {0.5, 1.0, 4.0}) EXPECT_NEAR(rec.output.gamma(v), 13.0 * v, 1e-9 * v);
    // beta(r, 0) = sigma~(e eps0(r)) = 2 e 5 r
    for (double r : {0.5, 2.0}) EXPECT_NEAR(rec.output.beta(r, 0.0), 10.0 * e * r, 1e-9);
    EXPECT_NE(rec.trace.find("eps0"), std::string::npos);
    EXPECT_THROW((void)ios_from_oulim_ol(oulim, make(P::OL, fn::identity(), fn::identity()),
                                         make(P::H_BOUNDED, fn::identity(), fn::identity(), {}, 1.0)),
                 domain_error);
}

TEST(IosFromOulimOl, RoundTripLinScalar)
{
    const auto sys = zoo::lin_scalar();
    auto plan = default_plan("lin_scalar");
    plan.eps_grid = {0.01, 0.05, 0.1, 0.5, 1.0};
    const auto rec = ios_from_oulim_ol(verified(sys, P::OULIM, plan), verified(sys, P::OL, plan),
                                       make(P::H_K_BOUNDED, fn::identity(), fn::zero()));
    expect_certified(sys, rec, plan);
}

// ===================================================================
// ouls_from_ouag_ocep
// ===================================================================

TEST(OulsFromOuagOcep, Substitution)
{
    const auto ouag = tabled(P::OUAG, filled({"eps", "r", "s"}, {{0.5}, {1.0}, {1.0}}, [](const auto&) { return 2.0; }));
    for (const auto& [d, want] : {std::pair{0.3, 0.3}, std::pair{5.0, 0.5}}) {
        const auto ocep = tabled(P::OCEP, filled({"eps", "tau"}, {{1.0}, {2.0, 4.0}}, [&](const auto&) { return d; }));
        const auto rec = ouls_from_ouag_ocep(ouag, ocep);
        ASSERT_TRUE(is_epsilon_delta(rec.output));
        EXPECT_DOUBLE_EQ(rec.output.table->values[0], want);
    }
}

TEST(OulsFromOuagOcep, RoundTripSinOutput)
{
    const auto sys = zoo::sin_output();
    const auto plan = sin_plan();
    const auto ouag = widen_s(verified(sys, P::OUAG, plan), 2, {0.0, 1.0, 100.0});
    const auto rec = ouls_from_ouag_ocep(ouag, verified(sys, P::OCEP, plan));
    EXPECT_TRUE(is_epsilon_delta(rec.output));
    expect_certified(sys, rec, plan);
}

// ===================================================================
// ol_from_ooulim_localol_obors
// ===================================================================

TEST(OlFromOoulim, Substitution)
{
    const std::vector<double> ax{0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0};
    const auto ooulim = tabled(P::OOULIM, filled({"eps", "r"}, {{1.0}, {0.0, 1.0, 2.0, 3.0}}, [](const auto&) { return 1.0; }));
    const auto obors = tabled(P::OBORS, filled({"r", "s", "t"}, {ax, ax, {1.0, 2.0}}, [](const auto& p) { return p[0] + p[1] + p[2]; }));
    const auto rec = ol_from_ooulim_localol_obors(ooulim, make(P::LOCAL_OL, fn::identity(), fn::identity(), {}, 0.0, 1.0), obors);
    // r = 1: R = 2 + 1 = 3, gamma~^-1(1) = 1/2 (ceil 1), tau = 1: sigma~ = 3 + 1 + 1 = 5
    EXPECT_NE(rec.trace.find("r = 1: R = 3, tau = 1, sigma~ = 5"), std::string::npos) << rec.trace;
    EXPECT_EQ(rec.output.property, P::OL);
}

TEST(OlFromOoulim, RoundTripLinScalarFullState)
{
    const auto sys = zoo::make_example("full_state:lin_scalar");
    const auto plan = default_plan("full_state:lin_scalar");
    const auto rec = ol_from_ooulim_localol_obors(verified(sys, P::OOULIM, plan), verified(sys, P::LOCAL_OL, plan),
                                                  verified(sys, P::OBORS, plan));
    expect_certified(sys, rec, plan);
}

// ===================================================================
// ISS / IOS / IOSS
// ===================================================================

TEST(IosFromIss, Substitution)
{
    const auto rec = ios_from_iss_kbounded(make(P::ISS, {}, fn::scale(3.0), kl::exponential(1.0)),
                                           make(P::H_K_BOUNDED, fn::identity(), fn::scale(0.5)));
    EXPECT_NEAR(rec.output.beta(2.0, 1.0), 4.0 * std::exp(-1.0), 1e-12);
    EXPECT_NEAR(rec.output.gamma(2.0), 12.0 + 1.0, 1e-12);
    const auto zero = ios_from_iss_kbounded(make(P::ISS, {}, fn::zero(), kl::exponential(1.0)),
                                            make(P::H_K_BOUNDED, fn::identity(), fn::zero()));
    EXPECT_TRUE(zero.output.gamma.is_zero());
}

TEST(IosFromIss, RoundTripSinOutput)
{
    const auto sys = zoo::sin_output();
    const auto plan = sin_plan();
    const auto iss = make(P::ISS, {}, fn::zero(), kl::exponential(1.0));
    ASSERT_TRUE(verify(sys, iss, plan).certified());
    const auto rec = ios_from_iss_kbounded(iss, make(P::H_K_BOUNDED, fn::identity(), fn::zero()));
    EXPECT_NEAR(rec.output.beta(1.5, 2.0), 3.0 * std::exp(-2.0), 1e-12);
    expect_certified(sys, rec, plan);
}

TEST(IssFromIosIoss, IdentityGains)
{
    Certificate ioss = make(P::IOSS, {}, fn::identity(), kl::exponential(1.0));
    ioss.gamma2 = fn::identity();
    const auto rec = iss_from_ios_ioss(make(P::IOS, {}, fn::identity(), kl::exponential(1.0)), ioss);
    for (double s : {0.5, 2.0})
        for (double t : {0.0, 1.0, 6.0}) EXPECT_NEAR(rec.output.beta(s, t), 8.0 * s * std::exp(-t / 2.0), 1e-9 * s);
    // gamma~ = beta(2 gamma^, 0) + gamma1 + gamma2 o 2 gamma with gamma^ = 3v: 6v + v + 2v
    EXPECT_NEAR(rec.output.gamma(1.0), 9.0, 1e-9);
    EXPECT_EQ(rec.trace.find("merged"), std::string::npos);
}

TEST(IssFromIosIoss, ZeroGainsAndMergedBeta)
{
    Certificate ioss = make(P::IOSS, {}, fn::zero(), kl::exponential(2.0));
    ioss.gamma2 = fn::zero();
    const auto rec = iss_from_ios_ioss(make(P::IOS, {}, fn::zero(), kl::exponential(1.0)), ioss);
    EXPECT_TRUE(rec.output.gamma.is_zero());
    EXPECT_NE(rec.trace.find("merged"), std::string::npos);
    EXPECT_NEAR(rec.output.beta(1.0, 2.0), 2.0 * std::exp(-1.0), 1e-9);
}

TEST(IssFromIosIoss, RoundTripLinScalar)
{
    const auto sys = zoo::lin_scalar();
    const auto plan = default_plan("lin_scalar");
    const auto ios = make(P::IOS, {}, fn::identity(), kl::exponential(1.0));
    Certificate ioss = make(P::IOSS, {}, fn::identity(), kl::exponential(1.0));
    ioss.gamma2 = fn::identity();
    ASSERT_TRUE(verify(sys, ios, plan).certified());
    ASSERT_TRUE(verify(sys, ioss, plan).certified());
    const auto rec = iss_from_ios_ioss(ios, ioss);
    expect_certified(sys, rec, plan);
    // the t = 0 bound dominates the initial state norm
    for (double r : plan.r_grid) EXPECT_GE(rec.output.beta(r, 0.0), r);
}

// ===================================================================
// records and dispatch
// ===================================================================

TEST(Records, JsonAndDeterminism)
{
    const auto ocag = make(P::OCAG, {}, fn::identity(), kl::exponential(1.0), 1.0);
    const auto a = construct("iops_from_ocag", {ocag});
    const auto b = construct("iops_from_ocag", {ocag});
    EXPECT_EQ(to_json(a), to_json(b));
    const json j = to_json(a);
    EXPECT_EQ(j.at("name"), "iops_from_ocag");
    EXPECT_EQ(j.at("inputs").size(), 1u);
    EXPECT_EQ(j.at("output").at("property"), "IOPS");
    EXPECT_FALSE(j.at("trace").get<std::string>().empty());
    EXPECT_NO_THROW((void)certificate_from_json(j.at("output")));
    EXPECT_EQ(construction_names().size(), 11u);
}

TEST(Records, DispatchErrors)
{
    const auto ocag = make(P::OCAG, {}, fn::identity(), kl::exponential(1.0), 1.0);
    EXPECT_THROW((void)construct("nope", {ocag}), lookup_error);
    EXPECT_THROW((void)construct("iops_from_ocag", {ocag, ocag}), domain_error);
    EXPECT_THROW((void)construct("iops_from_ocag", {make(P::IOS, {}, fn::identity(), kl::exponential(1.0))}), domain_error);
}
