#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "ioslab/cmpfun.hpp"

using namespace ioslab;

namespace {

// Bisection on a monotone callable, independent of the library's inverter.
template <class F>
double oracle_bisect(F f, double v, double lo, double hi)
{
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < v ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

TEST(Eval, ClosedForms)
{
    EXPECT_EQ(eval(fn::identity(), 2.0), 2.0);
    EXPECT_EQ(eval(fn::power(2.0), 3.0), 9.0);
    EXPECT_EQ(eval(fn::saturation(), 1.7), 1.0);
    EXPECT_EQ(eval(fn::saturation(), 0.25), 0.25);
    EXPECT_EQ(eval(fn::zero(), 4.0), 0.0);
}

TEST(Eval, NegativeArgumentIsDomainError)
{
    EXPECT_THROW((void)eval(fn::identity(), -1.0), domain_error);
    EXPECT_THROW((void)kl_eval(kl::exponential(), 1.0, -1.0), domain_error);
}

TEST(Eval, TableInterpolatesLinearly)
{
    const auto t = fn::table({0, 1, 2}, {0, 2, 6});
    EXPECT_EQ(t.declared_class(), FnClass::k_inf);
    EXPECT_DOUBLE_EQ(t(0.5), 1.0);
    EXPECT_DOUBLE_EQ(t(1.5), 4.0);
    EXPECT_DOUBLE_EQ(t(3.0), 10.0);
}

TEST(Eval, TableRejectsNonIncreasingKnots)
{
    EXPECT_THROW((void)fn::table({0, 1, 1}, {0, 1, 2}), domain_error);
}

TEST(Invert, ClosedForms)
{
    EXPECT_DOUBLE_EQ(invert(fn::power(2.0), 9.0), 3.0);
    EXPECT_DOUBLE_EQ(invert(fn::identity(), 5.0), 5.0);
}

TEST(Invert, TableMatchesBisectionOracle)
{
    const auto t = fn::table({0, 1, 2}, {0, 2, 6});
    auto interp = [](double r) { return r <= 1 ? 2 * r : 2 + 4 * (r - 1); };
    const double expect = oracle_bisect(interp, 4.0, 0.0, 10.0);
    EXPECT_NEAR(expect, 1.5, 1e-12);
    EXPECT_NEAR(invert(t, 4.0), expect, 1e-10);
}

TEST(Invert, RequiresUnboundedClass)
{
    EXPECT_THROW((void)invert(fn::saturation(), 0.5), class_error);
    EXPECT_THROW((void)invert(fn::exp_decay(1.0), 0.5), class_error);
}

TEST(Invert, RoundTripOnLogGrid)
{
    const std::vector<ScalarFn> fs{fn::identity(), fn::power(2.0), fn::scale(3.0),
                                   add(fn::identity(), fn::power(3.0)),
                                   compose(fn::power(0.5), fn::scale(2.0)),
                                   fn::table({0, 1, 2}, {0, 2, 6})};
    for (const auto& f : fs) {
        for (double r : class_check_grid()) {
            const double back = invert(f, f(r));
            EXPECT_NEAR(back, r, 1e-8 * std::max(r, 1e-300) + 1e-14) << describe(f) << " at r=" << r;
        }
    }
}

TEST(Combine, ComposeWithIdentityIsOperand)
{
    const auto f = compose(fn::power(2.0), fn::identity());
    EXPECT_EQ(f.kind(), ScalarKind::power);
    EXPECT_EQ(f(3.0), 9.0);
}

TEST(Combine, AddAndClosure)
{
    const auto f = add(fn::identity(), fn::power(2.0));
    EXPECT_EQ(f(2.0), 6.0);
    EXPECT_EQ(f.declared_class(), FnClass::k_inf);
    EXPECT_EQ(add(fn::saturation(), fn::power(2.0)).declared_class(), FnClass::k_inf);
    EXPECT_EQ(compose(fn::saturation(), fn::identity()).declared_class(), FnClass::increasing);
    EXPECT_EQ(compose(fn::identity(), fn::saturation()).declared_class(), FnClass::increasing);
}

TEST(Combine, MaxWithTablePreservesMonotonicity)
{
    const auto t = fn::table({0, 1, 2, 4}, {0, 3, 3.5, 3.6});
    const auto m = maximum(fn::identity(), t);
    double prev = -1.0;
    for (double r : class_check_grid()) {
        const double v = m(r);
        const double oracle = std::max(r, t(r));
        EXPECT_EQ(v, oracle);
        EXPECT_GT(v, prev);
        prev = v;
    }
    EXPECT_TRUE(sampled_class_check(m, FnClass::k_inf));
}

TEST(Combine, ClassIncompatibleOperandsRejected)
{
    EXPECT_THROW((void)add(fn::exp_decay(1.0), fn::identity()), class_error);
    EXPECT_THROW((void)combine(CombineOp::scale_arg, fn::identity(), fn::identity()), class_error);
}

TEST(Combine, ScaleOps)
{
    EXPECT_DOUBLE_EQ(scale_arg(fn::power(2.0), 2.0)(3.0), 36.0);
    EXPECT_DOUBLE_EQ(scale_val(fn::power(2.0), 2.0)(3.0), 18.0);
    EXPECT_DOUBLE_EQ(combine(CombineOp::scale_val, fn::identity(), fn::constant(3.0))(2.0), 6.0);
}

TEST(ClassCheck, ConstructedFunctionsPass)
{
    EXPECT_TRUE(sampled_class_check(fn::identity(), FnClass::k_inf));
    EXPECT_FALSE(sampled_class_check(fn::saturation(), FnClass::k)); // constant for r >= 1
    EXPECT_TRUE(sampled_class_check(fn::power(0.5), FnClass::k_inf));
    EXPECT_TRUE(sampled_class_check(fn::exp_decay(1.0), FnClass::l));
    EXPECT_FALSE(sampled_class_check(fn::constant(1.0), FnClass::k));
}

TEST(KL, ClosedFormExponential)
{
    EXPECT_NEAR(kl_eval(kl::exponential(), 1.0, std::log(2.0)), 0.5, 1e-15);
    EXPECT_TRUE(kl_sampled_check(kl::exponential()).ok());
}

TEST(KL, MinFormOfTwoBounds)
{
    // min{(1 + e^{-t}) sigma(r), beta(r + c, t)} with sigma = id, beta = r e^{-t}, c = 1
    const auto first = kl::separable(fn::identity(), add(fn::constant(1.0), fn::exp_decay(1.0)));
    const auto second = kl::inner(kl::exponential(), add(fn::identity(), fn::constant(1.0)));
    const auto b = kl::minimum(first, second);
    auto oracle = [](double r, double t) { return std::min((1 + std::exp(-t)) * r, (r + 1) * std::exp(-t)); };
    EXPECT_DOUBLE_EQ(kl_eval(b, 2.0, 0.0), 3.0);
    for (double r : {0.1, 1.0, 5.0})
        for (double t : {0.0, 0.3, 2.0, 10.0}) EXPECT_NEAR(kl_eval(b, r, t), oracle(r, t), 1e-14);
}

TEST(KL, SeparableVanishesAtZero)
{
    const auto b = kl::separable(fn::power(2.0), fn::exp_decay(0.5));
    for (double t : {0.0, 1.0, 100.0}) EXPECT_EQ(kl_eval(b, 0.0, t), 0.0);
}

TEST(PiecewiseKL, KnotValuesAndContinuity)
{
    const KnotSequence ks{{0.0, 0.5, 1.7, 2.0, 4.5}, fn::scale(2.0)};
    const auto b = build_piecewise_kl(ks);
    for (std::size_t n = 0; n < ks.taus.size(); ++n) {
        for (double r : {0.1, 1.0, 3.0}) {
            const double expect = std::exp(-(static_cast<double>(n) - 1.0)) * 2.0 * r;
            EXPECT_NEAR(kl_eval(b, r, ks.taus[n]), expect, 1e-12 * expect);
            if (n > 0) {
                const double left = kl_eval(b, r, std::nextafter(ks.taus[n], 0.0));
                EXPECT_NEAR(left, expect, 1e-12 * expect);
            }
        }
    }
    EXPECT_NEAR(kl_eval(b, 1.0, 0.0), std::numbers::e * 2.0, 1e-14);
}

TEST(PiecewiseKL, DominatesEpsilonSequenceOnSegments)
{
    const KnotSequence ks{{0.0, 1.0, 3.0, 6.0}, fn::identity()};
    const auto b = build_piecewise_kl(ks);
    for (std::size_t n = 0; n + 1 < ks.taus.size(); ++n)
        for (int k = 0; k < 20; ++k) {
            const double t = ks.taus[n] + (ks.taus[n + 1] - ks.taus[n]) * k / 20.0;
            EXPECT_GE(kl_eval(b, 1.5, t), std::exp(-static_cast<double>(n)) * 1.5);
        }
}

TEST(PiecewiseKL, TailContinuesLastRate)
{
    const KnotSequence ks{{0.0, 1.0, 3.0}, fn::identity()};
    const auto b = build_piecewise_kl(ks);
    // last segment has length 2 and drops one e-fold
    EXPECT_NEAR(kl_eval(b, 1.0, 5.0), std::exp(-2.0), 1e-14);
}

TEST(PiecewiseKL, MarginalMonotonicityOnGrid)
{
    const KnotSequence ks{{0.0, 0.2, 0.9, 1.0, 3.0, 7.5}, add(fn::identity(), fn::power(2.0))};
    EXPECT_TRUE(kl_sampled_check(build_piecewise_kl(ks), 100).ok());
}

TEST(PiecewiseKL, InvalidKnotsRejected)
{
    EXPECT_THROW((void)build_piecewise_kl({{0.0, 1.0, 1.0}, fn::identity()}), domain_error);
    EXPECT_THROW((void)build_piecewise_kl({{0.5, 1.0}, fn::identity()}), domain_error);
    EXPECT_THROW((void)build_piecewise_kl({{0.0, 1.0}, fn::saturation()}), class_error);
}

TEST(Envelope, AlreadyMonotoneSamples)
{
    const auto f = fit_monotone_envelope({{1, 1}, {2, 2}, {3, 3}}, true);
    for (double r : {1.0, 1.5, 2.0, 3.0}) EXPECT_NEAR(f(r), r, 1e-8);
    EXPECT_EQ(f(0.0), 0.0);
}

TEST(Envelope, PoolsViolatorsUpward)
{
    const std::vector<std::pair<double, double>> s{{1, 2}, {2, 1}, {3, 3}};
    const auto f = fit_monotone_envelope(s, false);
    // running-maximum oracle at each abscissa
    double run = 0.0;
    for (const auto& [r, v] : s) {
        run = std::max(run, v);
        EXPECT_NEAR(f(r), run, 1e-8);
        EXPECT_GE(f(r), v);
    }
    EXPECT_NEAR(f(2.0), 2.0, 1e-8);
}

TEST(Envelope, StrictlyIncreasingAndDominating)
{
    std::vector<std::pair<double, double>> s;
    for (int i = 1; i <= 50; ++i) s.emplace_back(0.1 * i, std::abs(std::sin(0.7 * i)) * i * 0.05);
    const auto f = fit_monotone_envelope(s, true);
    for (const auto& [r, v] : s) EXPECT_GE(f(r), v);
    EXPECT_TRUE(sampled_class_check(f, FnClass::k_inf));
}

TEST(Envelope, NegativeValuesWithForcedZeroRejected)
{
    EXPECT_THROW((void)fit_monotone_envelope({{1, -1}, {2, 1}}, true), fit_error);
}

TEST(Serialization, RoundTripIsBitExact)
{
    const auto f = add(compose(fn::power(1.5), fn::scale(std::numbers::pi)), maximum(fn::saturation(), fn::table({0, 0.3, 1}, {0, 0.1, 0.7})));
    const auto g = scalar_from_json(to_json(f));
    for (double r : class_check_grid()) EXPECT_EQ(f(r), g(r));
    EXPECT_EQ(to_json(f), to_json(g));

    const auto b = kl::minimum(build_piecewise_kl({{0.0, 0.7, 2.0}, fn::scale(1.25)}), kl::outer(fn::scale(2.0), kl::exponential(0.5)));
    const auto c = kl_from_json(to_json(b));
    for (double r : {0.0, 0.1, 2.0})
        for (double t : {0.0, 0.5, 3.0}) EXPECT_EQ(b(r, t), c(r, t));
}

TEST(Serialization, FieldNames)
{
    const auto j = to_json(add(fn::identity(), fn::table({0, 1}, {0, 2})));
    EXPECT_TRUE(j.contains("kind"));
    EXPECT_TRUE(j.contains("class"));
    EXPECT_TRUE(j.contains("children"));
    EXPECT_TRUE(j.at("children").at(1).contains("knots"));
    EXPECT_TRUE(j.at("children").at(1).contains("values"));
}
