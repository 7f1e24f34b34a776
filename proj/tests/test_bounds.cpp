#include <gtest/gtest.h>

#include "specgap/bounds.hpp"
#include "specgap/explorer.hpp"
#include "specgap/models.hpp"
#include "test_util.hpp"

#include <cmath>
#include <numbers>

using namespace specgap;

namespace {

HermitianOperator diag2(double a, double b) { return HermitianOperator::diagonal(RealVector{{a, b}}); }

HermitianOperator example_v(double eps)
{
    Matrix v(2, 2);
    v << 0.5 - eps, std::sqrt(eps) / 2, std::sqrt(eps) / 2, -0.5 + eps;
    return HermitianOperator(v);
}

const BoundValue& get(const std::vector<BoundValue>& bs, const std::string& name)
{
    for (const auto& b : bs)
        if (b.name == name)
            return b;
    throw std::runtime_error("missing bound " + name);
}

}  // namespace

TEST(Constants, GenericRatio)
{
    EXPECT_NEAR(kGenericRatio, 0.38898452964, 1e-10);
    EXPECT_NEAR(kSqrt2Half, 0.70710678118, 1e-10);
}

TEST(DavisKahan, IdenticalOperatorsGiveZero)
{
    const auto a = HermitianOperator(testutil::random_hermitian(5, 3));
    const auto c = davis_kahan_certificate(a, a, IntervalUnion::closed(-100, -0.5), IntervalUnion::closed(0.5, 100));
    EXPECT_LE(c.measured, 1e-12);
    EXPECT_EQ(c.bound, 0.0);
}

TEST(DavisKahan, TwoByTwoEqualityCase)
{
    const auto c = davis_kahan_certificate(diag2(0, 1), diag2(0.3, 1), IntervalUnion::point(0), IntervalUnion::point(0.3));
    EXPECT_EQ(c.variant, DavisKahanCertificate::Variant::hull_separated);
    EXPECT_NEAR(c.measured, 1.0, 1e-14);
    EXPECT_NEAR(c.bound, 1.0, 1e-14);
    EXPECT_LE(c.measured, c.bound + kBoundSlack);
}

TEST(DavisKahan, ExampleAgainstNeighborhoodOfSigma)
{
    const double eps = 0.25;
    const auto a = diag2(0, 1);
    const auto v = example_v(eps);
    const double vn = v.norm();
    const auto delta = IntervalUnion::point(0);
    // Δ = closed ‖V‖-neighborhood of Σ = {1}.
    const IntervalUnion Delta{Interval::closed(1 - vn, 1 + vn)};
    const auto c = davis_kahan_certificate(a, a + v, delta, Delta);
    EXPECT_NEAR(c.distance, 1 - vn, 1e-15);
    EXPECT_EQ(c.variant, DavisKahanCertificate::Variant::hull_separated);
    EXPECT_NEAR(c.bound, vn / (1 - vn), 1e-14);
    // Oracle: Q⊥ here is the top eigenvector of A+V.
    const auto eb = eigh(a + v);
    const double oracle = std::abs(eb.vectors(0, 1));
    EXPECT_NEAR(c.measured, oracle, 1e-13);
    EXPECT_LE(c.measured, c.bound);
}

TEST(DavisKahan, RejectsZeroDistance)
{
    EXPECT_THROW(davis_kahan_certificate(diag2(0, 1), diag2(0, 1), IntervalUnion::closed(0, 1), IntervalUnion::point(1)),
                 PreconditionError);
}

TEST(DavisKahan, GenericVariantHoldsOnRandomInstances)
{
    explore::Rng rng(41);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int t = 0; t < 300; ++t) {
        const Index n = 2 + t % 10;
        const HermitianOperator a(testutil::random_hermitian(n, 500 + t));
        const HermitianOperator b = a + HermitianOperator(0.3 * testutil::random_hermitian(n, 900 + t));
        const double x = u(rng);
        const IntervalUnion delta{Interval::closed(x, x + 0.5)};
        const IntervalUnion Delta = delta.neighborhood(0.2 + std::abs(u(rng))).complement();
        const auto c = davis_kahan_certificate(a, b, delta, Delta);
        EXPECT_LE(c.measured, c.bound + kBoundSlack) << "trial " << t;
    }
}

TEST(Regime, Examples)
{
    EXPECT_EQ(classify_ratio(0.1, HullRelation::none), Regime::theorem1_i);
    EXPECT_EQ(classify_ratio(0.45, HullRelation::sigma_hull_free), Regime::theorem1_ii);
    EXPECT_EQ(classify_ratio(0.45, HullRelation::Sigma_hull_free), Regime::theorem1_ii);
    EXPECT_EQ(classify_ratio(0.45, HullRelation::none), Regime::open_window);
    EXPECT_EQ(classify_ratio(0.45, HullRelation::subordinated), Regime::subordinated);
    EXPECT_EQ(classify_ratio(0.5, HullRelation::subordinated), Regime::overcritical);
    EXPECT_THROW(classify_ratio(std::nan(""), HullRelation::none), PreconditionError);

    for (double eps : {0.01, 0.25, 0.5, 0.74})
        EXPECT_EQ(regime_classify(diag2(0, 1), example_v(eps), IntervalUnion::point(0)), Regime::subordinated);
}

TEST(Regime, OpenWindowForInterleavedSpectrum)
{
    // σ = {0, 2}, Σ = {1, 3}: neither hull condition holds.
    const auto a = HermitianOperator::diagonal(RealVector{{0.0, 1.0, 2.0, 3.0}});
    explore::Rng rng(1);
    const HermitianOperator v(explore::scale_to_norm(explore::random_hermitian(4, rng), 0.45));
    const IntervalUnion sigma = IntervalUnion::points({0.0, 2.0});
    EXPECT_EQ(convex_hull_disjoint(sigma, IntervalUnion::points({1.0, 3.0})), HullRelation::none);
    EXPECT_EQ(regime_classify(a, v, sigma), Regime::open_window);
    // With Σ = {1} only, conv.hull(Σ) misses σ so the hull-free estimate applies.
    const auto a3 = HermitianOperator::diagonal(RealVector{{0.0, 1.0, 2.0}});
    const HermitianOperator v3(explore::scale_to_norm(explore::random_hermitian(3, rng), 0.45));
    EXPECT_EQ(regime_classify(a3, v3, sigma), Regime::theorem1_ii);
}

TEST(Regime, ZeroGapRejected)
{
    EXPECT_THROW(regime_classify(diag2(0, 0), diag2(0, 0), IntervalUnion::point(0)), PreconditionError);
}

TEST(Regime, ThresholdLocatedByBisection)
{
    double lo = 0.0, hi = 0.5;
    for (int k = 0; k < 200 && hi - lo > 0; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi)
            break;
        (classify_ratio(mid, HullRelation::none) == Regime::theorem1_i ? lo : hi) = mid;
    }
    EXPECT_EQ(hi, kGenericRatio);
    EXPECT_EQ(classify_ratio(std::nextafter(kGenericRatio, 0.0), HullRelation::none), Regime::theorem1_i);
    EXPECT_EQ(classify_ratio(kGenericRatio, HullRelation::none), Regime::open_window);
}

TEST(AprioriBounds, Examples)
{
    const auto bs = apriori_bounds(1.0, 0.3, 0.0, 0.3, Regime::theorem1_i, HullRelation::none);
    EXPECT_NEAR(get(bs, "corner_generic").value, std::numbers::pi / 2 * 0.3 / 0.7, 1e-15);
    EXPECT_NEAR(get(bs, "corner_generic").value, 0.6731984, 1e-7);
    EXPECT_FALSE(get(bs, "corner_hull").applicable);
    EXPECT_TRUE(std::isnan(get(bs, "corner_hull").value));
    EXPECT_FALSE(get(bs, "tan2theta_general").applicable);

    const auto sub = apriori_bounds(1.0, 0.3, 0.0, 0.3, Regime::subordinated, HullRelation::subordinated);
    const double t = std::sin(0.5 * std::atan(0.6));
    EXPECT_NEAR(get(sub, "tan2theta_offdiag").value, t, 1e-15);
    EXPECT_NEAR(get(sub, "tan2theta_offdiag").value, 0.2669336, 1e-7);
    EXPECT_LT(get(sub, "tan2theta_offdiag").value, kSqrt2Half);
    EXPECT_NEAR(get(sub, "corner_hull").value, 0.3 / 0.7, 1e-15);

    for (const auto& b : apriori_bounds(1.0, 0.0, 0.0, 0.0, Regime::subordinated, HullRelation::subordinated))
        if (b.applicable && b.kind == BoundKind::estimate && b.name != "sqrt2_ceiling")
            EXPECT_EQ(b.value, 0.0) << b.name;
}

TEST(AprioriBounds, InapplicableAndVacuous)
{
    const auto far = apriori_bounds(1.0, 1.2, 0.6, 0.6, Regime::overcritical, HullRelation::none);
    for (const auto& b : far)
        EXPECT_FALSE(b.applicable) << b.name;
    const auto vac = apriori_bounds(1.0, 0.45, 0.1, 0.4, Regime::open_window, HullRelation::none);
    EXPECT_TRUE(get(vac, "corner_generic").applicable);
    EXPECT_TRUE(get(vac, "corner_generic").vacuous);
    EXPECT_FALSE(get(vac, "unit_ceiling").applicable);
    EXPECT_THROW(apriori_bounds(0.0, 0.1, 0, 0, Regime::theorem1_i, HullRelation::none), PreconditionError);
    // Split bound needs d − 2‖V_diag‖ > 0.
    const auto split = apriori_bounds(1.0, 0.49, 0.5, 0.1, Regime::subordinated, HullRelation::subordinated);
    EXPECT_FALSE(get(split, "tan2theta_split").applicable);
}

TEST(SplitDiagOffdiag, Examples)
{
    const double eps = 0.25;
    const auto v = example_v(eps);
    const auto p = OrthogonalProjection::from_basis(Matrix::Identity(2, 2).leftCols(1));
    const auto [vd, vo] = split_diag_offdiag(v, p);
    EXPECT_NEAR(vd.matrix()(0, 0).real(), 0.5 - eps, 1e-15);
    EXPECT_NEAR(vd.matrix()(1, 1).real(), -0.5 + eps, 1e-15);
    EXPECT_EQ(vd.matrix()(0, 1), Complex(0));
    EXPECT_NEAR(vo.matrix()(0, 1).real(), std::sqrt(eps) / 2, 1e-15);
    EXPECT_EQ(vo.matrix()(0, 0), Complex(0));

    const auto [vd2, vo2] = split_diag_offdiag(vo, p);
    EXPECT_LE(max_abs(vd2.matrix()), 1e-15);
    EXPECT_LE(max_abs(vo2.matrix() - vo.matrix()), 1e-15);

    const auto [vd3, vo3] = split_diag_offdiag(v, OrthogonalProjection::identity(2));
    EXPECT_LE(max_abs(vd3.matrix() - v.matrix()), 1e-15);
    EXPECT_LE(max_abs(vo3.matrix()), 1e-15);
}

TEST(SplitDiagOffdiag, SumsBackToV)
{
    explore::Rng rng(8);
    for (int t = 0; t < 100; ++t) {
        const Index n = 2 + t % 9;
        const HermitianOperator v(testutil::random_hermitian(n, 60 + t));
        const auto p = testutil::random_projection(n, t % (n + 1), rng);
        const auto [vd, vo] = split_diag_offdiag(v, p);
        EXPECT_LE(max_abs(vd.matrix() + vo.matrix() - v.matrix()), 1e-13);
        EXPECT_LE(max_abs(p.matrix() * vo.matrix() * p.matrix()), 1e-13);
        EXPECT_LE(max_abs(p.matrix() * vd.matrix() * p.complement().matrix()), 1e-13);
    }
}

TEST(TwoByTwoFamily, RefinedBoundIsSharp)
{
    for (double eps : {0.01, 0.1, 0.25, 0.5}) {
        const auto r = analyze_instance(diag2(0, 1), example_v(eps), IntervalUnion::point(0));
        const auto* b = r.find("tan2theta_split");
        ASSERT_NE(b, nullptr);
        ASSERT_TRUE(b->applicable);
        EXPECT_NEAR(b->value, r.measured.difference, 1e-9) << "eps " << eps;
        // Independent closed-form oracle.
        const double m = 2 * std::sqrt(eps) + std::sqrt(1 + 4 * eps);
        EXPECT_NEAR(b->value, 1 / std::sqrt(1 + m * m), 1e-12);
        EXPECT_TRUE(r.violations.empty());
    }
}

TEST(AnalyzeInstance, ZeroPerturbation)
{
    const auto a = HermitianOperator(testutil::random_hermitian(6, 12));
    const auto e = eigh(a);
    const auto r = analyze_instance(a, HermitianOperator::zero(6), IntervalUnion::point(e.values(0)));
    EXPECT_LE(r.measured.difference, 1e-12);
    EXPECT_EQ(r.regime, Regime::subordinated);
    EXPECT_EQ(r.kernel, (KernelDims{0, 0, 0}));
    EXPECT_TRUE(r.violations.empty());
}

namespace {

struct SweepStats {
    int trials = 0;
    int violations = 0;
    double worst = 0.0;
};

}  // namespace

TEST(Soundness, GenericRegimeCornerBoundAndUnitCeiling)
{
    SweepStats s;
    std::uniform_real_distribution<double> ratio(0.0, kGenericRatio);
    explore::Rng rng(2718);
    for (int t = 0; t < 1000; ++t) {
        const Index dim = 2 + t % 15;
        const auto spec = explore::make_spec(dim, ratio(rng), explore::Layout::mixed, explore::derive_seed(77, t));
        const auto inst = explore::random_instance(spec);
        const auto r = analyze_instance(inst.a, inst.v, spec.sigma_set());
        ASSERT_EQ(r.regime == Regime::theorem1_i || r.regime == Regime::subordinated, true);
        const double bound = std::numbers::pi / 2 * r.v_norm / (r.d - r.v_norm);
        EXPECT_LE(r.measured.pq_perp, bound + kBoundSlack) << "seed " << spec.seed;
        EXPECT_LT(r.measured.difference, 1.0) << "seed " << spec.seed;
        s.violations += static_cast<int>(r.violations.size());
        s.worst = std::max(s.worst, r.measured.difference);
        ++s.trials;
    }
    EXPECT_EQ(s.violations, 0);
    EXPECT_EQ(s.trials, 1000);
}

TEST(Soundness, SubordinatedCeiling)
{
    std::uniform_real_distribution<double> ratio(0.0, 0.5);
    explore::Rng rng(31415);
    for (int t = 0; t < 1000; ++t) {
        const Index dim = 2 + t % 15;
        double rr = ratio(rng);
        const auto spec = explore::make_spec(dim, rr, explore::Layout::subordinated, explore::derive_seed(78, t));
        const auto inst = explore::random_instance(spec);
        const auto r = analyze_instance(inst.a, inst.v, spec.sigma_set());
        ASSERT_EQ(r.hull, HullRelation::subordinated);
        EXPECT_LT(r.measured.difference, kSqrt2Half + kBoundSlack) << "seed " << spec.seed;
        EXPECT_TRUE(r.violations.empty()) << "seed " << spec.seed << ": " << r.violations.front();
    }
}

TEST(Soundness, HullSeparatedCornerBound)
{
    explore::Rng rng(1618);
    std::uniform_real_distribution<double> ratio(0.0, 0.5);
    const explore::Layout layouts[] = {explore::Layout::sigma_hull_free, explore::Layout::Sigma_hull_free,
                                       explore::Layout::subordinated};
    for (int t = 0; t < 600; ++t) {
        const Index dim = 3 + t % 14;
        const auto spec = explore::make_spec(dim, ratio(rng), layouts[t % 3], explore::derive_seed(79, t));
        const auto inst = explore::random_instance(spec);
        const auto r = analyze_instance(inst.a, inst.v, spec.sigma_set());
        ASSERT_TRUE(has_hull_condition(r.hull));
        EXPECT_LE(r.measured.pq_perp, r.v_norm / (r.d - r.v_norm) + kBoundSlack) << "seed " << spec.seed;
        EXPECT_LT(r.measured.difference, 1.0);
        EXPECT_TRUE(r.violations.empty());
    }
}

TEST(GapCheck, Examples)
{
    const std::vector<double> grid{-1.0, -0.5, 0.0, 0.25, 0.5, 0.75, 1.0};
    const auto z = gap_nonclosing_check(diag2(0, 1), HermitianOperator::zero(2), 0, 1, grid);
    EXPECT_TRUE(z.pass);

    const auto v = example_v(0.25);
    std::vector<double> fine;
    for (int k = 0; k <= 200; ++k)
        fine.push_back(-1.0 + k / 100.0);
    const auto r = gap_nonclosing_check(diag2(0, 1), v, 0, 1, fine);
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.lo, v.norm(), 1e-15);
    EXPECT_NEAR(r.hi, 1 - v.norm(), 1e-15);
    // Eigenvalue scan oracle: eigenvalues of A+sV avoid (‖V‖, 1−‖V‖).
    for (double s : fine) {
        const auto e = eigh(diag2(0, 1) + s * v);
        for (Index k = 0; k < 2; ++k)
            EXPECT_FALSE(e.values(k) > r.lo && e.values(k) < r.hi);
    }

    EXPECT_THROW(gap_nonclosing_check(diag2(0, 1), HermitianOperator(0.6 * Matrix::Identity(2, 2)), 0, 1, grid),
                 PreconditionError);
    EXPECT_THROW(gap_nonclosing_check(diag2(0, 0.5), HermitianOperator::zero(2), 0, 1, grid), PreconditionError);
}
