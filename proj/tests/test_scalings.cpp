#include <gtest/gtest.h>

#include <cmath>

#include "mvsk/harness.hpp"
#include "mvsk/scalings.hpp"
#include "test_helpers.hpp"

using namespace mvsk;

namespace {

constexpr double kErfSqrt5 = 0.998434597741997450;
constexpr double kErfSqrtPoint2 = 0.472910743134461915;

Point p2(double a, double b) {
    Point p(2);
    p << a, b;
    return p;
}

}  // namespace

TEST(Partition, ThresholdRegionsAreHalfOpen) {
    const Partition p = jump_partition();
    EXPECT_EQ(p.region_count(), 4);
    EXPECT_EQ(p.region_of(p2(-0.9, 0.0)), 0);
    EXPECT_EQ(p.region_of(p2(-0.3, 0.0)), 1);
    EXPECT_EQ(p.region_of(p2(0.0, 0.0)), 2);
    EXPECT_EQ(p.region_of(p2(0.49, 0.0)), 2);
    EXPECT_EQ(p.region_of(p2(0.5, 0.0)), 3);
    ASSERT_EQ(p.adjacent_pairs().size(), 3u);
}

TEST(Partition, RejectsUnsortedCuts) {
    EXPECT_THROW(Partition::thresholds(0, {0.5, 0.0}), InvalidArgument);
    EXPECT_THROW(Partition::thresholds(0, {0.0, 0.0}), InvalidArgument);
}

TEST(Partition, CoverageErrors) {
    const Partition bounded = Partition::thresholds(0, {0.0}, DomainBox::square(2, -1, 1));
    EXPECT_THROW((void)bounded.region_of(p2(1.5, 0.0)), PartitionCoverageError);
    EXPECT_THROW((void)jump_partition().region_of(p2(std::nan(""), 0.0)), PartitionCoverageError);
    const Partition cb = Partition::callback(2, [](const Point& x) { return x(0) > 0 ? 1 : 5; });
    EXPECT_EQ(cb.region_of(p2(0.5, 0.0)), 1);
    EXPECT_THROW((void)cb.region_of(p2(-0.5, 0.0)), PartitionCoverageError);
}

TEST(Scaling, ShapeFunctionOnTestProblem) {
    const ScalingFunction psi = jump_shape_function();
    EXPECT_EQ(psi(p2(-0.5, 0.0)), 0.0);
    EXPECT_EQ(psi(p2(-0.1, 0.0)), 1.0);
    EXPECT_EQ(psi(p2(0.2, 0.9)), 2.0);
    EXPECT_EQ(psi(p2(0.7, -0.7)), 3.0);
}

TEST(Scaling, Constant) {
    const ScalingFunction c = ScalingFunction::constant(3.0);
    SplitMix64 rng(1);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(apply_scaling(c, testing_util::random_vector(rng, 2, -5, 5)), 3.0);
}

TEST(Scaling, PiecewiseNeedsDistinctNeighbours) {
    EXPECT_THROW(ScalingFunction::piecewise(jump_partition(), {0, 1, 1, 2}), InvalidArgument);
    EXPECT_THROW(ScalingFunction::piecewise(jump_partition(), {0, 1, 2}), ShapeError);
    EXPECT_NO_THROW(ScalingFunction::piecewise(jump_partition(), {0, 1, 0, 1}));
}

TEST(Scaling, SampledIsBilinearAndClamped) {
    Matrix v(2, 2);
    v << 0, 1, 2, 3;  // v(i, j) at x = x0 + i dx, y = y0 + j dy
    const ScalingFunction s = ScalingFunction::sampled(-1, 1, -1, 1, v);
    EXPECT_DOUBLE_EQ(s(p2(-1, -1)), 0.0);
    EXPECT_DOUBLE_EQ(s(p2(1, -1)), 2.0);
    EXPECT_DOUBLE_EQ(s(p2(-1, 1)), 1.0);
    EXPECT_DOUBLE_EQ(s(p2(0, 0)), 1.5);
    EXPECT_DOUBLE_EQ(s(p2(5, 5)), 3.0);
    EXPECT_THROW(ScalingFunction::sampled(1, -1, -1, 1, v), InvalidArgument);
    EXPECT_THROW((void)s(Point::Zero(3)), ShapeError);
}

TEST(NodeMap, Identity) {
    EXPECT_EQ(apply_map(NodeMap::identity(), p2(0.3, -0.7)), p2(0.3, -0.7));
}

TEST(NodeMap, ErfUniformize) {
    const NodeMap s = gaussian_erf_map();
    EXPECT_EQ(s(p2(0, 0)), p2(0, 0));
    const Point one = s(p2(1, 1));
    EXPECT_NEAR(one(0), kErfSqrt5, 1e-15);
    EXPECT_NEAR(one(1), kErfSqrt5, 1e-15);
    EXPECT_NEAR(s(p2(0.2, 0))(0), kErfSqrtPoint2, 1e-15);
}

TEST(NodeMap, SGibbsShiftsRegions) {
    const double beta = 0.7;
    const NodeMap s = NodeMap::sgibbs(Partition::thresholds(0, {0.0}), beta);
    const Point left = s(p2(-0.1, -0.1));
    const Point right = s(p2(0.1, 0.1));
    EXPECT_NEAR(left(0), -0.1 + beta, 1e-15);
    EXPECT_NEAR(right(0), 0.1 + 2 * beta, 1e-15);
    EXPECT_NEAR(right(1), 0.1 + 2 * beta, 1e-15);
}

TEST(NodeMap, SGibbsOpensGapAcrossJump) {
    const double beta = 0.5;
    const NodeMap s = NodeMap::sgibbs(Partition::thresholds(0, {0.0}), beta);
    for (double d : {1e-3, 1e-6, 1e-9}) {
        const double gap = euclidean_distance(s(p2(-d, 0.2)), s(p2(d, 0.2)));
        EXPECT_GE(gap, beta * std::sqrt(2.0) - 1e-12);
    }
}

TEST(NodeMap, LogPolar) {
    const NodeMap s = NodeMap::log_polar(1.0);
    const Point e = s(p2(std::exp(1.0), 0.0));
    EXPECT_NEAR(e(0), 1.0, 1e-15);
    EXPECT_NEAR(e(1), 0.0, 1e-15);
    const Point r = s(p2(0.25, 0.0));
    EXPECT_NEAR(r(0), std::log(0.25), 1e-15);
    EXPECT_THROW((void)s(p2(0, 0)), SingularityError);
    EXPECT_THROW(NodeMap::log_polar(-1.0), InvalidArgument);
}

TEST(AugmentedMap, Values) {
    EXPECT_EQ(augment(AugmentedMap::classical(), p2(1, 2)), (Point(3) << 1, 2, 0).finished());
    const AugmentedMap mvsdk = variant_map(Variant::Mvsdk);
    const Point a = mvsdk(p2(0.2, 0.0));
    EXPECT_NEAR(a(0), kErfSqrtPoint2, 1e-15);
    EXPECT_EQ(a(1), 0.0);
    EXPECT_EQ(a(2), 2.0);
    Matrix v = Matrix::Constant(3, 3, 0.5);
    const AugmentedMap lp(NodeMap::log_polar(1.0), ScalingFunction::sampled(-5, 5, -5, 5, v));
    const Point b = lp(p2(std::exp(1.0), 0.0));
    EXPECT_NEAR(b(0), 1.0, 1e-15);
    EXPECT_NEAR(b(1), 0.0, 1e-15);
    EXPECT_EQ(b(2), 0.5);
}

TEST(MvskProperty, ConstantScalingGivesMappedKernel) {
    SplitMix64 rng(21);
    const NodeMap maps[] = {gaussian_erf_map(), NodeMap::sgibbs(jump_partition(), 0.8), NodeMap::log_polar(0.7, 0.1)};
    for (const auto& s : maps) {
        for (Profile p : {Profile::WendlandC0, Profile::MaternC6, Profile::Gaussian}) {
            const RadialKernel k(p, 1.7);
            const AugmentedMap m(s, ScalingFunction::constant(2.5));
            for (int t = 0; t < 100; ++t) {
                const Point x = testing_util::random_vector(rng, 2), y = testing_util::random_vector(rng, 2);
                const double expect = eval_kernel(k, s(x), s(y));
                EXPECT_LE(testing_util::rel_diff(mvsk_eval(k, m, x, y), expect), 1e-14);
            }
        }
    }
}

TEST(MvskProperty, IdentityMapGivesVsk) {
    SplitMix64 rng(22);
    const ScalingFunction psi = jump_shape_function();
    for (Profile p : {Profile::WendlandC0, Profile::MaternC6, Profile::Gaussian}) {
        const RadialKernel k(p, 0.9);
        const AugmentedMap m = AugmentedMap::vsk(psi);
        for (int t = 0; t < 100; ++t) {
            const Point x = testing_util::random_vector(rng, 2), y = testing_util::random_vector(rng, 2);
            const double dpsi = psi(x) - psi(y);
            const double r = std::sqrt((x - y).squaredNorm() + dpsi * dpsi);
            EXPECT_LE(testing_util::rel_diff(mvsk_eval(k, m, x, y), k.eval_profile(r)), 1e-14);
        }
    }
}

TEST(MvskProperty, DiagonalIsProfileAtZero) {
    SplitMix64 rng(23);
    const AugmentedMap m = variant_map(Variant::Mvsdk);
    const RadialKernel k(Profile::MaternC6, 3.0);
    for (int t = 0; t < 20; ++t) {
        const Point x = testing_util::random_vector(rng, 2);
        EXPECT_EQ(mvsk_eval(k, m, x, x), 15.0);
    }
}
