#include <gtest/gtest.h>

#include <cmath>

#include "mvsk/harness.hpp"
#include "mvsk/metrics.hpp"
#include "test_helpers.hpp"

using namespace mvsk;

namespace {

constexpr double kSqrtTwelveHalf = 3.535533905932737622;

double grid_step(const DomainBox& d) { return (d.upper(0) - d.lower(0)) / (d.resolution - 1); }

}  // namespace

TEST(FillDistance, SingleCentreNode) {
    const DomainBox box = DomainBox::square(2, -1, 1, 201);
    EXPECT_NEAR(fill_distance(PointSet::Zero(1, 2), box), std::sqrt(2.0), grid_step(box));
}

TEST(FillDistance, OppositeCorners) {
    const DomainBox box = DomainBox::square(2, -1, 1, 101);
    PointSet p(2, 2);
    p << -1, -1, 1, 1;
    EXPECT_NEAR(fill_distance(p, box), 2.0, grid_step(box));
}

TEST(FillDistance, UniformNodeGridBoundedBySpacing) {
    const PointSet nodes = DomainBox::square(2, -1, 1, 11).grid();
    EXPECT_LE(fill_distance(nodes, DomainBox::square(2, -1, 1, 101)), 0.2);
}

TEST(FillDistance, NonIncreasingWhenNodesAdded) {
    SplitMix64 rng(3);
    const DomainBox box = DomainBox::square(2, -1, 1, 60);
    PointSet nodes = testing_util::random_points(rng, 5, 2);
    double prev = fill_distance(nodes, box);
    for (int k = 0; k < 20; ++k) {
        PointSet more(nodes.rows() + 1, 2);
        more.topRows(nodes.rows()) = nodes;
        more.row(nodes.rows()) = testing_util::random_points(rng, 1, 2);
        nodes = more;
        const double h = fill_distance(nodes, box);
        EXPECT_LE(h, prev);
        prev = h;
    }
}

TEST(FillDistance, Errors) {
    EXPECT_THROW((void)fill_distance(PointSet(0, 2), DomainBox::square(2, -1, 1)), InvalidArgument);
    EXPECT_THROW((void)fill_distance(PointSet::Zero(1, 3), DomainBox::square(2, -1, 1)), ShapeError);
}

TEST(SeparationDistance, Definitions) {
    PointSet two(2, 2);
    two << -1, 0, 1, 0;
    EXPECT_DOUBLE_EQ(separation_distance(two), 1.0);
    PointSet three(3, 1);
    three << 0, 0.4, 0.8;
    EXPECT_NEAR(separation_distance(three), 0.2, 1e-15);
    EXPECT_THROW((void)separation_distance(PointSet::Zero(1, 2)), InvalidArgument);
}

TEST(SeparationDistance, MatchesReverseScan) {
    SplitMix64 rng(9);
    const PointSet p = testing_util::random_points(rng, 100, 2);
    double best = INFINITY;
    for (Eigen::Index i = p.rows() - 1; i >= 0; --i)
        for (Eigen::Index j = 0; j < i; ++j) best = std::min(best, (p.row(i) - p.row(j)).norm());
    EXPECT_EQ(separation_distance(p), 0.5 * best);
}

TEST(SeparationDistance, NonIncreasingWhenNodesAdded) {
    SplitMix64 rng(10);
    PointSet p = testing_util::random_points(rng, 2, 2);
    double prev = separation_distance(p);
    for (int k = 0; k < 30; ++k) {
        PointSet more(p.rows() + 1, 2);
        more.topRows(p.rows()) = p;
        more.row(p.rows()) = testing_util::random_points(rng, 1, 2);
        p = more;
        EXPECT_LE(separation_distance(p), prev);
        prev = separation_distance(p);
    }
}

TEST(Regional, WholeDomainReducesToGlobal) {
    SplitMix64 rng(12);
    const PointSet p = testing_util::random_points(rng, 30, 2);
    const DomainBox box = DomainBox::square(2, -1, 1, 50);
    const RegionalReport r = regional_distances(p, box, Partition::whole());
    ASSERT_EQ(r.regions.size(), 1u);
    EXPECT_EQ(r.global_fill, fill_distance(p, box));
    EXPECT_EQ(r.global_separation, separation_distance(p));
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Regional, EmptyRegionIsFlagged) {
    PointSet p(2, 2);
    p << -0.5, 0, -0.2, 0.3;
    const RegionalReport r = regional_distances(p, DomainBox::square(2, -1, 1, 40), Partition::thresholds(0, {0.0}));
    ASSERT_EQ(r.regions.size(), 2u);
    EXPECT_TRUE(std::isinf(r.regions[1].fill));
    EXPECT_EQ(r.regions[1].node_count, 0);
    EXPECT_TRUE(std::isinf(r.global_fill));
    EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Regional, MappedGaussianNodesSpreadOutAcrossSeeds) {
    const DomainBox box = unit_square_domain(100);
    int fill_smaller = 0, separation_larger = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const NodeSet nodes = sample_gaussian_nodes(400, derive_seed(seed, 400));
        const DistanceView plain = distance_view(nodes, Variant::Classical);
        const DistanceView mapped = distance_view(nodes, Variant::Mvsdk);
        const RegionalReport a = regional_distances(plain.points, box, plain.partition);
        const RegionalReport b = regional_distances(mapped.points, box, mapped.partition);
        fill_smaller += b.global_fill < a.global_fill;
        separation_larger += b.global_separation > a.global_separation;
    }
    // The closest pair is a random extreme and can fall where the map contracts.
    EXPECT_EQ(fill_smaller, 20);
    EXPECT_GE(separation_larger, 15);
}

TEST(Rmse, Values) {
    const Vector a = Vector::LinSpaced(5, 0, 1);
    EXPECT_EQ(rmse(a, a), 0.0);
    EXPECT_DOUBLE_EQ(rmse(Vector::Zero(4), Vector::Ones(4)), 1.0);
    Vector p(2);
    p << 3, 4;
    EXPECT_NEAR(rmse(Vector::Zero(2), p), kSqrtTwelveHalf, 1e-15);
    EXPECT_THROW((void)rmse(Vector::Zero(2), Vector::Zero(3)), ShapeError);
    EXPECT_THROW((void)rmse(Vector(0), Vector(0)), InvalidArgument);
}
