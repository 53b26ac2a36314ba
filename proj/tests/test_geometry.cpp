#include <gtest/gtest.h>

#include <cmath>

#include "l0cert/geometry.hpp"
#include "l0cert/oracles.hpp"
#include "test_support.hpp"

using namespace l0cert;

TEST(ScaledDistance, KnownValues) {
    EXPECT_NEAR(scaled_distance(0.7, -1, 1, 0.3), 0.4 / 1.7, 1e-12);
    EXPECT_EQ(scaled_distance(0.7, -1, 1, 0.7), 0.0);
    EXPECT_NEAR(scaled_distance(0.7, -1, 1, -1.0), 1.0, 1e-12);
    EXPECT_NEAR(scaled_distance(0.0, -1, 1, 0.3), 0.3, 1e-12);
}

TEST(ScaledDistance, ZeroGapConvention) {
    EXPECT_TRUE(std::isinf(scaled_distance(1.0, -1, 1, 1.5)));
    EXPECT_TRUE(std::isinf(scaled_distance(-1.0, -1, 1, -1.5)));
    EXPECT_EQ(scaled_distance(1.0, -1, 1, 1.0), 0.0); // equal beats the convention
}

TEST(ScaledDistance, RejectsInvalidDomain) {
    EXPECT_THROW(scaled_distance(2.0, -1, 1, 0.0), std::invalid_argument);
    EXPECT_THROW(scaled_distance(-2.0, -1, 1, 0.0), std::invalid_argument);
}

TEST(ScaledDistanceMulti, SingleChannelDegenerates) {
    const double x[] = {0.7}, lo[] = {-1.0}, hi[] = {1.0}, y[] = {0.3};
    EXPECT_EQ(scaled_distance_multi(x, lo, hi, y), scaled_distance(0.7, -1, 1, 0.3));
}

TEST(ScaledDistanceMulti, ChannelMaximum) {
    const double x[] = {0.0, 0.0}, lo[] = {-1.0, -1.0}, hi[] = {1.0, 1.0};
    const double y[] = {0.5, -1.0};
    EXPECT_NEAR(scaled_distance_multi(x, lo, hi, y), 1.0, 1e-12);
    const double same[] = {0.0, 0.0};
    EXPECT_EQ(scaled_distance_multi(x, lo, hi, same), 0.0);
}

TEST(ScaledDistanceMulti, ChannelMismatchThrows) {
    const double x[] = {0.0, 0.0}, lo[] = {-1.0}, hi[] = {1.0}, y[] = {0.5, 0.5};
    EXPECT_THROW(scaled_distance_multi(x, std::span(lo), std::span(hi), y), ShapeError);
}

namespace {
BoxDomain cube3() { return BoxDomain::uniform(3, -1.0, 1.0); }
} // namespace

TEST(InBall0, CenterAndCorners) {
    const BoxDomain d = cube3();
    const Ball0Spec spec({0, 0, 0}, 2, d);
    EXPECT_TRUE(in_ball0(spec, d, std::vector<double>{0, 0, 0}));
    EXPECT_TRUE(in_ball0(spec, d, std::vector<double>{1, -1, 0}));
    EXPECT_FALSE(in_ball0(spec, d, std::vector<double>{1, -1, 0.5}));
    EXPECT_FALSE(in_ball0(spec, d, std::vector<double>{1.5, 0, 0})); // outside the domain
}

TEST(InBall0, RespectsPerturbableSet) {
    const BoxDomain d = cube3();
    const Ball0Spec spec({0, 0, 0}, 1, {0, 2}, d);
    EXPECT_TRUE(in_ball0(spec, d, std::vector<double>{0.4, 0, 0}));
    EXPECT_FALSE(in_ball0(spec, d, std::vector<double>{0, 0.4, 0})); // entry 1 is fixed
}

TEST(InBall0, MultiChannelEntryCounting) {
    const BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0, 2);
    const Ball0Spec spec({0, 0, 0, 0}, 1, d);
    // both channels of entry 0 differ: still one perturbed entry
    EXPECT_TRUE(in_ball0(spec, d, std::vector<double>{0.3, -0.4, 0, 0}));
    // one channel in each entry: two perturbed entries
    EXPECT_FALSE(in_ball0(spec, d, std::vector<double>{0.3, 0, 0.4, 0}));
}

TEST(InBall0, ShapeMismatchThrows) {
    const BoxDomain d = cube3();
    const Ball0Spec spec({0, 0, 0}, 1, d);
    EXPECT_THROW(in_ball0(spec, d, std::vector<double>{0, 0}), ShapeError);
}

TEST(Ball0Spec, InvariantsEnforced) {
    const BoxDomain d = cube3();
    EXPECT_THROW(Ball0Spec({0, 0, 0}, 0, d), ShapeError);
    EXPECT_THROW(Ball0Spec({0, 0, 0}, 4, d), ShapeError);
    EXPECT_THROW(Ball0Spec({0, 0, 2}, 1, d), ShapeError); // center outside
    EXPECT_THROW(Ball0Spec({0, 0, 0}, 1, {2, 0}, d), ShapeError); // unsorted
}

TEST(InHull, SumOfScaledDistances) {
    const BoxDomain d = cube3();
    const Ball0Spec spec({0, 0, 0}, 2, d);
    EXPECT_TRUE(in_hull(spec, d, std::vector<double>{0.5, 0.5, 0.5}));  // sum 1.5
    EXPECT_FALSE(in_hull(spec, d, std::vector<double>{0.9, 0.9, 0.9})); // sum 2.7
    EXPECT_TRUE(in_hull(spec, d, std::vector<double>{0, 0, 0}));
    EXPECT_TRUE(in_hull(spec, d, std::vector<double>{1, -1, 0})); // corner, sum == t
}

TEST(InHull, FixedEntriesOutsidePerturbableSet) {
    const BoxDomain d = cube3();
    const Ball0Spec spec({0, 0, 0}, 1, {0, 1}, d);
    EXPECT_TRUE(in_hull(spec, d, std::vector<double>{0.5, 0.5, 0}));
    EXPECT_FALSE(in_hull(spec, d, std::vector<double>{0.5, 0.4, 0.01}));
}

TEST(InHull, Sandwich) {
    // ball membership implies hull membership implies domain membership
    Rng rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t k = 2 + rng.bounded(4);
        const std::size_t d = 1 + rng.bounded(2);
        const BoxDomain domain = testsupport::random_domain(rng, k, d);
        const std::vector<double> center = testsupport::random_center(rng, domain);
        const int t = 1 + static_cast<int>(rng.bounded(std::min<std::size_t>(k, 3)));
        const Ball0Spec spec(center, t, domain);
        for (int s = 0; s < 40; ++s) {
            const auto y = sample_in_ball0(spec, domain, rng);
            ASSERT_TRUE(in_ball0(spec, domain, y));
            ASSERT_TRUE(in_hull(spec, domain, y));
            ASSERT_TRUE(domain.contains(y));
        }
    }
}

TEST(Corners, CountsAndContents) {
    const BoxDomain d = cube3();
    const Ball0Spec spec({0, 0, 0}, 2, d);
    const auto corners = enumerate_corners(spec, d);
    EXPECT_EQ(corners.size(), 19u); // 1 + 3*2 + 3*4
    for (const auto& c : corners) {
        EXPECT_TRUE(in_ball0(spec, d, c));
        EXPECT_TRUE(in_hull(spec, d, c));
    }
}

TEST(Corners, SingleEntryBox) {
    const BoxDomain d = BoxDomain::uniform(1, 0.0, 1.0);
    const Ball0Spec spec({0.5}, 1, d);
    const auto corners = enumerate_corners(spec, d);
    ASSERT_EQ(corners.size(), 3u);
    EXPECT_EQ(corners[0][0], 0.5);
    EXPECT_EQ(corners[1][0], 0.0);
    EXPECT_EQ(corners[2][0], 1.0);
}

TEST(Corners, FullRadiusContainsBoxVertices) {
    const BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0);
    const Ball0Spec spec({-1, -1}, 2, d);
    const auto corners = enumerate_corners(spec, d);
    for (double a : {-1.0, 1.0})
        for (double b : {-1.0, 1.0}) {
            const std::vector<double> v{a, b};
            EXPECT_TRUE(std::find(corners.begin(), corners.end(), v) != corners.end());
        }
}

TEST(Corners, MultiChannelCount) {
    const BoxDomain d = BoxDomain::uniform(2, 0.0, 1.0, 2);
    const Ball0Spec spec(std::vector<double>(4, 0.5), 1, d);
    EXPECT_EQ(enumerate_corners(spec, d).size(), 9u); // 1 + 2*4
}

TEST(Corners, CapEnforced) {
    const BoxDomain d = BoxDomain::uniform(30, 0.0, 1.0);
    const Ball0Spec spec(std::vector<double>(30, 0.5), 5, d);
    EXPECT_THROW(enumerate_corners(spec, d, 1000), CapExceeded);
}

TEST(Volumes, ClosedFormsOnTheCube) {
    const BoxDomain d = cube3();
    EXPECT_NEAR(volume_scaled_l1(d, 2), 32.0 / 3.0, 1e-12);
    EXPECT_NEAR(volume_hull(d, 2), 20.0 / 3.0, 1e-12);
}

TEST(Volumes, SmallCases) {
    const BoxDomain unit2 = BoxDomain::uniform(2, 0.0, 1.0);
    EXPECT_NEAR(volume_hull(unit2, 1), 0.5, 1e-12); // inscribed diamond
    const BoxDomain seg = BoxDomain::uniform(1, -2.0, 3.0);
    EXPECT_NEAR(volume_scaled_l1(seg, 1), 5.0, 1e-12);
    EXPECT_NEAR(volume_hull(seg, 1), 5.0, 1e-12);
    const BoxDomain unit5 = BoxDomain::uniform(5, 0.0, 1.0);
    EXPECT_NEAR(volume_scaled_l1(unit5, 1), 1.0 / 120.0, 1e-14);
}

TEST(Volumes, FullRadiusEqualsBoxVolume) {
    Rng rng(3);
    for (std::size_t k : {1u, 2u, 5u, 12u, 20u}) {
        const BoxDomain d = testsupport::random_domain(rng, k, 1);
        EXPECT_DOUBLE_EQ(volume_hull(d, static_cast<int>(k)), d.volume());
    }
}

TEST(Volumes, AlternatingSumIdentityAtFullRadius) {
    // sum_{r=0}^{k-1} (-1)^r C(k,r) (k-r)^k = k!, evaluated directly
    for (int k = 1; k <= 10; ++k) {
        double sum = 0.0, binom = 1.0;
        for (int r = 0; r < k; ++r) {
            sum += (r % 2 == 0 ? 1.0 : -1.0) * binom * std::pow(double(k - r), k);
            binom = binom * (k - r) / (r + 1);
        }
        EXPECT_NEAR(sum, std::tgamma(k + 1.0), 1e-6 * std::tgamma(k + 1.0));
    }
}

TEST(Volumes, PreconditionsEnforced) {
    const BoxDomain d = cube3();
    EXPECT_THROW(volume_hull(d, 0), std::invalid_argument);
    EXPECT_THROW(volume_hull(d, 4), std::invalid_argument);
    EXPECT_THROW(volume_scaled_l1(d, 0), std::invalid_argument);
    const BoxDomain multi = BoxDomain::uniform(2, 0.0, 1.0, 2);
    EXPECT_THROW(volume_scaled_l1(multi, 1), ShapeError);
    EXPECT_THROW(volume_hull(multi, 1), ShapeError);
}

TEST(VolumesMultiChannel, ReducesToSingleChannel) {
    Rng rng(11);
    for (std::size_t k : {2u, 3u, 6u, 12u, 20u}) {
        const BoxDomain d = testsupport::random_domain(rng, k, 1);
        for (int t = 1; t <= static_cast<int>(std::min<std::size_t>(k, 4)); ++t) {
            const double a = volume_hull(d, t);
            const double b = volume_hull_multichannel(d, t);
            EXPECT_NEAR(a, b, 1e-12 * std::abs(a));
        }
    }
}

TEST(VolumesMultiChannel, HandComputedCoefficient) {
    // k=3, d=2, t=2 over the unit box: leading factor 2^6*2^3/6! = 512/720,
    // single correction c_{1,3,2,2} = -3*(720*(1/64)*(1/120) + 720*(1/64)/720)
    // = -0.328125
    const BoxDomain d = BoxDomain::uniform(3, 0.0, 1.0, 2);
    const double expected = 512.0 / 720.0 * (1.0 - 0.328125);
    EXPECT_NEAR(volume_hull_multichannel(d, 2), expected, 1e-12);
}

TEST(VolumesMultiChannel, FullRadiusConsistency) {
    // t = k short-circuits to vol(D); the coefficient formula must agree:
    // for k=2, d=2, t=2 the bracket is 1 + c_{1,2,2,2} = 1 - 0.625 and the
    // leading factor is 2^4*4/4! = 8/3, whose product is exactly 1.
    const BoxDomain d = BoxDomain::uniform(2, 0.0, 1.0, 2);
    EXPECT_DOUBLE_EQ(volume_hull_multichannel(d, 2), d.volume());
    EXPECT_NEAR(8.0 / 3.0 * (1.0 - 0.625), 1.0, 1e-15);
}

TEST(VolumesMultiChannel, MonteCarloAgreement) {
    const BoxDomain d = BoxDomain::uniform(2, 0.0, 1.0, 2);
    const Ball0Spec spec(std::vector<double>(4, 0.5), 2, d);
    const double closed = volume_hull_multichannel(d, 2);
    const McEstimate mc = mc_volume(
        [&](std::span<const double> y) { return in_hull(spec, d, y); }, d, 200000, 99, 2);
    EXPECT_NEAR(closed, mc.mean, 5.0 * mc.std_error);
}

TEST(ExcessVolumes, HandValues) {
    const BoxDomain d = cube3();
    const ExcessVolumes e = relative_excess_volumes(d, 2);
    EXPECT_NEAR(e.excess_l1, 0.6, 1e-12);
    EXPECT_NEAR(e.excess_box, 0.2, 1e-12);
}

TEST(ExcessVolumes, RadiusOneHasEmptyCorrection) {
    for (std::size_t k : {1u, 3u, 6u}) {
        const BoxDomain d = BoxDomain::uniform(k, 0.0, 1.0);
        const ExcessVolumes e = relative_excess_volumes(d, 1);
        EXPECT_EQ(e.excess_l1, 0.0);
        EXPECT_NEAR(e.excess_box, std::tgamma(static_cast<double>(k) + 1.0) - 1.0,
                    1e-9 * std::tgamma(static_cast<double>(k) + 1.0));
    }
}

TEST(ExcessVolumes, TrendsInK) {
    // fixed t: the polytope's excess shrinks toward zero, the box's diverges
    for (int t : {2, 3}) {
        double prev_l1 = kInf, prev_box = 0.0;
        for (std::size_t k : {10u, 20u, 40u}) {
            const BoxDomain d = BoxDomain::uniform(k, -1.0, 1.0);
            const ExcessVolumes e = relative_excess_volumes(d, t);
            EXPECT_LT(e.excess_l1, prev_l1);
            EXPECT_GT(e.excess_box, prev_box);
            prev_l1 = e.excess_l1;
            prev_box = e.excess_box;
        }
        EXPECT_LT(prev_l1, 1e-3);
        EXPECT_GT(prev_box, 1e3);
    }
}

TEST(ExcessVolumes, ConsistentWithVolumeRatios) {
    for (std::size_t k : {3u, 5u, 8u}) {
        const BoxDomain d = BoxDomain::uniform(k, -1.0, 1.0);
        for (int t = 1; t <= 3; ++t) {
            if (static_cast<std::size_t>(t) > k) continue;
            const double hull = volume_hull(d, t);
            const double l1 = volume_scaled_l1(d, t);
            const ExcessVolumes e = relative_excess_volumes(d, t);
            EXPECT_NEAR(e.excess_l1, (l1 - hull) / hull, 1e-9 * std::max(1.0, e.excess_l1));
            EXPECT_NEAR(e.excess_box, (d.volume() - hull) / hull,
                        1e-9 * std::max(1.0, e.excess_box));
            // the hull never exceeds either enclosing set
            EXPECT_LE(hull, l1 * (1 + 1e-12));
            EXPECT_LE(hull, d.volume() * (1 + 1e-12));
            EXPECT_GE(e.excess_l1, -1e-12); // exactly 0 at t=k up to rounding
            EXPECT_GE(e.excess_box, -1e-12);
        }
    }
}

TEST(CornerExtremes, ExtremeCornersStayWithinCandidates) {
    // every corner candidate that is not a convex combination of the others
    // is an extreme point of the hull; all of them are hull members
    Rng rng(23);
    for (int rep = 0; rep < 4; ++rep) {
        const std::size_t k = 2 + rng.bounded(3);      // k <= 4
        const std::size_t ch = rep == 3 ? 2 : 1;       // one multi-channel config
        const BoxDomain domain = testsupport::random_domain(rng, std::min<std::size_t>(k, 3), ch);
        const std::vector<double> center = testsupport::random_center(rng, domain);
        const int t = 1 + static_cast<int>(rng.bounded(2));
        const Ball0Spec spec(center, t, domain);
        const auto corners = enumerate_corners(spec, domain);
        std::size_t extreme = 0;
        for (std::size_t i = 0; i < corners.size(); ++i) {
            std::vector<std::vector<double>> others;
            for (std::size_t j = 0; j < corners.size(); ++j)
                if (j != i) others.push_back(corners[j]);
            const FwResult fw = hull_distance_fw(corners[i], others, 20000, 1e-8);
            if (fw.distance > 1e-6) ++extreme;
            ASSERT_TRUE(in_hull(spec, domain, corners[i]));
        }
        EXPECT_GT(extreme, 0u);
        EXPECT_LE(extreme, corners.size());
    }
}

TEST(CornerExtremes, BoundaryCenterHasNonExtremeCandidates) {
    // a center on the domain boundary produces duplicate corner patterns
    // that are not extreme points
    const BoxDomain d = cube3();
    const Ball0Spec spec({0, 1, -1}, 2, d);
    const auto corners = enumerate_corners(spec, d);
    std::size_t non_extreme = 0;
    for (std::size_t i = 0; i < corners.size(); ++i) {
        std::vector<std::vector<double>> others;
        for (std::size_t j = 0; j < corners.size(); ++j)
            if (j != i) others.push_back(corners[j]);
        if (hull_distance_fw(corners[i], others, 20000, 1e-8).distance <= 1e-6) ++non_extreme;
    }
    EXPECT_GT(non_extreme, 0u);
}
