#include <gtest/gtest.h>

#include <cmath>

#include "l0cert/oracles.hpp"
#include "l0cert/propagation.hpp"
#include "test_support.hpp"

using namespace l0cert;

namespace {

BoxDomain cube3() { return BoxDomain::uniform(3, -1.0, 1.0); }
Ball0Spec example_spec(const BoxDomain& d) { return Ball0Spec({-0.3, 0.0, 0.65}, 2, d); }

AffineExpr random_expr(Rng& rng, std::size_t n) {
    AffineExpr e;
    e.bias = rng.uniform(-1, 1);
    e.coeffs.resize(n);
    for (double& w : e.coeffs) w = rng.uniform(-3, 3);
    return e;
}

} // namespace

TEST(Contributions, WorkedExample) {
    const BoxDomain d = cube3();
    const Ball0Spec spec = example_spec(d);
    const AffineExpr n1{{2, -3, 7}, 0.0};
    const auto c = contributions(n1, spec, d);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_NEAR(c[0].d_minus, -1.4, 1e-12);
    EXPECT_NEAR(c[1].d_minus, -3.0, 1e-12);
    EXPECT_NEAR(c[2].d_minus, -11.55, 1e-12);
    EXPECT_NEAR(c[0].d_plus, 2.6, 1e-12);
    EXPECT_NEAR(c[1].d_plus, 3.0, 1e-12);
    EXPECT_NEAR(c[2].d_plus, 2.45, 1e-12);
}

TEST(Contributions, SignsAndEdgeCases) {
    const BoxDomain d = BoxDomain::uniform(2, 0.0, 1.0);
    const Ball0Spec spec({0.0, 0.5}, 1, d); // entry 0 sits on its lower bound
    const AffineExpr e{{3.0, 0.0}, 0.0};
    const auto c = contributions(e, spec, d);
    EXPECT_EQ(c[0].d_minus, 0.0); // w > 0 and x = a: no way down
    EXPECT_NEAR(c[0].d_plus, 3.0, 1e-12);
    EXPECT_EQ(c[1].d_minus, 0.0); // zero weight
    EXPECT_EQ(c[1].d_plus, 0.0);
    for (const auto& ci : c) {
        EXPECT_LE(ci.d_minus, 0.0);
        EXPECT_GE(ci.d_plus, 0.0);
    }
}

TEST(Contributions, MultiChannelSumsOverChannels) {
    const BoxDomain d = BoxDomain::uniform(2, -1.0, 1.0, 2);
    const Ball0Spec spec({0, 0, 0, 0}, 1, d);
    const AffineExpr e{{1.0, -2.0, 0.5, 0.0}, 0.0};
    const auto c = contributions(e, spec, d);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_NEAR(c[0].d_minus, -3.0, 1e-12); // -1 + -2
    EXPECT_NEAR(c[0].d_plus, 3.0, 1e-12);
    EXPECT_NEAR(c[1].d_minus, -0.5, 1e-12);
}

TEST(Concretize, WorkedExampleIntervals) {
    const BoxDomain d = cube3();
    const Ball0Spec spec = example_spec(d);
    const AffineExpr n1{{2, -3, 7}, 0.0};
    const AffineExpr n2{{-4, 2, 3}, 0.0};

    const Interval b1 = concretize_box(n1, spec, d);
    EXPECT_NEAR(b1.lo, -12.0, 1e-9);
    EXPECT_NEAR(b1.hi, 12.0, 1e-9);
    const Interval t1 = concretize_topt(n1, spec, d);
    EXPECT_NEAR(t1.lo, -10.6, 1e-9);
    EXPECT_NEAR(t1.hi, 9.55, 1e-9);
    const Interval s1 = concretize_ttimestop(n1, spec, d);
    EXPECT_NEAR(s1.lo, -19.15, 1e-9);
    EXPECT_NEAR(s1.hi, 9.95, 1e-9);

    const Interval b2 = concretize_box(n2, spec, d);
    EXPECT_NEAR(b2.lo, -9.0, 1e-9);
    EXPECT_NEAR(b2.hi, 9.0, 1e-9);
    const Interval t2 = concretize_topt(n2, spec, d);
    EXPECT_NEAR(t2.lo, -7.0, 1e-9);
    EXPECT_NEAR(t2.hi, 7.95, 1e-9);
    const Interval s2 = concretize_ttimestop(n2, spec, d);
    EXPECT_NEAR(s2.lo, -7.25, 1e-9);
    EXPECT_NEAR(s2.hi, 8.75, 1e-9);
}

TEST(Concretize, DegenerateCases) {
    const BoxDomain d = cube3();
    const Ball0Spec spec({0, 0, 0}, 1, d);
    const AffineExpr zero{{0, 0, 0}, 1.5};
    for (auto f : {concretize_box, concretize_topt, concretize_ttimestop}) {
        const Interval iv = f(zero, spec, d);
        EXPECT_EQ(iv.lo, 1.5);
        EXPECT_EQ(iv.hi, 1.5);
    }
}

TEST(Concretize, FullRadiusCollapsesToBox) {
    Rng rng(5);
    const BoxDomain d = testsupport::random_domain(rng, 5, 1);
    const std::vector<double> center = testsupport::random_center(rng, d);
    const Ball0Spec spec(center, 5, d);
    for (int rep = 0; rep < 20; ++rep) {
        const AffineExpr e = random_expr(rng, 5);
        const Interval a = concretize_box(e, spec, d);
        const Interval b = concretize_topt(e, spec, d);
        EXPECT_DOUBLE_EQ(a.lo, b.lo);
        EXPECT_DOUBLE_EQ(a.hi, b.hi);
    }
}

TEST(Concretize, RadiusOneCollapsesTopTAndTTimesTop) {
    Rng rng(6);
    const BoxDomain d = testsupport::random_domain(rng, 6, 2);
    const std::vector<double> center = testsupport::random_center(rng, d);
    const Ball0Spec spec(center, 1, d);
    for (int rep = 0; rep < 20; ++rep) {
        const AffineExpr e = random_expr(rng, d.size());
        const Interval a = concretize_topt(e, spec, d);
        const Interval b = concretize_ttimestop(e, spec, d);
        EXPECT_EQ(a.lo, b.lo);
        EXPECT_EQ(a.hi, b.hi);
    }
}

TEST(Concretize, RespectsPerturbableSet) {
    const BoxDomain d = cube3();
    const Ball0Spec spec({-0.3, 0.0, 0.65}, 1, {1}, d); // only entry 1 may move
    const AffineExpr n1{{2, -3, 7}, 0.0};
    // fixed entries contribute w*x to the constant: 2*(-0.3) + 7*0.65 = 3.95
    const Interval iv = concretize_box(n1, spec, d);
    EXPECT_NEAR(iv.lo, 3.95 - 3.0, 1e-12);
    EXPECT_NEAR(iv.hi, 3.95 + 3.0, 1e-12);
}

TEST(Concretize, TightnessOrdering) {
    Rng rng(8);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t k = 2 + rng.bounded(6);
        const std::size_t ch = 1 + rng.bounded(2);
        const BoxDomain d = testsupport::random_domain(rng, k, ch);
        const std::vector<double> center = testsupport::random_center(rng, d);
        const int t = 1 + static_cast<int>(rng.bounded(std::min<std::size_t>(k, 3)));
        const Ball0Spec spec(center, t, d);
        const AffineExpr e = random_expr(rng, d.size());
        const Interval box = concretize_box(e, spec, d);
        const Interval topt = concretize_topt(e, spec, d);
        const Interval ttt = concretize_ttimestop(e, spec, d);
        ASSERT_LE(box.lo, topt.lo + 1e-12);
        ASSERT_GE(box.hi, topt.hi - 1e-12);
        ASSERT_LE(ttt.lo, topt.lo + 1e-12);
        ASSERT_GE(ttt.hi, topt.hi - 1e-12);
    }
}

TEST(Concretize, TopTMonotoneInRadius) {
    Rng rng(9);
    const BoxDomain d = testsupport::random_domain(rng, 6, 1);
    const std::vector<double> center = testsupport::random_center(rng, d);
    for (int rep = 0; rep < 30; ++rep) {
        const AffineExpr e = random_expr(rng, 6);
        Interval prev{0, 0};
        for (int t = 1; t <= 6; ++t) {
            const Ball0Spec spec(center, t, d);
            const Interval iv = concretize_topt(e, spec, d);
            if (t > 1) {
                ASSERT_LE(iv.lo, prev.lo + 1e-12);
                ASSERT_GE(iv.hi, prev.hi - 1e-12);
            }
            prev = iv;
        }
    }
}

TEST(Concretize, BoxAndTTimesTopIncomparable) {
    // regression: the worked n1 instance has a tighter box lower bound but a
    // looser box upper bound than t-times-top
    const BoxDomain d = cube3();
    const Ball0Spec spec = example_spec(d);
    const AffineExpr n1{{2, -3, 7}, 0.0};
    const Interval box = concretize_box(n1, spec, d);
    const Interval ttt = concretize_ttimestop(n1, spec, d);
    EXPECT_GT(box.lo, ttt.lo); // -12 > -19.15
    EXPECT_GT(box.hi, ttt.hi); // 12 > 9.95
}

TEST(RelaxRelu, Cases) {
    const ReluRelaxation dead = relax_relu(-5, -1);
    EXPECT_EQ(dead.lower_slope, 0.0);
    EXPECT_EQ(dead.upper_slope, 0.0);
    EXPECT_EQ(dead.upper_intercept, 0.0);

    const ReluRelaxation active = relax_relu(1, 5);
    EXPECT_EQ(active.lower_slope, 1.0);
    EXPECT_EQ(active.upper_slope, 1.0);

    const ReluRelaxation flat = relax_relu(-10.6, 9.55);
    EXPECT_EQ(flat.lower_slope, 0.0); // u < |l|
    EXPECT_NEAR(flat.upper_slope, 9.55 / 20.15, 1e-12);
    EXPECT_NEAR(flat.upper_intercept, 9.55 / 20.15 * 10.6, 1e-12);

    const ReluRelaxation steep = relax_relu(-7, 7.95);
    EXPECT_EQ(steep.lower_slope, 1.0); // u > |l|

    EXPECT_THROW(relax_relu(2, 1), std::invalid_argument);
}

TEST(RelaxRelu, SymmetricTieTakesFlatLowerBound) {
    // exact ties and ulp-perturbed ties must resolve identically
    EXPECT_EQ(relax_relu(-12, 12).lower_slope, 0.0);
    EXPECT_EQ(relax_relu(-12, 12 * (1 + 1e-13)).lower_slope, 0.0);
    EXPECT_EQ(relax_relu(-12 * (1 + 1e-13), 12).lower_slope, 0.0);
    EXPECT_EQ(relax_relu(-12, 12.1).lower_slope, 1.0);
}

TEST(BackSubstitute, SingleAffineLayerIsItself) {
    Network net;
    net.input = {2, 1, 0, 0};
    net.layers = {DenseLayer{2, 2, {1, 2, 3, 4}, {0.5, -0.5}}};
    net.validate();
    const auto exprs = back_substitute(net, 0, {});
    ASSERT_EQ(exprs.size(), 2u);
    EXPECT_EQ(exprs[0].lower.coeffs, (std::vector<double>{1, 2}));
    EXPECT_EQ(exprs[0].lower.bias, 0.5);
    EXPECT_EQ(exprs[0].upper.coeffs, exprs[0].lower.coeffs);
    EXPECT_EQ(exprs[1].upper.coeffs, (std::vector<double>{3, 4}));
}

TEST(BackSubstitute, WorkedExampleOutputExpression) {
    // the lower expression of the output under top-t, after substituting the
    // hidden relaxations, in exact rationals: coefficients 4s, -2s, -3s and
    // constant 8 - 7s for s = 7.95/14.95 = 159/299
    const Network net = testsupport::example_net();
    const BoxDomain d = cube3();
    const Ball0Spec spec = example_spec(d);
    std::vector<LayerBounds> bounds(net.stages().size());
    bounds[0] = {concretize_topt(AffineExpr{{2, -3, 7}, 0.0}, spec, d),
                 concretize_topt(AffineExpr{{-4, 2, 3}, 0.0}, spec, d)};
    bounds[1] = {{std::max(0.0, bounds[0][0].lo), std::max(0.0, bounds[0][0].hi)},
                 {std::max(0.0, bounds[0][1].lo), std::max(0.0, bounds[0][1].hi)}};
    const auto exprs = back_substitute(net, 2, bounds);
    ASSERT_EQ(exprs.size(), 2u);
    const double s = 159.0 / 299.0;
    EXPECT_NEAR(exprs[0].lower.coeffs[0], 4 * s, 1e-9);  // 2.1271
    EXPECT_NEAR(exprs[0].lower.coeffs[1], -2 * s, 1e-9); // -1.0635
    EXPECT_NEAR(exprs[0].lower.coeffs[2], -3 * s, 1e-9); // -1.5953
    EXPECT_NEAR(exprs[0].lower.bias, 8 - 7 * s, 1e-9);   // 4.2776
    const Interval lo = concretize_topt(exprs[0].lower, spec, d);
    EXPECT_NEAR(lo.lo, 0.05, 1e-9);
}

TEST(BackSubstitute, StableNeuronsComposeExactly) {
    // every pre-activation is positive, so substitution equals the exact
    // affine composition and top-t bounds equal the ball extrema of it
    Network net;
    net.input = {3, 1, 0, 0};
    net.layers = {DenseLayer{2, 3, {1, 0.5, 0.25, 0.5, 1, 0.5}, {5, 5}}, ReluLayer{},
                  DenseLayer{2, 2, {1, -1, 2, 0.5}, {0, 1}}};
    net.validate();
    const BoxDomain d = BoxDomain::uniform(3, -1.0, 1.0);
    const Ball0Spec spec({0.1, -0.2, 0.3}, 2, d);
    const auto bounds = compute_bounds(net, spec, d, Strategy::top_t);
    // composed output rows: exact products of the two weight matrices
    const AffineExpr composed0{{1 * 1 - 1 * 0.5, 0.5 - 1.0, 0.25 - 0.5}, 5.0 - 5.0 + 0.0};
    const auto oracle_lo =
        min_linear_over_ball0(composed0.coeffs, composed0.bias, spec, d).value;
    const auto oracle_hi =
        max_linear_over_ball0(composed0.coeffs, composed0.bias, spec, d).value;
    EXPECT_NEAR(bounds[2][0].lo, oracle_lo, 1e-9);
    EXPECT_NEAR(bounds[2][0].hi, oracle_hi, 1e-9);
}

TEST(ComputeBounds, WorkedExampleAllStrategies) {
    const Network net = testsupport::example_net();
    const BoxDomain d = cube3();
    const Ball0Spec spec = example_spec(d);

    const auto box = compute_bounds(net, spec, d, Strategy::box);
    EXPECT_NEAR(box[0][0].lo, -12.0, 1e-9);
    EXPECT_NEAR(box[0][0].hi, 12.0, 1e-9);
    EXPECT_NEAR(box[0][1].lo, -9.0, 1e-9);
    EXPECT_NEAR(box[0][1].hi, 9.0, 1e-9);
    EXPECT_NEAR(box[2][0].lo, -1.0, 1e-9);
    EXPECT_NEAR(box[2][0].hi, 32.0, 1e-9);

    const auto topt = compute_bounds(net, spec, d, Strategy::top_t);
    EXPECT_NEAR(topt[2][0].lo, 0.05, 1e-9);
    EXPECT_NEAR(topt[2][0].hi, 31.15, 1e-9);

    const auto ttt = compute_bounds(net, spec, d, Strategy::t_times_top);
    EXPECT_NEAR(ttt[2][0].lo, -0.75, 1e-9);
    EXPECT_NEAR(ttt[2][0].hi, 201389.0 / 5820.0, 1e-9); // 34.6029...
    // relu bounds are clamped pre-activations
    EXPECT_EQ(ttt[1][0].lo, 0.0);
    EXPECT_NEAR(ttt[1][0].hi, 9.95, 1e-9);
}

TEST(ComputeBounds, SoundnessFuzz) {
    Rng rng(4242);
    for (int netrep = 0; netrep < 5; ++netrep) {
        const std::size_t inputs = 4 + rng.bounded(5);
        const Network net =
            testsupport::random_net(rng, inputs, 1 + rng.bounded(2), 6, 2 + rng.bounded(2));
        const BoxDomain d = testsupport::random_domain(rng, inputs, 1);
        const std::vector<double> center = testsupport::random_center(rng, d);
        const std::size_t ksub = 2 + rng.bounded(inputs - 2);
        const int t = 1 + static_cast<int>(rng.bounded(std::min<std::size_t>(ksub, 3)));
        const Ball0Spec spec(center, t, Rng(rng.next_u64()).subset(inputs, ksub), d);

        for (Strategy strat : {Strategy::box, Strategy::top_t, Strategy::t_times_top}) {
            const auto bounds = compute_bounds(net, spec, d, strat);
            for (int s = 0; s < 300; ++s) {
                std::vector<double> y;
                if (strat == Strategy::box) {
                    // the box strategy covers the whole sub-box
                    y = spec.center;
                    for (std::size_t i : spec.perturbable)
                        y[i] = rng.uniform(d.lo[i], d.hi[i]);
                } else {
                    y = sample_in_ball0(spec, d, rng);
                }
                std::vector<double> cur = y;
                std::size_t p = 0;
                for (const auto& stage : net.stages()) {
                    cur = apply_stage(stage, cur);
                    for (std::size_t i = 0; i < cur.size(); ++i) {
                        const double slack =
                            1e-9 * std::max({1.0, std::abs(bounds[p][i].lo),
                                             std::abs(bounds[p][i].hi)});
                        ASSERT_GE(cur[i], bounds[p][i].lo - slack);
                        ASSERT_LE(cur[i], bounds[p][i].hi + slack);
                    }
                    ++p;
                }
            }
        }
    }
}
