#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "bspde/coefficients.hpp"
#include "bspde/error.hpp"

using namespace bspde;

TEST(Coefficients, Example1Margins) {
    const CoefficientSet ex = example1_coefficients();
    EXPECT_NEAR(check_coercivity(ex).margin, 0.01, 1e-12);
    EXPECT_NEAR(check_strengthened_coercivity(ex).margin, -0.49, 1e-10);
}

TEST(Coefficients, PresetParsing) {
    EXPECT_EQ(parse_preset("heat").name, "heat");
    const PresetSpec r = parse_preset("random(17)");
    EXPECT_EQ(r.name, "random");
    EXPECT_EQ(r.seed, 17u);
    EXPECT_DOUBLE_EQ(parse_preset("transport(1.3)").amplitude, 1.3);
    EXPECT_THROW(parse_preset("nonsense"), GuardError);
    EXPECT_THROW(parse_preset("random(x)"), GuardError);
    EXPECT_THROW(parse_preset("transport(1.3"), GuardError);
}

TEST(Coefficients, HeatAndNearDegenerateMargins) {
    const Grid g = Grid::build(0.0, 1.0, 16);
    const auto t = NoiseTree::build(1, 3, 1.0);
    const auto heat = sample_coefficients(make_preset(parse_preset("heat"), 1, 0.0, 1.0), g, *t);
    EXPECT_DOUBLE_EQ(check_coercivity(heat).margin, 1.0);
    EXPECT_DOUBLE_EQ(check_strengthened_coercivity(heat).margin, 1.0);
    // b = 1, beta_1 = sqrt(2(1 - a)): margin a
    const auto nd = sample_coefficients(make_preset(parse_preset("near_degenerate"), 1, 0.0, 1.0), g, *t);
    EXPECT_NEAR(check_coercivity(nd).margin, 0.01, 1e-14);
    EXPECT_NEAR(check_strengthened_coercivity(nd).margin, 0.01, 1e-14);
}

TEST(Coefficients, StrengthenedNeverExceedsStandard) {
    Rng rng(5);
    for (int d = 0; d < 300; ++d) {
        const int n = 1 + d % 3;
        const int N = 1 + (d / 3) % 3;
        const CoefficientSample s = random_sample(n, N, N, rng);
        EXPECT_LE(smallest_eigenvalue(strengthened_form(s)), smallest_eigenvalue(standard_form(s)) + 1e-12);
    }
}

TEST(Coefficients, ScalarCaseConditionsCoincide) {
    Rng rng(9);
    for (int d = 0; d < 50; ++d) {
        const CoefficientSample s = random_sample(1, 1 + d % 3, 3, rng);
        EXPECT_NEAR(smallest_eigenvalue(strengthened_form(s)), smallest_eigenvalue(standard_form(s)), 1e-12);
    }
}

TEST(Coefficients, SingleBlockCriterionBoundsStrengthenedMargin) {
    Rng rng(21);
    int positive = 0;
    for (int d = 0; d < 200; ++d) {
        const int n = 1 + d % 3;
        const int N = 3;
        const int N0 = 1 + d % 2;
        CoefficientSet set{n, N, {random_sample(n, N, N0, rng)}};
        const double m0 = check_criterion_N0(set, N0).margin;
        if (m0 > 0.0) {
            ++positive;
            EXPECT_GE(check_strengthened_coercivity(set).margin, m0 - 1e-12);
        }
    }
    EXPECT_GT(positive, 0);
}

TEST(Coefficients, CriterionRejectsNoiseBeyondN0) {
    Rng rng(2);
    CoefficientSet set{2, 3, {random_sample(2, 3, 3, rng)}};
    set.samples[0].beta(0, 2) = 0.5;
    EXPECT_THROW(check_criterion_N0(set, 2), CoefficientError);
    EXPECT_THROW(check_criterion_N0(set, 4), GuardError);
}

TEST(Coefficients, StrengthenedFormBlockStructure) {
    CoefficientSample s;
    s.b = Eigen::MatrixXd::Identity(2, 2) * 2.0;
    s.beta = Eigen::MatrixXd(2, 2);
    s.beta << 1.0, 0.0, 0.0, 1.0;
    const Eigen::MatrixXd m = strengthened_form(s);
    ASSERT_EQ(m.rows(), 4);
    // stacked beta = (1, 0, 0, 1)
    EXPECT_DOUBLE_EQ(m(0, 0), 1.5);
    EXPECT_DOUBLE_EQ(m(0, 3), -0.5);
    EXPECT_DOUBLE_EQ(m(1, 1), 2.0);
}

TEST(Coefficients, ConditionCsv) {
    const ConditionReport r = certify(example1_coefficients());
    std::ostringstream os;
    write_condition_csv(os, r);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "margin,value,x,level,node");
}

TEST(Coefficients, LambdaOffset) {
    const ModelCoefficients m = make_preset(parse_preset("transport"), 1, 0.0, 1.0).with_lambda_offset(-3.0);
    EXPECT_DOUBLE_EQ(m.lambda(0.3, NodeContext{}), -3.5);
}

TEST(Coefficients, ParameterBoundsOfTransport) {
    const Grid g = Grid::build(0.0, 1.0, 32);
    const auto t = NoiseTree::build(1, 2, 1.0);
    const ParameterBounds pb = parameter_bounds(make_preset(parse_preset("transport"), 1, 0.0, 1.0), g, *t);
    EXPECT_NEAR(pb.f, 0.5, 1e-15);
    EXPECT_NEAR(pb.lambda, 0.5, 1e-15);
    EXPECT_NEAR(pb.db_dx, 0.2, 1e-12);
    EXPECT_LT(pb.beta_at_boundary, 1e-12);
    EXPECT_GT(pb.margin, 0.0);
}
