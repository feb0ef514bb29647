#include <nbpss/model.hpp>

#include <gtest/gtest.h>

using namespace nbpss;

namespace {

ProprietyInput gaussian_input(double ig_a, double ig_b) {
    ProprietyInput in;
    in.family = ResponseFamily{FamilyKind::gaussian};
    in.n = 100;
    PredictorInfo p;
    p.name = "mu";
    p.r = 1;
    p.u_cols = 1;
    p.smooth.push_back({"s", 20, ig_a, ig_b});
    p.t = 20;
    in.predictors.push_back(p);
    return in;
}

const ConditionResult& find(const ProprietyReport& rep, const std::string& id) {
    for (const auto& c : rep.conditions) {
        if (c.id == id) return c;
    }
    throw std::runtime_error("missing condition " + id);
}

} // namespace

TEST(Propriety, JeffreysSmoothingPriorViolatesShapeScale) {
    const auto rep = check_propriety(gaussian_input(0.0, 0.0));
    EXPECT_EQ(rep.verdict, Verdict::violated);
    EXPECT_EQ(rep.violated_ids(), std::vector<std::string>{"b.1"});
    EXPECT_EQ(rep.verdict_line(), "violated (b.1)");
}

TEST(Propriety, ProperSmoothingPriorPasses) {
    const auto rep = check_propriety(gaussian_input(1.0, 0.5));
    EXPECT_EQ(rep.verdict, Verdict::sufficient_ok);
    EXPECT_EQ(rep.status_of("b.1"), ConditionStatus::holds);
    const auto& b3 = find(rep, "b.3");
    EXPECT_DOUBLE_EQ(b3.lhs, 22.0);
    EXPECT_DOUBLE_EQ(b3.rhs, 0.0);
    const auto& b6 = find(rep, "b.6");
    EXPECT_DOUBLE_EQ(b6.lhs, 100.0 + 0.002);   // n + 2 a_eps + 2 sum min(0, a)
    EXPECT_DOUBLE_EQ(b6.rhs, 1.0);
}

TEST(Propriety, SelectedEffectInequality) {
    ProprietyInput in = gaussian_input(1.0, 0.5);
    in.predictors[0].smooth.clear();
    in.predictors[0].selected.push_back({"s", 20, 5.0, 1.0});
    const auto rep = check_propriety(in);
    const auto& b4 = find(rep, "b.4");
    EXPECT_DOUBLE_EQ(b4.lhs, 29.0);
    EXPECT_DOUBLE_EQ(b4.rhs, 0.0);
    EXPECT_EQ(b4.status, ConditionStatus::holds);
    EXPECT_DOUBLE_EQ(find(rep, "b.6").rhs, 2.0);   // rank(U) + J
    EXPECT_EQ(rep.verdict, Verdict::sufficient_ok);
}

TEST(Propriety, ErrorVarianceScale) {
    ProprietyInput in = gaussian_input(1.0, 0.5);
    in.b_eps = 0.0;
    EXPECT_EQ(check_propriety(in).verdict, Verdict::not_checkable);
    in.sse = 3.0;
    EXPECT_EQ(check_propriety(in).verdict, Verdict::sufficient_ok);
    in.sse = 0.0;
    EXPECT_EQ(check_propriety(in).status_of("b.7"), ConditionStatus::violated);
}

TEST(Propriety, SmallSampleViolatesB6) {
    ProprietyInput in = gaussian_input(-2.0, 0.5);
    in.n = 3;
    in.a_eps = 0.0;
    const auto rep = check_propriety(in);
    // 3 + 0 + 2 * (-2) = -1 is not above rank(U) + J = 1
    EXPECT_EQ(rep.status_of("b.6"), ConditionStatus::violated);
    EXPECT_EQ(rep.verdict, Verdict::violated);
}

TEST(Propriety, CountFamiliesUseFamilyTable) {
    ProprietyInput in = gaussian_input(1.0, 0.5);
    in.family = ResponseFamily{FamilyKind::poisson};
    in.has_positive_count = false;
    EXPECT_EQ(check_propriety(in).status_of("c.1"), ConditionStatus::violated);
    in.has_positive_count = true;
    in.predictors[0].largest_design_rank = 20;
    EXPECT_EQ(check_propriety(in).verdict, Verdict::sufficient_ok);
    in.family = ResponseFamily{FamilyKind::zip};
    in.predictors.push_back(in.predictors[0]);
    in.predictors[1].name = "pi";
    EXPECT_EQ(check_propriety(in).status_of("c.1"), ConditionStatus::not_checkable);
    EXPECT_EQ(check_propriety(in).verdict, Verdict::not_checkable);
}

TEST(Propriety, SelectedLargestEffectUsesVariantA) {
    ProprietyInput in;
    in.family = ResponseFamily{FamilyKind::gaussian_locscale};
    in.n = 50;
    for (const char* name : {"mu", "sigma2"}) {
        PredictorInfo p;
        p.name = name;
        p.r = 1;
        p.u_cols = 1;
        p.selected.push_back({"big", 10, 5.0, 1.0});
        p.smooth.push_back({"small", 4, 1.0, 1.0});
        p.t = 14;
        p.t_without_largest = 4;
        p.largest_design_rank = 10;
        in.predictors.push_back(p);
    }
    const auto rep = check_propriety(in);
    EXPECT_TRUE(rep.has("c.9a"));
    EXPECT_FALSE(rep.has("c.9b"));
    const auto& c9 = find(rep, "c.9a");
    EXPECT_DOUBLE_EQ(c9.lhs, 10.0 + 10.0);   // n_eps + 2 a of the largest effect
    EXPECT_DOUBLE_EQ(c9.rhs, 1.0);           // r + (J - 1)
    EXPECT_EQ(rep.status_of("c.10a"), ConditionStatus::not_checkable);
    EXPECT_DOUBLE_EQ(find(rep, "c.7a").lhs, 6.0);
    EXPECT_DOUBLE_EQ(find(rep, "c.7a").rhs, 0.0);
}

TEST(Propriety, EmptyModelIsNotCheckable) {
    ProprietyInput in;
    in.family = ResponseFamily{FamilyKind::gaussian};
    EXPECT_EQ(check_propriety(in).verdict, Verdict::not_checkable);
}
