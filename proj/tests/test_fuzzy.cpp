#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "zelig/fuzzy.hpp"

using namespace zelig;

namespace {

Term trapezoid(std::string id, double a, double b, double c, double d) {
  return {std::move(id), PiecewiseLinear({{a, 0}, {b, 1}, {c, 1}, {d, 0}})};
}

LinguisticVariable angry() {
  return {"angry",
          0,
          1,
          {trapezoid("slightly_angry", 0.05, 0.15, 0.3, 0.4), trapezoid("not_very_angry", 0.3, 0.4, 0.6, 0.7),
           {"very_angry", PiecewiseLinear({{0.6, 0}, {0.7, 1}, {1, 1}})}}};
}

// Random piecewise-linear term: 2..6 breakpoints in [0,1].
Term random_term(std::mt19937_64& rng, int i) {
  std::uniform_int_distribution<int> n_dist(2, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = n_dist(rng);
  std::vector<double> xs;
  while (static_cast<int>(xs.size()) < n) {
    const double x = u(rng);
    if (std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
  }
  std::sort(xs.begin(), xs.end());
  std::vector<Point> pts;
  for (double x : xs) pts.push_back({x, u(rng)});
  return {"t" + std::to_string(i), PiecewiseLinear(pts)};
}

LinguisticVariable random_variable(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> k(1, 5);
  LinguisticVariable v{"v", 0, 1, {}};
  const int n = k(rng);
  for (int i = 0; i < n; ++i) v.terms.push_back(random_term(rng, i));
  return v;
}

}  // namespace

TEST(Membership, TrapezoidPlateauRampAndClamp) {
  const Term t = trapezoid("mid", 0.2, 0.4, 0.6, 0.8);
  EXPECT_DOUBLE_EQ(membership_degree(t, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(membership_degree(t, 0.3), 0.5);
  EXPECT_DOUBLE_EQ(membership_degree(t, 0.95), 0.0);
  EXPECT_DOUBLE_EQ(membership_degree(t, -3.0), 0.0);
}

TEST(Membership, EndpointsClampToNearestMu) {
  const PiecewiseLinear f({{0.2, 0.3}, {0.5, 0.9}});
  EXPECT_DOUBLE_EQ(f(0.0), 0.3);
  EXPECT_DOUBLE_EQ(f(1.0), 0.9);
}

TEST(Membership, RejectsMalformedPoints) {
  EXPECT_THROW(PiecewiseLinear({{0.1, 0.5}}), std::invalid_argument);
  EXPECT_THROW(PiecewiseLinear({{0.1, 0.5}, {0.1, 0.7}}), std::invalid_argument);
  EXPECT_THROW(PiecewiseLinear({{0.3, 0.5}, {0.1, 0.7}}), std::invalid_argument);
  EXPECT_THROW(PiecewiseLinear({{0.1, 1.5}, {0.2, 0.7}}), std::invalid_argument);
}

TEST(Fuzzify, NotpIsComplementOfBestTerm) {
  const auto v = make_degree_vector("v", {{"a", 0.7}, {"b", 0.2}, {"c", 0.0}});
  EXPECT_DOUBLE_EQ(v.notp, 1.0 - 0.7);
}

TEST(Fuzzify, OutsideAllSupportsIsPureNotp) {
  LinguisticVariable v{"v", 0, 1, {trapezoid("a", 0.5, 0.6, 0.7, 0.8)}};
  const auto d = fuzzify(v, 0.1);
  EXPECT_DOUBLE_EQ(d.at("a"), 0.0);
  EXPECT_DOUBLE_EQ(d.notp, 1.0);
}

TEST(Fuzzify, AngryPlateauCentersAreOneHot) {
  const auto var = angry();
  const std::vector<std::pair<double, std::string>> centers = {
      {0.225, "slightly_angry"}, {0.5, "not_very_angry"}, {0.85, "very_angry"}};
  for (const auto& [x, label] : centers) {
    const auto d = fuzzify(var, x);
    EXPECT_DOUBLE_EQ(d.notp, 0.0) << x;
    for (const auto& t : d.degrees) EXPECT_DOUBLE_EQ(t.degree, t.term == label ? 1.0 : 0.0) << x << " " << t.term;
  }
}

TEST(NotpDegree, Examples) {
  const std::vector<Degree> a{0.7, 0.2}, b{}, c{1.0, 0.4};
  EXPECT_DOUBLE_EQ(notp_degree(a), 1.0 - 0.7);
  EXPECT_DOUBLE_EQ(notp_degree(b), 1.0);
  EXPECT_DOUBLE_EQ(notp_degree(c), 0.0);
}

TEST(Necessity, FootnoteFormula) {
  EXPECT_DOUBLE_EQ(necessity_from(0.2), 0.8);
  EXPECT_DOUBLE_EQ(necessity_from(1.0), 0.0);
  EXPECT_DOUBLE_EQ(necessity_from(0.0), 1.0);
}

TEST(Combine, Examples) {
  EXPECT_DOUBLE_EQ(combine_min(0.6, 1.0), 0.6);
  EXPECT_DOUBLE_EQ(combine_min(0.37, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(combine_max(0.3, 0.3), 0.3);
}

TEST(ConsistencyBounds, Examples) {
  EXPECT_TRUE(check_consistency_bounds(0.2, 0.5, 0.9));
  EXPECT_FALSE(check_consistency_bounds(0.6, 0.5, 0.9));
  EXPECT_TRUE(check_consistency_bounds(0.5, 0.5, 0.5));
}

TEST(MeasureOf, NecessityIsOneMinusBestAlternative) {
  const auto v = make_degree_vector("v", {{"a", 0.8}, {"b", 0.3}});  // notp 0.2
  const auto a = measure_of(v, "a");
  EXPECT_DOUBLE_EQ(a.pos, 0.8);
  EXPECT_DOUBLE_EQ(a.nec, 1.0 - 0.3);
  const auto b = measure_of(v, "b");
  EXPECT_DOUBLE_EQ(b.pos, 0.3);
  EXPECT_DOUBLE_EQ(b.nec, 1.0 - 0.8);
  const auto n = measure_of(v, "NOTP");
  EXPECT_DOUBLE_EQ(n.pos, v.notp);
  EXPECT_LE(n.nec, n.pos);
}

TEST(Reaches, AbsorbsInterpolationRounding) {
  const Term t = trapezoid("w", 0.3, 0.4, 0.6, 0.7);
  const Degree d = membership_degree(t, 0.65);
  EXPECT_NEAR(d, 0.5, 1e-12);
  EXPECT_TRUE(reaches(d, 0.5));
  EXPECT_FALSE(reaches(0.49, 0.5));
}

// ---- properties over randomized inputs ----

class FuzzyProperties : public ::testing::Test {
 protected:
  std::mt19937_64 rng{20240601};
  std::uniform_real_distribution<double> u{0.0, 1.0};
  static constexpr int kCases = 1000;
};

TEST_F(FuzzyProperties, ComplementLawAndHalfPossibleFloor) {
  for (int i = 0; i < kCases; ++i) {
    const auto var = random_variable(rng);
    const auto d = fuzzify(var, u(rng) * 1.2 - 0.1);
    double best = 0.0;
    for (const auto& t : d.degrees) {
      ASSERT_GE(t.degree, 0.0);
      ASSERT_LE(t.degree, 1.0);
      best = std::max(best, t.degree);
    }
    ASSERT_DOUBLE_EQ(d.notp, 1.0 - best);
    ASSERT_GE(std::max(d.notp, best), 0.5);
  }
}

TEST_F(FuzzyProperties, NecessityDuality) {
  for (int i = 0; i < kCases; ++i) {
    const double x = u(rng);
    ASSERT_NEAR(necessity_from(necessity_from(x)), x, 1e-12);
  }
}

TEST_F(FuzzyProperties, MinMaxAlgebra) {
  for (int i = 0; i < kCases; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng);
    ASSERT_EQ(combine_min(a, a), a);
    ASSERT_EQ(combine_max(a, a), a);
    ASSERT_EQ(combine_min(a, b), combine_min(b, a));
    ASSERT_EQ(combine_max(a, b), combine_max(b, a));
    ASSERT_EQ(combine_min(combine_min(a, b), c), combine_min(a, combine_min(b, c)));
    ASSERT_EQ(combine_max(combine_max(a, b), c), combine_max(a, combine_max(b, c)));
    ASSERT_EQ(combine_min(a, combine_max(a, b)), a);  // absorption
    ASSERT_EQ(combine_min(a, 0.0), 0.0);
    ASSERT_EQ(combine_max(a, 1.0), 1.0);
  }
}

TEST_F(FuzzyProperties, MembershipIsLipschitzInSteepestSlope) {
  for (int i = 0; i < kCases; ++i) {
    const Term t = random_term(rng, 0);
    const double L = t.membership.max_slope();
    const double x = u(rng), y = u(rng);
    ASSERT_LE(std::abs(t.membership(x) - t.membership(y)), L * std::abs(x - y) + 1e-9);
  }
}

TEST_F(FuzzyProperties, MembershipMonotoneWithinEachSegment) {
  for (int i = 0; i < kCases; ++i) {
    const Term t = random_term(rng, 0);
    const auto& pts = t.membership.points();
    std::uniform_int_distribution<std::size_t> seg(1, pts.size() - 1);
    const std::size_t s = seg(rng);
    double x1 = pts[s - 1].x + u(rng) * (pts[s].x - pts[s - 1].x);
    double x2 = pts[s - 1].x + u(rng) * (pts[s].x - pts[s - 1].x);
    if (x1 > x2) std::swap(x1, x2);
    const double dir = pts[s].mu - pts[s - 1].mu;
    const double d = t.membership(x2) - t.membership(x1);
    ASSERT_GE(d * (dir >= 0 ? 1 : -1), -1e-12);
  }
}

TEST_F(FuzzyProperties, CrispEmbeddingOnIsolatedPlateau) {
  for (int i = 0; i < kCases; ++i) {
    // k disjoint trapezoids; a point on one plateau must give a one-hot vector.
    std::uniform_int_distribution<int> kd(1, 6);
    const int k = kd(rng);
    const double w = 1.0 / k;
    LinguisticVariable v{"v", 0, 1, {}};
    for (int j = 0; j < k; ++j) {
      const double a = j * w;
      v.terms.push_back(trapezoid("t" + std::to_string(j), a + 0.05 * w, a + 0.3 * w, a + 0.7 * w, a + 0.95 * w));
    }
    std::uniform_int_distribution<int> pick(0, k - 1);
    const int j = pick(rng);
    const double x = j * w + (0.3 + 0.4 * u(rng)) * w;
    const auto d = fuzzify(v, x);
    ASSERT_DOUBLE_EQ(d.notp, 0.0);
    for (int m = 0; m < k; ++m) ASSERT_DOUBLE_EQ(d.degrees[m].degree, m == j ? 1.0 : 0.0);
  }
}

TEST_F(FuzzyProperties, MeasureOfKeepsNecBelowPos) {
  for (int i = 0; i < kCases; ++i) {
    const auto var = random_variable(rng);
    const auto d = fuzzify(var, u(rng));
    for (const auto& t : d.degrees) {
      const auto m = measure_of(d, t.term);
      ASSERT_LE(m.nec, m.pos);
      ASSERT_GE(m.nec, 0.0);
    }
  }
}
