#include <gtest/gtest.h>

#include <random>

#include "mrinv/error.hpp"
#include "mrinv/evaluation.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mrinv;
using testing_support::cube;

namespace {

ClassMap numbered(std::size_t n) {
  ClassMap m;
  for (LabelId i = 1; i <= n; ++i) m.emplace(i, "class_" + std::to_string(i));
  return m;
}

DiceResult result(const std::string& case_id, const std::string& cls, double dsc, DiceStatus st = DiceStatus::ok) {
  DiceResult r;
  r.case_id = case_id;
  r.class_name = cls;
  r.dsc = dsc;
  r.status = st;
  return r;
}

}  // namespace

TEST(Dice, IdenticalMasks) {
  const LabelVolume a(cube(3, 1, 1), {1, 0, 1}, numbered(1));
  const auto r = dice(a, a, LabelId{1});
  EXPECT_EQ(r.dsc, 1.0);
  EXPECT_EQ(r.status, DiceStatus::ok);
}

TEST(Dice, DirectFormula) {
  // |gt| = 4, |pred| = 6, overlap = 3
  const LabelVolume gt(cube(10, 1, 1), {1, 1, 1, 1, 0, 0, 0, 0, 0, 0}, numbered(1));
  const LabelVolume pred(cube(10, 1, 1), {1, 1, 1, 0, 1, 1, 1, 0, 0, 0}, numbered(1));
  const auto r = dice(pred, gt, LabelId{1});
  EXPECT_EQ(r.gt_voxels, 4u);
  EXPECT_EQ(r.pred_voxels, 6u);
  EXPECT_EQ(r.overlap_voxels, 3u);
  EXPECT_DOUBLE_EQ(*r.dsc, 0.6);
}

TEST(Dice, EmptyStatuses) {
  const LabelVolume a(cube(2, 1, 1), {0, 0}, numbered(2));
  const LabelVolume b(cube(2, 1, 1), {2, 0}, numbered(2));
  EXPECT_EQ(dice(a, a, LabelId{1}).status, DiceStatus::both_empty);
  EXPECT_EQ(dice(a, a, LabelId{1}).dsc, 1.0);
  EXPECT_EQ(dice(a, b, LabelId{2}).status, DiceStatus::one_empty);
  EXPECT_EQ(dice(a, b, LabelId{2}).dsc, 0.0);
}

TEST(Dice, DimsMismatch) {
  const LabelVolume a(cube(2, 1, 1), {0, 0}, numbered(1));
  const LabelVolume b(cube(1, 2, 1), {0, 0}, numbered(1));
  EXPECT_THROW(dice(a, b, LabelId{1}), std::invalid_argument);
}

TEST(Dice, MatchesByNameAcrossDifferentIds) {
  const LabelVolume pred(cube(4, 1, 1), {7, 7, 0, 0}, ClassMap{{7, "liver"}});
  const LabelVolume gt(cube(4, 1, 1), {5, 0, 0, 5}, ClassMap{{5, "liver"}});
  const auto r = dice(pred, gt, std::string("liver"));
  EXPECT_EQ(r.overlap_voxels, 1u);
  EXPECT_DOUBLE_EQ(*r.dsc, 0.5);
  EXPECT_EQ(dice(pred, gt, std::string("spleen")).status, DiceStatus::both_empty);
}

TEST(Dice, TwentyClassesMatchTripleCountingOracle) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<LabelId> lab(0, 20);
  std::vector<LabelId> p(12 * 12 * 12), g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    g[i] = lab(rng);
    p[i] = (rng() % 3 == 0) ? g[i] : lab(rng);
  }
  const LabelVolume pred(cube(12, 12, 12), p, numbered(20));
  const LabelVolume gt(cube(12, 12, 12), g, numbered(20));
  std::vector<std::string> names;
  for (int c = 1; c <= 20; ++c) names.push_back("class_" + std::to_string(c));
  const auto results = evaluate_classes(pred, gt, names, "case");
  for (LabelId c = 1; c <= 20; ++c) {
    const auto o = oracle::triple_count(p, g, c);
    const auto& r = results[c - 1];
    EXPECT_EQ(r.gt_voxels, o.gt);
    EXPECT_EQ(r.pred_voxels, o.pred);
    EXPECT_EQ(r.overlap_voxels, o.both);
    EXPECT_EQ(*r.dsc, 2.0 * static_cast<double>(o.both) / static_cast<double>(o.gt + o.pred));
    EXPECT_EQ(r.case_id, "case");
  }
}

TEST(Dice, SymmetryBoundsAndSelf) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng() % 200;
    std::vector<LabelId> a(n), b(n);
    for (auto& v : a) v = static_cast<LabelId>(rng() % 4);
    for (auto& v : b) v = static_cast<LabelId>(rng() % 4);
    const LabelVolume va(cube(n, 1, 1), a, numbered(3));
    const LabelVolume vb(cube(n, 1, 1), b, numbered(3));
    for (LabelId l = 1; l <= 3; ++l) {
      const auto ab = dice(va, vb, l), ba = dice(vb, va, l);
      EXPECT_EQ(*ab.dsc, *ba.dsc);
      EXPECT_GE(*ab.dsc, 0.0);
      EXPECT_LE(*ab.dsc, 1.0);
      EXPECT_LE(ab.overlap_voxels, std::min(ab.gt_voxels, ab.pred_voxels));
      EXPECT_EQ(*dice(va, va, l).dsc, 1.0);
    }
  }
}

TEST(PerClassMean, Policies) {
  std::vector<DiceResult> rs = {result("a", "liver", 0.5), result("b", "liver", 0.7)};
  EXPECT_DOUBLE_EQ(*per_class_mean(rs, "liver"), 0.6);

  rs = {result("a", "liver", 0.8), result("b", "liver", 1.0, DiceStatus::both_empty)};
  EXPECT_DOUBLE_EQ(*per_class_mean(rs, "liver"), 0.8);
  EXPECT_DOUBLE_EQ(*per_class_mean(rs, "liver", EmptyPolicy::include_as_one), 0.9);

  rs = {result("a", "liver", 1.0, DiceStatus::both_empty)};
  EXPECT_FALSE(per_class_mean(rs, "liver").has_value());

  rs = {result("a", "liver", 0.0, DiceStatus::one_empty), result("b", "liver", 0.6)};
  EXPECT_DOUBLE_EQ(*per_class_mean(rs, "liver"), 0.3);

  DiceResult nogt;
  nogt.case_id = "c";
  nogt.class_name = "liver";
  nogt.status = DiceStatus::no_gt;
  rs = {nogt};
  EXPECT_FALSE(per_class_mean(rs, "liver").has_value());
}

TEST(ConfidenceInterval, ConstantInputZeroWidth) {
  const std::vector<double> v(20, 0.7);
  for (auto m : {CiMethod::bootstrap_percentile, CiMethod::student_t}) {
    const auto s = confidence_interval_95(v, m);
    EXPECT_EQ(s.mean, 0.7);
    EXPECT_EQ(s.ci_lo, 0.7);
    EXPECT_EQ(s.ci_hi, 0.7);
    EXPECT_EQ(s.n, 20u);
  }
}

TEST(ConfidenceInterval, SingleValueDegenerate) {
  const std::vector<double> v{0.3};
  for (auto m : {CiMethod::bootstrap_percentile, CiMethod::student_t}) {
    const auto s = confidence_interval_95(v, m);
    EXPECT_EQ(s.ci_lo, 0.3);
    EXPECT_EQ(s.ci_hi, 0.3);
  }
  EXPECT_THROW(confidence_interval_95(std::vector<double>{}), std::invalid_argument);
}

TEST(ConfidenceInterval, TwoPointBootstrapAgainstEnumeration) {
  const std::vector<double> v{0.2, 0.8};
  const auto dist = oracle::bootstrap_mean_distribution(v);
  ASSERT_EQ(dist.size(), 3u);
  EXPECT_DOUBLE_EQ(dist.at(0.2), 0.25);
  EXPECT_DOUBLE_EQ(dist.at(0.5), 0.5);
  EXPECT_DOUBLE_EQ(dist.at(0.8), 0.25);

  const auto s = confidence_interval_95(v);
  auto in_support = [&](double x) {
    for (const auto& [value, prob] : dist) {
      if (std::abs(value - x) < 1e-12) return true;
    }
    return false;
  };
  EXPECT_TRUE(in_support(s.ci_lo)) << s.ci_lo;
  EXPECT_TRUE(in_support(s.ci_hi)) << s.ci_hi;
  EXPECT_LE(s.ci_lo, s.mean);
  EXPECT_GE(s.ci_hi, s.mean);
  EXPECT_EQ(s.seed, kDefaultSeed);
}

TEST(ConfidenceInterval, SeedDeterminism) {
  const std::vector<double> v{0.1, 0.4, 0.45, 0.9, 0.62, 0.33};
  EXPECT_EQ(confidence_interval_95(v, CiMethod::bootstrap_percentile, 7),
            confidence_interval_95(v, CiMethod::bootstrap_percentile, 7));
  EXPECT_NE(confidence_interval_95(v, CiMethod::bootstrap_percentile, 7).ci_lo,
            confidence_interval_95(v, CiMethod::bootstrap_percentile, 8).ci_lo);
}

TEST(ConfidenceInterval, StudentTKnownValue) {
  // mean 2, s = 1, n = 3, t(0.975, 2) = 4.302652729911275
  const auto s = confidence_interval_95(std::vector<double>{1, 2, 3}, CiMethod::student_t);
  EXPECT_NEAR(s.ci_hi - s.mean, 4.302652729911275 / std::sqrt(3.0), 1e-9);
  EXPECT_NEAR(s.mean - s.ci_lo, 4.302652729911275 / std::sqrt(3.0), 1e-9);
}

TEST(ConfidenceInterval, SandwichOnRandomSamples) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 30; ++t) {
    std::vector<double> v(2 + rng() % 25);
    for (double& x : v) x = u(rng);
    for (auto m : {CiMethod::bootstrap_percentile, CiMethod::student_t}) {
      const auto s = confidence_interval_95(v, m, 42, 2000);
      EXPECT_LE(s.ci_lo, s.mean);
      EXPECT_GE(s.ci_hi, s.mean);
    }
  }
}

TEST(ConfidenceInterval, WidthShrinksWithSampleSize) {
  // Mean bootstrap width at n = 5 vs n = 40 over repeated draws; compare within 3 sigma.
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0, 1);
  auto widths = [&](std::size_t n) {
    std::vector<double> w;
    for (int rep = 0; rep < 40; ++rep) {
      std::vector<double> v(n);
      for (double& x : v) x = u(rng);
      const auto s = confidence_interval_95(v, CiMethod::bootstrap_percentile, rep, 1000);
      w.push_back(s.ci_hi - s.ci_lo);
    }
    return w;
  };
  auto mean_sd = [](const std::vector<double>& w) {
    const double m = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
    double ss = 0;
    for (double x : w) ss += (x - m) * (x - m);
    return std::make_pair(m, std::sqrt(ss / static_cast<double>(w.size() - 1)));
  };
  const auto [m_small, sd_small] = mean_sd(widths(5));
  const auto [m_large, sd_large] = mean_sd(widths(40));
  const double se = std::sqrt(sd_small * sd_small / 40 + sd_large * sd_large / 40);
  EXPECT_LE(m_large, m_small + 3 * se);
}

TEST(SummarizeVariant, SingleValueAndTwoClasses) {
  const std::string one[] = {"liver"};
  std::vector<DiceResult> rs = {result("a", "liver", 0.42)};
  const auto s = summarize_variant(rs, one);
  EXPECT_EQ(s.overall.mean, 0.42);
  EXPECT_EQ(s.overall.ci_lo, 0.42);
  EXPECT_EQ(s.overall.ci_hi, 0.42);

  const std::string two[] = {"liver", "spleen"};
  rs = {result("a", "liver", 0.1), result("b", "liver", 0.3), result("a", "spleen", 0.8)};
  const auto s2 = summarize_variant(rs, two);
  EXPECT_DOUBLE_EQ(s2.overall.mean, 0.5);
  EXPECT_EQ(s2.overall.n, 2u);
  EXPECT_EQ(s2.classes[0].cases, 2u);
}

TEST(SummarizeVariant, AbsentClassDroppedWithWarning) {
  const std::string names[] = {"liver", "adrenal_gland_left"};
  std::vector<DiceResult> rs = {result("a", "liver", 0.9),
                                result("a", "adrenal_gland_left", 1.0, DiceStatus::both_empty)};
  const auto s = summarize_variant(rs, names);
  EXPECT_EQ(s.overall.n, 1u);
  EXPECT_FALSE(s.classes[1].mean.has_value());
  ASSERT_EQ(s.warnings.size(), 1u);

  std::vector<DiceResult> none = {result("a", "liver", 1.0, DiceStatus::both_empty)};
  const std::string just_liver[] = {"liver"};
  EXPECT_THROW(summarize_variant(none, just_liver), Error);
  EXPECT_THROW(summarize_variant(none, std::span<const std::string>{}), Error);
}

TEST(SummarizeVariant, PooledAggregation) {
  const std::string names[] = {"liver", "spleen"};
  std::vector<DiceResult> rs = {result("a", "liver", 0.2), result("b", "liver", 0.4), result("a", "spleen", 0.9)};
  SummaryOptions opt;
  opt.aggregation = Aggregation::pooled;
  const auto s = summarize_variant(rs, names, opt);
  EXPECT_EQ(s.overall.n, 3u);
  EXPECT_DOUBLE_EQ(s.overall.mean, 0.5);
}

TEST(SummarizeVariant, InputOrderDoesNotMatter) {
  const std::string names[] = {"liver", "spleen"};
  std::vector<DiceResult> rs = {result("b", "liver", 0.1), result("a", "liver", 0.7), result("c", "spleen", 0.35),
                                result("a", "spleen", 0.2)};
  auto shuffled = rs;
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(summarize_variant(rs, names).overall, summarize_variant(shuffled, names).overall);
}
