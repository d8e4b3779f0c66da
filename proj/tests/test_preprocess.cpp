#include <gtest/gtest.h>

#include <random>
#include <set>

#include "annocal/annocal.hpp"
#include "support.hpp"

using namespace annocal;

TEST(Assignment, RectangularAgainstBruteForce)
{
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> size(0, 6);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int inst = 0; inst < 300; ++inst)
  {
    CostMatrix c(size(rng), size(rng));
    for (std::size_t r = 0; r < c.rows(); ++r)
      for (std::size_t k = 0; k < c.cols(); ++k) c(r, k) = u(rng);
    const auto got = solve_assignment(c);
    const auto brute = oracle::brute_force_assignment(c);
    EXPECT_EQ(got.size(), std::min(c.rows(), c.cols()));
    EXPECT_NEAR(assignment_cost(c, got), brute.best, 1e-9);
    ASSERT_EQ(brute.optimal.size(), 1u);
    EXPECT_EQ(got, brute.optimal.front());
  }
}

TEST(Assignment, TiesStillOptimalAndDeterministic)
{
  CostMatrix c(3, 3, 1.0);
  const auto a = solve_assignment(c);
  EXPECT_EQ(a, solve_assignment(c));
  EXPECT_DOUBLE_EQ(assignment_cost(c, a), 3.0);
  std::set<std::size_t> cols;
  for (const auto& [r, k] : a) cols.insert(k);
  EXPECT_EQ(cols.size(), 3u);
}

TEST(Assignment, RejectsNonFinite)
{
  CostMatrix c(2, 2, 0.0);
  c(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(solve_assignment(c), Error);
}

TEST(MatchPair, Examples)
{
  const std::vector<Box> one{{0, 0, 10, 10}};
  EXPECT_EQ(match_pair(std::span<const Box>(one), std::span<const Box>(one), 0.5),
            (std::vector<IndexPair>{{0, 0}}));
  EXPECT_TRUE(match_pair(std::span<const Box>(one), std::span<const Box>(), 0.5).empty());
  // overlap below the threshold is dropped after assignment
  const std::vector<Box> shifted{{8, 0, 18, 10}};
  EXPECT_TRUE(match_pair(std::span<const Box>(one), std::span<const Box>(shifted), 0.5).empty());
  // zero overlap never pairs, even with a zero threshold
  const std::vector<Box> far{{50, 50, 60, 60}};
  EXPECT_TRUE(match_pair(std::span<const Box>(one), std::span<const Box>(far), 0.0).empty());
}

TEST(MatchPair, AgainstBruteForce)
{
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> size(0, 6);
  for (int inst = 0; inst < 300; ++inst)
  {
    std::vector<Box> a(static_cast<std::size_t>(size(rng))), b(static_cast<std::size_t>(size(rng)));
    for (auto& x : a) x = oracle::random_box(rng, 60.0, 10.0, 40.0);
    for (auto& x : b) x = oracle::random_box(rng, 60.0, 10.0, 40.0);
    CostMatrix c(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) c(i, j) = 1.0 - iou(a[i], b[j]);
    const auto brute = oracle::brute_force_assignment(c);
    const auto got = match_pair(std::span<const Box>(a), std::span<const Box>(b), 0.3);
    bool found = false;
    for (const auto& opt : brute.optimal) found |= oracle::filter_min_iou(opt, a, b, 0.3) == got;
    EXPECT_TRUE(found) << "instance " << inst;
  }
}

TEST(SoftTarget, Examples)
{
  auto members = [](std::vector<int> classes) {
    std::vector<ClusterMember> m;
    int k = 1;
    for (int c : classes) m.push_back({{{0, 0, 1, 1}, c, k++}, 0});
    return m;
  };
  EXPECT_EQ(soft_class_target(members({1, 1, 1, 2, 2}), 3, 5),
            (std::vector<double>{0.0, 0.6, 0.4, 0.0}));
  EXPECT_EQ(soft_class_target(members({}), 3, 5), (std::vector<double>{1.0, 0.0, 0.0, 0.0}));
  EXPECT_EQ(soft_class_target(members({1}), 2, 2), (std::vector<double>{0.5, 0.5, 0.0}));
  EXPECT_THROW(soft_class_target(members({1, 1, 1}), 2, 2), Error);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i)
  {
    const int K = std::uniform_int_distribution<int>(2, 30)(rng);
    const int n = std::uniform_int_distribution<int>(0, K)(rng);
    std::vector<int> cls;
    for (int k = 0; k < n; ++k) cls.push_back(std::uniform_int_distribution<int>(1, 7)(rng));
    const auto t = soft_class_target(members(cls), 7, K);
    double s = 0.0;
    for (double x : t)
    {
      EXPECT_GE(x, 0.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(t[0], static_cast<double>(K - n) / K);
  }
}

TEST(TargetVariance, Examples)
{
  const Box zero{0, 0, 0, 0};
  const Box b{5, 5, 20, 20};
  EXPECT_EQ(target_variance(b, b, 3, 5), zero);

  const double z = oracle::quantile_by_bisection(0.75);
  const auto v = target_variance({0, 0, 0, 0}, {10, 0, 0, 0}, 1, 2);
  EXPECT_NEAR(v[0], (10.0 / (2.0 * z)) * (10.0 / (2.0 * z)), 1e-9);
  EXPECT_NEAR(v[0], 54.95, 0.01);
  EXPECT_EQ(v[1], 0.0);

  // full agreement is clamped to gamma
  const double z999 = oracle::quantile_by_bisection(0.9995);
  EXPECT_NEAR(z999, 3.29053, 1e-4);
  const auto full = target_variance({0, 0, 0, 0}, {1, 1, 1, 1}, 4, 4);
  EXPECT_NEAR(full[0], 1.0 / (4.0 * z999 * z999), 1e-12);
  EXPECT_THROW(target_variance(b, b, 0, 5), Error);
  EXPECT_THROW(target_variance(b, b, 1, 5, 1.0), Error);
}

TEST(TargetVariance, ScalesQuadraticallyAndShrinksWithAgreement)
{
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.1, 50.0);
  for (int i = 0; i < 200; ++i)
  {
    const Box lo{0, 0, 0, 0};
    const Box hi{u(rng), u(rng), u(rng), u(rng)};
    const double s = u(rng) / 10.0;
    const Box hs{hi[0] * s, hi[1] * s, hi[2] * s, hi[3] * s};
    const auto v1 = target_variance(lo, hi, 3, 10);
    const auto v2 = target_variance(lo, hs, 3, 10);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(v2[k], s * s * v1[k], 1e-12 * v2[k]);
    for (std::size_t n = 1; n < 10; ++n)
      for (std::size_t k = 0; k < 4; ++k)
        EXPECT_GT(target_variance(lo, hi, n, 10)[k], target_variance(lo, hi, n + 1, 10)[k]);
  }
}

TEST(Cluster, Examples)
{
  const auto meta2 = oracle::make_meta(3, 2);
  ImageAnnotations same{"i", 100, 100, {{{10, 10, 30, 30}, 3, 1}, {{10, 10, 30, 30}, 3, 2}}};
  const auto c = cluster_annotations(same, meta2);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].soft_label, (std::vector<double>{0, 0, 0, 1}));
  EXPECT_EQ(c[0].target_var, (Box{0, 0, 0, 0}));
  EXPECT_EQ(c[0].annotator_certainty, 1.0);

  const auto meta5 = oracle::make_meta(2, 5);
  ImageAnnotations single{"i", 100, 100, {{{10, 10, 30, 30}, 2, 4}}};
  const auto s = cluster_annotations(single, meta5);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s[0].soft_label[0], 0.8);
  EXPECT_DOUBLE_EQ(s[0].soft_label[2], 0.2);

  const auto meta3 = oracle::make_meta(1, 3);
  ImageAnnotations disjoint{"i", 100, 100,
                            {{{0, 0, 10, 10}, 1, 1}, {{20, 20, 30, 30}, 1, 2}, {{40, 40, 50, 50}, 1, 3}}};
  EXPECT_EQ(cluster_annotations(disjoint, meta3).size(), 3u);

  EXPECT_TRUE(cluster_annotations({"i", 100, 100, {}}, meta3).empty());
}

TEST(Cluster, RunningMeanGuidesLaterAnnotators)
{
  // annotator 3's box overlaps the mean of 1 and 2 better than either alone
  const auto meta = oracle::make_meta(1, 3);
  ImageAnnotations img{"i", 200, 200,
                       {{{0, 0, 20, 20}, 1, 1}, {{10, 0, 30, 20}, 1, 2}, {{5, 0, 25, 20}, 1, 3}}};
  const auto c = cluster_annotations(img, meta, {0.3, kDefaultGamma});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].size(), 3u);
  EXPECT_EQ(c[0].mean_box, (Box{5, 0, 25, 20}));
  EXPECT_EQ(c[0].min_box, (Box{0, 0, 20, 20}));
  EXPECT_EQ(c[0].max_box, (Box{10, 0, 30, 20}));
}

TEST(Cluster, PartitionPropertyAndDeterminism)
{
  auto cfg = fixtures::low_agreement_config(8);
  cfg.num_images = 200;
  cfg.separated = false;
  const auto data = simulate_dataset(cfg);
  for (const auto& img : data.images)
  {
    const auto c = cluster_annotations(img, data.meta);
    EXPECT_EQ(c, cluster_annotations(img, data.meta));
    std::vector<int> seen(img.annotations.size(), 0);
    for (const auto& cl : c)
    {
      std::set<int> annotators;
      EXPECT_GE(cl.size(), 1u);
      EXPECT_LE(cl.size(), 5u);
      for (const auto& m : cl.members)
      {
        ++seen[m.index];
        EXPECT_EQ(m.annotation, img.annotations[m.index]);
        EXPECT_TRUE(annotators.insert(m.annotation.annotator_id).second);
      }
      for (std::size_t k = 0; k < 4; ++k)
      {
        EXPECT_LE(cl.min_box[k], cl.max_box[k]);
        EXPECT_GE(cl.target_var[k], 0.0);
      }
    }
    for (int s : seen) EXPECT_EQ(s, 1);
  }
}

TEST(Agreement, Unanimous)
{
  auto cfg = fixtures::clean_box_config();
  cfg.num_images = 50;
  for (auto& a : cfg.annotators) a.class_accuracy = 1.0;
  const auto data = simulate_dataset(cfg);
  std::vector<std::vector<AnnotationCluster>> clustered;
  for (const auto& img : data.images) clustered.push_back(cluster_annotations(img, data.meta));
  const auto r = krippendorff_alpha(clustered, data.meta);
  ASSERT_TRUE(r.alpha);
  EXPECT_EQ(*r.alpha, 1.0);
}

TEST(Agreement, HandComputedCoincidence)
{
  // two coders, units labeled (1,1) and (1,2); with both coders present the
  // background coding adds nothing. Coincidences: o11 = 2, o12 = o21 = 1, n = 4,
  // n1 = 3, n2 = 1. D_o = 2 / 4, D_e = 2 * 3 * 1 / (4 * 3), alpha = 1 - D_o / D_e.
  const auto meta = oracle::make_meta(2, 2);
  auto unit = [&](int a, int b) {
    return oracle::make_cluster({{{0, 0, 1, 1}, a, 1}, {{0, 0, 1, 1}, b, 2}}, 2, 2);
  };
  const std::vector<std::vector<AnnotationCluster>> data{{unit(1, 1), unit(1, 2)}};
  const double d_o = 2.0 / 4.0;
  const double d_e = 2.0 * 3.0 * 1.0 / (4.0 * 3.0);
  const auto r = krippendorff_alpha(data, meta);
  ASSERT_TRUE(r.alpha);
  EXPECT_NEAR(*r.alpha, 1.0 - d_o / d_e, 1e-12);
  EXPECT_NEAR(*r.alpha, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.pairable_values, 4.0);
}

TEST(Agreement, RandomLabelsNearZero)
{
  const int K = 5, J = 4;
  const auto meta = oracle::make_meta(J, K);
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> cls(1, J);
  std::vector<std::vector<AnnotationCluster>> data(1);
  for (int u = 0; u < 10000; ++u)
  {
    std::vector<Annotation> anns;
    for (int k = 1; k <= K; ++k) anns.push_back({{0, 0, 1, 1}, cls(rng), k});
    data[0].push_back(oracle::make_cluster(anns, J, K));
  }
  const auto r = krippendorff_alpha(data, meta);
  ASSERT_TRUE(r.alpha);
  EXPECT_LE(std::abs(*r.alpha), 0.05);
}

TEST(Agreement, InsufficientDataAndMissingCoding)
{
  const auto meta = oracle::make_meta(2, 3);
  const std::vector<std::vector<AnnotationCluster>> none{{}};
  EXPECT_FALSE(krippendorff_alpha(none, meta).alpha);

  const std::vector<std::vector<AnnotationCluster>> singles{
      {oracle::make_cluster({{{0, 0, 1, 1}, 1, 1}}, 2, 3)}};
  EXPECT_FALSE(krippendorff_alpha(singles, meta, AbsentAnnotatorCoding::missing).alpha);
  // with background coding the two silent annotators make the unit pairable
  EXPECT_TRUE(krippendorff_alpha(singles, meta).alpha);
}
