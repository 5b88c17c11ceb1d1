#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stagelens/stages.hpp"

using namespace stagelens;

namespace {

Segment fake_segment(const Eigen::VectorXd& mu, const Eigen::VectorXd& var) {
  Segment s;
  s.summary.mu = mu;
  s.summary.sigma = var.asDiagonal();
  return s;
}

std::vector<Segment> two_regimes(Rng& rng, int per, std::vector<int>& truth) {
  std::vector<Segment> out;
  truth.clear();
  for (int r = 0; r < 2; ++r)
    for (int i = 0; i < per; ++i) {
      Eigen::MatrixXd x(8, 4);
      for (int t = 0; t < 8; ++t)
        for (int d = 0; d < 4; ++d) x(t, d) = rng.normal(r == 0 ? -1.5 : 1.5, 0.5);
      Segment s;
      s.summary = segment_loglik(x, 0.1);
      out.push_back(s);
      truth.push_back(r);
    }
  return out;
}

Stage stage_with(int internal, double w, std::size_t members) {
  Stage s;
  s.internal_id = internal;
  s.positivity = w;
  s.members.assign(members, 0);
  return s;
}

Eigen::MatrixXd random_series(Rng& rng, int len, int dims) {
  Eigen::MatrixXd m(len, dims);
  for (int i = 0; i < len; ++i)
    for (int d = 0; d < dims; ++d) m(i, d) = rng.normal();
  return m;
}

}  // namespace

TEST(StageFeatures, LambdaBoundaries) {
  std::vector<Segment> segs{fake_segment(Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0)),
                            fake_segment(Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 4)),
                            fake_segment(Eigen::Vector2d(0.5, 1), Eigen::Vector2d(0.2, 0.8))};
  const auto sp = fit_feature_space(segs);
  EXPECT_TRUE(stage_feature(segs[2], sp, 0.0).isApprox(Eigen::Vector2d(0.5, 0.5)));
  EXPECT_TRUE(stage_feature(segs[2], sp, 1.0).isApprox(Eigen::Vector2d(0.2, 0.2)));
  // 0.9 * 0.5 + 0.1 * 0.2
  EXPECT_NEAR(stage_feature(segs[2], sp, 0.1)(0), 0.47, 1e-12);
  EXPECT_THROW(stage_feature(segs[2], sp, 1.5), std::invalid_argument);
}

TEST(StageFeatures, ConstantDimensionIsZero) {
  std::vector<Segment> segs{fake_segment(Eigen::Vector2d(3, 0), Eigen::Vector2d(1, 1)),
                            fake_segment(Eigen::Vector2d(3, 1), Eigen::Vector2d(1, 2))};
  const auto f = stage_features(segs, 0.1);
  EXPECT_EQ(f(0, 0), 0.0);
  EXPECT_EQ(f(1, 0), 0.0);
}

TEST(StageClustering, RecoversPlantedRegimes) {
  Rng rng(1);
  std::vector<int> truth;
  const auto segs = two_regimes(rng, 30, truth);
  const auto c = cluster_stages(segs, 2, 0.1, 3);
  EXPECT_GT(oracle::adjusted_rand(truth, c.labels), 0.9);
  const auto again = cluster_stages(segs, 2, 0.1, 3);
  EXPECT_EQ(again.labels, c.labels);
  EXPECT_EQ(c.stages[0].members.size() + c.stages[1].members.size(), segs.size());
}

TEST(StageClustering, OneStagePerSegmentIsDegenerate) {
  Rng rng(2);
  std::vector<int> truth;
  auto segs = two_regimes(rng, 2, truth);
  const auto c = cluster_stages(segs, 4, 0.1, 1);
  EXPECT_TRUE(c.degenerate);
  for (const auto& s : c.stages) EXPECT_EQ(s.members.size(), 1u);
  EXPECT_THROW(cluster_stages(segs, 5, 0.1, 1), std::invalid_argument);
}

TEST(StageOrdering, ByPositivityThenSize) {
  auto o = order_stages({stage_with(0, 0.3, 1), stage_with(1, -0.1, 1), stage_with(2, 0.0, 1)});
  EXPECT_EQ(o[0].internal_id, 0);
  EXPECT_EQ(o[1].internal_id, 2);
  EXPECT_EQ(o[2].internal_id, 1);
  EXPECT_EQ(o[2].stage_id, 3);

  o = order_stages({stage_with(0, 0.0, 2), stage_with(1, 0.0, 5), stage_with(2, 0.0, 3)});
  EXPECT_EQ(o[0].internal_id, 1);
  EXPECT_EQ(o[1].internal_id, 2);
}

TEST(StageOrdering, NegatedPositivityReverses) {
  std::vector<Stage> st{stage_with(0, 0.2, 1), stage_with(1, -0.4, 1), stage_with(2, 0.1, 1), stage_with(3, 0.05, 1)};
  auto flipped = st;
  for (auto& s : flipped) s.positivity = -s.positivity;
  const auto a = order_stages(st), b = order_stages(flipped);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].internal_id, b[a.size() - 1 - i].internal_id);
}

TEST(StatSummary, ConstantStage) {
  std::vector<EventTriple> ev(7, EventTriple{DepressionLevel::Mid, 2, 2});
  const auto s = stat_summary(ev, 3, 3, 0.2);
  EXPECT_EQ(s.frequencies.level[1], 1.0);
  EXPECT_EQ(s.frequencies.proactive[1], 1.0);
  EXPECT_EQ(s.frequencies.reactive[1], 1.0);
  ASSERT_EQ(s.cooccurrences.size(), 1u);
  EXPECT_EQ(s.cooccurrences[0].frequency, 1.0);
}

TEST(StatSummary, MixMatchesTally) {
  Rng rng(3);
  std::vector<EventTriple> ev;
  std::map<std::tuple<int, int, int>, int> joint;
  std::array<int, 3> levels{};
  std::vector<int> p(4, 0), r(3, 0);
  for (int i = 0; i < 200; ++i) {
    EventTriple e{static_cast<DepressionLevel>(rng.index(3)), rng.integer(1, 4), rng.integer(1, 3)};
    ev.push_back(e);
    ++levels[static_cast<std::size_t>(e.level)];
    ++p[static_cast<std::size_t>(e.proactive_type - 1)];
    ++r[static_cast<std::size_t>(e.reactive_type - 1)];
    ++joint[{static_cast<int>(e.level), e.proactive_type, e.reactive_type}];
  }
  const auto s = stat_summary(ev, 4, 3, 0.03);
  for (int l = 0; l < 3; ++l) EXPECT_DOUBLE_EQ(s.frequencies.level[l], levels[l] / 200.0);
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(s.frequencies.proactive[k], p[k] / 200.0);
  for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(s.frequencies.reactive[k], r[k] / 200.0);
  std::size_t expected_links = 0;
  for (const auto& [k, n] : joint) expected_links += n / 200.0 >= 0.03;
  EXPECT_EQ(s.cooccurrences.size(), expected_links);
  for (std::size_t i = 1; i < s.cooccurrences.size(); ++i)
    EXPECT_GE(s.cooccurrences[i - 1].frequency, s.cooccurrences[i].frequency);
  EXPECT_TRUE(stat_summary(ev, 4, 3, 1.0).cooccurrences.empty());
}

TEST(TemporalSummary, CollapsesAndTracksTrend) {
  Rng rng(4);
  std::vector<AlignedMember> members(10);
  std::vector<EventTriple> all;
  for (auto& m : members)
    for (int i = 0; i < 5; ++i) {
      EventTriple e{DepressionLevel::Low, rng.integer(1, 3), 1};
      m.events.push_back(e);
      m.positions.push_back(1);
      all.push_back(e);
    }
  const auto one = temporal_summary(members, 1, 3, 2);
  const auto flat = tally(all, 3, 2);
  EXPECT_EQ(one.positions[0].proactive, flat.proactive);

  // p2 share rises with position.
  std::vector<AlignedMember> rising(1);
  for (int pos = 1; pos <= 5; ++pos)
    for (int i = 0; i < 5; ++i) {
      rising[0].events.push_back({DepressionLevel::Low, i < pos ? 2 : 1, 1});
      rising[0].positions.push_back(pos);
    }
  const auto t = temporal_summary(rising, 6, 2, 1);
  for (int pos = 1; pos < 5; ++pos) EXPECT_GT(t.positions[pos].proactive[1], t.positions[pos - 1].proactive[1]);
  EXPECT_TRUE(t.empty[5]);
}

TEST(Representatives, SmallCountsAndFallback) {
  Rng rng(5);
  std::vector<Eigen::MatrixXd> three{random_series(rng, 5, 2), random_series(rng, 5, 2), random_series(rng, 5, 2),
                                     random_series(rng, 7, 2)};
  const auto r = select_representatives(three, {0, 0, 0, 0}, 5);
  ASSERT_EQ(r.representatives.size(), 3u);
  EXPECT_FALSE(r.fallback);
  EXPECT_EQ(r.representatives[2].member, 2u);

  std::vector<Eigen::MatrixXd> none{random_series(rng, 4, 2), random_series(rng, 9, 2), random_series(rng, 6, 2),
                                    random_series(rng, 3, 2)};
  const auto f = select_representatives(none, {0.5, 0.1, 0.9, 0.2}, 5);
  EXPECT_TRUE(f.fallback);
  ASSERT_EQ(f.representatives.size(), 3u);
  EXPECT_EQ(f.representatives[0].member, 1u);
  EXPECT_EQ(f.representatives[1].member, 3u);
  EXPECT_EQ(f.representatives[0].values.rows(), 5);
  EXPECT_TRUE(f.representatives[0].resampled);
}

TEST(Representatives, OnePerPlantedShape) {
  Rng rng(6);
  std::vector<Eigen::MatrixXd> members;
  for (int i = 0; i < 12; ++i) {
    Eigen::MatrixXd m(5, 1);
    for (int t = 0; t < 5; ++t) m(t, 0) = (i % 2 ? t : 4 - t) * 2.0 + rng.normal(0.0, 0.1);
    members.push_back(m);
  }
  const auto r = select_representatives(members, std::vector<double>(12, 0.0), 5);
  std::set<std::size_t> shapes;
  for (const auto& rep : r.representatives) shapes.insert(rep.member % 2);
  EXPECT_EQ(shapes.size(), 2u);
}

TEST(Resample, EndpointsAndMidpoints) {
  Eigen::MatrixXd x(3, 1);
  x << 0, 2, 4;
  const auto r = resample(x, 5);
  EXPECT_TRUE(r.isApprox((Eigen::MatrixXd(5, 1) << 0, 1, 2, 3, 4).finished()));
}

TEST(Wddtw, IdentityIsDiagonal) {
  Rng rng(7);
  const auto a = random_series(rng, 6, 3);
  const auto w = wddtw_distance(a, a);
  EXPECT_EQ(w.distance, 0.0);
  ASSERT_EQ(w.path.size(), 6u);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(w.path[static_cast<std::size_t>(i)], std::make_pair(i, i));
}

TEST(Wddtw, MatchesExhaustivePaths) {
  Rng rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const auto a = random_series(rng, rng.integer(1, 6), 2);
    const auto b = random_series(rng, rng.integer(1, 6), 2);
    const auto w = wddtw_distance(a, b);
    EXPECT_NEAR(w.distance, oracle::brute_wddtw(a, b), 1e-9);
    EXPECT_EQ(w.path.front(), std::make_pair(0, 0));
    EXPECT_EQ(w.path.back(), std::make_pair(static_cast<int>(a.rows()) - 1, static_cast<int>(b.rows()) - 1));
  }
}

TEST(Wddtw, SensitiveToShapeNotLevel) {
  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(5, 1, 2.0);
  Eigen::MatrixXd ramp(5, 1);
  ramp << 0, 1, 2, 3, 4;
  EXPECT_GT(wddtw_distance(flat, ramp).distance, 0.0);
  EXPECT_EQ(wddtw_distance(ramp, (ramp.array() + 10.0).matrix()).distance, 0.0);
}

TEST(Alignment, IdentityAndSurjectivity) {
  Rng rng(9);
  const auto rep = random_series(rng, 5, 2);
  std::vector<Representative> reps{{0, rep, false}};
  EXPECT_EQ(align_segment(rep, reps).positions, (std::vector<int>{1, 2, 3, 4, 5}));

  const auto longer = random_series(rng, 10, 2);
  const auto a = align_segment(longer, reps);
  ASSERT_EQ(a.positions.size(), 10u);
  std::set<int> hit(a.positions.begin(), a.positions.end());
  EXPECT_EQ(hit, (std::set<int>{1, 2, 3, 4, 5}));
  EXPECT_TRUE(std::is_sorted(a.positions.begin(), a.positions.end()));
}

TEST(Alignment, PicksNearestRepresentative) {
  Rng rng(10);
  std::vector<Representative> reps;
  for (int r = 0; r < 3; ++r) reps.push_back({static_cast<std::size_t>(r), random_series(rng, 5, 2), false});
  for (int trial = 0; trial < 10; ++trial) {
    const auto seg = random_series(rng, rng.integer(3, 9), 2);
    std::size_t best = 0;
    for (std::size_t r = 1; r < reps.size(); ++r)
      if (oracle::brute_wddtw(seg, reps[r].values) < oracle::brute_wddtw(seg, reps[best].values)) best = r;
    EXPECT_EQ(align_segment(seg, reps).representative, best);
  }
}
