#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stagelens/clustering.hpp"
#include "stagelens/random.hpp"
#include "stagelens/typing.hpp"

using namespace stagelens;

namespace {

Eigen::MatrixXd blobs(Rng& rng, const std::vector<Eigen::RowVectorXd>& centers, int per, double sd,
                      std::vector<int>& truth) {
  const auto d = centers[0].size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(centers.size()) * per, d);
  truth.clear();
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (int i = 0; i < per; ++i) {
      const auto r = static_cast<Eigen::Index>(c) * per + i;
      for (Eigen::Index j = 0; j < d; ++j) x(r, j) = centers[c](j) + rng.normal(0.0, sd);
      truth.push_back(static_cast<int>(c));
    }
  return x;
}

Dataset typed_dataset(Rng& rng) {
  Dataset ds;
  for (int u = 0; u < 6; ++u) {
    BehaviorSequence s;
    s.user_id = "u" + std::to_string(u);
    for (int w = 0; w < 20; ++w) {
      WindowedEvent e;
      e.window_index = w;
      const double c = (w % 2) ? 3.0 : -3.0;
      for (std::size_t d = 0; d < kBehaviorDims; ++d) {
        e.normalized[d] = c + rng.normal(0.0, 0.3);
        e.raw[d] = e.normalized[d] + 10.0;
      }
      s.events.push_back(e);
    }
    ds.sequences.push_back(s);
  }
  ds.normalized = true;
  return ds;
}

}  // namespace

TEST(KMeans, RecoversSeparatedBlobs) {
  Rng rng(1);
  std::vector<int> truth;
  const auto x = blobs(rng, {Eigen::RowVector2d(0, 0), Eigen::RowVector2d(10, 10)}, 40, 0.5, truth);
  const auto r = kmeans(x, 2, {});
  EXPECT_DOUBLE_EQ(oracle::adjusted_rand(truth, r.labels), 1.0);
}

TEST(KMeans, SameSeedSameLabels) {
  Rng rng(2);
  std::vector<int> truth;
  const auto x = blobs(rng, {Eigen::RowVector2d(0, 0), Eigen::RowVector2d(2, 0), Eigen::RowVector2d(0, 2)}, 30,
                       1.0, truth);
  KMeansOptions o;
  o.seed = 9;
  const auto a = kmeans(x, 3, o), b = kmeans(x, 3, o);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.inertia, b.inertia);
}

TEST(KMeans, TooManyClustersRejected) {
  Eigen::MatrixXd x(4, 1);
  x << 1, 1, 2, 2;
  EXPECT_EQ(distinct_rows(x), 2u);
  EXPECT_THROW(kmeans(x, 3, {}), std::invalid_argument);
  EXPECT_THROW(kmeans(x, 0, {}), std::invalid_argument);
}

TEST(Silhouette, MatchesPairwiseReference) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = rng.integer(10, 120), k = rng.integer(2, 5);
    Eigen::MatrixXd x(n, 3);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      labels[static_cast<std::size_t>(i)] = i < k ? i : rng.integer(0, k - 1);
      for (int d = 0; d < 3; ++d) x(i, d) = rng.normal() + labels[static_cast<std::size_t>(i)];
    }
    EXPECT_NEAR(silhouette(x, labels).score, oracle::silhouette(x, labels), 1e-9);
  }
}

TEST(Silhouette, FarBlobsScoreHigh) {
  Rng rng(4);
  std::vector<int> truth;
  const auto x = blobs(rng, {Eigen::RowVector2d(0, 0), Eigen::RowVector2d(50, 0)}, 25, 1.0, truth);
  EXPECT_GT(silhouette(x, truth).score, 0.8);
}

TEST(Silhouette, IdenticalPointsDegenerate) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(6, 2);
  const auto s = silhouette(x, {0, 0, 0, 1, 1, 1});
  EXPECT_EQ(s.score, 0.0);
  EXPECT_TRUE(s.degenerate);
  EXPECT_TRUE(silhouette(x, {0, 0, 0, 0, 0, 0}).degenerate);
}

TEST(Silhouette, SampledIsExactBelowLimit) {
  Rng rng(6);
  std::vector<int> truth;
  const auto x = blobs(rng, {Eigen::RowVector2d(0, 0), Eigen::RowVector2d(3, 0)}, 20, 1.0, truth);
  EXPECT_EQ(silhouette_sampled(x, truth, 100, 1).score, silhouette(x, truth).score);
  const auto s = silhouette_sampled(x, truth, 10, 1);
  EXPECT_FALSE(s.degenerate);
}

TEST(Cosine, OrthogonalCentroids) {
  Eigen::MatrixXd c(2, 2);
  c << 1, 0, 0, 2;
  const auto s = cosine_similarity(c);
  EXPECT_NEAR(s(0, 1), 0.0, 1e-12);
  EXPECT_NEAR(s(0, 0), 1.0, 1e-12);
}

TEST(Ward, SeparatesGroupsAndNumbersByAppearance) {
  Eigen::MatrixXd x(6, 1);
  x << 10, 0, 10.1, 0.2, 20, 20.3;
  EXPECT_EQ(ward_clusters(x, 3), (std::vector<int>{0, 1, 0, 1, 2, 2}));
  EXPECT_EQ(ward_clusters(x, 1), (std::vector<int>(6, 0)));
}

TEST(CalinskiHarabasz, PrefersTrueSplit) {
  Rng rng(8);
  std::vector<int> truth;
  const auto x = blobs(rng, {Eigen::RowVector2d(0, 0), Eigen::RowVector2d(8, 0)}, 20, 1.0, truth);
  std::vector<int> shuffled = truth;
  rng.shuffle(shuffled);
  EXPECT_GT(calinski_harabasz(x, truth), calinski_harabasz(x, shuffled));
}

TEST(Typing, BoxSummary) {
  const auto b = box_summary({1, 2, 3, 4, 100});
  EXPECT_DOUBLE_EQ(b.median, 3.0);
  EXPECT_DOUBLE_EQ(b.q1, 2.0);
  EXPECT_DOUBLE_EQ(b.q3, 4.0);
  EXPECT_DOUBLE_EQ(b.min, 1.0);
  EXPECT_DOUBLE_EQ(b.max, 4.0);  // 100 lies beyond 1.5 IQR
}

TEST(Typing, FitAndAssign) {
  Rng rng(10);
  Dataset ds = typed_dataset(rng);
  EXPECT_THROW(fit_types(ds, BehaviorKind::Proactive, 1, 1), std::invalid_argument);
  const auto m = fit_types(ds, BehaviorKind::Proactive, 2, 1);
  EXPECT_EQ(m.dims, (std::vector<std::size_t>{1, 2, 3, 4, 5}));
  ASSERT_EQ(m.assignments.size(), ds.sequences.size());
  // Alternating windows land alternately in the two types.
  for (const auto& a : m.assignments)
    for (std::size_t w = 1; w < a.size(); ++w) EXPECT_NE(a[w], a[w - 1]);

  BehaviorVector at;
  for (std::size_t j = 0; j < m.dims.size(); ++j) at[m.dims[j]] = m.centroids(1, static_cast<Eigen::Index>(j));
  EXPECT_EQ(m.assign(at), 2);
  ASSERT_EQ(m.boxplots.size(), 2u);
  EXPECT_EQ(m.boxplots[0].size(), 5u);
  EXPECT_EQ(type_label(BehaviorKind::Reactive, 3), "r3");
}

TEST(Typing, DiagnosticsAndEvents) {
  Rng rng(11);
  Dataset ds = typed_dataset(rng);
  const auto diag = diagnostics(ds, BehaviorKind::Reactive, 2, 10, 2, 1);
  EXPECT_EQ(diag.silhouette_by_k.size(), 9u);
  EXPECT_EQ(diag.selected_k, 2);
  EXPECT_GT(diag.silhouette_by_k.at(2), diag.silhouette_by_k.at(5));
  EXPECT_EQ(diag.size_proportions.size(), 2u);

  const auto p = fit_types(ds, BehaviorKind::Proactive, 2, 1);
  const auto r = fit_types(ds, BehaviorKind::Reactive, 2, 1);
  form_events(ds, p, r);
  for (const auto& s : ds.sequences)
    for (const auto& e : s.events) {
      EXPECT_GE(e.triple.proactive_type, 1);
      EXPECT_GE(e.triple.reactive_type, 1);
    }
}
