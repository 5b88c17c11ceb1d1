#include "stagelens/stages.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "stagelens/clustering.hpp"

namespace stagelens {

// ---------------------------------------------------------------------------
// Features

StageFeatureSpace fit_feature_space(const std::vector<Segment>& segments) {
  if (segments.empty()) throw std::invalid_argument("no segments");
  const auto n = segments.front().summary.mu.size();
  StageFeatureSpace sp;
  sp.mu_min = sp.var_min = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  sp.mu_max = sp.var_max = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  for (const auto& s : segments) {
    const Eigen::VectorXd var = s.summary.sigma.diagonal();
    sp.mu_min = sp.mu_min.cwiseMin(s.summary.mu);
    sp.mu_max = sp.mu_max.cwiseMax(s.summary.mu);
    sp.var_min = sp.var_min.cwiseMin(var);
    sp.var_max = sp.var_max.cwiseMax(var);
  }
  return sp;
}

namespace {

double min_max(double v, double lo, double hi) {
  const double range = hi - lo;
  return range > 1e-12 ? (v - lo) / range : 0.0;
}

}  // namespace

Eigen::VectorXd stage_feature(const Segment& segment, const StageFeatureSpace& space, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("lambda must be in [0,1]");
  const auto n = segment.summary.mu.size();
  Eigen::VectorXd v(n);
  for (Eigen::Index d = 0; d < n; ++d) {
    const double mu = min_max(segment.summary.mu(d), space.mu_min(d), space.mu_max(d));
    const double var = min_max(segment.summary.sigma(d, d), space.var_min(d), space.var_max(d));
    v(d) = (1.0 - lambda) * mu + lambda * var;
  }
  return v;
}

Eigen::MatrixXd stage_features(const std::vector<Segment>& segments, double lambda) {
  const StageFeatureSpace space = fit_feature_space(segments);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(segments.size()), segments.front().summary.mu.size());
  for (std::size_t i = 0; i < segments.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = stage_feature(segments[i], space, lambda).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Summaries

FrequencyTable tally(const std::vector<EventTriple>& events, int k_proactive, int k_reactive) {
  FrequencyTable t;
  t.proactive.assign(static_cast<std::size_t>(k_proactive), 0.0);
  t.reactive.assign(static_cast<std::size_t>(k_reactive), 0.0);
  t.windows = events.size();
  if (events.empty()) return t;
  for (const auto& e : events) {
    t.level[static_cast<std::size_t>(e.level)] += 1.0;
    t.proactive.at(static_cast<std::size_t>(e.proactive_type - 1)) += 1.0;
    t.reactive.at(static_cast<std::size_t>(e.reactive_type - 1)) += 1.0;
  }
  const double n = static_cast<double>(events.size());
  for (double& v : t.level) v /= n;
  for (double& v : t.proactive) v /= n;
  for (double& v : t.reactive) v /= n;
  return t;
}

StatSummary stat_summary(const std::vector<EventTriple>& events, int k_proactive, int k_reactive,
                         double cooccurrence_min_freq) {
  StatSummary s;
  s.frequencies = tally(events, k_proactive, k_reactive);
  std::map<std::tuple<int, int, int>, std::size_t> joint;
  for (const auto& e : events) ++joint[{static_cast<int>(e.level), e.proactive_type, e.reactive_type}];
  for (const auto& [key, count] : joint) {
    const double f = static_cast<double>(count) / static_cast<double>(events.size());
    if (f < cooccurrence_min_freq) continue;
    s.cooccurrences.push_back(
        {static_cast<DepressionLevel>(std::get<0>(key)), std::get<1>(key), std::get<2>(key), f});
  }
  std::stable_sort(s.cooccurrences.begin(), s.cooccurrences.end(),
                   [](const Cooccurrence& a, const Cooccurrence& b) { return a.frequency > b.frequency; });
  return s;
}

TemporalSummary temporal_summary(const std::vector<AlignedMember>& members, int L, int k_proactive,
                                 int k_reactive) {
  if (L < 1) throw std::invalid_argument("alignment length must be >= 1");
  std::vector<std::vector<EventTriple>> by_position(static_cast<std::size_t>(L));
  for (const auto& m : members) {
    if (m.events.size() != m.positions.size()) throw std::invalid_argument("alignment size mismatch");
    for (std::size_t i = 0; i < m.events.size(); ++i) {
      const int p = m.positions[i];
      if (p < 1 || p > L) throw std::out_of_range("aligned position outside 1..L");
      by_position[static_cast<std::size_t>(p - 1)].push_back(m.events[i]);
    }
  }
  TemporalSummary t;
  for (const auto& events : by_position) {
    t.positions.push_back(tally(events, k_proactive, k_reactive));
    t.empty.push_back(events.empty());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Representatives

Eigen::MatrixXd resample(const Eigen::MatrixXd& x, int L) {
  if (x.rows() < 1 || L < 1) throw std::invalid_argument("resample: empty input");
  Eigen::MatrixXd out(L, x.cols());
  const double span = static_cast<double>(x.rows() - 1);
  for (int p = 0; p < L; ++p) {
    const double t = L == 1 ? 0.0 : span * p / (L - 1);
    const auto lo = static_cast<Eigen::Index>(std::floor(t));
    const Eigen::Index hi = std::min<Eigen::Index>(lo + 1, x.rows() - 1);
    const double frac = t - static_cast<double>(lo);
    out.row(p) = (1.0 - frac) * x.row(lo) + frac * x.row(hi);
  }
  return out;
}

namespace {

Eigen::RowVectorXd flatten(const Eigen::MatrixXd& m) {
  Eigen::RowVectorXd out(m.size());
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(k++) = m(r, c);
  return out;
}

// Ranks scaled to [0,1]; ties share the average rank.
std::vector<double> rank_normalize(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0.0, equal = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (v[j] < v[i]) below += 1.0;
      else if (v[j] == v[i]) equal += 1.0;
    }
    out[i] = (below + (equal - 1.0) / 2.0) / static_cast<double>(n - 1);
  }
  return out;
}

}  // namespace

RepresentativeSet select_representatives(const std::vector<Eigen::MatrixXd>& member_values,
                                         const std::vector<double>& centroid_distance, int L) {
  if (member_values.empty()) throw std::invalid_argument("stage has no members");
  RepresentativeSet out;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < member_values.size(); ++i)
    if (member_values[i].rows() == L) candidates.push_back(i);

  if (candidates.empty()) {
    out.fallback = true;
    std::vector<std::size_t> order(member_values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return centroid_distance.at(a) < centroid_distance.at(b); });
    order.resize(std::min<std::size_t>(order.size(), kMaxRepresentatives));
    for (std::size_t m : order) out.representatives.push_back({m, resample(member_values[m], L), true});
    out.chosen_cluster_count = static_cast<int>(out.representatives.size());
    return out;
  }

  if (candidates.size() <= static_cast<std::size_t>(kMaxRepresentatives)) {
    for (std::size_t m : candidates) out.representatives.push_back({m, member_values[m], false});
    out.chosen_cluster_count = static_cast<int>(candidates.size());
    return out;
  }

  Eigen::MatrixXd x(static_cast<Eigen::Index>(candidates.size()), member_values[candidates[0]].size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) = flatten(member_values[candidates[i]]);

  std::vector<std::vector<int>> labelings;
  std::vector<double> sil, ch;
  for (int c = 1; c <= kMaxRepresentatives; ++c) {
    labelings.push_back(ward_clusters(x, c));
    sil.push_back(c == 1 ? 0.0 : silhouette(x, labelings.back()).score);
    ch.push_back(c == 1 ? 0.0 : calinski_harabasz(x, labelings.back()));
  }
  const auto sil_rank = rank_normalize(sil), ch_rank = rank_normalize(ch);
  int best = 0;
  for (int c = 1; c < kMaxRepresentatives; ++c) {
    if ((sil_rank[c] + ch_rank[c]) / 2.0 >= (sil_rank[best] + ch_rank[best]) / 2.0) best = c;
  }
  const auto& labels = labelings[best];
  const int clusters = best + 1;
  out.chosen_cluster_count = clusters;
  for (int c = 0; c < clusters; ++c) {
    Eigen::RowVectorXd centroid = Eigen::RowVectorXd::Zero(x.cols());
    int count = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) {
        centroid += x.row(static_cast<Eigen::Index>(i));
        ++count;
      }
    centroid /= count;
    std::size_t nearest = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != c) continue;
      const double d = (x.row(static_cast<Eigen::Index>(i)) - centroid).squaredNorm();
      if (d < best_d) {
        best_d = d;
        nearest = i;
      }
    }
    out.representatives.push_back({candidates[nearest], member_values[candidates[nearest]], false});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Warping

Eigen::MatrixXd derivative_transform(const Eigen::MatrixXd& q) {
  const Eigen::Index n = q.rows();
  if (n < 3) throw std::invalid_argument("derivative transform needs at least 3 rows");
  Eigen::MatrixXd d(n, q.cols());
  for (Eigen::Index i = 1; i + 1 < n; ++i)
    d.row(i) = ((q.row(i) - q.row(i - 1)) + (q.row(i + 1) - q.row(i - 1)) / 2.0) / 2.0;
  d.row(0) = d.row(1);
  d.row(n - 1) = d.row(n - 2);
  return d;
}

double warp_weight(int offset, int max_len) {
  return kWarpWeightMax /
         (1.0 + std::exp(-kWarpWeightSteepness * (static_cast<double>(offset) - max_len / 2.0)));
}

WarpResult wddtw_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("wddtw: empty input");
  if (a.cols() != b.cols()) throw std::invalid_argument("wddtw: dimension mismatch");
  const bool derivative = a.rows() >= 3 && b.rows() >= 3;
  const Eigen::MatrixXd da = derivative ? derivative_transform(a) : a;
  const Eigen::MatrixXd db = derivative ? derivative_transform(b) : b;
  const int n = static_cast<int>(a.rows()), m = static_cast<int>(b.rows());
  const int max_len = std::max(n, m);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Constant(n, m, kInf);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double cost = warp_weight(std::abs(i - j), max_len) * (da.row(i) - db.row(j)).squaredNorm();
      double prev = 0.0;
      if (i > 0 || j > 0) {
        prev = kInf;
        if (i > 0 && j > 0) prev = std::min(prev, acc(i - 1, j - 1));
        if (i > 0) prev = std::min(prev, acc(i - 1, j));
        if (j > 0) prev = std::min(prev, acc(i, j - 1));
      }
      acc(i, j) = cost + prev;
    }
  }

  WarpResult r;
  r.distance = acc(n - 1, m - 1);
  int i = n - 1, j = m - 1;
  r.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = acc(i - 1, j - 1), up = acc(i - 1, j), left = acc(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    r.path.emplace_back(i, j);
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

Alignment align_segment(const Eigen::MatrixXd& segment, const std::vector<Representative>& representatives) {
  if (representatives.empty()) throw std::invalid_argument("no representatives to align to");
  Alignment out;
  WarpResult best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < representatives.size(); ++r) {
    WarpResult w = wddtw_distance(segment, representatives[r].values);
    if (w.distance < best.distance) {
      best = std::move(w);
      out.representative = r;
    }
  }
  out.distance = best.distance;
  std::vector<std::vector<int>> matched(static_cast<std::size_t>(segment.rows()));
  for (const auto& [i, j] : best.path) matched[static_cast<std::size_t>(i)].push_back(j + 1);
  out.positions.reserve(matched.size());
  for (const auto& m : matched) out.positions.push_back(m[(m.size() - 1) / 2]);
  return out;
}

// ---------------------------------------------------------------------------
// Stage clustering

StageClustering cluster_stages(const std::vector<Segment>& segments, int S, double lambda, std::uint64_t seed) {
  if (S < 2 || S > 10) throw std::invalid_argument("stage count must be in [2,10]");
  if (static_cast<std::size_t>(S) > segments.size())
    throw std::invalid_argument("stage count exceeds segment count");
  StageClustering out;
  out.features = stage_features(segments, lambda);
  KMeansOptions opt;
  opt.seed = seed;
  const KMeansResult km = kmeans(out.features, S, opt);
  out.labels = km.labels;
  out.centroids = km.centroids;
  const auto sil = silhouette_sampled(out.features, km.labels, kSilhouetteSampleLimit, seed);
  out.silhouette = sil.score;
  out.degenerate = sil.degenerate;
  out.centroid_cosine_similarity = cosine_similarity(km.centroids);
  out.stages.resize(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) out.stages[s].internal_id = s;
  for (std::size_t i = 0; i < segments.size(); ++i) out.stages[km.labels[i]].members.push_back(i);
  return out;
}

std::vector<std::pair<int, double>> stage_count_silhouettes(const Eigen::MatrixXd& features, int s_min,
                                                            int s_max, std::uint64_t seed) {
  std::vector<std::pair<int, double>> out;
  const std::size_t distinct = distinct_rows(features);
  KMeansOptions opt;
  opt.seed = seed;
  for (int s = s_min; s <= s_max; ++s) {
    if (static_cast<std::size_t>(s) > distinct) {
      out.emplace_back(s, 0.0);
      continue;
    }
    const KMeansResult km = kmeans(features, s, opt);
    out.emplace_back(s, silhouette_sampled(features, km.labels, kSilhouetteSampleLimit, seed).score);
  }
  return out;
}

std::vector<Stage> order_stages(std::vector<Stage> stages) {
  std::sort(stages.begin(), stages.end(), [](const Stage& a, const Stage& b) {
    if (a.positivity != b.positivity) return a.positivity > b.positivity;
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    return a.internal_id < b.internal_id;
  });
  for (std::size_t i = 0; i < stages.size(); ++i) stages[i].stage_id = static_cast<int>(i) + 1;
  return stages;
}

}  // namespace stagelens
