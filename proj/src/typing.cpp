#include "stagelens/typing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stagelens/clustering.hpp"

namespace stagelens {

std::string_view to_string(BehaviorKind kind) {
  return kind == BehaviorKind::Proactive ? "proactive" : "reactive";
}

BehaviorKind parse_kind(std::string_view s) {
  if (s == "proactive") return BehaviorKind::Proactive;
  if (s == "reactive") return BehaviorKind::Reactive;
  throw std::invalid_argument("unknown behavior kind '" + std::string(s) + "'");
}

std::vector<std::size_t> kind_dims(BehaviorKind kind) {
  if (kind == BehaviorKind::Proactive) return {kProactiveDims.begin(), kProactiveDims.end()};
  return {kReactiveDims.begin(), kReactiveDims.end()};
}

std::string type_label(BehaviorKind kind, int type_id) {
  return (kind == BehaviorKind::Proactive ? "p" : "r") + std::to_string(type_id);
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void check_k(int k) {
  if (k < kMinTypes || k > kMaxTypes)
    throw std::invalid_argument("type count must be in [2,10], got " + std::to_string(k));
}

}  // namespace

BoxSummary box_summary(std::vector<double> values) {
  BoxSummary b;
  if (values.empty()) return b;
  std::sort(values.begin(), values.end());
  b.q1 = quantile_sorted(values, 0.25);
  b.median = quantile_sorted(values, 0.5);
  b.q3 = quantile_sorted(values, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo = b.q1 - 1.5 * iqr, hi = b.q3 + 1.5 * iqr;
  b.min = *std::find_if(values.begin(), values.end(), [&](double v) { return v >= lo; });
  b.max = *std::find_if(values.rbegin(), values.rend(), [&](double v) { return v <= hi; });
  return b;
}

int BehaviorTypeModel::assign(const BehaviorVector& normalized) const {
  Eigen::RowVectorXd x(static_cast<Eigen::Index>(dims.size()));
  for (std::size_t j = 0; j < dims.size(); ++j) x(static_cast<Eigen::Index>(j)) = normalized[dims[j]];
  return nearest_centroid(centroids, x) + 1;
}

Eigen::MatrixXd feature_matrix(const Dataset& dataset, BehaviorKind kind) {
  const auto dims = kind_dims(kind);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(dataset.window_count()), static_cast<Eigen::Index>(dims.size()));
  Eigen::Index row = 0;
  for (const auto& s : dataset.sequences)
    for (const auto& e : s.events) {
      for (std::size_t j = 0; j < dims.size(); ++j) x(row, static_cast<Eigen::Index>(j)) = e.normalized[dims[j]];
      ++row;
    }
  return x;
}

BehaviorTypeModel fit_types(const Dataset& dataset, BehaviorKind kind, int k, std::uint64_t seed) {
  check_k(k);
  const Eigen::MatrixXd x = feature_matrix(dataset, kind);
  KMeansOptions opt;
  opt.seed = seed;
  const KMeansResult km = kmeans(x, k, opt);

  BehaviorTypeModel model;
  model.kind = kind;
  model.k = k;
  model.dims = kind_dims(kind);
  model.centroids = km.centroids;
  model.inertia = km.inertia;

  std::vector<std::vector<std::vector<double>>> raw(k, std::vector<std::vector<double>>(model.dims.size()));
  std::size_t row = 0;
  model.assignments.reserve(dataset.sequences.size());
  for (const auto& s : dataset.sequences) {
    auto& a = model.assignments.emplace_back();
    a.reserve(s.events.size());
    for (const auto& e : s.events) {
      const int label = km.labels[row++];
      a.push_back(label + 1);
      for (std::size_t j = 0; j < model.dims.size(); ++j) raw[label][j].push_back(e.raw[model.dims[j]]);
    }
  }
  model.boxplots.resize(k);
  for (int t = 0; t < k; ++t)
    for (std::size_t j = 0; j < model.dims.size(); ++j) model.boxplots[t].push_back(box_summary(std::move(raw[t][j])));
  return model;
}

ClusterDiagnostics diagnostics(const Dataset& dataset, BehaviorKind kind, int k_min, int k_max,
                               int selected_k, std::uint64_t seed) {
  check_k(k_min);
  check_k(k_max);
  check_k(selected_k);
  const Eigen::MatrixXd x = feature_matrix(dataset, kind);
  const std::size_t distinct = distinct_rows(x);
  ClusterDiagnostics out;
  out.selected_k = selected_k;
  KMeansOptions opt;
  opt.seed = seed;
  for (int k = k_min; k <= k_max; ++k) {
    if (static_cast<std::size_t>(k) > distinct) {
      out.silhouette_by_k[k] = 0.0;
      out.degenerate_by_k[k] = true;
      continue;
    }
    const KMeansResult km = kmeans(x, k, opt);
    const auto sil = silhouette_sampled(x, km.labels, kSilhouetteSampleLimit, seed);
    out.silhouette_by_k[k] = sil.score;
    out.degenerate_by_k[k] = sil.degenerate;
    if (k == selected_k) {
      out.centroid_cosine_similarity = cosine_similarity(km.centroids);
      out.size_proportions = size_proportions(km.labels, k);
    }
  }
  if (out.size_proportions.empty() && static_cast<std::size_t>(selected_k) <= distinct) {
    const KMeansResult km = kmeans(x, selected_k, opt);
    out.centroid_cosine_similarity = cosine_similarity(km.centroids);
    out.size_proportions = size_proportions(km.labels, selected_k);
  }
  return out;
}

void form_events(Dataset& dataset, const BehaviorTypeModel& proactive, const BehaviorTypeModel& reactive) {
  if (proactive.assignments.size() != dataset.sequences.size() ||
      reactive.assignments.size() != dataset.sequences.size())
    throw std::invalid_argument("type models were fitted on a different dataset");
  for (std::size_t s = 0; s < dataset.sequences.size(); ++s) {
    auto& events = dataset.sequences[s].events;
    for (std::size_t w = 0; w < events.size(); ++w) {
      events[w].triple.level = depression_level(events[w].raw[Dim::Depression]);
      events[w].triple.proactive_type = proactive.assignments[s].at(w);
      events[w].triple.reactive_type = reactive.assignments[s].at(w);
    }
  }
}

}  // namespace stagelens
