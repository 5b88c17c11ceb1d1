#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stagelens/model.hpp"

namespace stagelens {

enum class BehaviorKind { Proactive, Reactive };

std::string_view to_string(BehaviorKind kind);
BehaviorKind parse_kind(std::string_view s);
std::vector<std::size_t> kind_dims(BehaviorKind kind);

/// "p3" / "r1". Type ids are 1-based.
std::string type_label(BehaviorKind kind, int type_id);

// Whiskers are the extreme values within 1.5 IQR of the quartiles.
struct BoxSummary {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

BoxSummary box_summary(std::vector<double> values);

inline constexpr int kMinTypes = 2;
inline constexpr int kMaxTypes = 10;

struct BehaviorTypeModel {
  BehaviorKind kind = BehaviorKind::Proactive;
  int k = 0;
  std::vector<std::size_t> dims;
  Eigen::MatrixXd centroids;  // k x dims.size(), normalized space
  // assignments[s][w] is the type id of dataset.sequences[s].events[w].
  std::vector<std::vector<int>> assignments;
  // boxplots[type - 1][j] summarizes raw values of dims[j] for that type.
  std::vector<std::vector<BoxSummary>> boxplots;
  double inertia = 0.0;

  int assign(const BehaviorVector& normalized) const;
};

/// Direct feature rows in dataset order (sequence-major), the kind's normalized dims.
Eigen::MatrixXd feature_matrix(const Dataset& dataset, BehaviorKind kind);

BehaviorTypeModel fit_types(const Dataset& dataset, BehaviorKind kind, int k, std::uint64_t seed);

struct ClusterDiagnostics {
  std::map<int, double> silhouette_by_k;
  std::map<int, bool> degenerate_by_k;
  int selected_k = 0;
  Eigen::MatrixXd centroid_cosine_similarity;
  std::vector<double> size_proportions;
};

inline constexpr std::size_t kSilhouetteSampleLimit = 5000;

ClusterDiagnostics diagnostics(const Dataset& dataset, BehaviorKind kind, int k_min, int k_max,
                               int selected_k, std::uint64_t seed);

/// Fills every event triple from the two fitted models.
void form_events(Dataset& dataset, const BehaviorTypeModel& proactive, const BehaviorTypeModel& reactive);

}  // namespace stagelens
