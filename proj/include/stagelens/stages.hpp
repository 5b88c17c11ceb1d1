#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stagelens/model.hpp"
#include "stagelens/segmentation.hpp"
#include "stagelens/typing.hpp"

namespace stagelens {

// ---------------------------------------------------------------------------
// Clustering features

/// Per-dimension min-max statistics of segment means and variances, taken over
/// every segment in the dataset.
struct StageFeatureSpace {
  Eigen::VectorXd mu_min, mu_max, var_min, var_max;
};

StageFeatureSpace fit_feature_space(const std::vector<Segment>& segments);

/// v = (1 - lambda) * mu' + lambda * diag(sigma)', both min-max normalized.
/// Constant dimensions normalize to 0.
Eigen::VectorXd stage_feature(const Segment& segment, const StageFeatureSpace& space, double lambda);

Eigen::MatrixXd stage_features(const std::vector<Segment>& segments, double lambda);

// ---------------------------------------------------------------------------
// Summaries

struct FrequencyTable {
  std::array<double, 3> level{};    // Low, Mid, High
  std::vector<double> proactive;    // index = type id - 1
  std::vector<double> reactive;
  std::size_t windows = 0;
};

struct Cooccurrence {
  DepressionLevel level = DepressionLevel::Low;
  int proactive_type = 0;
  int reactive_type = 0;
  double frequency = 0.0;  // share of the stage's windows carrying this exact triple
};

struct StatSummary {
  FrequencyTable frequencies;
  std::vector<Cooccurrence> cooccurrences;  // descending frequency
};

FrequencyTable tally(const std::vector<EventTriple>& events, int k_proactive, int k_reactive);

/// Keeps co-occurring triples whose joint frequency is at least min_freq.
StatSummary stat_summary(const std::vector<EventTriple>& events, int k_proactive, int k_reactive,
                         double cooccurrence_min_freq);

struct TemporalSummary {
  std::vector<FrequencyTable> positions;  // L entries
  std::vector<bool> empty;                // position received no window
};

struct AlignedMember {
  std::vector<EventTriple> events;
  std::vector<int> positions;  // 1-based, one per event
};

TemporalSummary temporal_summary(const std::vector<AlignedMember>& members, int L, int k_proactive,
                                 int k_reactive);

// ---------------------------------------------------------------------------
// Representatives and alignment

inline constexpr int kMaxRepresentatives = 3;

struct Representative {
  std::size_t member = 0;  // index into the candidate list passed in
  Eigen::MatrixXd values;  // L x n
  bool resampled = false;
};

struct RepresentativeSet {
  std::vector<Representative> representatives;
  int chosen_cluster_count = 0;
  bool fallback = false;
};

/// Linear interpolation of the rows of `x` onto L evenly spaced positions.
Eigen::MatrixXd resample(const Eigen::MatrixXd& x, int L);

/// member_values[i] holds a member segment's normalized windows (rows).
/// centroid_distance[i] ranks members for the fallback path.
RepresentativeSet select_representatives(const std::vector<Eigen::MatrixXd>& member_values,
                                         const std::vector<double>& centroid_distance, int L);

struct WarpResult {
  double distance = 0.0;
  std::vector<std::pair<int, int>> path;  // (index in a, index in b), from (0,0) to (n-1,m-1)
};

inline constexpr double kWarpWeightMax = 1.0;
inline constexpr double kWarpWeightSteepness = 0.05;

/// Derivative transform used by WDDTW; endpoints replicate their neighbors.
Eigen::MatrixXd derivative_transform(const Eigen::MatrixXd& q);

double warp_weight(int offset, int max_len);

/// Weighted derivative DTW. Inputs shorter than 3 rows are compared on raw
/// values (plain weighted DTW).
WarpResult wddtw_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct Alignment {
  std::size_t representative = 0;
  double distance = 0.0;
  std::vector<int> positions;  // 1-based position per window of the segment
};

/// Aligns to the nearest representative. A window warped onto several
/// positions takes the lower median of them.
Alignment align_segment(const Eigen::MatrixXd& segment, const std::vector<Representative>& representatives);

// ---------------------------------------------------------------------------
// Stages

struct Stage {
  int stage_id = 0;     // 1..S after ordering; 0 before
  int internal_id = 0;  // k-means label
  double positivity = 0.0;
  std::vector<std::size_t> members;  // indices into the segment list
  StatSummary stat;
  TemporalSummary temporal;
  RepresentativeSet representatives;
  std::vector<std::size_t> representative_segments;  // indices into the segment list
};

struct StageClustering {
  std::vector<Stage> stages;      // by internal id
  std::vector<int> labels;        // internal id per segment
  Eigen::MatrixXd features;       // one row per segment
  Eigen::MatrixXd centroids;
  double silhouette = 0.0;
  bool degenerate = false;
  Eigen::MatrixXd centroid_cosine_similarity;
};

StageClustering cluster_stages(const std::vector<Segment>& segments, int S, double lambda, std::uint64_t seed);

/// Silhouette per candidate stage count, for choosing S.
std::vector<std::pair<int, double>> stage_count_silhouettes(const Eigen::MatrixXd& features, int s_min,
                                                            int s_max, std::uint64_t seed);

/// Sorts by descending positivity (ties: more members, then lower internal
/// id) and assigns stage ids 1..S.
std::vector<Stage> order_stages(std::vector<Stage> stages);

}  // namespace stagelens
