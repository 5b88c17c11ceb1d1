#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stagelens/model.hpp"

namespace stagelens {

/// Gaussian fit of a contiguous run of windows. Sigma is the sample
/// covariance plus lambda_reg * I.
struct GaussianSummary {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  int length = 0;
  // Log-likelihood of the slice under N(mu, sigma).
  double loglik = 0.0;
  // loglik - (m * lambda_reg / 2) * tr(sigma^-1). Sigma maximizes this penalized
  // likelihood, which makes it monotone under splitting; segmentation maximizes it.
  double regularized_loglik = 0.0;
};

struct Segment {
  std::string user_id;
  std::size_t sequence = 0;  // index into Dataset::sequences
  int start = 0;  // inclusive window index
  int end = 0;    // exclusive
  GaussianSummary summary;
  std::optional<int> stage_id;

  int length() const { return end - start; }
};

/// Rows of `slice` are windows. Throws on empty or non-finite input.
GaussianSummary segment_loglik(const Eigen::MatrixXd& slice, double lambda_reg);

struct SegmentationParams {
  double lambda_reg = 0.1;
  int max_segments = 8;
  // Each extra segment must pay min_gain times the null threshold: the
  // largest best-split gain over null_permutations shuffled copies of the
  // sequence. 0 keeps the full greedy path.
  double min_gain = 1.5;
  int null_permutations = 19;
  std::uint64_t seed = 0;
};

struct SegmentationTrace {
  std::vector<int> boundaries;          // 0 = b_0 < b_1 < ... < b_K = T
  std::vector<double> gains;            // objective increase per insertion up to the chosen K
  double objective = 0.0;               // total regularized loglik of the chosen tiling
  std::vector<double> path_objectives;  // index k: k breakpoints
  double threshold = 0.0;
};

/// Best single-split gain over shuffled copies of x (max over the copies).
double null_split_gain(const Eigen::MatrixXd& x, double lambda_reg, int permutations, std::uint64_t seed);

/// Greedy top-down breakpoint insertion with a relocation sweep after every
/// insertion, run to max_segments; the tiling kept maximizes
/// objective - threshold * breakpoints. Ties go to the earliest index and to
/// fewer segments.
SegmentationTrace greedy_segmentation(const Eigen::MatrixXd& x, const SegmentationParams& params);

/// Sum of per-segment regularized loglik for the given boundaries.
double tiling_objective(const Eigen::MatrixXd& x, const std::vector<int>& boundaries, double lambda_reg);

Eigen::MatrixXd normalized_matrix(const BehaviorSequence& sequence);

std::vector<Segment> segment_sequence(const BehaviorSequence& sequence, const SegmentationParams& params);

}  // namespace stagelens
