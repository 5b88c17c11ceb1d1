#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stagelens/clustering.hpp"
#include "stagelens/model.hpp"
#include "stagelens/patterns.hpp"
#include "stagelens/progression.hpp"
#include "stagelens/segmentation.hpp"
#include "stagelens/stages.hpp"
#include "stagelens/typing.hpp"

namespace stagelens {

struct PipelineParams {
  int window_days = 14;
  int k_proactive = 5;
  int k_reactive = 5;
  int n_stages = 6;
  double lambda = 0.1;      // stage feature mix
  double lambda_reg = 0.1;  // covariance ridge
  int align_len = 5;
  double min_support = 0.1;
  int max_pattern_len = 4;
  double cooccurrence_min_freq = 0.2;
  double min_gain = 1.5;
  int max_segments = 8;
  std::uint64_t seed = 7;

  friend bool operator==(const PipelineParams&, const PipelineParams&) = default;
};

// Throws std::invalid_argument naming the offending parameter.
void validate(const PipelineParams& params);

// Records ready for windowing: parsed input plus the cohort split.
struct PipelineInput {
  std::vector<PostRecord> posts;
  std::vector<ResponseRecord> responses;
  std::int64_t split_time = 0;
  std::string posts_digest;
  std::string responses_digest;
};

struct StageArtifacts {
  std::vector<Stage> stages;  // ordered, ids 1..S
  StageClustering clustering;
  std::vector<std::pair<int, double>> silhouette_by_s;
  // Per member segment: the representative it was aligned to and its positions.
  std::map<std::size_t, Alignment> alignments;
};

struct RunArtifacts {
  PipelineParams params;
  std::int64_t split_time = 0;
  std::vector<std::string> dropped_users;
  Dataset dataset;
  BehaviorTypeModel proactive, reactive;
  ClusterDiagnostics proactive_diagnostics, reactive_diagnostics;
  std::vector<Segment> segments;  // stage ids filled
  StageArtifacts stages;
  std::vector<StageSequence> stage_sequences;
  std::map<int, double> stage_w;
  std::vector<StagePattern> patterns;  // impact filled
  std::map<std::string, SankeyModel> progression;  // "recovery", "middle", "deterioration", "all"
};

// Diagnostics span k in [2, 10]; k above the number of distinct points is flagged degenerate.
RunArtifacts run_pipeline(const PipelineInput& input, const PipelineParams& params);

}  // namespace stagelens
