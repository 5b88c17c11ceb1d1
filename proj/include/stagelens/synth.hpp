#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "stagelens/model.hpp"

namespace stagelens {

class SynthSpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SynthStage {
  Eigen::VectorXd mu;     // raw units, behavior dimension order
  Eigen::MatrixXd sigma;  // positive definite
};

// Containment fractions are exact: round(f * n) users of each group carry the
// pattern. A positive delta raises the recovery fraction above base, a
// negative one raises the deterioration fraction.
struct PlantedPattern {
  std::vector<int> pattern;  // true stage ids, 1-based
  double delta = 0.0;
  double base = 0.3;
};

struct SynthSpec {
  std::map<Group, int> n_users{{Group::Recovery, 0}, {Group::Middle, 0}, {Group::Deterioration, 0}};
  std::vector<SynthStage> stages;
  Eigen::MatrixXd transitions;  // row-stochastic, zero diagonal
  Eigen::VectorXd initial;      // uniform when omitted
  int segments_min = 3, segments_max = 5;
  int length_min = 4, length_max = 8;  // windows per segment
  std::vector<PlantedPattern> planted;
  int window_days = 14;
  std::int64_t start_time = 1577836800;  // 2020-01-01
  std::uint64_t seed = 1;

  int n_stages_true() const { return static_cast<int>(stages.size()); }
};

// Throws SynthSpecError with the offending field.
SynthSpec parse_synth_spec(const nlohmann::json& j);
SynthSpec load_synth_spec(const std::filesystem::path& path);

struct SynthUser {
  std::string user_id;
  Group group = Group::Middle;
  std::vector<int> stages;        // true stage per segment
  std::vector<int> breakpoints;   // 0 = b_0 < ... < b_K = T, window indices
  std::vector<std::string> planted;  // keys of planted patterns this user carries
};

struct SynthPlantedTruth {
  std::vector<int> pattern;
  double f_r = 0.0, f_d = 0.0, f_m = 0.0, w = 0.0;
};

struct SynthOutput {
  std::vector<PostRecord> posts;
  std::vector<ResponseRecord> responses;
  std::int64_t split_time = 0;
  std::vector<SynthUser> users;
  std::vector<SynthPlantedTruth> planted;
};

SynthOutput generate(const SynthSpec& spec);

nlohmann::json ground_truth_json(const SynthSpec& spec, const SynthOutput& out);

// Writes posts.jsonl, responses.jsonl and ground_truth.json.
void write_synth(const SynthSpec& spec, const SynthOutput& out, const std::filesystem::path& dir);

}  // namespace stagelens
