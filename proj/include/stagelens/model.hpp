#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stagelens {

enum class Category { SW, MH, OT };
enum class Group { Recovery, Middle, Deterioration };
enum class DepressionLevel { Low, Mid, High };

std::string_view to_string(Category c);
std::string_view to_string(Group g);
std::string_view to_string(DepressionLevel l);
Category parse_category(std::string_view s);
Group parse_group(std::string_view s);

struct PostRecord {
  std::string user_id;
  std::int64_t timestamp = 0;  // seconds since epoch, UTC
  Category category = Category::MH;
  double depression_score = 0.0;  // [0, 3)
  double sought_info_support = 0.0;
  double sought_emotion_support = 0.0;
  double toxicity_exposure = 0.0;  // [0, 1]
  bool is_initiated = true;
};

struct ResponseRecord {
  std::string post_user_id;
  std::int64_t post_timestamp = 0;
  std::int64_t response_timestamp = 0;
  double received_info_support = 0.0;
  double received_emotion_support = 0.0;
};

inline constexpr std::size_t kBehaviorDims = 10;

// Component order is fixed for the whole pipeline.
enum class Dim : std::size_t {
  Depression = 0,
  PostFrequency,
  Interval,
  SoughtIS,
  SoughtES,
  Toxicity,
  ResponseNumber,
  ResponseTime,
  ReceivedIS,
  ReceivedES,
};

inline constexpr std::array<std::size_t, 5> kProactiveDims{1, 2, 3, 4, 5};
inline constexpr std::array<std::size_t, 4> kReactiveDims{6, 7, 8, 9};

std::string_view dim_name(std::size_t index);

struct BehaviorVector {
  std::array<double, kBehaviorDims> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](Dim d) { return values[static_cast<std::size_t>(d)]; }
  double operator[](Dim d) const { return values[static_cast<std::size_t>(d)]; }

  friend bool operator==(const BehaviorVector&, const BehaviorVector&) = default;
};

/// Discrete per-window behavior event. Type ids are 1-based; 0 means not yet typed.
struct EventTriple {
  DepressionLevel level = DepressionLevel::Low;
  int proactive_type = 0;
  int reactive_type = 0;

  friend bool operator==(const EventTriple&, const EventTriple&) = default;
};

struct WindowedEvent {
  int window_index = 0;
  BehaviorVector raw;
  BehaviorVector normalized;
  EventTriple triple;
};

struct BehaviorSequence {
  std::string user_id;
  Group group = Group::Middle;
  std::vector<WindowedEvent> events;
};

struct DimensionStats {
  double mean = 0.0;
  double stddev = 0.0;
  bool constant = false;
};

struct Provenance {
  std::string posts_digest;
  std::string responses_digest;
  int window_days = 14;
};

struct ExclusionEntry {
  std::string user_id;
  std::string reason;
};

struct Dataset {
  std::vector<BehaviorSequence> sequences;
  std::array<DimensionStats, kBehaviorDims> normalization_stats{};
  bool normalized = false;
  Provenance provenance;
  std::vector<ExclusionEntry> excluded;

  std::size_t window_count() const;
};

// ---------------------------------------------------------------------------
// Ingestion

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParseReport {
  std::size_t lines = 0;  // non-blank lines seen
  std::size_t malformed = 0;
  std::vector<std::string> samples;  // first few offending lines, prefixed by line number
};

// Malformed lines are counted, not fatal. Line-level validation includes the
// post/response invariants (score ranges, positive timestamps).
std::vector<PostRecord> parse_posts(std::istream& in, ParseReport& report);
std::vector<ResponseRecord> parse_responses(std::istream& in, ParseReport& report);

struct IngestResult {
  std::vector<PostRecord> posts;
  std::vector<ResponseRecord> responses;
  ParseReport posts_report;
  ParseReport responses_report;
  std::string posts_digest;
  std::string responses_digest;
};

inline constexpr double kMaxMalformedFraction = 0.10;

/// Reads both record files. Throws IngestError when a file is unreadable or
/// more than 10% of its lines are malformed.
IngestResult ingest(const std::filesystem::path& posts_file,
                    const std::filesystem::path& responses_file);

std::string format_post(const PostRecord& p);
std::string format_response(const ResponseRecord& r);

// ---------------------------------------------------------------------------
// Cohorts

/// Users with at least two posts in every calendar month (UTC) intersecting
/// [period_start, period_end).
std::set<std::string> filter_active_users(const std::vector<PostRecord>& posts,
                                          std::int64_t period_start,
                                          std::int64_t period_end);

struct GroupAssignment {
  std::map<std::string, Group> groups;
  std::vector<std::string> dropped;  // silent after the split, sorted
};

/// SW after the split wins over MH, which wins over OT. Posts at exactly
/// split_time count as "after".
GroupAssignment assign_groups(const std::vector<PostRecord>& posts,
                              std::int64_t split_time);

// ---------------------------------------------------------------------------
// Windowing

inline constexpr std::int64_t kSecondsPerDay = 86400;

/// Tiles each grouped user's first-to-last post span into windows of
/// window_days, computes the raw behavior vector per window, and z-scores the
/// result over the pooled dataset.
Dataset build_sequences(const std::vector<PostRecord>& posts,
                        const std::vector<ResponseRecord>& responses,
                        int window_days,
                        const std::map<std::string, Group>& group_map);

/// Computes pooled per-dimension statistics and fills `normalized`.
void zscore(Dataset& dataset);

BehaviorVector denormalize(const BehaviorVector& normalized,
                           const std::array<DimensionStats, kBehaviorDims>& stats);

DepressionLevel depression_level(double score);

}  // namespace stagelens
