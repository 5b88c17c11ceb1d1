#include "stagelens/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "stagelens/digest.hpp"

namespace stagelens {

using nlohmann::json;

std::string_view to_string(Category c) {
  switch (c) {
    case Category::SW: return "SW";
    case Category::MH: return "MH";
    case Category::OT: return "OT";
  }
  return "?";
}

std::string_view to_string(Group g) {
  switch (g) {
    case Group::Recovery: return "recovery";
    case Group::Middle: return "middle";
    case Group::Deterioration: return "deterioration";
  }
  return "?";
}

std::string_view to_string(DepressionLevel l) {
  switch (l) {
    case DepressionLevel::Low: return "Low";
    case DepressionLevel::Mid: return "Mid";
    case DepressionLevel::High: return "High";
  }
  return "?";
}

Category parse_category(std::string_view s) {
  if (s == "SW") return Category::SW;
  if (s == "MH") return Category::MH;
  if (s == "OT") return Category::OT;
  throw std::invalid_argument("unknown category '" + std::string(s) + "'");
}

Group parse_group(std::string_view s) {
  if (s == "recovery") return Group::Recovery;
  if (s == "middle") return Group::Middle;
  if (s == "deterioration") return Group::Deterioration;
  throw std::invalid_argument("unknown group '" + std::string(s) + "'");
}

std::string_view dim_name(std::size_t index) {
  static constexpr std::array<std::string_view, kBehaviorDims> kNames{
      "depression",     "post_frequency", "interval",   "sought_is",   "sought_es",
      "toxicity",       "response_number", "response_time", "received_is", "received_es"};
  return kNames.at(index);
}

std::size_t Dataset::window_count() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.events.size();
  return n;
}

DepressionLevel depression_level(double score) {
  if (score < 1.0) return DepressionLevel::Low;
  if (score < 2.0) return DepressionLevel::Mid;
  return DepressionLevel::High;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

constexpr std::size_t kMaxSamples = 5;

double finite_number(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw std::invalid_argument(std::string(key) + " is not a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw std::invalid_argument(std::string(key) + " is not finite");
  return d;
}

std::int64_t integer_seconds(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw std::invalid_argument(std::string(key) + " is not an integer");
  return v.get<std::int64_t>();
}

PostRecord post_from_json(const json& j) {
  PostRecord p;
  if (!j.at("user_id").is_string()) throw std::invalid_argument("user_id is not a string");
  p.user_id = j.at("user_id").get<std::string>();
  p.timestamp = integer_seconds(j, "ts");
  p.category = parse_category(j.at("category").get<std::string>());
  p.depression_score = finite_number(j, "depression");
  p.sought_info_support = finite_number(j, "sought_is");
  p.sought_emotion_support = finite_number(j, "sought_es");
  p.toxicity_exposure = finite_number(j, "toxicity");
  if (!j.at("initiated").is_boolean()) throw std::invalid_argument("initiated is not a boolean");
  p.is_initiated = j.at("initiated").get<bool>();

  if (p.timestamp <= 0) throw std::invalid_argument("ts must be positive");
  if (p.depression_score < 0.0 || p.depression_score >= 3.0)
    throw std::invalid_argument("depression outside [0,3)");
  if (p.toxicity_exposure < 0.0 || p.toxicity_exposure > 1.0)
    throw std::invalid_argument("toxicity outside [0,1]");
  if (p.sought_info_support < 0.0 || p.sought_emotion_support < 0.0)
    throw std::invalid_argument("sought support must be non-negative");
  return p;
}

ResponseRecord response_from_json(const json& j) {
  ResponseRecord r;
  if (!j.at("post_user_id").is_string()) throw std::invalid_argument("post_user_id is not a string");
  r.post_user_id = j.at("post_user_id").get<std::string>();
  r.post_timestamp = integer_seconds(j, "post_ts");
  r.response_timestamp = integer_seconds(j, "resp_ts");
  r.received_info_support = finite_number(j, "received_is");
  r.received_emotion_support = finite_number(j, "received_es");
  if (r.post_timestamp <= 0) throw std::invalid_argument("post_ts must be positive");
  if (r.response_timestamp < r.post_timestamp) throw std::invalid_argument("resp_ts precedes post_ts");
  if (r.received_info_support < 0.0 || r.received_emotion_support < 0.0)
    throw std::invalid_argument("received support must be non-negative");
  return r;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

template <typename Record, typename Parse>
std::vector<Record> parse_lines(std::istream& in, ParseReport& report, Parse parse) {
  std::vector<Record> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    ++report.lines;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const std::exception& e) {
      ++report.malformed;
      if (report.samples.size() < kMaxSamples)
        report.samples.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void check_malformed(const std::filesystem::path& path, const ParseReport& report) {
  if (report.lines == 0) return;
  const double frac = static_cast<double>(report.malformed) / static_cast<double>(report.lines);
  if (frac <= kMaxMalformedFraction) return;
  std::ostringstream msg;
  msg << path.string() << ": " << report.malformed << " of " << report.lines
      << " lines malformed";
  for (const auto& s : report.samples) msg << "\n  " << s;
  throw IngestError(msg.str());
}

}  // namespace

std::vector<PostRecord> parse_posts(std::istream& in, ParseReport& report) {
  return parse_lines<PostRecord>(in, report, post_from_json);
}

std::vector<ResponseRecord> parse_responses(std::istream& in, ParseReport& report) {
  return parse_lines<ResponseRecord>(in, report, response_from_json);
}

IngestResult ingest(const std::filesystem::path& posts_file,
                    const std::filesystem::path& responses_file) {
  IngestResult result;
  std::ifstream posts_in(posts_file);
  if (!posts_in) throw IngestError("cannot read posts file " + posts_file.string());
  std::ifstream responses_in(responses_file);
  if (!responses_in) throw IngestError("cannot read responses file " + responses_file.string());

  result.posts = parse_posts(posts_in, result.posts_report);
  check_malformed(posts_file, result.posts_report);
  result.responses = parse_responses(responses_in, result.responses_report);
  check_malformed(responses_file, result.responses_report);
  result.posts_digest = sha256_file(posts_file);
  result.responses_digest = sha256_file(responses_file);
  return result;
}

std::string format_post(const PostRecord& p) {
  nlohmann::ordered_json j;
  j["user_id"] = p.user_id;
  j["ts"] = p.timestamp;
  j["category"] = to_string(p.category);
  j["depression"] = p.depression_score;
  j["sought_is"] = p.sought_info_support;
  j["sought_es"] = p.sought_emotion_support;
  j["toxicity"] = p.toxicity_exposure;
  j["initiated"] = p.is_initiated;
  return j.dump();
}

std::string format_response(const ResponseRecord& r) {
  nlohmann::ordered_json j;
  j["post_user_id"] = r.post_user_id;
  j["post_ts"] = r.post_timestamp;
  j["resp_ts"] = r.response_timestamp;
  j["received_is"] = r.received_info_support;
  j["received_es"] = r.received_emotion_support;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Cohorts

namespace {

// Months since 1970-01 for a UTC timestamp.
int month_ordinal(std::int64_t ts) {
  using namespace std::chrono;
  const sys_days day = floor<days>(sys_seconds{seconds{ts}});
  const year_month_day ymd{day};
  return (static_cast<int>(ymd.year()) - 1970) * 12 + static_cast<int>(unsigned(ymd.month())) - 1;
}

}  // namespace

std::set<std::string> filter_active_users(const std::vector<PostRecord>& posts,
                                          std::int64_t period_start,
                                          std::int64_t period_end) {
  if (period_end <= period_start) throw std::invalid_argument("empty activity period");
  const int first_month = month_ordinal(period_start);
  const int last_month = month_ordinal(period_end - 1);
  const auto months = static_cast<std::size_t>(last_month - first_month + 1);

  std::map<std::string, std::vector<int>> counts;
  for (const auto& p : posts) {
    auto& c = counts[p.user_id];
    if (c.empty()) c.assign(months, 0);
    if (p.timestamp < period_start || p.timestamp >= period_end) continue;
    ++c[static_cast<std::size_t>(month_ordinal(p.timestamp) - first_month)];
  }
  std::set<std::string> active;
  for (const auto& [user, c] : counts) {
    if (std::all_of(c.begin(), c.end(), [](int n) { return n >= 2; })) active.insert(user);
  }
  return active;
}

GroupAssignment assign_groups(const std::vector<PostRecord>& posts, std::int64_t split_time) {
  struct Seen {
    bool any_after = false, sw = false, mh = false, ot = false;
  };
  std::map<std::string, Seen> seen;
  for (const auto& p : posts) {
    auto& s = seen[p.user_id];
    if (p.timestamp < split_time) continue;
    s.any_after = true;
    switch (p.category) {
      case Category::SW: s.sw = true; break;
      case Category::MH: s.mh = true; break;
      case Category::OT: s.ot = true; break;
    }
  }
  GroupAssignment out;
  for (const auto& [user, s] : seen) {
    if (!s.any_after) {
      out.dropped.push_back(user);
    } else if (s.sw) {
      out.groups.emplace(user, Group::Deterioration);
    } else if (s.mh) {
      out.groups.emplace(user, Group::Middle);
    } else {
      out.groups.emplace(user, Group::Recovery);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Windowing

namespace {

struct WindowAccumulator {
  int posts = 0;
  double depression = 0.0, sought_is = 0.0, sought_es = 0.0, toxicity = 0.0;
  double gap_days = 0.0;
  int gaps = 0;
  int responses = 0;
  double received_is = 0.0, received_es = 0.0;
  double first_response_hours = 0.0;
  int responded_posts = 0;
};

}  // namespace

Dataset build_sequences(const std::vector<PostRecord>& posts,
                        const std::vector<ResponseRecord>& responses,
                        int window_days,
                        const std::map<std::string, Group>& group_map) {
  if (window_days < 1) throw std::invalid_argument("window_days must be >= 1");
  const std::int64_t window_sec = static_cast<std::int64_t>(window_days) * kSecondsPerDay;

  std::unordered_map<std::string, std::vector<const PostRecord*>> posts_by_user;
  for (const auto& p : posts) {
    if (group_map.count(p.user_id)) posts_by_user[p.user_id].push_back(&p);
  }
  std::unordered_map<std::string, std::vector<const ResponseRecord*>> responses_by_user;
  for (const auto& r : responses) {
    if (group_map.count(r.post_user_id)) responses_by_user[r.post_user_id].push_back(&r);
  }

  Dataset ds;
  ds.provenance.window_days = window_days;
  for (const auto& [user, group] : group_map) {
    auto it = posts_by_user.find(user);
    if (it == posts_by_user.end()) {
      ds.excluded.push_back({user, "no posts"});
      continue;
    }
    auto& user_posts = it->second;
    std::stable_sort(user_posts.begin(), user_posts.end(),
                     [](const PostRecord* a, const PostRecord* b) { return a->timestamp < b->timestamp; });
    const std::int64_t t0 = user_posts.front()->timestamp;
    const std::int64_t t_last = user_posts.back()->timestamp;
    const auto n_windows = static_cast<std::size_t>((t_last - t0) / window_sec + 1);
    auto window_of = [&](std::int64_t ts) { return static_cast<std::size_t>((ts - t0) / window_sec); };

    std::vector<WindowAccumulator> acc(n_windows);
    std::int64_t prev_ts = -1;
    for (const PostRecord* p : user_posts) {
      auto& a = acc[window_of(p->timestamp)];
      ++a.posts;
      a.depression += p->depression_score;
      a.sought_is += p->sought_info_support;
      a.sought_es += p->sought_emotion_support;
      a.toxicity += p->toxicity_exposure;
      if (prev_ts >= 0) {
        const double gap = static_cast<double>(p->timestamp - prev_ts) / kSecondsPerDay;
        a.gap_days += std::min(gap, static_cast<double>(window_days));
        ++a.gaps;
      }
      prev_ts = p->timestamp;
    }

    // First response per post timestamp, attributed to the post's window.
    std::map<std::int64_t, std::int64_t> first_response;
    if (auto rit = responses_by_user.find(user); rit != responses_by_user.end()) {
      for (const ResponseRecord* r : rit->second) {
        if (r->post_timestamp < t0 || r->post_timestamp > t_last) continue;
        auto& a = acc[window_of(r->post_timestamp)];
        ++a.responses;
        a.received_is += r->received_info_support;
        a.received_es += r->received_emotion_support;
        auto [fit, inserted] = first_response.emplace(r->post_timestamp, r->response_timestamp);
        if (!inserted) fit->second = std::min(fit->second, r->response_timestamp);
      }
    }
    for (const auto& [post_ts, resp_ts] : first_response) {
      auto& a = acc[window_of(post_ts)];
      a.first_response_hours += static_cast<double>(resp_ts - post_ts) / 3600.0;
      ++a.responded_posts;
    }

    const auto non_empty = std::count_if(acc.begin(), acc.end(), [](const auto& a) { return a.posts > 0; });
    if (non_empty < 2) {
      ds.excluded.push_back({user, "fewer than 2 non-empty windows"});
      continue;
    }

    BehaviorSequence seq;
    seq.user_id = user;
    seq.group = group;
    seq.events.reserve(n_windows);
    double last_depression = 0.0;
    for (std::size_t w = 0; w < n_windows; ++w) {
      const auto& a = acc[w];
      WindowedEvent e;
      e.window_index = static_cast<int>(w);
      BehaviorVector& v = e.raw;
      if (a.posts > 0) {
        const double n = a.posts;
        last_depression = a.depression / n;
        v[Dim::SoughtIS] = a.sought_is / n;
        v[Dim::SoughtES] = a.sought_es / n;
        v[Dim::Toxicity] = a.toxicity / n;
      }
      v[Dim::Depression] = last_depression;
      v[Dim::PostFrequency] = a.posts;
      v[Dim::Interval] = a.gaps > 0 ? a.gap_days / a.gaps : static_cast<double>(window_days);
      v[Dim::ResponseNumber] = a.responses;
      v[Dim::ResponseTime] = a.responded_posts > 0 ? a.first_response_hours / a.responded_posts
                                                   : static_cast<double>(window_days) * 24.0;
      if (a.responses > 0) {
        v[Dim::ReceivedIS] = a.received_is / a.responses;
        v[Dim::ReceivedES] = a.received_es / a.responses;
      }
      e.triple.level = depression_level(v[Dim::Depression]);
      seq.events.push_back(e);
    }
    ds.sequences.push_back(std::move(seq));
  }
  zscore(ds);
  return ds;
}

void zscore(Dataset& dataset) {
  constexpr double kConstantTol = 1e-12;
  const double n = static_cast<double>(dataset.window_count());
  for (std::size_t d = 0; d < kBehaviorDims; ++d) {
    DimensionStats st;
    if (n > 0) {
      double sum = 0.0;
      for (const auto& s : dataset.sequences)
        for (const auto& e : s.events) sum += e.raw[d];
      st.mean = sum / n;
      double ss = 0.0;
      for (const auto& s : dataset.sequences)
        for (const auto& e : s.events) ss += (e.raw[d] - st.mean) * (e.raw[d] - st.mean);
      st.stddev = std::sqrt(ss / n);
    }
    st.constant = st.stddev <= kConstantTol;
    dataset.normalization_stats[d] = st;
    for (auto& s : dataset.sequences)
      for (auto& e : s.events)
        e.normalized[d] = st.constant ? 0.0 : (e.raw[d] - st.mean) / st.stddev;
  }
  dataset.normalized = true;
}

BehaviorVector denormalize(const BehaviorVector& normalized,
                           const std::array<DimensionStats, kBehaviorDims>& stats) {
  BehaviorVector out;
  for (std::size_t d = 0; d < kBehaviorDims; ++d)
    out[d] = stats[d].constant ? stats[d].mean : normalized[d] * stats[d].stddev + stats[d].mean;
  return out;
}

}  // namespace stagelens
