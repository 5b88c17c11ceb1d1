#include "stagelens/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "stagelens/patterns.hpp"
#include "stagelens/random.hpp"

namespace stagelens {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw SynthSpecError("invalid synth spec: " + what); }

Eigen::VectorXd read_vector(const json& j, const std::string& name, std::size_t n) {
  if (!j.is_array() || j.size() != n) fail(name + " must be an array of " + std::to_string(n) + " numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!j[i].is_number()) fail(name + " must contain numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    if (!std::isfinite(v(static_cast<Eigen::Index>(i)))) fail(name + " must be finite");
  }
  return v;
}

Eigen::MatrixXd read_matrix(const json& j, const std::string& name, std::size_t n) {
  if (!j.is_array() || j.size() != n) fail(name + " must be " + std::to_string(n) + " rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r)
    m.row(static_cast<Eigen::Index>(r)) = read_vector(j[r], name + " row", n).transpose();
  return m;
}

int read_int(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) fail(std::string(key) + " must be an integer");
  return j.at(key).get<int>();
}

void read_range(const json& j, const char* key, int& lo, int& hi) {
  if (!j.contains(key)) return;
  const json& r = j.at(key);
  if (!r.is_object()) fail(std::string(key) + " must be {min, max}");
  lo = read_int(r, "min", lo);
  hi = read_int(r, "max", hi);
  if (lo < 1 || hi < lo) fail(std::string(key) + " needs 1 <= min <= max");
}

std::vector<int> sample_sequence(const SynthSpec& spec, Rng& rng, const std::vector<const PlantedPattern*>& required,
                                 const std::vector<const PlantedPattern*>& forbidden) {
  const int S = spec.n_stages_true();
  auto draw = [&](const Eigen::VectorXd& p) {
    double u = rng.uniform(), acc = 0.0;
    for (int s = 0; s < S; ++s) {
      acc += p(s);
      if (u < acc) return s + 1;
    }
    for (int s = S; s >= 1; --s)
      if (p(s - 1) > 0.0) return s;
    return 1;
  };
  auto step = [&](int from) { return draw(spec.transitions.row(from - 1).transpose()); };

  constexpr int kAttempts = 10000;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const int K = rng.integer(spec.segments_min, spec.segments_max);
    std::vector<int> seq;
    if (!required.empty()) {
      const auto& p = required.front()->pattern;
      if (static_cast<int>(p.size()) > K) continue;
      const int at = rng.integer(0, K - static_cast<int>(p.size()));
      bool ok = true;
      for (int i = 0; i < at; ++i) seq.push_back(i == 0 ? draw(spec.initial) : step(seq.back()));
      if (at > 0 && spec.transitions(seq.back() - 1, p.front() - 1) <= 0.0) ok = false;
      if (at == 0 && spec.initial(p.front() - 1) <= 0.0) ok = false;
      if (!ok) continue;
      seq.insert(seq.end(), p.begin(), p.end());
      while (static_cast<int>(seq.size()) < K) seq.push_back(step(seq.back()));
    } else {
      seq.push_back(draw(spec.initial));
      while (static_cast<int>(seq.size()) < K) seq.push_back(step(seq.back()));
    }
    const bool has_all = std::all_of(required.begin(), required.end(),
                                     [&](const PlantedPattern* p) { return first_occurrence(seq, p->pattern) >= 0; });
    const bool has_none = std::none_of(forbidden.begin(), forbidden.end(),
                                       [&](const PlantedPattern* p) { return first_occurrence(seq, p->pattern) >= 0; });
    if (has_all && has_none) return seq;
  }
  throw SynthSpecError("invalid synth spec: planted patterns cannot be realized under the transition matrix");
}

Category after_split_category(Group g) {
  switch (g) {
    case Group::Recovery: return Category::OT;
    case Group::Middle: return Category::MH;
    case Group::Deterioration: return Category::SW;
  }
  return Category::MH;
}

}  // namespace

SynthSpec parse_synth_spec(const json& j) {
  if (!j.is_object()) fail("top level must be an object");
  SynthSpec spec;
  if (j.contains("n_users")) {
    const json& n = j.at("n_users");
    if (!n.is_object()) fail("n_users must map group to count");
    for (const auto& [g, v] : n.items()) {
      Group group;
      try {
        group = parse_group(g);
      } catch (const std::exception&) {
        fail("unknown group '" + g + "' in n_users");
      }
      if (!v.is_number_integer() || v.get<int>() < 0) fail("n_users counts must be non-negative integers");
      spec.n_users[group] = v.get<int>();
    }
  }
  if (!j.contains("stages") || !j.at("stages").is_array() || j.at("stages").empty()) fail("stages must be a non-empty array");
  for (const auto& st : j.at("stages")) {
    if (!st.is_object() || !st.contains("mu")) fail("each stage needs mu");
    SynthStage s;
    s.mu = read_vector(st.at("mu"), "mu", kBehaviorDims);
    if (st.contains("sigma")) {
      s.sigma = read_matrix(st.at("sigma"), "sigma", kBehaviorDims);
    } else if (st.contains("sd")) {
      const Eigen::VectorXd sd = read_vector(st.at("sd"), "sd", kBehaviorDims);
      s.sigma = sd.array().square().matrix().asDiagonal();
    } else {
      fail("each stage needs sigma or sd");
    }
    if (!(s.sigma - s.sigma.transpose()).isZero(1e-12)) fail("sigma must be symmetric");
    if (Eigen::LLT<Eigen::MatrixXd>(s.sigma).info() != Eigen::Success) fail("sigma must be positive definite");
    spec.stages.push_back(std::move(s));
  }
  const auto S = static_cast<std::size_t>(spec.n_stages_true());
  if (j.contains("n_stages_true") && j.at("n_stages_true") != static_cast<int>(S))
    fail("n_stages_true does not match the number of stages");
  if (S == 1) {
    spec.transitions = Eigen::MatrixXd::Zero(1, 1);
  } else {
    if (!j.contains("transitions")) fail("transitions required with more than one stage");
    spec.transitions = read_matrix(j.at("transitions"), "transitions", S);
    for (Eigen::Index r = 0; r < spec.transitions.rows(); ++r) {
      if ((spec.transitions.row(r).array() < 0.0).any()) fail("transition probabilities must be >= 0");
      if (std::abs(spec.transitions.row(r).sum() - 1.0) > 1e-9) fail("transition rows must sum to 1");
      if (spec.transitions(r, r) != 0.0) fail("self-transitions must be 0 (adjacent segments share no stage)");
    }
  }
  if (j.contains("initial")) {
    spec.initial = read_vector(j.at("initial"), "initial", S);
    if ((spec.initial.array() < 0.0).any() || std::abs(spec.initial.sum() - 1.0) > 1e-9)
      fail("initial must be a probability vector");
  } else {
    spec.initial = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(S), 1.0 / static_cast<double>(S));
  }
  read_range(j, "segments", spec.segments_min, spec.segments_max);
  read_range(j, "segment_length", spec.length_min, spec.length_max);
  if (S == 1 && spec.segments_max > 1) fail("a single stage allows only one segment per user");
  spec.window_days = read_int(j, "window_days", spec.window_days);
  if (spec.window_days < 1) fail("window_days must be >= 1");
  if (j.contains("start_time")) {
    if (!j.at("start_time").is_number_integer() || j.at("start_time").get<std::int64_t>() <= 0)
      fail("start_time must be a positive integer");
    spec.start_time = j.at("start_time").get<std::int64_t>();
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) fail("seed must be a non-negative integer");
    spec.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("planted")) {
    const json& pl = j.at("planted");
    if (!pl.is_object()) fail("planted must map pattern key to {delta, base}");
    for (const auto& [key, v] : pl.items()) {
      PlantedPattern p;
      try {
        p.pattern = parse_pattern_key(key);
      } catch (const std::exception&) {
        fail("malformed planted pattern '" + key + "'");
      }
      if (v.is_number()) {
        p.delta = v.get<double>();
      } else if (v.is_object() && v.contains("delta") && v.at("delta").is_number()) {
        p.delta = v.at("delta").get<double>();
        if (v.contains("base")) {
          if (!v.at("base").is_number()) fail("planted base must be a number");
          p.base = v.at("base").get<double>();
        }
      } else {
        fail("planted '" + key + "' needs a numeric delta");
      }
      for (std::size_t i = 0; i < p.pattern.size(); ++i) {
        if (p.pattern[i] > static_cast<int>(S)) fail("planted '" + key + "' names an unknown stage");
        if (i > 0 && (p.pattern[i] == p.pattern[i - 1] ||
                      spec.transitions(p.pattern[i - 1] - 1, p.pattern[i] - 1) <= 0.0))
          fail("planted '" + key + "' uses a transition with zero probability");
      }
      if (static_cast<int>(p.pattern.size()) > spec.segments_max) fail("planted '" + key + "' is longer than any sequence");
      if (p.base < 0.0 || p.base + std::abs(p.delta) > 1.0) fail("planted '" + key + "' needs 0 <= base and base + |delta| <= 1");
      spec.planted.push_back(std::move(p));
    }
  }
  return spec;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SynthSpecError("cannot read synth spec " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SynthSpecError("synth spec " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_synth_spec(j);
}

SynthOutput generate(const SynthSpec& spec) {
  Rng rng(spec.seed);
  SynthOutput out;
  const std::int64_t W = static_cast<std::int64_t>(spec.window_days) * kSecondsPerDay;
  const int min_windows = spec.segments_min * spec.length_min;
  out.split_time = spec.start_time + static_cast<std::int64_t>(min_windows / 2) * W;

  std::vector<Eigen::MatrixXd> chol;
  for (const auto& s : spec.stages) chol.push_back(Eigen::LLT<Eigen::MatrixXd>(s.sigma).matrixL());

  int serial = 0;
  for (Group g : {Group::Recovery, Group::Middle, Group::Deterioration}) {
    const int n = spec.n_users.at(g);
    // carriers[p][u]: user u of this group carries planted pattern p.
    std::vector<std::vector<bool>> carriers;
    for (const auto& p : spec.planted) {
      double f = p.base;
      if (g == Group::Recovery && p.delta > 0.0) f += p.delta;
      if (g == Group::Deterioration && p.delta < 0.0) f -= p.delta;
      const auto count = static_cast<int>(std::lround(f * n));
      std::vector<int> order(static_cast<std::size_t>(n));
      for (int u = 0; u < n; ++u) order[static_cast<std::size_t>(u)] = u;
      rng.shuffle(order);
      std::vector<bool> c(static_cast<std::size_t>(n), false);
      for (int i = 0; i < count; ++i) c[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
      carriers.push_back(std::move(c));
    }

    for (int u = 0; u < n; ++u) {
      SynthUser user;
      char id[32];
      std::snprintf(id, sizeof id, "user-%05d", ++serial);
      user.user_id = id;
      user.group = g;
      std::vector<const PlantedPattern*> required, forbidden;
      for (std::size_t p = 0; p < spec.planted.size(); ++p) {
        if (carriers[p][static_cast<std::size_t>(u)]) {
          required.push_back(&spec.planted[p]);
          user.planted.push_back(pattern_key(spec.planted[p].pattern));
        } else {
          forbidden.push_back(&spec.planted[p]);
        }
      }
      user.stages = sample_sequence(spec, rng, required, forbidden);
      user.breakpoints.push_back(0);
      for (std::size_t k = 0; k < user.stages.size(); ++k)
        user.breakpoints.push_back(user.breakpoints.back() + rng.integer(spec.length_min, spec.length_max));

      // Each window gets a target vector; posts and responses are laid out so
      // that the window averages reproduce it.
      for (std::size_t k = 0; k < user.stages.size(); ++k) {
        const auto stage = static_cast<std::size_t>(user.stages[k] - 1);
        for (int w = user.breakpoints[k]; w < user.breakpoints[k + 1]; ++w) {
          Eigen::VectorXd z(static_cast<Eigen::Index>(kBehaviorDims));
          for (Eigen::Index d = 0; d < z.size(); ++d) z(d) = rng.normal();
          const Eigen::VectorXd x = spec.stages[stage].mu + chol[stage] * z;
          auto at = [&](Dim d) { return x(static_cast<Eigen::Index>(d)); };

          const std::int64_t w_start = spec.start_time + static_cast<std::int64_t>(w) * W;
          const int c = std::max(1, static_cast<int>(std::lround(at(Dim::PostFrequency))));
          const int r = std::max(0, static_cast<int>(std::lround(at(Dim::ResponseNumber))));
          const double delay_h = std::max(0.0, at(Dim::ResponseTime));
          std::vector<std::int64_t> post_ts;
          for (int i = 0; i < c; ++i) {
            PostRecord p;
            p.user_id = user.user_id;
            p.timestamp = w_start + static_cast<std::int64_t>(i) * (W / c);
            p.category = p.timestamp >= out.split_time ? after_split_category(g) : Category::MH;
            p.depression_score = std::clamp(at(Dim::Depression), 0.0, 2.999);
            p.sought_info_support = std::max(0.0, at(Dim::SoughtIS));
            p.sought_emotion_support = std::max(0.0, at(Dim::SoughtES));
            p.toxicity_exposure = std::clamp(at(Dim::Toxicity), 0.0, 1.0);
            p.is_initiated = i == 0;
            post_ts.push_back(p.timestamp);
            out.posts.push_back(std::move(p));
          }
          for (int i = 0; i < r; ++i) {
            ResponseRecord rr;
            rr.post_user_id = user.user_id;
            rr.post_timestamp = post_ts[static_cast<std::size_t>(i % c)];
            rr.response_timestamp = rr.post_timestamp + std::llround(delay_h * 3600.0) + 3600 * (i / c);
            rr.received_info_support = std::max(0.0, at(Dim::ReceivedIS));
            rr.received_emotion_support = std::max(0.0, at(Dim::ReceivedES));
            out.responses.push_back(std::move(rr));
          }
        }
      }
      out.users.push_back(std::move(user));
    }
  }

  for (const auto& p : spec.planted) {
    SynthPlantedTruth t;
    t.pattern = p.pattern;
    std::map<Group, std::pair<int, int>> tally;  // (carrying, total)
    for (const auto& u : out.users) {
      auto& [hit, total] = tally[u.group];
      ++total;
      if (first_occurrence(u.stages, p.pattern) >= 0) ++hit;
    }
    auto frac = [&](Group g) {
      const auto [hit, total] = tally[g];
      return total == 0 ? 0.0 : static_cast<double>(hit) / total;
    };
    t.f_r = frac(Group::Recovery);
    t.f_d = frac(Group::Deterioration);
    t.f_m = frac(Group::Middle);
    t.w = t.f_r - t.f_d;
    out.planted.push_back(t);
  }
  return out;
}

json ground_truth_json(const SynthSpec& spec, const SynthOutput& out) {
  json j;
  j["split_time"] = out.split_time;
  j["window_days"] = spec.window_days;
  j["start_time"] = spec.start_time;
  j["n_stages_true"] = spec.n_stages_true();
  j["seed"] = spec.seed;
  json users = json::array();
  for (const auto& u : out.users)
    users.push_back({{"user_id", u.user_id},
                     {"group", to_string(u.group)},
                     {"stages", u.stages},
                     {"breakpoints", u.breakpoints},
                     {"planted", u.planted}});
  j["users"] = std::move(users);
  json planted = json::array();
  for (const auto& t : out.planted)
    planted.push_back({{"pattern", pattern_key(t.pattern)}, {"f_r", t.f_r}, {"f_d", t.f_d}, {"f_m", t.f_m}, {"w", t.w}});
  j["planted"] = std::move(planted);
  return j;
}

void write_synth(const SynthSpec& spec, const SynthOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("posts.jsonl");
    for (const auto& p : out.posts) f << format_post(p) << '\n';
  }
  {
    auto f = open("responses.jsonl");
    for (const auto& r : out.responses) f << format_response(r) << '\n';
  }
  auto f = open("ground_truth.json");
  f << ground_truth_json(spec, out).dump(1) << '\n';
}

}  // namespace stagelens
