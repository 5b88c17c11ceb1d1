#include <gtest/gtest.h>

#include "harness.hpp"
#include "oracles.hpp"
#include "stagelens/bundle.hpp"

using namespace stagelens;

namespace {

nlohmann::json two_stage_spec() {
  std::ifstream in(test_util::fixture("synth_2stage.json"));
  return nlohmann::json::parse(in);
}

}  // namespace

TEST(SynthSpec, RejectsBadSpecs) {
  auto ok = two_stage_spec();
  EXPECT_NO_THROW(parse_synth_spec(ok));
  auto bad = ok;
  bad["transitions"] = {{0.5, 0.5}, {1, 0}};
  EXPECT_THROW(parse_synth_spec(bad), SynthSpecError);
  bad = ok;
  bad["n_users"]["sideways"] = 1;
  EXPECT_THROW(parse_synth_spec(bad), SynthSpecError);
  bad = ok;
  bad["stages"][0]["mu"] = {1, 2};
  EXPECT_THROW(parse_synth_spec(bad), SynthSpecError);
  bad = ok;
  bad["planted"] = {{"1-3", 0.1}};
  EXPECT_THROW(parse_synth_spec(bad), SynthSpecError);
  bad = ok;
  bad["planted"] = {{"1-1", 0.1}};
  EXPECT_THROW(parse_synth_spec(bad), SynthSpecError);
  EXPECT_THROW(load_synth_spec("/nonexistent/spec.json"), SynthSpecError);
}

TEST(Synth, DeterministicAndWellFormed) {
  const auto spec = parse_synth_spec(two_stage_spec());
  const auto a = generate(spec), b = generate(spec);
  ASSERT_EQ(a.posts.size(), b.posts.size());
  for (std::size_t i = 0; i < a.posts.size(); ++i) EXPECT_EQ(format_post(a.posts[i]), format_post(b.posts[i]));
  EXPECT_EQ(a.users.size(), 35u);
  for (const auto& u : a.users) {
    EXPECT_EQ(u.breakpoints.size(), u.stages.size() + 1);
    for (std::size_t k = 1; k < u.stages.size(); ++k) EXPECT_NE(u.stages[k], u.stages[k - 1]);
  }
  // Groups assigned from the records reproduce the generated ones.
  const auto groups = assign_groups(a.posts, a.split_time);
  for (const auto& u : a.users) EXPECT_EQ(groups.groups.at(u.user_id), u.group);
}

TEST(Synth, ZeroUsers) {
  auto j = two_stage_spec();
  j["n_users"] = {{"recovery", 0}, {"deterioration", 0}};
  const auto out = generate(parse_synth_spec(j));
  EXPECT_TRUE(out.posts.empty());
  EXPECT_TRUE(out.responses.empty());
}

TEST(Synth, WindowMeansMatchStageParameters) {
  const auto spec = harness::fixture_spec(11);
  const auto out = generate(spec);
  const auto groups = assign_groups(out.posts, out.split_time);
  const auto ds = build_sequences(out.posts, out.responses, spec.window_days, groups.groups);
  std::map<std::string, const BehaviorSequence*> by_user;
  for (const auto& s : ds.sequences) by_user[s.user_id] = &s;

  // Per true stage and dimension: sum and count of raw window values.
  const std::vector<Dim> dims{Dim::Depression, Dim::SoughtIS, Dim::SoughtES, Dim::Toxicity, Dim::ReceivedIS,
                              Dim::ReceivedES};
  std::map<std::pair<int, Dim>, std::pair<double, int>> acc;
  for (const auto& u : out.users) {
    const auto* s = by_user.at(u.user_id);
    for (std::size_t k = 0; k < u.stages.size(); ++k)
      for (int t = u.breakpoints[k]; t < u.breakpoints[k + 1]; ++t) {
        const auto& raw = s->events.at(static_cast<std::size_t>(t)).raw;
        for (Dim d : dims) {
          const bool received = d == Dim::ReceivedIS || d == Dim::ReceivedES;
          if (received && raw[Dim::ResponseNumber] == 0) continue;
          auto& [sum, n] = acc[{u.stages[k], d}];
          sum += raw[d];
          ++n;
        }
      }
  }
  int checked = 0;
  for (const auto& [key, v] : acc) {
    const auto& st = spec.stages[static_cast<std::size_t>(key.first - 1)];
    const auto d = static_cast<Eigen::Index>(key.second);
    const double mu = st.mu(d), sd = std::sqrt(st.sigma(d, d));
    if (mu - 4 * sd < 0.0) continue;  // clamped at zero: not controllable
    const double mean = v.first / v.second;
    EXPECT_NEAR(mean, mu, 3 * sd / std::sqrt(v.second)) << "stage " << key.first << " dim " << d;
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(Synth, PlantedContainmentIsExact) {
  const auto spec = harness::fixture_spec(11);
  const auto out = generate(spec);
  ASSERT_EQ(out.planted.size(), 1u);
  EXPECT_DOUBLE_EQ(out.planted[0].f_r, 0.5);
  EXPECT_DOUBLE_EQ(out.planted[0].f_d, 0.3);
  EXPECT_NEAR(out.planted[0].w, 0.2, 1e-12);
  const auto gt = ground_truth_json(spec, out);
  EXPECT_EQ(gt["split_time"], out.split_time);
  EXPECT_EQ(gt["users"].size(), 90u);
}

TEST(Synth, WriteFiles) {
  test_util::TempDir dir;
  const auto spec = parse_synth_spec(two_stage_spec());
  const auto out = generate(spec);
  write_synth(spec, out, dir.path());
  const auto in = ingest(dir.path() / "posts.jsonl", dir.path() / "responses.jsonl");
  EXPECT_EQ(in.posts.size(), out.posts.size());
  EXPECT_EQ(in.responses.size(), out.responses.size());
  EXPECT_EQ(in.posts_report.malformed, 0u);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "ground_truth.json"));
}

TEST(Synth, TwoStageBreakpointsRecovered) {
  const auto out = generate(parse_synth_spec(two_stage_spec()));
  PipelineParams p;
  p.n_stages = 2;
  const auto art = run_pipeline(harness::as_input(out), p);
  // Within one window for every breakpoint of a user.
  std::map<std::string, std::vector<int>> bounds;
  for (const auto& s : art.segments) bounds[s.user_id].push_back(s.start);
  std::size_t ok = 0;
  for (const auto& u : out.users) {
    auto b = bounds[u.user_id];
    std::sort(b.begin(), b.end());
    b.push_back(u.breakpoints.back());
    bool good = b.size() == u.breakpoints.size();
    for (std::size_t i = 0; good && i < b.size(); ++i) good = std::abs(b[i] - u.breakpoints[i]) <= 1;
    ok += good;
  }
  EXPECT_GE(ok * 100, out.users.size() * 95);
  const auto cmp = harness::compare(out, art);
  EXPECT_GT(oracle::adjusted_rand(cmp.true_labels, cmp.mined_labels), 0.9);
}
