#include <gtest/gtest.h>

#include "harness.hpp"
#include "oracles.hpp"
#include "stagelens/bundle.hpp"
#include "stagelens/digest.hpp"
#include "stagelens/schema.hpp"

using namespace stagelens;

namespace {

class FixtureRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    synth_ = new SynthOutput(generate(harness::fixture_spec(11)));
    art_ = new RunArtifacts(run_pipeline(harness::as_input(*synth_), PipelineParams{}));
    bundle_ = new Json(bundle_json(*art_));
  }
  static void TearDownTestSuite() {
    delete bundle_;
    delete art_;
    delete synth_;
  }
  static SynthOutput* synth_;
  static RunArtifacts* art_;
  static Json* bundle_;
};

SynthOutput* FixtureRun::synth_ = nullptr;
RunArtifacts* FixtureRun::art_ = nullptr;
Json* FixtureRun::bundle_ = nullptr;

void expect_valid(const std::string& schema, const Json& value) {
  std::string err;
  EXPECT_TRUE(validate_schema(route_schema(schema), value, &err)) << schema << ": " << err;
}

}  // namespace

TEST(Params, Validation) {
  PipelineParams p;
  EXPECT_NO_THROW(validate(p));
  p.n_stages = 11;
  EXPECT_THROW(validate(p), std::invalid_argument);
  p = {};
  p.min_support = 0.0;
  EXPECT_THROW(validate(p), std::invalid_argument);
  p = {};
  p.lambda = 1.5;
  EXPECT_THROW(validate(p), std::invalid_argument);
}

TEST(Params, JsonRoundTripAndRejects) {
  PipelineParams p;
  p.n_stages = 4;
  p.min_gain = 0.75;
  p.seed = 99;
  EXPECT_EQ(params_from_json(to_json(p)), p);
  EXPECT_EQ(params_from_json(Json::object({{"k_reactive", 3}})).k_reactive, 3);
  EXPECT_THROW(params_from_json(Json::object({{"bogus", 1}})), std::invalid_argument);
  EXPECT_THROW(params_from_json(Json::object({{"n_stages", "six"}})), std::invalid_argument);
  EXPECT_THROW(params_from_json(Json::object({{"n_stages", 2.5}})), std::invalid_argument);
  EXPECT_THROW(params_from_json(Json::object({{"seed", -1}})), std::invalid_argument);
  EXPECT_THROW(params_from_json(Json::object({{"n_stages", 1}})), std::invalid_argument);
}

TEST(Pipeline, NoUsersIsAnError) {
  PipelineInput in;
  EXPECT_THROW(run_pipeline(in, {}), std::runtime_error);
}

TEST_F(FixtureRun, SixOrderedStages) {
  const auto& st = art_->stages.stages;
  ASSERT_EQ(st.size(), 6u);
  for (std::size_t i = 0; i < st.size(); ++i) {
    EXPECT_EQ(st[i].stage_id, static_cast<int>(i) + 1);
    if (i) EXPECT_GE(st[i - 1].positivity, st[i].positivity);
    EXPECT_EQ(art_->stage_w.at(st[i].stage_id), st[i].positivity);
  }
  for (const auto& s : art_->segments) ASSERT_TRUE(s.stage_id.has_value());
  EXPECT_EQ((*bundle_)["stages"].size(), 6u);
}

TEST_F(FixtureRun, RecoversTrueStagesAndPlantedPattern) {
  const auto cmp = harness::compare(*synth_, *art_);
  EXPECT_GT(oracle::adjusted_rand(cmp.true_labels, cmp.mined_labels), 0.9);
  std::vector<int> mapped;
  for (int s : synth_->planted[0].pattern) mapped.push_back(cmp.mapping.at(s));
  const StagePattern* found = nullptr;
  for (const auto& p : art_->patterns)
    if (p.symbols == mapped) found = &p;
  ASSERT_NE(found, nullptr) << pattern_key(mapped);
  EXPECT_NEAR(found->w, 0.2, 0.05);
}

TEST_F(FixtureRun, ArtifactsAreConsistent) {
  // Stage sequences follow the segment tiling.
  std::size_t segs = 0;
  for (const auto& s : art_->stage_sequences) segs += s.stages.size();
  EXPECT_EQ(segs, art_->segments.size());
  for (const auto& p : art_->patterns) {
    EXPECT_GE(p.max_support(), art_->params.min_support);
    EXPECT_NEAR(p.w, p.f_r - p.f_d, 1e-15);
  }
  ASSERT_EQ(art_->progression.size(), 4u);
  for (const auto& [name, m] : art_->progression) {
    std::size_t start = 0;
    for (const auto& s : m.sources) start += s.count;
    std::size_t sum = 0;
    for (const auto& n : m.nodes)
      if (n.time_index == 0) sum += n.count;
    EXPECT_EQ(start, sum) << name;
  }
  // Every member window is aligned to a position in 1..L.
  for (const auto& [seg, a] : art_->stages.alignments) {
    EXPECT_EQ(static_cast<int>(a.positions.size()), art_->segments[seg].length());
    for (int p : a.positions) {
      EXPECT_GE(p, 1);
      EXPECT_LE(p, art_->params.align_len);
    }
  }
}

TEST_F(FixtureRun, BundleIsDeterministic) {
  const auto again = run_pipeline(harness::as_input(*synth_), PipelineParams{});
  EXPECT_EQ(sha256_hex(dump_bundle(bundle_json(again))), sha256_hex(dump_bundle(*bundle_)));
  for (const char* key : {"format", "params", "dataset", "clusters", "segments", "stage_clustering", "stages",
                          "stage_sequences", "stage_w", "patterns", "progression"})
    EXPECT_TRUE(bundle_->contains(key)) << key;
  EXPECT_EQ((*bundle_)["format"], kBundleFormat);
}

TEST_F(FixtureRun, SequenceOrderDoesNotMatter) {
  auto in = harness::as_input(*synth_);
  std::reverse(in.posts.begin(), in.posts.end());
  std::reverse(in.responses.begin(), in.responses.end());
  const auto again = run_pipeline(in, PipelineParams{});
  EXPECT_EQ(dump_bundle(bundle_json(again)), dump_bundle(*bundle_));
}

TEST_F(FixtureRun, PayloadsMatchSchemas) {
  expect_valid("bundle", *bundle_);
  expect_valid("clusters", clusters_payload(*bundle_, BehaviorKind::Proactive));
  expect_valid("clusters", clusters_payload(*bundle_, BehaviorKind::Reactive));
  expect_valid("stages", stages_payload(*bundle_));
  expect_valid("progression", progression_payload(*bundle_, std::nullopt));
  expect_valid("progression", progression_payload(*bundle_, Group::Recovery));
  for (auto key : {PatternSortKey::Positivity, PatternSortKey::Impact, PatternSortKey::Support})
    expect_valid("patterns", patterns_payload(*bundle_, key, {}));
  for (const auto& p : art_->patterns) expect_valid("context", context_payload(*bundle_, pattern_key(p.symbols)));
  expect_valid("context", context_payload(*bundle_, pattern_key(art_->patterns.front().symbols), Group::Deterioration));
}

TEST_F(FixtureRun, PatternPayloads) {
  const auto filtered = patterns_payload(*bundle_, PatternSortKey::Positivity, {1, 2})["patterns"];
  for (const auto& p : filtered) {
    const auto sym = p["symbols"].get<std::vector<int>>();
    EXPECT_TRUE(std::count(sym.begin(), sym.end(), 1) && std::count(sym.begin(), sym.end(), 2));
  }
  const auto all = patterns_payload(*bundle_, PatternSortKey::Impact, {})["patterns"];
  EXPECT_EQ(all.size(), art_->patterns.size());
  EXPECT_THROW(context_payload(*bundle_, "9-9-9"), PatternAbsent);
  EXPECT_THROW(context_payload(*bundle_, "x"), std::invalid_argument);
  const auto ctx = context_payload(*bundle_, pattern_key(art_->patterns.front().symbols));
  EXPECT_TRUE(ctx["frequent"].get<bool>());
}

TEST_F(FixtureRun, PatternJsonRoundTrip) {
  for (const auto& p : art_->patterns) {
    const auto back = pattern_from_json(to_json(p));
    EXPECT_EQ(back.symbols, p.symbols);
    EXPECT_EQ(back.w, p.w);
    EXPECT_EQ(back.impact.has_value(), p.impact.has_value());
    if (p.impact) EXPECT_EQ(back.impact->d_i, p.impact->d_i);
  }
  for (const auto& s : art_->stage_sequences) EXPECT_EQ(stage_sequence_from_json(to_json(s)).stages, s.stages);
}

TEST(Schema, ValidatorBasics) {
  const Json schema = Json::parse(R"({
    "type": "object", "required": ["a"], "additionalProperties": false,
    "properties": {"a": {"type": "integer", "minimum": 1}, "b": {"type": "array", "items": {"enum": ["x", "y"]}, "minItems": 1}}
  })");
  EXPECT_TRUE(validate_schema(schema, Json::parse(R"({"a": 2, "b": ["x"]})")));
  std::string err;
  EXPECT_FALSE(validate_schema(schema, Json::parse(R"({"a": 0})"), &err));
  EXPECT_FALSE(err.empty());
  EXPECT_FALSE(validate_schema(schema, Json::parse(R"({"b": ["x"]})")));
  EXPECT_FALSE(validate_schema(schema, Json::parse(R"({"a": 1, "c": 1})")));
  EXPECT_FALSE(validate_schema(schema, Json::parse(R"({"a": 1, "b": []})")));
  EXPECT_FALSE(validate_schema(schema, Json::parse(R"({"a": 1, "b": ["z"]})")));
  EXPECT_THROW(route_schema("nope"), std::out_of_range);
  EXPECT_GE(schema_names().size(), 11u);
}
