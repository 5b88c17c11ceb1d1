#include "stagelens/pipeline.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace stagelens {

void validate(const PipelineParams& p) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid parameter: ") + what);
  };
  require(p.window_days >= 1, "window_days must be >= 1");
  require(p.k_proactive >= kMinTypes && p.k_proactive <= kMaxTypes, "k_proactive must be in [2,10]");
  require(p.k_reactive >= kMinTypes && p.k_reactive <= kMaxTypes, "k_reactive must be in [2,10]");
  require(p.n_stages >= 2 && p.n_stages <= 10, "n_stages must be in [2,10]");
  require(p.lambda >= 0.0 && p.lambda <= 1.0, "lambda must be in [0,1]");
  require(p.lambda_reg > 0.0, "lambda_reg must be > 0");
  require(p.align_len >= 1, "align_len must be >= 1");
  require(p.min_support > 0.0 && p.min_support <= 1.0, "min_support must be in (0,1]");
  require(p.max_pattern_len >= 1, "max_pattern_len must be >= 1");
  require(p.cooccurrence_min_freq >= 0.0 && p.cooccurrence_min_freq <= 1.0,
          "cooccurrence_min_freq must be in [0,1]");
  require(p.min_gain >= 0.0, "min_gain must be >= 0");
  require(p.max_segments >= 1, "max_segments must be >= 1");
}

namespace {

ClusterDiagnostics kind_diagnostics(const Dataset& ds, BehaviorKind kind, int k, std::uint64_t seed) {
  return diagnostics(ds, kind, kMinTypes, kMaxTypes, k, seed);
}

std::vector<EventTriple> segment_events(const Dataset& ds, const Segment& s) {
  const auto& events = ds.sequences[s.sequence].events;
  std::vector<EventTriple> out;
  for (int w = s.start; w < s.end; ++w) out.push_back(events[static_cast<std::size_t>(w)].triple);
  return out;
}

StageArtifacts build_stages(const Dataset& ds, std::vector<Segment>& segments, const PipelineParams& p,
                            std::map<int, double>& stage_w) {
  StageArtifacts out;
  out.clustering = cluster_stages(segments, p.n_stages, p.lambda, p.seed);
  out.silhouette_by_s = stage_count_silhouettes(out.clustering.features, 2,
                                                std::min<int>(10, static_cast<int>(segments.size())), p.seed);

  // Positivity needs stage sequences, which need ids: use internal ids first.
  for (std::size_t i = 0; i < segments.size(); ++i) segments[i].stage_id = out.clustering.labels[i] + 1;
  const auto internal_w = single_stage_positivity(to_stage_sequences(segments, ds), p.n_stages);
  auto stages = out.clustering.stages;
  for (auto& s : stages) s.positivity = internal_w.at(s.internal_id + 1);
  stages = order_stages(std::move(stages));

  std::vector<int> final_id(stages.size());
  for (const auto& s : stages) final_id[static_cast<std::size_t>(s.internal_id)] = s.stage_id;
  for (std::size_t i = 0; i < segments.size(); ++i)
    segments[i].stage_id = final_id[static_cast<std::size_t>(out.clustering.labels[i])];
  for (const auto& s : stages) stage_w[s.stage_id] = s.positivity;

  for (auto& stage : stages) {
    std::vector<EventTriple> events;
    std::vector<Eigen::MatrixXd> values;
    std::vector<double> dist;
    const Eigen::RowVectorXd centroid = out.clustering.centroids.row(stage.internal_id);
    for (std::size_t m : stage.members) {
      const auto e = segment_events(ds, segments[m]);
      events.insert(events.end(), e.begin(), e.end());
      const Eigen::MatrixXd x = normalized_matrix(ds.sequences[segments[m].sequence]);
      values.push_back(x.middleRows(segments[m].start, segments[m].length()));
      dist.push_back((out.clustering.features.row(static_cast<Eigen::Index>(m)) - centroid).norm());
    }
    stage.stat = stat_summary(events, p.k_proactive, p.k_reactive, p.cooccurrence_min_freq);
    stage.representatives = select_representatives(values, dist, p.align_len);
    for (const auto& r : stage.representatives.representatives)
      stage.representative_segments.push_back(stage.members[r.member]);

    std::vector<AlignedMember> aligned;
    for (std::size_t i = 0; i < stage.members.size(); ++i) {
      Alignment a = align_segment(values[i], stage.representatives.representatives);
      aligned.push_back({segment_events(ds, segments[stage.members[i]]), a.positions});
      out.alignments.emplace(stage.members[i], std::move(a));
    }
    stage.temporal = temporal_summary(aligned, p.align_len, p.k_proactive, p.k_reactive);
  }
  out.stages = std::move(stages);
  return out;
}

}  // namespace

RunArtifacts run_pipeline(const PipelineInput& input, const PipelineParams& params) {
  validate(params);
  RunArtifacts art;
  art.params = params;
  art.split_time = input.split_time;

  const GroupAssignment groups = assign_groups(input.posts, input.split_time);
  art.dropped_users = groups.dropped;
  art.dataset = build_sequences(input.posts, input.responses, params.window_days, groups.groups);
  art.dataset.provenance.posts_digest = input.posts_digest;
  art.dataset.provenance.responses_digest = input.responses_digest;
  if (art.dataset.sequences.empty()) throw std::runtime_error("no users left after grouping and windowing");

  art.proactive = fit_types(art.dataset, BehaviorKind::Proactive, params.k_proactive, params.seed);
  art.reactive = fit_types(art.dataset, BehaviorKind::Reactive, params.k_reactive, params.seed);
  art.proactive_diagnostics = kind_diagnostics(art.dataset, BehaviorKind::Proactive, params.k_proactive, params.seed);
  art.reactive_diagnostics = kind_diagnostics(art.dataset, BehaviorKind::Reactive, params.k_reactive, params.seed);
  form_events(art.dataset, art.proactive, art.reactive);

  SegmentationParams sp;
  sp.lambda_reg = params.lambda_reg;
  sp.max_segments = params.max_segments;
  sp.min_gain = params.min_gain;
  sp.seed = params.seed;
  for (std::size_t i = 0; i < art.dataset.sequences.size(); ++i) {
    for (auto& s : segment_sequence(art.dataset.sequences[i], sp)) {
      s.sequence = i;
      art.segments.push_back(std::move(s));
    }
  }

  art.stages = build_stages(art.dataset, art.segments, params, art.stage_w);
  art.stage_sequences = to_stage_sequences(art.segments, art.dataset);
  art.patterns = mine_patterns(art.stage_sequences, params.min_support, params.max_pattern_len);
  for (auto& p : art.patterns) {
    try {
      p.impact = pattern_impact(p.symbols, art.stage_sequences, art.patterns);
    } catch (const PatternAbsent&) {
      // only in middle-group sequences: no impact defined
    }
  }
  art.progression["all"] = build_group_sankey(art.stage_sequences, std::nullopt);
  for (Group g : {Group::Recovery, Group::Middle, Group::Deterioration})
    art.progression[std::string(to_string(g))] = build_group_sankey(art.stage_sequences, g);
  return art;
}

}  // namespace stagelens
