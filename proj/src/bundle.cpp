#include "stagelens/bundle.hpp"

#include <stdexcept>

namespace stagelens {

namespace {

Json matrix_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

std::string level_name(DepressionLevel l) { return std::string(to_string(l)); }

Json frequency_json(const FrequencyTable& t) {
  Json j;
  j["windows"] = t.windows;
  j["level"] = {{"low", t.level[0]}, {"mid", t.level[1]}, {"high", t.level[2]}};
  Json pro = Json::array(), re = Json::array();
  for (std::size_t i = 0; i < t.proactive.size(); ++i)
    pro.push_back({{"type", type_label(BehaviorKind::Proactive, static_cast<int>(i) + 1)}, {"frequency", t.proactive[i]}});
  for (std::size_t i = 0; i < t.reactive.size(); ++i)
    re.push_back({{"type", type_label(BehaviorKind::Reactive, static_cast<int>(i) + 1)}, {"frequency", t.reactive[i]}});
  j["proactive"] = std::move(pro);
  j["reactive"] = std::move(re);
  return j;
}

Json type_model_json(const BehaviorTypeModel& m, const ClusterDiagnostics& d) {
  Json j;
  j["kind"] = to_string(m.kind);
  j["k"] = m.k;
  Json dims = Json::array();
  for (std::size_t dim : m.dims) dims.push_back(dim_name(dim));
  j["dims"] = dims;
  j["centroids"] = matrix_json(m.centroids);
  j["inertia"] = m.inertia;
  Json types = Json::array();
  for (std::size_t t = 0; t < m.boxplots.size(); ++t) {
    Json boxes = Json::array();
    for (std::size_t i = 0; i < m.boxplots[t].size(); ++i) {
      const auto& b = m.boxplots[t][i];
      boxes.push_back({{"dim", dim_name(m.dims[i])},
                       {"min", b.min},
                       {"q1", b.q1},
                       {"median", b.median},
                       {"q3", b.q3},
                       {"max", b.max}});
    }
    types.push_back({{"type", type_label(m.kind, static_cast<int>(t) + 1)}, {"boxes", std::move(boxes)}});
  }
  j["types"] = std::move(types);

  Json diag;
  Json by_k = Json::array();
  for (const auto& [k, s] : d.silhouette_by_k)
    by_k.push_back({{"k", k}, {"silhouette", s}, {"degenerate", d.degenerate_by_k.at(k)}});
  diag["silhouette_by_k"] = std::move(by_k);
  diag["selected_k"] = d.selected_k;
  diag["centroid_cosine_similarity"] = matrix_json(d.centroid_cosine_similarity);
  diag["size_proportions"] = d.size_proportions;
  j["diagnostics"] = std::move(diag);
  return j;
}

Json dataset_json(const RunArtifacts& art) {
  const Dataset& ds = art.dataset;
  Json j;
  j["provenance"] = {{"posts_digest", ds.provenance.posts_digest},
                     {"responses_digest", ds.provenance.responses_digest},
                     {"window_days", ds.provenance.window_days},
                     {"split_time", art.split_time}};
  j["users"] = ds.sequences.size();
  j["windows"] = ds.window_count();
  std::map<std::string, std::size_t> groups{{"recovery", 0}, {"middle", 0}, {"deterioration", 0}};
  for (const auto& s : ds.sequences) ++groups[std::string(to_string(s.group))];
  j["groups"] = groups;
  Json norm = Json::array();
  for (std::size_t d = 0; d < kBehaviorDims; ++d) {
    const auto& st = ds.normalization_stats[d];
    norm.push_back({{"dim", dim_name(d)}, {"mean", st.mean}, {"stddev", st.stddev}, {"constant", st.constant}});
  }
  j["normalization"] = std::move(norm);
  Json excluded = Json::array();
  for (const auto& e : ds.excluded) excluded.push_back({{"user_id", e.user_id}, {"reason", e.reason}});
  j["excluded"] = std::move(excluded);
  j["dropped"] = art.dropped_users;
  return j;
}

Json segment_ref(const Dataset& ds, const Segment& s) {
  return {{"user_id", ds.sequences[s.sequence].user_id}, {"start", s.start}, {"end", s.end}};
}

Json stage_json(const RunArtifacts& art, const Stage& st) {
  const auto& p = art.params;
  Json j;
  j["stage_id"] = st.stage_id;
  j["positivity"] = st.positivity;
  j["members"] = st.members.size();
  j["centroid"] = vector_json(art.stages.clustering.centroids.row(st.internal_id).transpose());

  Json stat;
  stat["frequencies"] = frequency_json(st.stat.frequencies);
  Json co = Json::array();
  for (const auto& c : st.stat.cooccurrences)
    co.push_back({{"level", level_name(c.level)},
                  {"proactive", type_label(BehaviorKind::Proactive, c.proactive_type)},
                  {"reactive", type_label(BehaviorKind::Reactive, c.reactive_type)},
                  {"frequency", c.frequency}});
  stat["cooccurrences"] = std::move(co);
  j["stat"] = std::move(stat);

  Json positions = Json::array();
  for (std::size_t i = 0; i < st.temporal.positions.size(); ++i)
    positions.push_back({{"position", i + 1},
                         {"empty", static_cast<bool>(st.temporal.empty[i])},
                         {"frequencies", frequency_json(st.temporal.positions[i])}});
  j["temporal"] = {{"length", p.align_len}, {"positions", std::move(positions)}};

  Json reps = Json::array();
  for (std::size_t i = 0; i < st.representatives.representatives.size(); ++i) {
    Json r = segment_ref(art.dataset, art.segments[st.representative_segments[i]]);
    r["resampled"] = st.representatives.representatives[i].resampled;
    reps.push_back(std::move(r));
  }
  j["representatives"] = {{"chosen_cluster_count", st.representatives.chosen_cluster_count},
                          {"fallback", st.representatives.fallback},
                          {"segments", std::move(reps)}};
  return j;
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

// ---------------------------------------------------------------------------

Json to_json(const PipelineParams& p) {
  return {{"window_days", p.window_days},
          {"k_proactive", p.k_proactive},
          {"k_reactive", p.k_reactive},
          {"n_stages", p.n_stages},
          {"lambda", p.lambda},
          {"lambda_reg", p.lambda_reg},
          {"align_len", p.align_len},
          {"min_support", p.min_support},
          {"max_pattern_len", p.max_pattern_len},
          {"cooccurrence_min_freq", p.cooccurrence_min_freq},
          {"min_gain", p.min_gain},
          {"max_segments", p.max_segments},
          {"seed", p.seed}};
}

PipelineParams params_from_json(const Json& j, PipelineParams p) {
  if (j.is_null()) return p;
  if (!j.is_object()) throw std::invalid_argument("params must be an object");
  for (const auto& [key, v] : j.items()) {
    auto as_int = [&](int& out) {
      if (!v.is_number_integer()) throw std::invalid_argument("parameter '" + key + "' must be an integer");
      out = v.get<int>();
    };
    auto as_real = [&](double& out) {
      if (!v.is_number()) throw std::invalid_argument("parameter '" + key + "' must be a number");
      out = v.get<double>();
    };
    if (key == "window_days") as_int(p.window_days);
    else if (key == "k_proactive") as_int(p.k_proactive);
    else if (key == "k_reactive") as_int(p.k_reactive);
    else if (key == "n_stages") as_int(p.n_stages);
    else if (key == "lambda") as_real(p.lambda);
    else if (key == "lambda_reg") as_real(p.lambda_reg);
    else if (key == "align_len") as_int(p.align_len);
    else if (key == "min_support") as_real(p.min_support);
    else if (key == "max_pattern_len") as_int(p.max_pattern_len);
    else if (key == "cooccurrence_min_freq") as_real(p.cooccurrence_min_freq);
    else if (key == "min_gain") as_real(p.min_gain);
    else if (key == "max_segments") as_int(p.max_segments);
    else if (key == "seed") {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw std::invalid_argument("parameter 'seed' must be a non-negative integer");
      p.seed = v.get<std::uint64_t>();
    } else {
      throw std::invalid_argument("unknown parameter '" + key + "'");
    }
  }
  validate(p);
  return p;
}

Json to_json(const ImpactResult& r) {
  return {{"s_r_former", r.s_r_former}, {"s_d_former", r.s_d_former}, {"s_r_latter", r.s_r_latter},
          {"s_d_latter", r.s_d_latter}, {"r_f", r.r_f},               {"r_l", r.r_l},
          {"d_i", r.d_i},               {"n_containing", r.n_containing}, {"n_former", r.n_former},
          {"n_latter", r.n_latter},     {"degenerate", r.degenerate}};
}

ImpactResult impact_from_json(const Json& j) {
  ImpactResult r;
  r.s_r_former = field(j, "s_r_former").get<double>();
  r.s_d_former = field(j, "s_d_former").get<double>();
  r.s_r_latter = field(j, "s_r_latter").get<double>();
  r.s_d_latter = field(j, "s_d_latter").get<double>();
  r.r_f = field(j, "r_f").get<double>();
  r.r_l = field(j, "r_l").get<double>();
  r.d_i = field(j, "d_i").get<double>();
  r.n_containing = field(j, "n_containing").get<std::size_t>();
  r.n_former = field(j, "n_former").get<std::size_t>();
  r.n_latter = field(j, "n_latter").get<std::size_t>();
  r.degenerate = field(j, "degenerate").get<bool>();
  return r;
}

Json to_json(const StagePattern& p) {
  Json j = {{"key", pattern_key(p.symbols)},
            {"symbols", p.symbols},
            {"f_r", p.f_r},
            {"f_d", p.f_d},
            {"f_m", p.f_m},
            {"w", p.w},
            {"support", p.max_support()},
            {"containing", p.occurrences.size()}};
  j["impact"] = p.impact ? to_json(*p.impact) : Json(nullptr);
  return j;
}

StagePattern pattern_from_json(const Json& j) {
  StagePattern p;
  p.symbols = field(j, "symbols").get<std::vector<int>>();
  p.f_r = field(j, "f_r").get<double>();
  p.f_d = field(j, "f_d").get<double>();
  p.f_m = field(j, "f_m").get<double>();
  p.w = field(j, "w").get<double>();
  if (j.contains("impact") && !j.at("impact").is_null()) p.impact = impact_from_json(j.at("impact"));
  // Occurrences are not serialized; keep the count visible through placeholders.
  p.occurrences.resize(field(j, "containing").get<std::size_t>());
  return p;
}

Json to_json(const StageSequence& s) {
  return {{"user_id", s.user_id}, {"group", to_string(s.group)}, {"stages", s.stages}};
}

StageSequence stage_sequence_from_json(const Json& j) {
  StageSequence s;
  s.user_id = field(j, "user_id").get<std::string>();
  s.group = parse_group(field(j, "group").get<std::string>());
  s.stages = field(j, "stages").get<std::vector<int>>();
  return s;
}

Json to_json(const SankeyModel& m) {
  Json j;
  j["group"] = m.group ? Json(to_string(*m.group)) : Json("all");
  Json nodes = Json::array(), flows = Json::array(), sources = Json::array(), sinks = Json::array();
  for (const auto& n : m.nodes) nodes.push_back({{"time", n.time_index}, {"stage_id", n.stage_id}, {"count", n.count}});
  for (const auto& f : m.flows)
    flows.push_back({{"time", f.time_index},
                     {"from", f.from_stage},
                     {"to", f.to_stage},
                     {"count", f.count},
                     {"highlighted", f.highlighted}});
  for (const auto& t : m.sources) sources.push_back({{"time", t.time_index}, {"stage_id", t.stage_id}, {"count", t.count}});
  for (const auto& t : m.sinks) sinks.push_back({{"time", t.time_index}, {"stage_id", t.stage_id}, {"count", t.count}});
  j["nodes"] = std::move(nodes);
  j["flows"] = std::move(flows);
  j["sources"] = std::move(sources);
  j["sinks"] = std::move(sinks);
  return j;
}

Json to_json(const PatternCentricModel& m) {
  Json j;
  j["pattern"] = pattern_key(m.anchor);
  j["anchor"] = m.anchor;
  j["anchor_w"] = m.anchor_w;
  j["containing"] = m.containing;
  j["impact"] = m.impact ? to_json(*m.impact) : Json(nullptr);
  Json cols = Json::array();
  for (const auto& c : m.columns) {
    Json nodes = Json::array();
    for (const auto& n : c.nodes)
      nodes.push_back({{"stage_id", n.stage_id},
                       {"count", n.count},
                       {"polarity", to_string(n.polarity)},
                       {"w", n.w},
                       {"zero_w", n.zero_w}});
    cols.push_back({{"position", c.position},
                    {"region", to_string(c.region)},
                    {"offset", c.offset},
                    {"total", c.total},
                    {"nodes", std::move(nodes)}});
  }
  j["columns"] = std::move(cols);
  Json flows = Json::array(), pflows = Json::array(), sources = Json::array(), sinks = Json::array();
  for (const auto& f : m.flows)
    flows.push_back({{"position", f.from_position}, {"from", f.from_stage}, {"to", f.to_stage}, {"count", f.count}});
  for (const auto& f : m.polarity_flows)
    pflows.push_back({{"position", f.from_position},
                      {"from", to_string(f.from)},
                      {"to", to_string(f.to)},
                      {"count", f.count}});
  for (const auto& t : m.sources) sources.push_back({{"position", t.position}, {"stage_id", t.stage_id}, {"count", t.count}});
  for (const auto& t : m.sinks) sinks.push_back({{"position", t.position}, {"stage_id", t.stage_id}, {"count", t.count}});
  j["flows"] = std::move(flows);
  j["polarity_flows"] = std::move(pflows);
  j["sources"] = std::move(sources);
  j["sinks"] = std::move(sinks);
  Json sw = Json::array();
  for (const auto& [s, w] : m.stage_w) sw.push_back({{"stage_id", s}, {"w", w}});
  j["stage_w"] = std::move(sw);
  return j;
}

Json bundle_json(const RunArtifacts& art) {
  Json b;
  b["format"] = kBundleFormat;
  b["params"] = to_json(art.params);
  b["dataset"] = dataset_json(art);
  b["clusters"] = {{"proactive", type_model_json(art.proactive, art.proactive_diagnostics)},
                   {"reactive", type_model_json(art.reactive, art.reactive_diagnostics)}};

  Json segs = Json::array();
  for (std::size_t i = 0; i < art.segments.size(); ++i) {
    const auto& s = art.segments[i];
    Json j = segment_ref(art.dataset, s);
    j["stage_id"] = *s.stage_id;
    j["mu"] = vector_json(s.summary.mu);
    j["loglik"] = s.summary.loglik;
    j["regularized_loglik"] = s.summary.regularized_loglik;
    if (auto it = art.stages.alignments.find(i); it != art.stages.alignments.end()) {
      j["representative"] = it->second.representative;
      j["positions"] = it->second.positions;
    }
    segs.push_back(std::move(j));
  }
  b["segments"] = std::move(segs);

  Json stages = Json::array();
  for (const auto& st : art.stages.stages) stages.push_back(stage_json(art, st));
  Json sil = Json::array();
  for (const auto& [s, v] : art.stages.silhouette_by_s) sil.push_back({{"n_stages", s}, {"silhouette", v}});
  b["stage_clustering"] = {{"silhouette", art.stages.clustering.silhouette},
                           {"degenerate", art.stages.clustering.degenerate},
                           {"silhouette_by_n_stages", std::move(sil)},
                           {"centroid_cosine_similarity", matrix_json(art.stages.clustering.centroid_cosine_similarity)}};
  b["stages"] = std::move(stages);

  Json seqs = Json::array();
  for (const auto& s : art.stage_sequences) seqs.push_back(to_json(s));
  b["stage_sequences"] = std::move(seqs);
  Json sw = Json::array();
  for (const auto& [s, w] : art.stage_w) sw.push_back({{"stage_id", s}, {"w", w}});
  b["stage_w"] = std::move(sw);
  Json pats = Json::array();
  for (const auto& p : art.patterns) pats.push_back(to_json(p));
  b["patterns"] = std::move(pats);
  Json prog;
  for (const auto& [g, m] : art.progression) prog[g] = to_json(m);
  b["progression"] = std::move(prog);
  return b;
}

std::string dump_bundle(const Json& bundle) { return bundle.dump(1) + "\n"; }

// ---------------------------------------------------------------------------

Json clusters_payload(const Json& bundle, BehaviorKind kind) {
  return bundle.at("clusters").at(std::string(to_string(kind)));
}

Json stages_payload(const Json& bundle) {
  return {{"stages", bundle.at("stages")}, {"stage_clustering", bundle.at("stage_clustering")}};
}

Json progression_payload(const Json& bundle, std::optional<Group> group) {
  return bundle.at("progression").at(group ? std::string(to_string(*group)) : std::string("all"));
}

Json patterns_payload(const Json& bundle, PatternSortKey key, const std::set<int>& contains) {
  std::vector<StagePattern> patterns;
  for (const auto& j : bundle.at("patterns")) patterns.push_back(pattern_from_json(j));
  Json list = Json::array();
  for (const auto& p : rank_patterns(std::move(patterns), key, contains)) list.push_back(to_json(p));
  return {{"patterns", std::move(list)}};
}

Json context_payload(const Json& bundle, std::string_view key, std::optional<Group> group) {
  const std::vector<int> symbols = parse_pattern_key(key);
  std::vector<StageSequence> seqs;
  for (const auto& j : bundle.at("stage_sequences")) seqs.push_back(stage_sequence_from_json(j));
  std::vector<StagePattern> frequent;
  for (const auto& j : bundle.at("patterns")) frequent.push_back(pattern_from_json(j));
  std::map<int, double> stage_w;
  for (const auto& j : bundle.at("stage_w")) stage_w[j.at("stage_id").get<int>()] = j.at("w").get<double>();

  StagePattern anchor;
  const auto it = std::find_if(frequent.begin(), frequent.end(),
                               [&](const StagePattern& p) { return p.symbols == symbols; });
  if (it != frequent.end()) {
    anchor = *it;
  } else {
    // Infrequent but present: report it with freshly computed numbers.
    anchor.symbols = symbols;
    anchor.f_r = support(seqs, symbols, Group::Recovery);
    anchor.f_d = support(seqs, symbols, Group::Deterioration);
    anchor.f_m = support(seqs, symbols, Group::Middle);
    anchor.w = anchor.f_r - anchor.f_d;
    if (anchor.f_r > 0.0 || anchor.f_d > 0.0) anchor.impact = pattern_impact(symbols, seqs, frequent);
  }
  Json j = to_json(build_pattern_centric(seqs, anchor, stage_w, group));
  j["group"] = group ? Json(to_string(*group)) : Json("all");
  j["frequent"] = it != frequent.end();
  return j;
}

}  // namespace stagelens
