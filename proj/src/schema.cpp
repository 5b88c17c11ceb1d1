#include "stagelens/schema.hpp"

#include <map>
#include <stdexcept>

namespace stagelens {

using nlohmann::json;

namespace {

bool type_matches(const std::string& type, const json& v) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  if (type == "null") return v.is_null();
  throw std::invalid_argument("schema uses unknown type '" + type + "'");
}

bool check(const json& root, const json& s, const json& v, const std::string& path, std::string* err) {
  auto bad = [&](const std::string& what) {
    if (err) *err = (path.empty() ? std::string("$") : path) + ": " + what;
    return false;
  };
  if (s.contains("$ref")) {
    const std::string ref = s.at("$ref").get<std::string>();
    const std::string prefix = "#/definitions/";
    if (ref.rfind(prefix, 0) != 0) throw std::invalid_argument("unsupported $ref " + ref);
    return check(root, root.at("definitions").at(ref.substr(prefix.size())), v, path, err);
  }
  if (s.contains("type")) {
    const json& t = s.at("type");
    bool ok = false;
    if (t.is_string()) ok = type_matches(t.get<std::string>(), v);
    else
      for (const auto& alt : t) ok = ok || type_matches(alt.get<std::string>(), v);
    if (!ok) return bad("expected type " + t.dump() + ", got " + std::string(v.type_name()));
  }
  if (s.contains("enum")) {
    bool found = false;
    for (const auto& e : s.at("enum")) found = found || e == v;
    if (!found) return bad("value " + v.dump() + " not in enum");
  }
  if (v.is_number()) {
    if (s.contains("minimum") && v.get<double>() < s.at("minimum").get<double>()) return bad("below minimum");
    if (s.contains("maximum") && v.get<double>() > s.at("maximum").get<double>()) return bad("above maximum");
  }
  if (v.is_object()) {
    if (s.contains("required"))
      for (const auto& r : s.at("required"))
        if (!v.contains(r.get<std::string>())) return bad("missing required '" + r.get<std::string>() + "'");
    const json empty = json::object();
    const json& props = s.contains("properties") ? s.at("properties") : empty;
    for (const auto& [k, child] : v.items()) {
      if (props.contains(k)) {
        if (!check(root, props.at(k), child, path + "." + k, err)) return false;
      } else if (s.contains("additionalProperties")) {
        const json& ap = s.at("additionalProperties");
        if (ap.is_boolean() && !ap.get<bool>()) return bad("unexpected property '" + k + "'");
        if (ap.is_object() && !check(root, ap, child, path + "." + k, err)) return false;
      }
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s.at("minItems").get<std::size_t>()) return bad("too few items");
    if (s.contains("items"))
      for (std::size_t i = 0; i < v.size(); ++i)
        if (!check(root, s.at("items"), v[i], path + "[" + std::to_string(i) + "]", err)) return false;
  }
  return true;
}

// Shared definitions, spliced into every schema.
constexpr const char* kDefinitions = R"({
  "count": {"type": "integer", "minimum": 0},
  "stage_id": {"type": "integer", "minimum": 1},
  "unit": {"type": "number", "minimum": 0, "maximum": 1},
  "matrix": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
  "status": {"type": "string", "enum": ["Ingested", "Queued", "Running", "Ready", "Failed"]},
  "group": {"type": "string", "enum": ["recovery", "middle", "deterioration", "all"]},
  "params": {
    "type": "object",
    "required": ["window_days", "k_proactive", "k_reactive", "n_stages", "lambda", "lambda_reg", "align_len",
                 "min_support", "max_pattern_len", "cooccurrence_min_freq", "min_gain", "max_segments", "seed"],
    "additionalProperties": false,
    "properties": {
      "window_days": {"type": "integer", "minimum": 1},
      "k_proactive": {"type": "integer", "minimum": 2, "maximum": 10},
      "k_reactive": {"type": "integer", "minimum": 2, "maximum": 10},
      "n_stages": {"type": "integer", "minimum": 2, "maximum": 10},
      "lambda": {"$ref": "#/definitions/unit"},
      "lambda_reg": {"type": "number", "minimum": 0},
      "align_len": {"type": "integer", "minimum": 1},
      "min_support": {"$ref": "#/definitions/unit"},
      "max_pattern_len": {"type": "integer", "minimum": 1},
      "cooccurrence_min_freq": {"$ref": "#/definitions/unit"},
      "min_gain": {"type": "number", "minimum": 0},
      "max_segments": {"type": "integer", "minimum": 1},
      "seed": {"type": "integer", "minimum": 0}
    }
  },
  "run": {
    "type": "object",
    "required": ["run_id", "session_id", "status", "params"],
    "properties": {
      "run_id": {"type": "string"},
      "session_id": {"type": "string"},
      "status": {"$ref": "#/definitions/status"},
      "reason": {"type": "string"},
      "params": {"$ref": "#/definitions/params"}
    }
  },
  "session": {
    "type": "object",
    "required": ["session_id", "status", "split_time", "posts_digest", "responses_digest", "users", "dropped", "runs"],
    "properties": {
      "session_id": {"type": "string"},
      "status": {"$ref": "#/definitions/status"},
      "split_time": {"type": "integer"},
      "posts_digest": {"type": "string"},
      "responses_digest": {"type": "string"},
      "users": {"type": "object", "additionalProperties": {"$ref": "#/definitions/count"}},
      "dropped": {"type": "array", "items": {"type": "string"}},
      "malformed": {"type": "object", "additionalProperties": {"$ref": "#/definitions/count"}},
      "latest_ready": {"type": ["string", "null"]},
      "runs": {"type": "array", "items": {"$ref": "#/definitions/run"}}
    }
  },
  "frequencies": {
    "type": "object",
    "required": ["windows", "level", "proactive", "reactive"],
    "properties": {
      "windows": {"$ref": "#/definitions/count"},
      "level": {"type": "object", "required": ["low", "mid", "high"],
                "additionalProperties": {"$ref": "#/definitions/unit"}},
      "proactive": {"type": "array", "items": {"$ref": "#/definitions/type_frequency"}},
      "reactive": {"type": "array", "items": {"$ref": "#/definitions/type_frequency"}}
    }
  },
  "type_frequency": {
    "type": "object", "required": ["type", "frequency"],
    "properties": {"type": {"type": "string"}, "frequency": {"$ref": "#/definitions/unit"}}
  },
  "impact": {
    "type": ["object", "null"],
    "required": ["s_r_former", "s_d_former", "s_r_latter", "s_d_latter", "r_f", "r_l", "d_i", "n_containing",
                 "n_former", "n_latter", "degenerate"],
    "properties": {
      "s_r_former": {"type": "number", "minimum": 0}, "s_d_former": {"type": "number", "minimum": 0},
      "s_r_latter": {"type": "number", "minimum": 0}, "s_d_latter": {"type": "number", "minimum": 0},
      "r_f": {"type": "number"}, "r_l": {"type": "number"}, "d_i": {"type": "number"},
      "n_containing": {"$ref": "#/definitions/count"}, "n_former": {"$ref": "#/definitions/count"},
      "n_latter": {"$ref": "#/definitions/count"}, "degenerate": {"type": "boolean"}
    }
  },
  "pattern": {
    "type": "object",
    "required": ["key", "symbols", "f_r", "f_d", "f_m", "w", "support", "containing", "impact"],
    "properties": {
      "key": {"type": "string"},
      "symbols": {"type": "array", "minItems": 1, "items": {"$ref": "#/definitions/stage_id"}},
      "f_r": {"$ref": "#/definitions/unit"}, "f_d": {"$ref": "#/definitions/unit"}, "f_m": {"$ref": "#/definitions/unit"},
      "w": {"type": "number", "minimum": -1, "maximum": 1},
      "support": {"$ref": "#/definitions/unit"},
      "containing": {"$ref": "#/definitions/count"},
      "impact": {"$ref": "#/definitions/impact"}
    }
  },
  "terminal_t": {
    "type": "object", "required": ["time", "stage_id", "count"],
    "properties": {"time": {"type": "integer", "minimum": 0}, "stage_id": {"$ref": "#/definitions/stage_id"},
                   "count": {"$ref": "#/definitions/count"}}
  },
  "terminal_p": {
    "type": "object", "required": ["position", "stage_id", "count"],
    "properties": {"position": {"type": "integer"}, "stage_id": {"$ref": "#/definitions/stage_id"},
                   "count": {"$ref": "#/definitions/count"}}
  },
  "stage_w": {
    "type": "array",
    "items": {"type": "object", "required": ["stage_id", "w"],
              "properties": {"stage_id": {"$ref": "#/definitions/stage_id"}, "w": {"type": "number"}}}
  }
})";

const std::map<std::string, std::string, std::less<>>& raw_schemas() {
  static const std::map<std::string, std::string, std::less<>> schemas = {
      {"error", R"({"type": "object", "required": ["error"],
                   "properties": {"error": {"type": "string"}, "status": {"$ref": "#/definitions/status"}}})"},
      {"session", R"({"$ref": "#/definitions/session"})"},
      {"session_list", R"({"type": "array", "items": {"$ref": "#/definitions/session"}})"},
      {"run", R"({"$ref": "#/definitions/run"})"},
      {"run_list", R"({"type": "array", "items": {"$ref": "#/definitions/run"}})"},
      {"clusters", R"({
        "type": "object",
        "required": ["kind", "k", "dims", "centroids", "inertia", "types", "diagnostics"],
        "properties": {
          "kind": {"type": "string", "enum": ["proactive", "reactive"]},
          "k": {"type": "integer", "minimum": 2, "maximum": 10},
          "dims": {"type": "array", "items": {"type": "string"}},
          "centroids": {"$ref": "#/definitions/matrix"},
          "inertia": {"type": "number", "minimum": 0},
          "types": {"type": "array", "items": {
            "type": "object", "required": ["type", "boxes"],
            "properties": {"type": {"type": "string"}, "boxes": {"type": "array", "items": {
              "type": "object", "required": ["dim", "min", "q1", "median", "q3", "max"],
              "properties": {"dim": {"type": "string"}, "min": {"type": "number"}, "q1": {"type": "number"},
                             "median": {"type": "number"}, "q3": {"type": "number"}, "max": {"type": "number"}}}}}}},
          "diagnostics": {
            "type": "object",
            "required": ["silhouette_by_k", "selected_k", "centroid_cosine_similarity", "size_proportions"],
            "properties": {
              "silhouette_by_k": {"type": "array", "items": {
                "type": "object", "required": ["k", "silhouette", "degenerate"],
                "properties": {"k": {"type": "integer"}, "silhouette": {"type": "number", "minimum": -1, "maximum": 1},
                               "degenerate": {"type": "boolean"}}}},
              "selected_k": {"type": "integer"},
              "centroid_cosine_similarity": {"$ref": "#/definitions/matrix"},
              "size_proportions": {"type": "array", "items": {"$ref": "#/definitions/unit"}}
            }
          }
        }
      })"},
      {"stages", R"({
        "type": "object",
        "required": ["stages", "stage_clustering"],
        "properties": {
          "stage_clustering": {"type": "object", "required": ["silhouette", "degenerate", "silhouette_by_n_stages"]},
          "stages": {"type": "array", "items": {
            "type": "object",
            "required": ["stage_id", "positivity", "members", "centroid", "stat", "temporal", "representatives"],
            "properties": {
              "stage_id": {"$ref": "#/definitions/stage_id"},
              "positivity": {"type": "number", "minimum": -1, "maximum": 1},
              "members": {"$ref": "#/definitions/count"},
              "centroid": {"type": "array", "items": {"type": "number"}},
              "stat": {"type": "object", "required": ["frequencies", "cooccurrences"], "properties": {
                "frequencies": {"$ref": "#/definitions/frequencies"},
                "cooccurrences": {"type": "array", "items": {
                  "type": "object", "required": ["level", "proactive", "reactive", "frequency"],
                  "properties": {"level": {"type": "string"}, "proactive": {"type": "string"},
                                 "reactive": {"type": "string"}, "frequency": {"$ref": "#/definitions/unit"}}}}}},
              "temporal": {"type": "object", "required": ["length", "positions"], "properties": {
                "length": {"type": "integer", "minimum": 1},
                "positions": {"type": "array", "items": {
                  "type": "object", "required": ["position", "empty", "frequencies"],
                  "properties": {"position": {"type": "integer", "minimum": 1}, "empty": {"type": "boolean"},
                                 "frequencies": {"$ref": "#/definitions/frequencies"}}}}}},
              "representatives": {"type": "object", "required": ["chosen_cluster_count", "fallback", "segments"],
                "properties": {"segments": {"type": "array", "minItems": 1, "items": {
                  "type": "object", "required": ["user_id", "start", "end", "resampled"]}}}}
            }
          }}
        }
      })"},
      {"progression", R"({
        "type": "object",
        "required": ["group", "nodes", "flows", "sources", "sinks"],
        "properties": {
          "group": {"$ref": "#/definitions/group"},
          "nodes": {"type": "array", "items": {"$ref": "#/definitions/terminal_t"}},
          "flows": {"type": "array", "items": {
            "type": "object", "required": ["time", "from", "to", "count", "highlighted"],
            "properties": {"time": {"type": "integer", "minimum": 0}, "from": {"$ref": "#/definitions/stage_id"},
                           "to": {"$ref": "#/definitions/stage_id"}, "count": {"$ref": "#/definitions/count"},
                           "highlighted": {"type": "boolean"}}}},
          "sources": {"type": "array", "items": {"$ref": "#/definitions/terminal_t"}},
          "sinks": {"type": "array", "items": {"$ref": "#/definitions/terminal_t"}}
        }
      })"},
      {"patterns", R"({
        "type": "object", "required": ["patterns"],
        "properties": {"patterns": {"type": "array", "items": {"$ref": "#/definitions/pattern"}}}
      })"},
      {"context", R"({
        "type": "object",
        "required": ["pattern", "anchor", "anchor_w", "containing", "impact", "columns", "flows", "polarity_flows",
                     "sources", "sinks", "stage_w", "group", "frequent"],
        "properties": {
          "pattern": {"type": "string"},
          "anchor": {"type": "array", "minItems": 1, "items": {"$ref": "#/definitions/stage_id"}},
          "anchor_w": {"type": "number"},
          "containing": {"type": "integer", "minimum": 1},
          "impact": {"$ref": "#/definitions/impact"},
          "group": {"$ref": "#/definitions/group"},
          "frequent": {"type": "boolean"},
          "columns": {"type": "array", "minItems": 1, "items": {
            "type": "object", "required": ["position", "region", "offset", "total", "nodes"],
            "properties": {
              "position": {"type": "integer"},
              "region": {"type": "string", "enum": ["before", "pattern", "after"]},
              "offset": {"type": "integer"},
              "total": {"$ref": "#/definitions/count"},
              "nodes": {"type": "array", "items": {
                "type": "object", "required": ["stage_id", "count", "polarity", "w", "zero_w"],
                "properties": {"stage_id": {"$ref": "#/definitions/stage_id"}, "count": {"$ref": "#/definitions/count"},
                               "polarity": {"type": "string", "enum": ["positive", "negative"]},
                               "w": {"type": "number"}, "zero_w": {"type": "boolean"}}}}}}},
          "flows": {"type": "array", "items": {
            "type": "object", "required": ["position", "from", "to", "count"],
            "properties": {"position": {"type": "integer"}, "from": {"$ref": "#/definitions/stage_id"},
                           "to": {"$ref": "#/definitions/stage_id"}, "count": {"$ref": "#/definitions/count"}}}},
          "polarity_flows": {"type": "array", "items": {
            "type": "object", "required": ["position", "from", "to", "count"],
            "properties": {"from": {"type": "string", "enum": ["positive", "negative"]},
                           "to": {"type": "string", "enum": ["positive", "negative"]}}}},
          "sources": {"type": "array", "items": {"$ref": "#/definitions/terminal_p"}},
          "sinks": {"type": "array", "items": {"$ref": "#/definitions/terminal_p"}},
          "stage_w": {"$ref": "#/definitions/stage_w"}
        }
      })"},
      {"bundle", R"({
        "type": "object",
        "required": ["format", "params", "dataset", "clusters", "segments", "stages", "stage_clustering",
                     "stage_sequences", "stage_w", "patterns", "progression"],
        "properties": {
          "format": {"type": "string", "enum": ["stagelens-bundle/1"]},
          "params": {"$ref": "#/definitions/params"},
          "stage_w": {"$ref": "#/definitions/stage_w"},
          "patterns": {"type": "array", "items": {"$ref": "#/definitions/pattern"}},
          "stage_sequences": {"type": "array", "items": {
            "type": "object", "required": ["user_id", "group", "stages"],
            "properties": {"stages": {"type": "array", "minItems": 1, "items": {"$ref": "#/definitions/stage_id"}}}}},
          "progression": {"type": "object", "required": ["all", "recovery", "middle", "deterioration"]}
        }
      })"},
  };
  return schemas;
}

}  // namespace

bool validate_schema(const json& schema, const json& value, std::string* error) {
  return check(schema, schema, value, "", error);
}

const json& route_schema(std::string_view name) {
  static const std::map<std::string, json, std::less<>> parsed = [] {
    std::map<std::string, json, std::less<>> out;
    const json defs = json::parse(kDefinitions);
    for (const auto& [k, text] : raw_schemas()) {
      json s = json::parse(text);
      s["$schema"] = "http://json-schema.org/draft-07/schema#";
      s["title"] = k;
      s["definitions"] = defs;
      out.emplace(k, std::move(s));
    }
    return out;
  }();
  const auto it = parsed.find(name);
  if (it == parsed.end()) throw std::out_of_range("no schema named '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> schema_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : raw_schemas()) out.push_back(k);
  return out;
}

}  // namespace stagelens
