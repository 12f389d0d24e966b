#pragma once

// JSON forms of pipeline records and line-delimited evaluation corpora.

#include <array>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2a/eval.hpp"
#include "s2a/modes.hpp"

namespace s2a::json_io {

using nlohmann::json;

inline json to_json(const SonicObject& o) {
  return {{"phrase", o.phrase},
          {"event_type", to_string(o.event_type)},
          {"position_sentence", o.position_sentence ? json(*o.position_sentence) : json(nullptr)}};
}

inline json to_json(const SceneAnalysis& a) {
  json objects = json::array();
  for (const auto& o : a.objects) objects.push_back(to_json(o));
  json transcript = json::array();
  for (const auto& t : a.transcript)
    transcript.push_back({{"stage", t.stage}, {"prompt", t.prompt}, {"response", t.response}});
  return {{"brief_description", a.brief_description},
          {"objects", objects},
          {"raw_model_output", a.raw_model_output},
          {"transcript", transcript},
          {"warnings", a.warnings}};
}

inline EventType event_type_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) throw ParseError(std::string("missing string field '") + key + "'");
  auto t = parse_event_type(j[key].get<std::string>());
  if (!t) throw ParseError("'" + j[key].get<std::string>() + "' is not discrete/continuous");
  return *t;
}

inline std::string string_field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_string())
    throw ParseError(std::string("missing string field '") + key + "'");
  return j[key].get<std::string>();
}

inline SceneAnalysis analysis_from_json(const json& j) {
  SceneAnalysis a;
  a.brief_description = string_field(j, "brief_description");
  a.raw_model_output = j.value("raw_model_output", "");
  for (const auto& o : j.at("objects")) {
    SonicObject obj{string_field(o, "phrase"), event_type_field(o, "event_type"), std::nullopt};
    if (o.contains("position_sentence") && o["position_sentence"].is_string())
      obj.position_sentence = o["position_sentence"].get<std::string>();
    a.objects.push_back(std::move(obj));
  }
  for (const auto& t : j.value("transcript", json::array()))
    a.transcript.push_back({string_field(t, "stage"), string_field(t, "prompt"), string_field(t, "response")});
  a.warnings = j.value("warnings", std::vector<std::string>{});
  return a;
}

inline json to_json(const CompositionPlan& plan) {
  auto layer = [](const std::vector<PlannedStem>& stems) {
    json out = json::array();
    for (const auto& s : stems) out.push_back(s.object.phrase);
    return out;
  };
  json sets = json::array();
  for (const auto& s : plan.candidate_sets) {
    json counts = json::array();
    for (const auto& c : s.candidates) counts.push_back(c.event_count);
    sets.push_back({{"prompt", s.prompt},
                    {"counts", counts},
                    {"selected_index", s.selected_index},
                    {"zero_event_fallback", s.zero_event_fallback}});
  }
  return {{"foreground", layer(plan.foreground)},
          {"background", layer(plan.background)},
          {"target_len_samples", plan.target_len_samples},
          {"candidates", sets}};
}

/// Deterministic description of a bundle: analysis, plan and the mode files.
/// Wall-clock timings are kept out so equal inputs give equal bytes.
inline json bundle_summary(const ModeBundle& b) {
  json modes = json::object();
  for (Mode m : kAllModes)
    modes[std::string(to_string(m))] = {{"study_condition", study_condition(m)},
                                        {"present", b[m].has_value()},
                                        {"samples", b[m] ? json(b[m]->size()) : json(nullptr)}};
  return {{"analysis", to_json(b.analysis)},
          {"plan", b.plan ? to_json(*b.plan) : json(nullptr)},
          {"modes", modes},
          {"warnings", b.warnings}};
}

inline json timings_json(const std::map<std::string, double>& timings_ms) { return json(timings_ms); }

inline json to_json(const eval::LatencyStats& s) {
  return {{"n", s.n}, {"mean_ms", s.mean_ms}, {"sd_ms", s.sd_ms}, {"min_ms", s.min_ms}, {"max_ms", s.max_ms}};
}

inline json to_json(const eval::Summary& s) {
  return {{"mean", s.mean}, {"sd", s.sd}, {"per_image", s.per_image}};
}

// ---------------------------------------------------------------------------
// Line-delimited corpora. Blank lines are ignored; any other line that fails
// to parse raises ParseError naming its 1-based line number.

template <class F>
void for_each_line(std::istream& in, F&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (kv::trim(line).empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

/// {"predicted": "discrete", "truth": "continuous"}
inline std::vector<eval::LabelPair> read_label_pairs(std::istream& in) {
  std::vector<eval::LabelPair> out;
  for_each_line(in, [&](const json& j) {
    if (!j.is_object()) throw ParseError("expected an object");
    out.push_back({event_type_field(j, "predicted"), event_type_field(j, "truth")});
  });
  return out;
}

/// {"image": "...", "runs": [[{"phrase": "...", "event_type": "..."}, ...], ...]}
inline eval::RunSet read_run_set(std::istream& in) {
  eval::RunSet out;
  for_each_line(in, [&](const json& j) {
    eval::ImageRuns img;
    img.image = string_field(j, "image");
    if (!j.contains("runs") || !j["runs"].is_array()) throw ParseError("missing array field 'runs'");
    for (const auto& run : j["runs"]) {
      if (!run.is_array()) throw ParseError("each run must be an array");
      eval::Run r;
      for (const auto& o : run) r.push_back({string_field(o, "phrase"), event_type_field(o, "event_type")});
      img.runs.push_back(std::move(r));
    }
    out.push_back(std::move(img));
  });
  return out;
}

struct IntentPair {
  std::string user;
  std::string reference;
};

/// {"user": "...", "reference": "..."}
inline std::vector<IntentPair> read_intent_pairs(std::istream& in) {
  std::vector<IntentPair> out;
  for_each_line(in, [&](const json& j) { out.push_back({string_field(j, "user"), string_field(j, "reference")}); });
  return out;
}

inline constexpr std::array<std::string_view, 5> kMetrics = {"accuracy", "kappa", "agreement",
                                                             "phrase-consistency", "intent"};

/// Computes `metric` over a line-delimited corpus and returns the JSON report.
inline json evaluate_corpus(std::string_view metric, std::istream& in, EmbeddingBackend& embedder) {
  if (metric == "accuracy" || metric == "kappa") {
    const auto pairs = read_label_pairs(in);
    const double v = metric == "accuracy" ? eval::accuracy(pairs) : eval::cohen_kappa(pairs);
    return {{"metric", metric}, {"n", pairs.size()}, {"value", v}};
  }
  if (metric == "agreement" || metric == "phrase-consistency") {
    const auto runs = read_run_set(in);
    const auto s = metric == "agreement" ? eval::event_type_agreement(runs, embedder)
                                         : eval::phrase_consistency(runs, embedder);
    json report = to_json(s);
    report["metric"] = metric;
    report["images"] = runs.size();
    report["value"] = s.mean;
    return report;
  }
  if (metric == "intent") {
    const auto pairs = read_intent_pairs(in);
    if (pairs.empty()) throw EmptyInput("intent corpus is empty");
    std::vector<double> scores;
    for (const auto& p : pairs) scores.push_back(eval::intent_similarity(p.user, p.reference, embedder));
    const auto s = eval::summarize(scores);
    return {{"metric", metric}, {"n", scores.size()}, {"value", s.mean}, {"sd", s.sd}, {"scores", scores}};
  }
  throw PreconditionError("unknown metric '" + std::string(metric) +
                          "' (accuracy, kappa, agreement, phrase-consistency, intent)");
}

inline json evaluate_corpus(std::string_view metric, std::string_view text, EmbeddingBackend& embedder) {
  std::istringstream in{std::string(text)};
  return evaluate_corpus(metric, in, embedder);
}

/// Two-column plain-text rendering of a flat report.
inline std::string text_table(const json& report) {
  std::ostringstream out;
  for (const auto& [k, v] : report.items()) {
    if (v.is_array() || v.is_object()) continue;
    out << k;
    for (std::size_t i = k.size(); i < 12; ++i) out << ' ';
    out << ' ' << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
  }
  return out.str();
}

}  // namespace s2a::json_io
