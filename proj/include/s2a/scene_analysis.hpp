#pragma once

// Salient-object identification: a chain of vision-backend prompts whose
// answers feed forward, parsed into a SceneAnalysis.

#include <algorithm>
#include <cctype>
#include <regex>
#include <string>
#include <vector>

#include "s2a/backends.hpp"
#include "s2a/prompts.hpp"

namespace s2a {

struct ObjectListParse {
  std::vector<SonicObject> objects;
  std::vector<std::string> warnings;
};

namespace parse_detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::vector<std::string> split_items(std::string_view raw) {
  std::vector<std::string> items;
  std::string line;
  auto flush_line = [&items](const std::string& l) {
    // Items may share a line when separated by ';' or as adjacent
    // bracketed pairs: ["a b", discrete], ["c d", continuous]
    static const std::regex sep(R"(;|\]\s*,\s*(?=\[))");
    std::sregex_token_iterator it(l.begin(), l.end(), sep, -1), end;
    for (; it != end; ++it) {
      std::string piece = kv::trim(it->str());
      if (!piece.empty()) items.push_back(std::move(piece));
    }
  };
  for (char c : raw) {
    if (c == '\n') flush_line(std::exchange(line, {}));
    else line += c;
  }
  flush_line(line);
  return items;
}

inline std::string strip_wrappers(std::string_view s) {
  static constexpr std::string_view junk = " \t\r[](){}\"'`,:;-*.";
  const auto b = s.find_first_not_of(junk);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(junk);
  return std::string(s.substr(b, e - b + 1));
}

inline std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
    } else {
      if (space) out += ' ';
      space = false;
      out += c;
    }
  }
  return out;
}

inline std::size_t word_count(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    const bool ws = std::isspace(static_cast<unsigned char>(c));
    if (!ws && !in_word) ++n;
    in_word = !ws;
  }
  return n;
}

}  // namespace parse_detail

/// Parses "<noun> <verb>, <label>" items. Tolerates bullets, numbering and
/// bracket or quote wrappers; the label must be the literal word "discrete"
/// or "continuous" (any case). Items without a label or with a one-word
/// phrase are skipped with a warning.
///
/// Throws ParseError when the response looks like a list yet no item parses.
inline ObjectListParse parse_object_list(std::string_view raw) {
  using namespace parse_detail;
  if (kv::trim(raw).empty()) throw PreconditionError("object list response is empty");

  static const std::regex bullet(R"(^\s*(?:[-*+]|•|\d+[.)]|\(\d+\))\s*)");
  static const std::regex label(R"(\b(discrete|continuous)\b)", std::regex::icase);
  static const std::regex nothing(R"(^(none|n/?a|nothing|no\b.*)\.?$)", std::regex::icase);

  ObjectListParse out;
  const auto items = split_items(raw);
  bool list_like = items.size() > 1;

  for (const auto& original : items) {
    std::string item = original;
    if (std::regex_search(item, bullet) || item.front() == '[' || item.front() == '"') list_like = true;
    item = std::regex_replace(item, bullet, "", std::regex_constants::format_first_only);

    auto begin = std::sregex_iterator(item.begin(), item.end(), label);
    std::smatch last;
    for (auto it = begin; it != std::sregex_iterator(); ++it) last = *it;
    if (last.empty()) {
      if (!std::regex_match(kv::trim(item), nothing))
        out.warnings.push_back("skipped item without discrete/continuous label: '" + original + "'");
      else if (items.size() == 1)
        list_like = false;
      continue;
    }
    list_like = true;

    const auto type = parse_event_type(last.str(1));
    const std::string phrase = lower(collapse_spaces(strip_wrappers(item.substr(0, last.position(0)))));
    if (word_count(phrase) < 2) {
      out.warnings.push_back("skipped item without a noun+verb phrase: '" + original + "'");
      continue;
    }
    const bool duplicate = std::any_of(out.objects.begin(), out.objects.end(),
                                       [&](const SonicObject& o) { return o.phrase == phrase; });
    if (duplicate) {
      out.warnings.push_back("skipped duplicate object: '" + phrase + "'");
      continue;
    }
    out.objects.push_back({phrase, *type, std::nullopt});
  }

  if (out.objects.empty() && list_like)
    throw ParseError("no sonic object could be parsed from: " + std::string(raw.substr(0, 200)));
  return out;
}

/// Reads "<phrase>: <sentence>" lines and attaches each sentence to the
/// object with the matching phrase. Returns warnings for objects left
/// without one.
inline std::vector<std::string> attach_position_sentences(std::vector<SonicObject>& objects,
                                                          std::string_view raw) {
  using namespace parse_detail;
  for (const auto& item : split_items(raw)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) continue;
    const std::string phrase = lower(collapse_spaces(strip_wrappers(std::string_view(item).substr(0, colon))));
    std::string sentence = kv::trim(std::string_view(item).substr(colon + 1));
    // Keep only the first sentence.
    for (std::size_t i = 0; i + 1 < sentence.size(); ++i) {
      if ((sentence[i] == '.' || sentence[i] == '!' || sentence[i] == '?') && sentence[i + 1] == ' ') {
        sentence.resize(i + 1);
        break;
      }
    }
    if (sentence.empty()) continue;
    for (auto& o : objects)
      if (o.phrase == phrase && !o.position_sentence) o.position_sentence = sentence;
  }
  std::vector<std::string> warnings;
  for (const auto& o : objects)
    if (!o.position_sentence) warnings.push_back("no positional sentence for '" + o.phrase + "'");
  return warnings;
}

/// Runs the prompt chain: sonic objects, then action phrases fed the first
/// answer, then event labels fed the phrases; then the brief description and,
/// when objects exist, one positional sentence per object.
inline SceneAnalysis analyze_scene(const ImageRef& image, const PromptSet& prompts,
                                   VisionBackend& vision) {
  validate_prompts(prompts);
  SceneAnalysis out;
  auto ask = [&](std::string stage, const std::string& prompt) {
    std::string response = vision.query(image, prompt);
    out.transcript.push_back({std::move(stage), prompt, response});
    return response;
  };

  const std::string described = ask("sonic_objects", prompts.sonic_objects);
  const std::string phrases =
      ask("action_phrase", prompts.action_phrase + "\n\nScene description:\n" + described);
  const std::string labelled =
      ask("event_label", prompts.event_label + "\n\nPhrases:\n" + phrases);
  out.raw_model_output = labelled;

  ObjectListParse parsed = kv::trim(labelled).empty() ? ObjectListParse{}
                                                      : parse_object_list(labelled);
  out.objects = std::move(parsed.objects);
  out.warnings = std::move(parsed.warnings);

  out.brief_description = kv::trim(ask("brief_description", prompts.brief_description));
  if (out.brief_description.empty())
    throw BackendError(BackendError::Kind::MalformedResponse, "empty brief description");
  if (parse_detail::word_count(out.brief_description) >= 10)
    out.warnings.push_back("brief description has 10 or more words");

  if (out.objects.empty()) {
    out.warnings.push_back("no sonic objects identified; scene falls back to speech only");
    return out;
  }
  std::string listing;
  for (const auto& o : out.objects) listing += o.phrase + "\n";
  const std::string positions =
      ask("positional_description", prompts.positional_description + "\n\nObjects:\n" + listing);
  auto missing = attach_position_sentences(out.objects, positions);
  out.warnings.insert(out.warnings.end(), missing.begin(), missing.end());
  return out;
}

}  // namespace s2a
