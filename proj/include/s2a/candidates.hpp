#pragma once

// Discrete-sound candidate generation and minimum-event selection.

#include <filesystem>
#include <future>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2a/backends.hpp"
#include "s2a/dsp.hpp"
#include "s2a/wav.hpp"

namespace s2a {

struct Candidate {
  AudioBuffer audio;
  std::size_t event_count = 0;
  double envelope_peak = 0.0;  // raw onset-envelope maximum
};

struct CandidateSet {
  std::string prompt;
  std::vector<Candidate> candidates;
  std::size_t selected_index = 0;
  bool zero_event_fallback = false;
  std::vector<std::string> warnings;

  const AudioBuffer& selected() const { return candidates.at(selected_index).audio; }
};

/// Index of the candidate with the fewest events among those with at least
/// one; lowest index wins ties. When no candidate has an event, the one with
/// the largest onset-envelope peak is chosen and `fallback` is set.
inline std::size_t select_min_events(std::span<const Candidate> candidates, bool& fallback) {
  if (candidates.empty()) throw PreconditionError("no candidates to select from");
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto n = candidates[i].event_count;
    if (n >= 1 && (!best || n < candidates[*best].event_count)) best = i;
  }
  fallback = !best.has_value();
  if (best) return *best;
  std::size_t loudest = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i)
    if (candidates[i].envelope_peak > candidates[loudest].envelope_peak) loudest = i;
  return loudest;
}

inline Candidate measure_candidate(AudioBuffer audio, const PipelineConfig& cfg) {
  const auto env = dsp::onset_strength(audio, cfg.hop_length_samples);
  Candidate c;
  c.event_count = dsp::detect_events(env).size();
  c.envelope_peak = env.values.empty() ? 0.0 : *std::max_element(env.values.begin(), env.values.end());
  c.audio = std::move(audio);
  return c;
}

/// Generates cfg.candidate_count clips for `prompt` (seed = rng_seed + index),
/// counts events in each and selects one with select_min_events. With
/// `parallel`, generation and counting run concurrently; the result does not
/// depend on completion order.
inline CandidateSet select_discrete(std::string_view prompt, const PipelineConfig& cfg,
                                    AudioGenBackend& gen, bool parallel = false) {
  if (prompt.empty()) throw PreconditionError("prompt is empty");
  validate_config(cfg);
  CandidateSet set;
  set.prompt = std::string(prompt);
  const auto count = static_cast<std::size_t>(cfg.candidate_count);
  auto make = [&](std::size_t index) {
    return measure_candidate(gen.generate(prompt, cfg.clip_seconds, cfg.rng_seed + index), cfg);
  };

  if (parallel) {
    std::vector<std::future<Candidate>> jobs;
    for (std::size_t i = 0; i < count; ++i) jobs.push_back(std::async(std::launch::async, make, i));
    for (auto& j : jobs) set.candidates.push_back(j.get());
  } else {
    for (std::size_t i = 0; i < count; ++i) set.candidates.push_back(make(i));
  }

  set.selected_index = select_min_events(set.candidates, set.zero_event_fallback);
  if (set.zero_event_fallback)
    set.warnings.push_back("ZeroEventFallback: no candidate for '" + set.prompt +
                           "' had a detectable event; chose the loudest onset");
  return set;
}

/// Writes candidate_<i>.wav files plus candidates.json
/// {prompt, counts, selected_index} into `dir`.
inline void dump_candidates(const CandidateSet& set, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json counts = nlohmann::json::array();
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    wav::write_file((dir / ("candidate_" + std::to_string(i) + ".wav")).string(),
                    set.candidates[i].audio);
    counts.push_back(set.candidates[i].event_count);
  }
  nlohmann::json sidecar = {{"prompt", set.prompt},
                            {"counts", counts},
                            {"selected_index", set.selected_index},
                            {"zero_event_fallback", set.zero_event_fallback}};
  std::ofstream(dir / "candidates.json") << sidecar.dump(2) << "\n";
}

}  // namespace s2a
