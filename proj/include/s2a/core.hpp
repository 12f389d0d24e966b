#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "s2a/errors.hpp"

namespace s2a {

inline constexpr int kSampleRate = 16000;

/// Number of samples covering `seconds` at the pipeline rate.
inline std::size_t samples_for(double seconds) {
  return static_cast<std::size_t>(std::llround(seconds * kSampleRate));
}

/// Mono PCM at 16 kHz. Every sample is finite; contents never change after
/// construction.
class AudioBuffer {
 public:
  AudioBuffer() = default;

  explicit AudioBuffer(std::vector<double> samples) : samples_(std::move(samples)) {
    for (double s : samples_) {
      if (!std::isfinite(s)) throw PreconditionError("audio sample is not finite");
    }
  }

  static AudioBuffer silence(std::size_t n) { return AudioBuffer(std::vector<double>(n, 0.0)); }

  std::span<const double> samples() const noexcept { return samples_; }
  double operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }

  int sample_rate_hz() const noexcept { return kSampleRate; }
  int channel_count() const noexcept { return 1; }
  double duration_seconds() const noexcept {
    return static_cast<double>(samples_.size()) / kSampleRate;
  }

  double peak() const noexcept {
    double p = 0.0;
    for (double s : samples_) p = std::max(p, std::abs(s));
    return p;
  }

  bool operator==(const AudioBuffer&) const = default;

 private:
  std::vector<double> samples_;
};

/// Shared invariant checker used by tests on every produced buffer.
inline bool satisfies_invariants(const AudioBuffer& audio) {
  return std::all_of(audio.samples().begin(), audio.samples().end(),
                     [](double s) { return std::isfinite(s); }) &&
         audio.sample_rate_hz() == kSampleRate && audio.channel_count() == 1;
}

enum class EventType { Discrete, Continuous };

inline std::string_view to_string(EventType t) {
  return t == EventType::Discrete ? "discrete" : "continuous";
}

inline std::optional<EventType> parse_event_type(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "discrete") return EventType::Discrete;
  if (lower == "continuous") return EventType::Continuous;
  return std::nullopt;
}

struct SonicObject {
  std::string phrase;  // noun + verb, e.g. "cows mooing"
  EventType event_type = EventType::Discrete;
  std::optional<std::string> position_sentence;

  bool operator==(const SonicObject&) const = default;
};

/// One prompt/response exchange with the vision backend.
struct TranscriptEntry {
  std::string stage;
  std::string prompt;
  std::string response;

  bool operator==(const TranscriptEntry&) const = default;
};

struct SceneAnalysis {
  std::string brief_description;
  std::vector<SonicObject> objects;
  std::string raw_model_output;
  std::vector<TranscriptEntry> transcript;
  std::vector<std::string> warnings;

  bool operator==(const SceneAnalysis&) const = default;
};

struct PipelineConfig {
  int candidate_count = 10;
  double clip_seconds = 5.0;
  double foreground_weight = 0.8;
  double background_weight = 0.2;
  int sample_rate_hz = kSampleRate;
  int hop_length_samples = 512;
  std::uint64_t rng_seed = 42;
  double output_headroom_peak = 0.95;
  double concat_gap_seconds = 0.3;
  double overlay_background_duck = 0.5;

  bool operator==(const PipelineConfig&) const = default;
};

/// Returns `cfg` unchanged when every invariant holds, otherwise throws a
/// ConfigError naming the first violation.
inline const PipelineConfig& validate_config(const PipelineConfig& cfg) {
  auto in_unit = [](double v) { return std::isfinite(v) && v > 0.0 && v <= 1.0; };
  if (cfg.candidate_count < 1) throw ConfigError("candidate_count must be >= 1");
  if (!std::isfinite(cfg.clip_seconds) || cfg.clip_seconds <= 0.0)
    throw ConfigError("clip_seconds must be > 0");
  if (!in_unit(cfg.foreground_weight)) throw ConfigError("foreground_weight must be in (0, 1]");
  if (!in_unit(cfg.background_weight)) throw ConfigError("background_weight must be in (0, 1]");
  if (cfg.sample_rate_hz != kSampleRate) throw ConfigError("sample_rate_hz must be 16000");
  if (cfg.hop_length_samples <= 0) throw ConfigError("hop_length_samples must be > 0");
  if (!in_unit(cfg.output_headroom_peak))
    throw ConfigError("output_headroom_peak must be in (0, 1]");
  if (!std::isfinite(cfg.concat_gap_seconds) || cfg.concat_gap_seconds < 0.0)
    throw ConfigError("concat_gap_seconds must be >= 0");
  if (!std::isfinite(cfg.overlay_background_duck) || cfg.overlay_background_duck < 0.0 ||
      cfg.overlay_background_duck > 1.0)
    throw ConfigError("overlay_background_duck must be in [0, 1]");
  return cfg;
}

// ---------------------------------------------------------------------------
// Flat key-value text documents ("key = value", '#' comments). Used for the
// pipeline config and the prompt file.

namespace kv {

inline std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

using Entries = std::vector<std::pair<std::string, std::string>>;

inline Entries parse(std::string_view text) {
  Entries out;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    auto key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(key, trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("invalid value for " + key + ": '" + value + "'");
  return out;
}

template <class T>
std::string format_number(T v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace kv

/// Applies one `key = value` setting to `cfg`. Unknown keys are an error.
inline void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                               const std::string& value) {
  using kv::parse_number;
  if (key == "candidate_count") cfg.candidate_count = parse_number<int>(key, value);
  else if (key == "clip_seconds") cfg.clip_seconds = parse_number<double>(key, value);
  else if (key == "foreground_weight") cfg.foreground_weight = parse_number<double>(key, value);
  else if (key == "background_weight") cfg.background_weight = parse_number<double>(key, value);
  else if (key == "sample_rate_hz") cfg.sample_rate_hz = parse_number<int>(key, value);
  else if (key == "hop_length_samples") cfg.hop_length_samples = parse_number<int>(key, value);
  else if (key == "rng_seed") cfg.rng_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "output_headroom_peak") cfg.output_headroom_peak = parse_number<double>(key, value);
  else if (key == "concat_gap_seconds") cfg.concat_gap_seconds = parse_number<double>(key, value);
  else if (key == "overlay_background_duck")
    cfg.overlay_background_duck = parse_number<double>(key, value);
  else throw ConfigError("unknown config key: " + key);
}

inline PipelineConfig parse_config(std::string_view text, PipelineConfig base = {}) {
  for (const auto& [k, v] : kv::parse(text)) apply_config_entry(base, k, v);
  return base;
}

inline PipelineConfig load_config(const std::string& path, PipelineConfig base = {}) {
  return parse_config(kv::read_file(path), std::move(base));
}

/// Shortest round-trip representation; parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const PipelineConfig& cfg) {
  using kv::format_number;
  std::string out;
  auto line = [&out](std::string_view k, const std::string& v) {
    out.append(k).append(" = ").append(v).append("\n");
  };
  line("candidate_count", format_number(cfg.candidate_count));
  line("clip_seconds", format_number(cfg.clip_seconds));
  line("foreground_weight", format_number(cfg.foreground_weight));
  line("background_weight", format_number(cfg.background_weight));
  line("sample_rate_hz", format_number(cfg.sample_rate_hz));
  line("hop_length_samples", format_number(cfg.hop_length_samples));
  line("rng_seed", format_number(cfg.rng_seed));
  line("output_headroom_peak", format_number(cfg.output_headroom_peak));
  line("concat_gap_seconds", format_number(cfg.concat_gap_seconds));
  line("overlay_background_duck", format_number(cfg.overlay_background_duck));
  return out;
}

// ---------------------------------------------------------------------------
// Stable hashing for deterministic fixtures.

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Small deterministic generator; identical sequences on every platform.
class SplitMix {
 public:
  explicit SplitMix(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

}  // namespace s2a
