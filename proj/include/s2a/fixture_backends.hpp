#pragma once

// Deterministic offline stand-ins for the four model adapters. Every fixture
// is a pure function of its inputs and the configured seed.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "s2a/backends.hpp"
#include "s2a/prompts.hpp"

namespace s2a::fixture {

struct SceneObject {
  std::string phrase;
  EventType type;
  std::string position_sentence;
};

/// Canned scene description served by the fixture vision backend.
struct Scene {
  std::string name;
  std::string description;  // answer to the sonic-objects prompt
  std::string brief;
  std::vector<SceneObject> objects;
};

inline std::string display_case(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

inline const std::vector<Scene>& scenes() {
  using enum EventType;
  static const std::vector<Scene> table = {
      {"countryside",
       "A grassy meadow with cows that may be mooing, autumn trees whose leaves rustle in the "
       "breeze, a small church whose bell could ring, and birds chirping in the trees.",
       "Cows graze near a church in autumn countryside.",
       {{"cows mooing", Discrete, "A group of cows is directly ahead in a lush, green meadow."},
        {"leaves rustling", Continuous,
         "To your right, trees with leaves in autumn hues are on a slope."},
        {"church bell ringing", Discrete,
         "A small white church with a steeple sits in the distance, slightly to the left."},
        {"birds chirping", Discrete, "Birds perch in the trees to your right."}}},
      {"seabeach",
       "Waves crash onto a sandy shore while wind blows across the open beach.",
       "Waves roll onto a sandy beach.",
       {{"waves crashing", Continuous, "Directly ahead, waves break onto the shore."},
        {"wind blowing", Continuous, "All around you, wind blows across the open sand."}}},
      {"mountains",
       "A river flows through a valley between mountains, with wind blowing over the slopes.",
       "A river winds between tall mountains.",
       {{"river flowing", Continuous, "Below you, a river flows through the valley."},
        {"wind blowing", Continuous, "Wind sweeps down the slopes on both sides."}}},
      {"reservoir",
       "Water flows over a dam into a reservoir surrounded by trees; wind moves the branches "
       "and birds chirp.",
       "A calm reservoir surrounded by green trees.",
       {{"water flowing", Continuous, "Directly ahead, water flows across the reservoir."},
        {"trees rustling", Continuous, "Trees line the shore to your left."},
        {"wind blowing", Continuous, "A breeze passes over the water in front of you."},
        {"birds chirping", Discrete, "Birds call from the trees to your right."}}},
      {"park",
       "A pond whose water ripples in a city park, with birds chirping nearby.",
       "A quiet city park with a pond.",
       {{"water rippling", Continuous, "Directly ahead, a small pond ripples."},
        {"birds chirping", Discrete, "Birds sit in a tree to your left."}}},
      {"train station",
       "The entrance of a train station where turnstiles beep and people walk through.",
       "People pass through a train station entrance.",
       {{"turnstile beeping", Discrete, "Turnstiles stand directly ahead at the entrance."},
        {"people walking", Discrete, "People walk past you on both sides."}}},
      {"foodcourt",
       "A busy food court where cutlery clinks on plates, people talk at tables and potted "
       "plants have leaves rustling under the air vents.",
       "A busy food court full of diners.",
       {{"cutlery clinking", Discrete, "Diners at the tables ahead clink their cutlery."},
        {"people talking", Continuous, "People talk at tables all around you."},
        {"leaves rustling", Continuous, "Potted plants stand to your left."}}},
      {"street",
       "A city street with people walking on the sidewalk, vehicles idling at a light and a "
       "traffic signal beeping for pedestrians.",
       "A busy street at a pedestrian crossing.",
       {{"people walking", Discrete, "People walk along the sidewalk to your right."},
        {"vehicle engines idling", Continuous, "Cars idle at the light directly ahead."},
        {"traffic signal beeping", Discrete, "A crossing signal beeps slightly to your left."}}},
      {"silent-night-sky",
       "A clear night sky full of stars above a dark horizon. There are no sound-making objects "
       "in this scene.",
       "A clear, star-filled night sky.",
       {}},
  };
  return table;
}

inline const Scene* find_scene(std::string_view name) {
  for (const auto& s : scenes())
    if (s.name == name) return &s;
  return nullptr;
}

/// Reads the `s2a-scene` tEXt chunk from a PNG, if present.
inline std::optional<std::string> png_scene_tag(std::span<const std::uint8_t> b) {
  if (ImageRef::sniff_media_type(b) != "image/png") return std::nullopt;
  std::size_t pos = 8;
  while (pos + 12 <= b.size()) {
    const std::size_t len = (std::size_t{b[pos]} << 24) | (std::size_t{b[pos + 1]} << 16) |
                            (std::size_t{b[pos + 2]} << 8) | std::size_t{b[pos + 3]};
    const std::string type(reinterpret_cast<const char*>(b.data() + pos + 4), 4);
    const std::size_t body = pos + 8;
    if (body + len + 4 > b.size()) break;
    if (type == "tEXt") {
      std::string text(reinterpret_cast<const char*>(b.data() + body), len);
      auto nul = text.find('\0');
      if (nul != std::string::npos && text.substr(0, nul) == "s2a-scene")
        return text.substr(nul + 1);
    }
    if (type == "IEND") break;
    pos = body + len + 4;
  }
  return std::nullopt;
}

/// Scene a fixture image depicts: its PNG tag when present, otherwise a
/// non-silent scene chosen by hash(image bytes) and the seed.
inline const Scene& scene_for(const ImageRef& image, std::uint64_t seed) {
  if (auto tag = png_scene_tag(image.bytes()))
    if (const Scene* s = find_scene(*tag)) return *s;
  const auto& all = scenes();
  const std::size_t audible = all.size() - 1;
  return all[mix64(image.hash() ^ mix64(seed)) % audible];
}

/// Thread-safe record of backend calls, in issue order.
class CallLog {
 public:
  void record(std::string entry) {
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(entry));
  }
  std::vector<std::string> entries() const {
    std::lock_guard lock(mu_);
    return entries_;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }
  void clear() {
    std::lock_guard lock(mu_);
    entries_.clear();
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::string> entries_;
};

// ---------------------------------------------------------------------------

class FixtureVision : public VisionBackend {
 public:
  explicit FixtureVision(std::uint64_t seed = 42, PromptSet prompts = {})
      : seed_(seed), prompts_(std::move(prompts)) {}

  std::string query(const ImageRef& image, std::string_view prompt) override {
    if (prompt.empty()) throw PreconditionError("prompt is empty");
    log_.record(std::string(prompt));
    const Scene& scene = scene_for(image, seed_);
    auto starts = [&](const std::string& t) { return prompt.substr(0, t.size()) == t; };

    if (starts(prompts_.sonic_objects)) return scene.description;
    if (starts(prompts_.action_phrase)) {
      if (scene.objects.empty()) return "None.";
      std::string out;
      for (const auto& o : scene.objects) out += display_case(o.phrase) + "\n";
      return out;
    }
    if (starts(prompts_.event_label)) {
      if (scene.objects.empty()) return "None.";
      std::string out;
      for (const auto& o : scene.objects)
        out += "[\"" + display_case(o.phrase) + "\", " + std::string(to_string(o.type)) + "]\n";
      return out;
    }
    if (starts(prompts_.brief_description)) return scene.brief;
    if (starts(prompts_.positional_description)) {
      std::string out;
      for (const auto& o : scene.objects) out += o.phrase + ": " + o.position_sentence + "\n";
      return out;
    }
    throw BackendError(BackendError::Kind::Rejected, "fixture vision does not recognise prompt");
  }

  const CallLog& log() const noexcept { return log_; }

 private:
  std::uint64_t seed_;
  PromptSet prompts_;
  CallLog log_;
};

// ---------------------------------------------------------------------------

/// Text-to-audio fixture. Prompts registered as Discrete render a train of
/// decaying tonal strikes whose count (1..8) is a function of prompt and seed;
/// Continuous prompts render a steady tone bed with a smooth fade-in; unknown
/// prompts render a pink-noise bed.
class FixtureAudio : public AudioGenBackend {
 public:
  struct Options {
    /// Render every prompt as a continuous bed (no discrete events).
    bool force_continuous = false;
  };

  FixtureAudio() : FixtureAudio(Options{}) {}
  explicit FixtureAudio(Options opts) : opts_(opts) {
    for (const auto& s : scenes())
      for (const auto& o : s.objects) labels_.emplace(o.phrase, o.type);
  }

  void register_prompt(std::string prompt, EventType type) {
    std::lock_guard lock(mu_);
    labels_[std::move(prompt)] = type;
  }

  std::optional<EventType> registered_type(std::string_view prompt) const {
    std::lock_guard lock(mu_);
    auto it = labels_.find(std::string(prompt));
    if (it == labels_.end()) return std::nullopt;
    return it->second;
  }

  /// Ground-truth number of discrete events in generate(prompt, *, seed).
  /// Zero for beds. Test-side channel; the pipeline never reads it.
  int truth_count(std::string_view prompt, std::uint64_t seed) const {
    if (opts_.force_continuous || registered_type(prompt) != EventType::Discrete) return 0;
    return 1 + static_cast<int>(mix64(fnv1a64(prompt) ^ mix64(seed)) % 8);
  }

  AudioBuffer generate(std::string_view prompt, double seconds, std::uint64_t seed) override {
    if (prompt.empty()) throw PreconditionError("prompt is empty");
    if (!(seconds > 0.0)) throw PreconditionError("seconds must be > 0");
    log_.record(std::string(prompt) + "#" + std::to_string(seed));
    const std::size_t n = samples_for(seconds);
    const auto type = opts_.force_continuous ? std::optional(EventType::Continuous)
                                             : registered_type(prompt);
    if (type == EventType::Discrete) return strikes(prompt, n, seed);
    if (type == EventType::Continuous) return tone_bed(prompt, n, seed);
    return pink_bed(prompt, n, seed);
  }

  const CallLog& log() const noexcept { return log_; }

 private:
  AudioBuffer strikes(std::string_view prompt, std::size_t n, std::uint64_t seed) const {
    const int count = truth_count(prompt, seed);
    SplitMix rng(fnv1a64(prompt) ^ mix64(seed + 1));
    const double f0 = 180.0 + static_cast<double>(fnv1a64(prompt) % 720);
    const double seconds = static_cast<double>(n) / kSampleRate;
    const double spacing = (seconds - 0.4) / count;
    std::vector<double> out(n, 0.0);
    for (int e = 0; e < count; ++e) {
      const double jitter = rng.uniform(-0.1, 0.1) * spacing;
      const double start_s = 0.2 + spacing * e + spacing * 0.1 + jitter;
      const double amp = rng.uniform(0.6, 1.0);
      const auto start = static_cast<std::size_t>(start_s * kSampleRate);
      const auto len = static_cast<std::size_t>(std::min(0.35, spacing * 0.7) * kSampleRate);
      for (std::size_t i = 0; i < len && start + i < n; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        const double env = std::exp(-t / 0.06) * (i + 64 > len ? static_cast<double>(len - i) / 64.0 : 1.0);
        double v = 0.0;
        for (int h = 1; h <= 3; ++h)
          v += std::sin(2.0 * std::numbers::pi * f0 * h * t) / h;
        out[start + i] += amp * env * v / 1.84;
      }
    }
    return AudioBuffer(std::move(out));
  }

  /// Smooth S-curve fades to and from -80 dB so a bed carries no sharp onset
  /// at either end (a hard cut at the clip end reads as a broadband onset).
  static double bed_gain(std::size_t i, std::size_t n) {
    auto curve = [](double t, double fade_s) {
      if (t >= fade_s) return 1.0;
      const double u = t / fade_s;
      const double s = u * u * (3.0 - 2.0 * u);
      return std::pow(10.0, (-80.0 + 80.0 * s) / 20.0);
    };
    const double head = static_cast<double>(i) / kSampleRate;
    const double tail = static_cast<double>(n - i) / kSampleRate;
    return curve(head, 1.5) * curve(tail, 0.5);
  }

  /// Shaped noise that repeats every 512 samples (one hop at 16 kHz): a
  /// broadband bed whose steady-state spectral flux is exactly zero.
  AudioBuffer tone_bed(std::string_view prompt, std::size_t n, std::uint64_t seed) const {
    constexpr std::size_t kCycle = 512;
    SplitMix rng(fnv1a64(prompt) ^ mix64(seed + 2));
    const double tilt = 0.15 * rng.uniform();
    std::vector<double> cycle(kCycle, 0.0);
    for (std::size_t k = 1; k < kCycle / 2; ++k) {
      const double amp = rng.uniform(0.5, 1.0) / std::pow(static_cast<double>(k), tilt);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (std::size_t i = 0; i < kCycle; ++i)
        cycle[i] += amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(k * i) / kCycle + phase);
    }
    double peak = 0.0;
    for (double v : cycle) peak = std::max(peak, std::abs(v));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = 0.5 * bed_gain(i, n) * cycle[i % kCycle] / peak;
    return AudioBuffer(std::move(out));
  }

  AudioBuffer pink_bed(std::string_view prompt, std::size_t n, std::uint64_t seed) const {
    SplitMix rng(fnv1a64(prompt) ^ mix64(seed + 3));
    // Paul Kellet's economy pink filter.
    double b0 = 0, b1 = 0, b2 = 0;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double white = rng.uniform(-1.0, 1.0);
      b0 = 0.99765 * b0 + white * 0.0990460;
      b1 = 0.96300 * b1 + white * 0.2965164;
      b2 = 0.57000 * b2 + white * 1.0526913;
      const double pink = b0 + b1 + b2 + white * 0.1848;
      out[i] = 0.08 * pink * bed_gain(i, n);
    }
    return AudioBuffer(std::move(out));
  }

  Options opts_;
  mutable std::mutex mu_;
  std::map<std::string, EventType, std::less<>> labels_;
  CallLog log_;
};

// ---------------------------------------------------------------------------

/// Tone-coded speech: one 80 ms tone per word, 20 ms gaps, pitch from a word
/// hash.
class FixtureSpeech : public SpeechBackend {
 public:
  static constexpr double kWordSeconds = 0.080;
  static constexpr double kGapSeconds = 0.020;

  static std::vector<std::string> words(std::string_view sentence) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : sentence) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!cur.empty()) out.push_back(std::exchange(cur, {}));
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  }

  AudioBuffer synthesize(std::string_view sentence) override {
    const auto ws = words(sentence);
    if (ws.empty()) throw PreconditionError("sentence is empty");
    log_.record(std::string(sentence));
    const std::size_t word_len = samples_for(kWordSeconds);
    const std::size_t gap_len = samples_for(kGapSeconds);
    const std::size_t ramp = samples_for(0.005);
    std::vector<double> out;
    out.reserve(ws.size() * (word_len + gap_len));
    for (std::size_t w = 0; w < ws.size(); ++w) {
      if (w > 0) out.insert(out.end(), gap_len, 0.0);
      const double f = 150.0 + static_cast<double>(fnv1a64(ws[w]) % 250);
      for (std::size_t i = 0; i < word_len; ++i) {
        const double edge = static_cast<double>(std::min(i, word_len - 1 - i));
        const double g = edge < static_cast<double>(ramp)
                             ? 0.5 - 0.5 * std::cos(std::numbers::pi * edge / static_cast<double>(ramp))
                             : 1.0;
        out.push_back(0.6 * g * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / kSampleRate));
      }
    }
    return AudioBuffer(std::move(out));
  }

  const CallLog& log() const noexcept { return log_; }

 private:
  CallLog log_;
};

// ---------------------------------------------------------------------------

/// 64-dimensional hashed bag of lowercase alphanumeric tokens, L2-normalized.
class FixtureEmbedder : public EmbeddingBackend {
 public:
  static constexpr std::size_t kDim = 64;

  static std::vector<std::string> tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      } else if (!cur.empty()) {
        out.push_back(std::exchange(cur, {}));
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  }

  static std::size_t bucket(std::string_view token) { return fnv1a64(token) % kDim; }

  std::vector<double> embed(std::string_view text) override {
    const auto toks = tokens(text);
    if (toks.empty()) throw PreconditionError("text has no tokens");
    std::vector<double> v(kDim, 0.0);
    for (const auto& t : toks) v[bucket(t)] += 1.0;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
  }
};

}  // namespace s2a::fixture
