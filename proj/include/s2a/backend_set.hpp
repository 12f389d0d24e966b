#pragma once

// Owning holders for a complete set of backends, fixture or remote.

#include <cstdlib>
#include <memory>
#include <string>

#include "s2a/fixture_backends.hpp"
#include "s2a/remote_backends.hpp"

namespace s2a {

struct BackendSet {
  std::unique_ptr<VisionBackend> vision;
  std::unique_ptr<AudioGenBackend> audio;
  std::unique_ptr<SpeechBackend> speech;
  std::unique_ptr<EmbeddingBackend> embedder;

  Backends view() const { return {vision.get(), audio.get(), speech.get()}; }
};

inline BackendSet make_fixture_backends(std::uint64_t seed = 42, const PromptSet& prompts = {}) {
  BackendSet s;
  s.vision = std::make_unique<fixture::FixtureVision>(seed, prompts);
  s.audio = std::make_unique<fixture::FixtureAudio>();
  s.speech = std::make_unique<fixture::FixtureSpeech>();
  s.embedder = std::make_unique<fixture::FixtureEmbedder>();
  return s;
}

struct RemoteUrls {
  std::string vision;
  std::string audio;
  std::string speech;
  std::string embedder;

  /// S2A_VISION_URL, S2A_AUDIO_URL, S2A_SPEECH_URL, S2A_EMBED_URL.
  static RemoteUrls from_env() {
    auto get = [](const char* name) {
      const char* v = std::getenv(name);
      return v ? std::string(v) : std::string();
    };
    return {get("S2A_VISION_URL"), get("S2A_AUDIO_URL"), get("S2A_SPEECH_URL"), get("S2A_EMBED_URL")};
  }
};

/// Remote adapters for every configured URL. Vision, audio and speech are
/// required; without an embedding URL the fixture embedder is used.
inline BackendSet make_remote_backends(const RemoteUrls& urls, remote::HttpOptions opts = {}) {
  if (urls.vision.empty() || urls.audio.empty() || urls.speech.empty())
    throw ConfigError("remote backend needs S2A_VISION_URL, S2A_AUDIO_URL and S2A_SPEECH_URL");
  BackendSet s;
  s.vision = std::make_unique<remote::RemoteVision>(remote::Endpoint::parse(urls.vision), opts);
  s.audio = std::make_unique<remote::RemoteAudio>(remote::Endpoint::parse(urls.audio), opts);
  s.speech = std::make_unique<remote::RemoteSpeech>(remote::Endpoint::parse(urls.speech), opts);
  if (urls.embedder.empty())
    s.embedder = std::make_unique<fixture::FixtureEmbedder>();
  else
    s.embedder = std::make_unique<remote::RemoteEmbedder>(remote::Endpoint::parse(urls.embedder), opts);
  return s;
}

/// "fixture" or "remote".
inline BackendSet make_backends(std::string_view kind, std::uint64_t seed, const PromptSet& prompts = {}) {
  if (kind == "fixture") return make_fixture_backends(seed, prompts);
  if (kind == "remote") return make_remote_backends(RemoteUrls::from_env());
  throw ConfigError("unknown backend '" + std::string(kind) + "' (fixture, remote)");
}

}  // namespace s2a
