#pragma once

// HTTP adapters for hosted models.
//
// Wire format (POST, JSON body):
//   vision  {"prompt", "image" (base64), "media_type"}  -> {"text": "..."}
//   audio   {"prompt", "seconds", "seed"}               -> WAV body
//   speech  {"prompt"}                                  -> WAV body
//   embed   {"prompt"}                                  -> {"embedding": [...]}
// WAV responses are converted to 16 kHz mono at this boundary.

#include <chrono>
#include <string>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "s2a/backends.hpp"
#include "s2a/dsp.hpp"
#include "s2a/wav.hpp"

namespace s2a::remote {

struct Endpoint {
  std::string base;  // scheme://host:port
  std::string path = "/";

  /// Splits "http://host:port/path" into base and path.
  static Endpoint parse(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + url);
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
  }
};

struct HttpOptions {
  std::chrono::seconds timeout{60};
  int retries = 0;
};

namespace detail {

inline httplib::Result post_json(const Endpoint& ep, const HttpOptions& opts,
                                 const nlohmann::json& body) {
  httplib::Client client(ep.base);
  client.set_connection_timeout(opts.timeout);
  client.set_read_timeout(opts.timeout);
  client.set_write_timeout(opts.timeout);
  const std::string payload = body.dump();
  httplib::Result res = client.Post(ep.path, payload, "application/json");
  for (int attempt = 0; attempt < opts.retries && !res; ++attempt)
    res = client.Post(ep.path, payload, "application/json");
  return res;
}

inline const httplib::Response& checked(const httplib::Result& res, const Endpoint& ep) {
  using Kind = BackendError::Kind;
  if (!res) {
    const auto err = res.error();
    const Kind kind = err == httplib::Error::Read || err == httplib::Error::Write ||
                              err == httplib::Error::ConnectionTimeout
                          ? Kind::Timeout
                          : Kind::Unavailable;
    throw BackendError(kind, ep.base + ep.path + ": " + httplib::to_string(err));
  }
  if (res->status >= 500) throw BackendError(Kind::Unavailable, "HTTP " + std::to_string(res->status));
  if (res->status != 200) throw BackendError(Kind::Rejected, "HTTP " + std::to_string(res->status) + ": " + res->body);
  return *res;
}

inline nlohmann::json parse_json(const std::string& body) {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(BackendError::Kind::MalformedResponse, e.what());
  }
}

inline AudioBuffer parse_wav(const std::string& body) {
  try {
    const auto* p = reinterpret_cast<const std::uint8_t*>(body.data());
    return wav::decode(std::span<const std::uint8_t>(p, body.size()));
  } catch (const Error& e) {
    throw BackendError(BackendError::Kind::MalformedResponse, e.what());
  }
}

}  // namespace detail

class RemoteVision : public VisionBackend {
 public:
  explicit RemoteVision(Endpoint ep, HttpOptions opts = {}) : ep_(std::move(ep)), opts_(opts) {}

  std::string query(const ImageRef& image, std::string_view prompt) override {
    if (prompt.empty()) throw PreconditionError("prompt is empty");
    const std::string raw(reinterpret_cast<const char*>(image.bytes().data()), image.bytes().size());
    nlohmann::json body = {{"prompt", prompt},
                           {"image", httplib::detail::base64_encode(raw)},
                           {"media_type", image.media_type()}};
    const auto res = detail::post_json(ep_, opts_, body);
    const auto j = detail::parse_json(detail::checked(res, ep_).body);
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
      throw BackendError(BackendError::Kind::MalformedResponse, "missing string field 'text'");
    return j["text"].get<std::string>();
  }

 private:
  Endpoint ep_;
  HttpOptions opts_;
};

class RemoteAudio : public AudioGenBackend {
 public:
  explicit RemoteAudio(Endpoint ep, HttpOptions opts = {}) : ep_(std::move(ep)), opts_(opts) {}

  AudioBuffer generate(std::string_view prompt, double seconds, std::uint64_t seed) override {
    if (prompt.empty()) throw PreconditionError("prompt is empty");
    if (!(seconds > 0.0)) throw PreconditionError("seconds must be > 0");
    nlohmann::json body = {{"prompt", prompt}, {"seconds", seconds}, {"seed", seed}};
    const auto res = detail::post_json(ep_, opts_, body);
    AudioBuffer audio = detail::parse_wav(detail::checked(res, ep_).body);
    if (audio.empty()) throw BackendError(BackendError::Kind::MalformedResponse, "empty audio");
    return dsp::fit_length(audio, samples_for(seconds), dsp::FitMode::Pad);
  }

 private:
  Endpoint ep_;
  HttpOptions opts_;
};

class RemoteSpeech : public SpeechBackend {
 public:
  explicit RemoteSpeech(Endpoint ep, HttpOptions opts = {}) : ep_(std::move(ep)), opts_(opts) {}

  AudioBuffer synthesize(std::string_view sentence) override {
    if (sentence.empty()) throw PreconditionError("sentence is empty");
    const auto res = detail::post_json(ep_, opts_, {{"prompt", sentence}});
    AudioBuffer audio = detail::parse_wav(detail::checked(res, ep_).body);
    if (audio.empty()) throw BackendError(BackendError::Kind::MalformedResponse, "empty audio");
    return audio;
  }

 private:
  Endpoint ep_;
  HttpOptions opts_;
};

class RemoteEmbedder : public EmbeddingBackend {
 public:
  explicit RemoteEmbedder(Endpoint ep, HttpOptions opts = {}) : ep_(std::move(ep)), opts_(opts) {}

  std::vector<double> embed(std::string_view text) override {
    if (text.empty()) throw PreconditionError("text is empty");
    const auto res = detail::post_json(ep_, opts_, {{"prompt", text}});
    const auto j = detail::parse_json(detail::checked(res, ep_).body);
    if (!j.is_object() || !j.contains("embedding") || !j["embedding"].is_array() ||
        j["embedding"].empty())
      throw BackendError(BackendError::Kind::MalformedResponse, "missing array field 'embedding'");
    std::vector<double> v;
    for (const auto& x : j["embedding"]) {
      if (!x.is_number()) throw BackendError(BackendError::Kind::MalformedResponse, "non-numeric embedding");
      v.push_back(x.get<double>());
    }
    return v;
  }

 private:
  Endpoint ep_;
  HttpOptions opts_;
};

}  // namespace s2a::remote
