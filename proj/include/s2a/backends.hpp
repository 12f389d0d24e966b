#pragma once

// Adapter contracts for the four external model capabilities. Concrete
// implementations live in fixture_backends.hpp (offline, deterministic) and
// remote_backends.hpp (HTTP).

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "s2a/core.hpp"

namespace s2a {

/// Image payload as uploaded by a client. Media type is sniffed from magic
/// bytes; only JPEG and PNG are accepted.
class ImageRef {
 public:
  ImageRef(std::vector<std::uint8_t> bytes, std::string media_type)
      : bytes_(std::move(bytes)), media_type_(std::move(media_type)) {
    if (bytes_.empty()) throw PreconditionError("image payload is empty");
    if (media_type_ != "image/jpeg" && media_type_ != "image/png")
      throw PreconditionError("unsupported media type: " + media_type_);
  }

  /// Returns "image/png", "image/jpeg", or "" for anything else.
  static std::string sniff_media_type(std::span<const std::uint8_t> b) {
    static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (b.size() >= 8 && std::equal(std::begin(kPng), std::end(kPng), b.begin())) return "image/png";
    if (b.size() >= 3 && b[0] == 0xff && b[1] == 0xd8 && b[2] == 0xff) return "image/jpeg";
    return {};
  }

  static ImageRef from_bytes(std::vector<std::uint8_t> bytes) {
    auto type = sniff_media_type(bytes);
    if (type.empty()) throw PreconditionError("payload is neither JPEG nor PNG");
    return ImageRef(std::move(bytes), std::move(type));
  }

  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }
  const std::string& media_type() const noexcept { return media_type_; }
  std::uint64_t hash() const { return fnv1a64(bytes()); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::string media_type_;
};

class VisionBackend {
 public:
  virtual ~VisionBackend() = default;
  /// Textual answer to `prompt` about `image`, verbatim.
  virtual std::string query(const ImageRef& image, std::string_view prompt) = 0;
};

class AudioGenBackend {
 public:
  virtual ~AudioGenBackend() = default;
  /// Exactly round(seconds * 16000) samples.
  virtual AudioBuffer generate(std::string_view prompt, double seconds, std::uint64_t seed) = 0;
};

class SpeechBackend {
 public:
  virtual ~SpeechBackend() = default;
  virtual AudioBuffer synthesize(std::string_view sentence) = 0;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<double> embed(std::string_view text) = 0;
};

/// The four adapters a pipeline run needs. Non-owning.
struct Backends {
  VisionBackend* vision = nullptr;
  AudioGenBackend* audio = nullptr;
  SpeechBackend* speech = nullptr;
};

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw PreconditionError("embedding dimensions differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace s2a
