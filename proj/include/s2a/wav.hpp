#pragma once

// RIFF/WAVE encoding and decoding. Output is always PCM16LE mono 16 kHz;
// decoding accepts PCM 8/16/24/32-bit and IEEE float at any rate and channel
// count, converting at the boundary (channel average, linear resampling).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "s2a/core.hpp"

namespace s2a::wav {

class WavError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_tag(std::vector<std::uint8_t>& out, const char (&tag)[5]) {
  out.insert(out.end(), tag, tag + 4);
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

inline std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

}  // namespace detail

/// Maps a sample to PCM16 with clipping at full scale.
inline std::int16_t to_pcm16(double s) {
  double c = std::clamp(s, -1.0, 1.0);
  return static_cast<std::int16_t>(std::lround(c * 32767.0));
}

inline std::vector<std::uint8_t> encode(const AudioBuffer& audio) {
  using namespace detail;
  const auto n = static_cast<std::uint32_t>(audio.size());
  const std::uint32_t data_bytes = n * 2;
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, kSampleRate);
  put_u32(out, kSampleRate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : audio.samples()) put_u16(out, static_cast<std::uint16_t>(to_pcm16(s)));
  return out;
}

/// Raw multi-channel content before boundary conversion.
struct DecodedWav {
  int sample_rate_hz = 0;
  int channels = 0;
  int bits_per_sample = 0;
  bool is_float = false;
  std::vector<double> interleaved;
};

inline DecodedWav decode_raw(std::span<const std::uint8_t> b) {
  using namespace detail;
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
      std::memcmp(b.data() + 8, "WAVE", 4) != 0)
    throw WavError("not a RIFF/WAVE file");

  DecodedWav out;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::uint32_t chunk_size = get_u32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_size > b.size()) throw WavError("truncated chunk");
    if (std::memcmp(b.data() + pos, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw WavError("fmt chunk too small");
      std::uint16_t format = get_u16(b, body);
      out.channels = get_u16(b, body + 2);
      out.sample_rate_hz = static_cast<int>(get_u32(b, body + 4));
      out.bits_per_sample = get_u16(b, body + 14);
      if (format == 0xFFFE && chunk_size >= 26) format = get_u16(b, body + 24);
      if (format != 1 && format != 3) throw WavError("unsupported WAV encoding");
      out.is_float = format == 3;
      have_fmt = true;
    } else if (std::memcmp(b.data() + pos, "data", 4) == 0) {
      if (!have_fmt) throw WavError("data chunk before fmt chunk");
      if (out.channels < 1 || out.sample_rate_hz < 1) throw WavError("invalid fmt chunk");
      const int bytes = out.bits_per_sample / 8;
      if (out.is_float ? bytes != 4 : (bytes < 1 || bytes > 4))
        throw WavError("unsupported bit depth");
      const std::size_t count = chunk_size / static_cast<std::size_t>(bytes);
      out.interleaved.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t at = body + i * static_cast<std::size_t>(bytes);
        double v = 0.0;
        if (out.is_float) {
          float f;
          std::uint32_t raw = get_u32(b, at);
          std::memcpy(&f, &raw, 4);
          v = f;
        } else if (bytes == 1) {
          v = std::max(-1.0, (static_cast<int>(b[at]) - 128) / 127.0);
        } else {
          std::int32_t acc = 0;
          for (int k = 0; k < bytes; ++k) acc |= static_cast<std::int32_t>(b[at + k]) << (8 * k);
          const int shift = 32 - 8 * bytes;
          acc = static_cast<std::int32_t>(static_cast<std::uint32_t>(acc) << shift) >> shift;
          // Symmetric with the encoder, so PCM round trips are lossless.
          v = std::max(-1.0, acc / static_cast<double>((1u << (8 * bytes - 1)) - 1));
        }
        if (!std::isfinite(v)) throw WavError("non-finite sample");
        out.interleaved.push_back(v);
      }
      return out;
    }
    pos = body + chunk_size + (chunk_size & 1);
  }
  throw WavError("missing data chunk");
}

/// Channel average followed by linear interpolation onto the 16 kHz grid.
inline AudioBuffer to_pipeline_format(const DecodedWav& raw) {
  const auto ch = static_cast<std::size_t>(raw.channels);
  const std::size_t frames = raw.interleaved.size() / ch;
  std::vector<double> mono(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < ch; ++c) acc += raw.interleaved[f * ch + c];
    mono[f] = acc / static_cast<double>(ch);
  }
  if (raw.sample_rate_hz == kSampleRate || mono.empty()) return AudioBuffer(std::move(mono));

  const double ratio = static_cast<double>(raw.sample_rate_hz) / kSampleRate;
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(frames) / ratio));
  std::vector<double> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double src = static_cast<double>(i) * ratio;
    const auto i0 = static_cast<std::size_t>(src);
    const double frac = src - static_cast<double>(i0);
    const double a = mono[std::min(i0, frames - 1)];
    const double b = mono[std::min(i0 + 1, frames - 1)];
    out[i] = a + (b - a) * frac;
  }
  return AudioBuffer(std::move(out));
}

inline AudioBuffer decode(std::span<const std::uint8_t> bytes) {
  return to_pipeline_format(decode_raw(bytes));
}

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw WavError("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw WavError("cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw WavError("write failed: " + path);
}

inline AudioBuffer read_file(const std::string& path) { return decode(read_bytes(path)); }

inline void write_file(const std::string& path, const AudioBuffer& audio) {
  write_bytes(path, encode(audio));
}

}  // namespace s2a::wav
