#pragma once

// RIFF/WAVE encoding for MultichannelBuffer.
//
// Written files always use the canonical 44-byte layout: "RIFF" <size>
// "WAVE", a 16-byte "fmt " chunk and one "data" chunk of interleaved
// little-endian frames. pcm16 stores round(sample * 32767) clamped to int16;
// reading divides by 32768. float32 is stored as IEEE single (format 3).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stereohaptic/error.hpp"
#include "stereohaptic/renderer.hpp"

namespace stereohaptic {

static_assert(std::endian::native == std::endian::little, "WAV codec assumes a little-endian host");

enum class WavFormat : std::uint16_t { pcm16 = 1, float32 = 3 };

struct WavSpec {
  WavFormat format{WavFormat::float32};
  std::uint16_t channels{1};
  std::uint32_t sample_rate{48000};

  std::uint16_t bits() const { return format == WavFormat::pcm16 ? 16 : 32; }
  std::uint16_t block_align() const { return static_cast<std::uint16_t>(channels * bits() / 8); }

  void validate() const {
    if (channels < 1 || channels > 64) throw Error("must be within [1, 64]", "channels");
    if (sample_rate < 8000 || sample_rate > 192000) throw Error("must be within [8000, 192000]", "sample_rate");
  }

  friend bool operator==(const WavSpec&, const WavSpec&) = default;
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_tag(std::vector<std::uint8_t>& out, const char (&tag)[5]) { out.insert(out.end(), tag, tag + 4); }

inline std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

inline bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char (&tag)[5]) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

inline std::int16_t encode_pcm16(float s) {
  const double v = std::round(static_cast<double>(s) * 32767.0);
  return static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
}

}  // namespace detail

inline std::vector<std::uint8_t> write_wav(const MultichannelBuffer& buf, const WavSpec& spec) {
  spec.validate();
  if (buf.channel_count() != spec.channels)
    throw Error("buffer has " + std::to_string(buf.channel_count()) + " channels, format expects " +
                    std::to_string(spec.channels),
                "channels");
  const std::size_t frames = buf.frames();
  for (std::size_t k = 0; k < buf.channel_count(); ++k) {
    if (buf.channels[k].size() != frames) throw Error("channel lengths differ", "channels");
    for (std::size_t i = 0; i < frames; ++i)
      if (!std::isfinite(buf.channels[k][i]))
        throw Error("non-finite sample", "channels[" + std::to_string(k) + "][" + std::to_string(i) + "]");
  }

  const std::uint64_t data_bytes = static_cast<std::uint64_t>(frames) * spec.block_align();
  if (data_bytes > 0xffffffffull - 36) throw Error("too large for a RIFF file", "data");

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  detail::put_tag(out, "RIFF");
  detail::put_u32(out, static_cast<std::uint32_t>(36 + data_bytes));
  detail::put_tag(out, "WAVE");
  detail::put_tag(out, "fmt ");
  detail::put_u32(out, 16);
  detail::put_u16(out, static_cast<std::uint16_t>(spec.format));
  detail::put_u16(out, spec.channels);
  detail::put_u32(out, spec.sample_rate);
  detail::put_u32(out, spec.sample_rate * spec.block_align());
  detail::put_u16(out, spec.block_align());
  detail::put_u16(out, spec.bits());
  detail::put_tag(out, "data");
  detail::put_u32(out, static_cast<std::uint32_t>(data_bytes));

  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t k = 0; k < spec.channels; ++k) {
      const float s = buf.channels[k][i];
      if (spec.format == WavFormat::pcm16) {
        detail::put_u16(out, std::bit_cast<std::uint16_t>(detail::encode_pcm16(s)));
      } else {
        detail::put_u32(out, std::bit_cast<std::uint32_t>(s));
      }
    }
  }
  return out;
}

struct WavFile {
  MultichannelBuffer buffer;
  WavSpec spec;
};

inline WavFile read_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !detail::tag_is(bytes, 0, "RIFF") || !detail::tag_is(bytes, 8, "WAVE"))
    throw Error("malformed header: not a RIFF/WAVE file", "header");

  WavSpec spec;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = detail::get_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;

    if (detail::tag_is(bytes, pos, "fmt ")) {
      if (size < 16 || body + size > bytes.size()) throw Error("malformed header: short fmt chunk", "fmt");
      std::uint16_t code = detail::get_u16(bytes, body);
      const std::uint16_t channels = detail::get_u16(bytes, body + 2);
      const std::uint32_t rate = detail::get_u32(bytes, body + 4);
      const std::uint16_t bits = detail::get_u16(bytes, body + 14);
      if (code == 0xfffe) {  // WAVE_FORMAT_EXTENSIBLE: the subformat GUID starts with the real code
        if (size < 40) throw Error("malformed header: short extensible fmt chunk", "fmt");
        code = detail::get_u16(bytes, body + 24);
      }
      if (code == 1 && bits == 16) {
        spec.format = WavFormat::pcm16;
      } else if (code == 3 && bits == 32) {
        spec.format = WavFormat::float32;
      } else {
        throw Error("unsupported format code " + std::to_string(code) + " with " + std::to_string(bits) + " bits",
                    "fmt");
      }
      spec.channels = channels;
      spec.sample_rate = rate;
      spec.validate();
      have_fmt = true;
    } else if (detail::tag_is(bytes, pos, "data")) {
      if (!have_fmt) throw Error("malformed header: data chunk before fmt", "data");
      if (body + size > bytes.size()) throw Error("truncated data chunk", "data");
      if (size % spec.block_align() != 0) throw Error("truncated data chunk: partial frame", "data");
      const std::size_t frames = size / spec.block_align();
      WavFile file{MultichannelBuffer(spec.channels, frames, spec.sample_rate), spec};
      std::size_t at = body;
      for (std::size_t i = 0; i < frames; ++i) {
        for (std::size_t k = 0; k < spec.channels; ++k) {
          if (spec.format == WavFormat::pcm16) {
            const auto v = std::bit_cast<std::int16_t>(detail::get_u16(bytes, at));
            file.buffer.channels[k][i] = static_cast<float>(v) / 32768.0f;
            at += 2;
          } else {
            file.buffer.channels[k][i] = std::bit_cast<float>(detail::get_u32(bytes, at));
            at += 4;
          }
        }
      }
      return file;
    }
    // Chunks are word aligned.
    pos = body + size + (size & 1u);
  }
  throw Error(have_fmt ? "truncated: no data chunk" : "malformed header: no fmt chunk", "header");
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file", path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot create file", path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed", path);
}

}  // namespace stereohaptic
