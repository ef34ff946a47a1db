/*
Copyright 2026 The arir Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#ifndef ARIR_IO_HPP_
#define ARIR_IO_HPP_

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "arir/ambisonics.hpp"
#include "arir/analysis.hpp"
#include "arir/errors.hpp"
#include "arir/preset.hpp"
#include "arir/sound_events.hpp"
#include "arir/translation.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace arir {

// ---------------------------------------------------------------------------
// WAVE files

enum class Normalization { kN3D, kSN3D };

struct WavData {
  Signal samples;  // channels x frames
  double sample_rate = 0.0;
  int bits = 0;
  bool is_float = false;
  // Normalization declared by the file's "ambi" chunk, if any.
  std::optional<Normalization> normalization;
};

namespace detail {

inline std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadFailure::kOpen, "cannot open " + path);
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

template <typename T>
T read_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void write_le(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

inline const char* normalization_tag(Normalization n) {
  return n == Normalization::kN3D ? "ACN/N3D" : "ACN/SN3D";
}

}  // namespace detail

inline WavData parse_wav(const std::vector<char>& bytes) {
  using detail::read_le;
  const auto malformed = [](const std::string& what) {
    return LoadError(LoadFailure::kMalformedHeader, what);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw malformed("not a RIFF/WAVE file");
  }
  WavData wav;
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  bool have_fmt = false;
  const char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = bytes.data() + pos;
    const std::size_t size = read_le<std::uint32_t>(id + 4);
    const char* body = id + 8;
    if (size > bytes.size() - pos - 8) throw malformed("chunk exceeds file size");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) throw malformed("short fmt chunk");
      format = read_le<std::uint16_t>(body);
      channels = read_le<std::uint16_t>(body + 2);
      wav.sample_rate = read_le<std::uint32_t>(body + 4);
      block_align = read_le<std::uint16_t>(body + 12);
      bits = read_le<std::uint16_t>(body + 14);
      if (format == detail::kFormatExtensible) {
        if (size < 40) throw malformed("short extensible fmt chunk");
        // The first two bytes of the sub-format GUID carry the format tag.
        format = read_le<std::uint16_t>(body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = body;
      data_size = size;
    } else if (std::memcmp(id, "ambi", 4) == 0) {
      const std::string tag(body, std::find(body, body + size, '\0'));
      if (tag == "ACN/N3D") {
        wav.normalization = Normalization::kN3D;
      } else if (tag == "ACN/SN3D") {
        wav.normalization = Normalization::kSN3D;
      } else {
        throw LoadError(LoadFailure::kUnsupportedFormat,
                        "unknown channel convention '" + tag + "'");
      }
    }
    pos += 8 + size + (size & 1);
  }
  if (!have_fmt || data == nullptr) throw malformed("missing fmt or data chunk");
  if (channels == 0 || !(wav.sample_rate > 0.0)) throw malformed("empty format");

  const bool float32 = format == detail::kFormatFloat && bits == 32;
  const bool pcm = format == detail::kFormatPcm &&
                   (bits == 16 || bits == 24 || bits == 32);
  if (!float32 && !pcm) {
    throw LoadError(LoadFailure::kUnsupportedFormat,
                    "unsupported sample format (tag " + std::to_string(format) +
                        ", " + std::to_string(bits) + " bit)");
  }
  const std::size_t width = bits / 8u;
  if (block_align != width * channels) throw malformed("inconsistent block align");
  wav.bits = bits;
  wav.is_float = float32;

  const std::size_t frames = data_size / block_align;
  wav.samples.resize(channels, static_cast<Eigen::Index>(frames));
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      const char* p = data + (t * channels + c) * width;
      double v = 0.0;
      if (float32) {
        v = read_le<float>(p);
      } else if (bits == 16) {
        v = read_le<std::int16_t>(p) / 32768.0;
      } else if (bits == 24) {
        const auto u = static_cast<std::uint32_t>(static_cast<unsigned char>(p[0])) |
                       static_cast<std::uint32_t>(static_cast<unsigned char>(p[1])) << 8 |
                       static_cast<std::uint32_t>(static_cast<unsigned char>(p[2])) << 16;
        v = static_cast<std::int32_t>(u << 8) / 2147483648.0;
      } else {
        v = read_le<std::int32_t>(p) / 2147483648.0;
      }
      wav.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = v;
    }
  }
  return wav;
}

inline WavData read_wav(const std::string& path) {
  return parse_wav(detail::read_file(path));
}

// 32-bit float WAVE, WAVE_FORMAT_EXTENSIBLE above two channels, with an
// optional "ambi" chunk declaring the channel convention.
inline std::string encode_wav(const Signal& samples, double sample_rate,
                              std::optional<Normalization> normalization) {
  using detail::write_le;
  const auto channels = static_cast<std::uint16_t>(samples.rows());
  const auto frames = static_cast<std::size_t>(samples.cols());
  const bool extensible = channels > 2;
  const std::uint32_t fmt_size = extensible ? 40 : 16;
  const std::size_t data_size = frames * channels * 4u;

  std::string ambi;
  if (normalization) {
    ambi = detail::normalization_tag(*normalization);
    ambi.push_back('\0');
    if (ambi.size() & 1) ambi.push_back('\0');
  }
  std::string out;
  out.reserve(data_size + 128);
  out += "RIFF";
  const std::size_t riff_size = 4 + (8 + fmt_size) + (ambi.empty() ? 0 : 8 + ambi.size()) +
                                (8 + data_size);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(riff_size));
  out += "WAVEfmt ";
  write_le<std::uint32_t>(out, fmt_size);
  write_le<std::uint16_t>(out, extensible ? detail::kFormatExtensible : detail::kFormatFloat);
  write_le<std::uint16_t>(out, channels);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(std::lround(sample_rate)));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(std::lround(sample_rate)) * channels * 4u);
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * 4u));
  write_le<std::uint16_t>(out, 32);
  if (extensible) {
    write_le<std::uint16_t>(out, 22);
    write_le<std::uint16_t>(out, 32);
    write_le<std::uint32_t>(out, 0);  // no speaker mask
    // KSDATAFORMAT_SUBTYPE_IEEE_FLOAT
    static constexpr std::array<unsigned char, 16> kGuid = {
        0x03, 0x00, 0x00, 0x00, 0x00, 0x00, 0x10, 0x00,
        0x80, 0x00, 0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71};
    out.append(reinterpret_cast<const char*>(kGuid.data()), kGuid.size());
  }
  if (!ambi.empty()) {
    out += "ambi";
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ambi.size()));
    out += ambi;
  }
  out += "data";
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(data_size));
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::uint16_t c = 0; c < channels; ++c) {
      write_le<float>(out, static_cast<float>(samples(c, static_cast<Eigen::Index>(t))));
    }
  }
  return out;
}

inline void write_wav(const std::string& path, const Signal& samples,
                      double sample_rate,
                      std::optional<Normalization> normalization = std::nullopt) {
  if (samples.rows() < 1 || samples.rows() > 65535) {
    throw ConfigError("cannot write " + std::to_string(samples.rows()) + " channels");
  }
  const std::string bytes = encode_wav(samples, sample_rate, normalization);
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
    throw ConfigError("cannot write " + path);
  }
}

struct ArirReadOptions {
  // Overrides the file's declaration. Untagged files are taken as SN3D.
  std::optional<Normalization> assume;
};

// Converts a parsed WAVE file into an N3D/ACN Arir.
inline Arir arir_from_wav(WavData wav, const ArirReadOptions& options = {}) {
  if (!wav.is_float || wav.bits != 32) {
    throw LoadError(LoadFailure::kUnsupportedFormat,
                    "ARIR files must be 32-bit float");
  }
  const auto channels = static_cast<int>(wav.samples.rows());
  const int order = static_cast<int>(std::lround(std::sqrt(channels))) - 1;
  if (order < 0 || sh_channels(order) != channels || order > kMaxOrder) {
    throw LoadError(LoadFailure::kChannelCount,
                    "channel count " + std::to_string(channels) +
                        " is not (N+1)^2 for an order N <= 7");
  }
  const Normalization norm =
      options.assume.value_or(wav.normalization.value_or(Normalization::kSN3D));
  if (norm == Normalization::kSN3D) {
    wav.samples = sn3d_to_n3d_gains(order).asDiagonal() * wav.samples;
  }
  return make_arir(std::move(wav.samples), wav.sample_rate);
}

inline Arir read_arir(const std::string& path, const ArirReadOptions& options = {}) {
  return arir_from_wav(read_wav(path), options);
}

// Writes an N3D/ACN signal, tagged as such.
inline void write_hoa(const std::string& path, const Signal& samples,
                      double sample_rate) {
  const auto channels = static_cast<int>(samples.rows());
  const int order = static_cast<int>(std::lround(std::sqrt(channels))) - 1;
  if (order < 0 || sh_channels(order) != channels) {
    throw UnsupportedInputError("channel count is not a perfect square");
  }
  write_wav(path, samples, sample_rate, Normalization::kN3D);
}

// Mono dry signal; any supported sample format.
inline std::vector<double> mono_from_wav(const WavData& wav, double* sample_rate) {
  if (wav.samples.rows() != 1) {
    throw UnsupportedInputError("dry signal must be mono, got " +
                                std::to_string(wav.samples.rows()) + " channels");
  }
  if (sample_rate != nullptr) *sample_rate = wav.sample_rate;
  return std::vector<double>(wav.samples.data(),
                             wav.samples.data() + wav.samples.size());
}

inline std::vector<double> read_mono(const std::string& path, double* sample_rate) {
  return mono_from_wav(read_wav(path), sample_rate);
}

// ---------------------------------------------------------------------------
// Presets: a magic line, one line of JSON metadata, then little-endian
// float64 blobs referenced from the metadata by offset.

inline constexpr std::string_view kPresetMagic = "ARIR-PRESET";
inline constexpr int kPresetVersion = 1;

namespace detail {

inline void append_blob(std::string& blob, const Signal& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    for (Eigen::Index c = 0; c < s.cols(); ++c) write_le<double>(blob, s(r, c));
  }
}

inline nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// JSON has no infinity; the zero-denominator exclusion ratio is stored as null.
inline nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline std::uint32_t checksum(std::string_view meta, std::string_view blob) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(meta.data()),
              static_cast<uInt>(meta.size()));
  crc = crc32_z(crc, reinterpret_cast<const Bytef*>(blob.data()), blob.size());
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::string encode_preset(const AnalysisPreset& preset) {
  using nlohmann::json;
  std::string blob;
  json meta;
  meta["sample_rate"] = preset.sample_rate;
  meta["order"] = preset.order;
  meta["speed_of_sound"] = preset.speed_of_sound;
  meta["envelope_corrected"] = preset.envelope_corrected;
  meta["band_centers"] = preset.band_centers;
  json corr = json::array();
  for (Eigen::Index r = 0; r < preset.correction_db.rows(); ++r) {
    corr.push_back(detail::vec_json(preset.correction_db.row(r).transpose()));
  }
  meta["correction_db"] = corr;
  const DetectionParams& d = preset.detection;
  meta["detection"] = {
      {"max_events", d.max_events},
      {"search_window_s", d.search_window_s},
      {"min_peak_distance_s", d.min_peak_distance_s},
      {"decay_offset_db", d.decay_offset_db},
      {"decay_time_s", d.decay_time_s},
      {"speed_of_sound", d.speed_of_sound},
      {"taper_s", d.taper_s},
      {"max_flat_s", d.max_flat_s},
      {"direct_min_flat_s", d.direct_min_flat_s},
      {"relevant_peak_db", d.relevant_peak_db},
      {"median_window_s", d.median_window_s},
      {"cut_direct_sound", d.cut_direct_sound},
  };
  meta["residual"] = {{"rows", preset.residual.rows()},
                      {"cols", preset.residual.cols()},
                      {"offset", blob.size()}};
  detail::append_blob(blob, preset.residual);

  json events = json::array();
  for (const SoundEvent& e : preset.events) {
    json steering = json::array();
    for (int k = 0; k < 4; ++k) {
      steering.push_back(detail::vec_json(e.steering.directions.col(k)));
    }
    events.push_back({
        {"index", e.index},
        {"toa", e.toa},
        {"toa_sample", e.toa_sample},
        {"amplitude", e.amplitude},
        {"doa", detail::vec_json(e.doa.vec())},
        {"position", detail::vec_json(e.position)},
        {"steering", steering},
        {"exclusion", detail::vec_json(e.exclusion)},
        {"exclusion_ratio", detail::finite_or_null(e.exclusion_ratio)},
        {"window",
         {{"start", e.window.start},
          {"flat_begin", e.window.flat_begin},
          {"flat_end", e.window.flat_end},
          {"end", e.window.end},
          {"taper", e.window.taper}}},
        {"directional", {{"cols", e.directional.cols()}, {"offset", blob.size()}}},
    });
    detail::append_blob(blob, e.directional);
  }
  meta["events"] = events;
  meta["blob_size"] = blob.size();

  const std::string payload = meta.dump();
  json envelope = {{"version", kPresetVersion},
                   {"checksum", detail::checksum(payload, blob)},
                   {"payload", meta}};
  std::string out(kPresetMagic);
  out += '\n';
  out += envelope.dump();
  out += '\n';
  out += blob;
  return out;
}

inline void save_preset(const AnalysisPreset& preset, const std::string& path) {
  const std::string bytes = encode_preset(preset);
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
    throw ConfigError("cannot write " + path);
  }
}

namespace detail {

inline LoadError invariant(const std::string& what) {
  return LoadError(LoadFailure::kInvariant, what);
}

inline Vec3 vec3_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw invariant("expected a 3-vector");
  return Vec3(v[0], v[1], v[2]);
}

inline Signal signal_from(std::string_view blob, std::size_t offset,
                          Eigen::Index rows, Eigen::Index cols) {
  if (rows < 0 || cols < 0) throw invariant("negative signal shape");
  const auto count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (offset > blob.size() || count > (blob.size() - offset) / 8) {
    throw invariant("signal blob out of range");
  }
  Signal s(rows, cols);
  std::memcpy(s.data(), blob.data() + offset, count * 8);
  if (!s.allFinite()) throw invariant("non-finite signal samples");
  return s;
}

// Checks everything the analysis guarantees about one event.
inline void validate_event(const SoundEvent& e, Eigen::Index length) {
  if (e.exclusion(0) != 1.0) throw invariant("exclusion vector must start with 1");
  for (int k = 1; k < 4; ++k) {
    if (!(e.exclusion(k) >= 0.0 && e.exclusion(k) <= 1.0) ||
        e.exclusion(k) != e.exclusion(1)) {
      throw invariant("exclusion weights must be equal and in [0, 1]");
    }
  }
  for (int a = 0; a < 4; ++a) {
    if (std::abs(e.steering.directions.col(a).norm() - 1.0) > 1e-9) {
      throw invariant("steering direction is not unit length");
    }
    for (int b = a + 1; b < 4; ++b) {
      const double dot = e.steering.directions.col(a).dot(e.steering.directions.col(b));
      if (std::abs(dot + 1.0 / 3.0) > 1e-9) throw invariant("steering set is not a tetrahedron");
    }
  }
  if ((e.steering.directions.col(0) - e.doa.vec()).norm() > 1e-9) {
    throw invariant("first steering direction differs from the DOA");
  }
  const SegmentWindow& w = e.window;
  if (!(0 <= w.start && w.start <= w.flat_begin && w.flat_begin <= w.flat_end &&
        w.flat_end <= w.end && w.end < length && w.taper >= 1)) {
    throw invariant("inconsistent segment window");
  }
  if (e.directional.rows() != 4 || e.directional.cols() != w.length()) {
    throw invariant("directional signal length differs from its window");
  }
  if (!(e.toa >= 0.0) || !std::isfinite(e.toa) || !e.position.allFinite() ||
      !std::isfinite(e.amplitude)) {
    throw invariant("non-finite event parameters");
  }
}

}  // namespace detail

inline AnalysisPreset decode_preset(std::string_view bytes) {
  using nlohmann::json;
  const std::size_t first = bytes.find('\n');
  if (first == std::string_view::npos || bytes.substr(0, first) != kPresetMagic) {
    throw LoadError(LoadFailure::kMalformedHeader, "not a preset file");
  }
  const std::size_t second = bytes.find('\n', first + 1);
  if (second == std::string_view::npos) {
    throw LoadError(LoadFailure::kMalformedHeader, "truncated preset header");
  }
  json envelope;
  try {
    envelope = json::parse(bytes.substr(first + 1, second - first - 1));
  } catch (const json::exception& e) {
    throw LoadError(LoadFailure::kMalformedHeader,
                    std::string("preset metadata: ") + e.what());
  }
  if (!envelope.is_object() || !envelope.contains("version") ||
      !envelope["version"].is_number_integer()) {
    throw LoadError(LoadFailure::kMalformedHeader, "preset version missing");
  }
  if (envelope["version"].get<int>() != kPresetVersion) {
    throw LoadError(LoadFailure::kVersion,
                    "unsupported preset version " + envelope["version"].dump());
  }
  const std::string_view blob = bytes.substr(second + 1);
  try {
    const json& meta = envelope.at("payload");
    if (envelope.at("checksum").get<std::uint32_t>() !=
        detail::checksum(meta.dump(), blob)) {
      throw LoadError(LoadFailure::kChecksum, "preset checksum mismatch");
    }
    if (meta.at("blob_size").get<std::size_t>() != blob.size()) {
      throw detail::invariant("blob size mismatch");
    }

    AnalysisPreset p;
    p.sample_rate = meta.at("sample_rate").get<double>();
    p.order = meta.at("order").get<int>();
    p.speed_of_sound = meta.at("speed_of_sound").get<double>();
    if (!(p.sample_rate > 0.0) || p.order < 1 || p.order > kMaxOrder ||
        !(p.speed_of_sound > 0.0)) {
      throw detail::invariant("invalid rate, order or speed of sound");
    }
    p.envelope_corrected = meta.at("envelope_corrected").get<bool>();
    p.band_centers = meta.at("band_centers").get<std::vector<double>>();
    const json& corr = meta.at("correction_db");
    p.correction_db.resize(static_cast<Eigen::Index>(corr.size()),
                           static_cast<Eigen::Index>(p.band_centers.size()));
    for (std::size_t r = 0; r < corr.size(); ++r) {
      const auto row = corr[r].get<std::vector<double>>();
      if (row.size() != p.band_centers.size()) {
        throw detail::invariant("correction table does not match band count");
      }
      for (std::size_t b = 0; b < row.size(); ++b) {
        p.correction_db(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(b)) = row[b];
      }
    }
    if (p.envelope_corrected && corr.size() != static_cast<std::size_t>(p.order + 1)) {
      throw detail::invariant("correction table does not match order");
    }

    const json& d = meta.at("detection");
    DetectionParams& dp = p.detection;
    dp.max_events = d.at("max_events").get<int>();
    dp.search_window_s = d.at("search_window_s").get<double>();
    dp.min_peak_distance_s = d.at("min_peak_distance_s").get<double>();
    dp.decay_offset_db = d.at("decay_offset_db").get<double>();
    dp.decay_time_s = d.at("decay_time_s").get<double>();
    dp.speed_of_sound = d.at("speed_of_sound").get<double>();
    dp.taper_s = d.at("taper_s").get<double>();
    dp.max_flat_s = d.at("max_flat_s").get<double>();
    dp.direct_min_flat_s = d.at("direct_min_flat_s").get<double>();
    dp.relevant_peak_db = d.at("relevant_peak_db").get<double>();
    dp.median_window_s = d.at("median_window_s").get<double>();
    dp.cut_direct_sound = d.at("cut_direct_sound").get<bool>();

    const json& res = meta.at("residual");
    p.residual = detail::signal_from(blob, res.at("offset").get<std::size_t>(),
                                     res.at("rows").get<Eigen::Index>(),
                                     res.at("cols").get<Eigen::Index>());
    if (p.residual.rows() != sh_channels(p.order)) {
      throw detail::invariant("residual channel count does not match order");
    }

    const json& events = meta.at("events");
    if (events.empty()) throw detail::invariant("preset has no events");
    for (std::size_t n = 0; n < events.size(); ++n) {
      const json& j = events[n];
      SoundEvent e;
      e.index = j.at("index").get<int>();
      if (e.index != static_cast<int>(n) + 1) throw detail::invariant("event index out of sequence");
      e.toa = j.at("toa").get<double>();
      e.toa_sample = j.at("toa_sample").get<std::ptrdiff_t>();
      e.amplitude = j.at("amplitude").get<double>();
      try {
        e.doa = Direction::from_unit(detail::vec3_from(j.at("doa")));
      } catch (const GeometryError& err) {
        throw detail::invariant(err.what());
      }
      e.position = detail::vec3_from(j.at("position"));
      const json& st = j.at("steering");
      if (st.size() != 4) throw detail::invariant("steering set needs four directions");
      for (int k = 0; k < 4; ++k) e.steering.directions.col(k) = detail::vec3_from(st[k]);
      const auto ex = j.at("exclusion").get<std::vector<double>>();
      if (ex.size() != 4) throw detail::invariant("exclusion vector needs four entries");
      e.exclusion = Eigen::Vector4d(ex[0], ex[1], ex[2], ex[3]);
      const json& ratio = j.at("exclusion_ratio");
      e.exclusion_ratio = ratio.is_null() ? std::numeric_limits<double>::infinity()
                                          : ratio.get<double>();
      const json& w = j.at("window");
      e.window.start = w.at("start").get<std::ptrdiff_t>();
      e.window.flat_begin = w.at("flat_begin").get<std::ptrdiff_t>();
      e.window.flat_end = w.at("flat_end").get<std::ptrdiff_t>();
      e.window.end = w.at("end").get<std::ptrdiff_t>();
      e.window.taper = w.at("taper").get<std::ptrdiff_t>();
      const json& ds = j.at("directional");
      e.directional = detail::signal_from(blob, ds.at("offset").get<std::size_t>(), 4,
                                          ds.at("cols").get<Eigen::Index>());
      detail::validate_event(e, p.residual.cols());
      if (!p.events.empty() && !(e.toa > p.events.back().toa)) {
        throw detail::invariant("events are not sorted by arrival time");
      }
      p.events.push_back(std::move(e));
    }
    p.walls = build_walls(p.events);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(LoadFailure::kMalformedHeader,
                    std::string("preset metadata: ") + e.what());
  }
}

inline AnalysisPreset load_preset(const std::string& path) {
  const std::vector<char> bytes = detail::read_file(path);
  return decode_preset(std::string_view(bytes.data(), bytes.size()));
}

// ---------------------------------------------------------------------------
// Trajectories: CSV with header time_s,x_m,y_m,z_m and strictly increasing
// times. Positions are linearly interpolated and held beyond the ends.

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec3> positions;

  std::size_t size() const { return times.size(); }

  Vec3 at(double t) const {
    if (t <= times.front()) return positions.front();
    if (t >= times.back()) return positions.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto i = static_cast<std::size_t>(it - times.begin());
    const double a = (t - times[i - 1]) / (times[i] - times[i - 1]);
    return (1.0 - a) * positions[i - 1] + a * positions[i];
  }
};

inline Trajectory parse_trajectory(std::string_view text) {
  Trajectory traj;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line != "time_s,x_m,y_m,z_m") {
        throw TrajectoryError("expected header time_s,x_m,y_m,z_m");
      }
      continue;
    }
    std::array<double, 4> v{};
    std::size_t field = 0;
    std::size_t p = 0;
    while (field < 4) {
      std::size_t comma = line.find(',', p);
      if (comma == std::string_view::npos) comma = line.size();
      std::string_view token = line.substr(p, comma - p);
      while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
      const auto r = std::from_chars(token.data(), token.data() + token.size(), v[field]);
      if (r.ec != std::errc() || r.ptr != token.data() + token.size() ||
          !std::isfinite(v[field])) {
        throw TrajectoryError("line " + std::to_string(line_no) + ": cannot parse '" +
                              std::string(token) + "'");
      }
      ++field;
      p = comma + 1;
      if (comma == line.size()) break;
    }
    if (field != 4 || p <= line.size()) {
      throw TrajectoryError("line " + std::to_string(line_no) + ": expected 4 fields");
    }
    if (!traj.times.empty() && !(v[0] > traj.times.back())) {
      throw TrajectoryError("line " + std::to_string(line_no) +
                            ": time is not strictly increasing");
    }
    traj.times.push_back(v[0]);
    traj.positions.emplace_back(v[1], v[2], v[3]);
  }
  if (traj.times.empty()) throw TrajectoryError("trajectory has no poses");
  return traj;
}

inline Trajectory read_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TrajectoryError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trajectory(ss.str());
}

inline void write_trajectory(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  out.precision(17);
  out << "time_s,x_m,y_m,z_m\n";
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Vec3& x = traj.positions[i];
    out << traj.times[i] << ',' << x.x() << ',' << x.y() << ',' << x.z() << '\n';
  }
}

}  // namespace arir

#endif  // ARIR_IO_HPP_
