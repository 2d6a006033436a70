// Copyright 2026 The Ambient Depth Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Persistence: PCM16 WAV, JSON-lines manifests, depth images (raw float
// views from the simulator, 16-bit millimeter PNGs for real RGB-D ingest),
// split assignment and distractor mixing.

#ifndef AMBIENT_DATAIO_HPP_
#define AMBIENT_DATAIO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ambient/dsp.hpp"
#include "ambient/png16.hpp"
#include "ambient/rng.hpp"

namespace ambient::dataio {

using json = nlohmann::json;

// ------------------------------------------------------------------- WAV

namespace detail {

inline uint32_t rd_u32(const uint8_t* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
         (uint32_t(p[3]) << 24);
}
inline uint16_t rd_u16(const uint8_t* p) {
  return uint16_t(p[0]) | (uint16_t(p[1]) << 8);
}

[[noreturn]] inline void wav_error(const std::string& what, size_t offset) {
  std::ostringstream os;
  os << "wav: " << what << " at byte " << offset;
  throw std::runtime_error(os.str());
}

}  // namespace detail

inline dsp::Waveform read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("wav: cannot open " + path);
  std::vector<uint8_t> b((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());
  if (b.size() < 12) detail::wav_error("file too small for RIFF header", 0);
  if (std::memcmp(&b[0], "RIFF", 4) != 0) detail::wav_error("missing RIFF", 0);
  if (std::memcmp(&b[8], "WAVE", 4) != 0) detail::wav_error("missing WAVE", 8);

  int channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  const uint8_t* data = nullptr;
  size_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const char* id = reinterpret_cast<const char*>(&b[pos]);
    const uint32_t len = detail::rd_u32(&b[pos + 4]);
    if (pos + 8 + len > b.size())
      detail::wav_error("chunk overruns file", pos);
    const uint8_t* payload = &b[pos + 8];
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) detail::wav_error("fmt chunk too small", pos);
      const uint16_t format = detail::rd_u16(payload);
      if (format != 1) detail::wav_error("unsupported codec (need PCM)", pos + 8);
      channels = detail::rd_u16(payload + 2);
      sample_rate = detail::rd_u32(payload + 4);
      bits = detail::rd_u16(payload + 14);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = payload;
      data_len = len;
    }
    pos += 8 + len + (len & 1);  // chunks are word-aligned
  }
  if (channels == 0 || sample_rate == 0)
    detail::wav_error("missing fmt chunk", pos);
  if (bits != 16) detail::wav_error("unsupported bit depth (need 16)", pos);
  if (channels < 1 || channels > 2)
    detail::wav_error("unsupported channel count", pos);
  if (data == nullptr) detail::wav_error("missing data chunk", pos);
  if (data_len % (2 * channels) != 0)
    detail::wav_error("data chunk not frame aligned", pos);

  const size_t frames = data_len / (2 * channels);
  dsp::Waveform w;
  w.sample_rate = static_cast<int>(sample_rate);
  w.channels.assign(channels, std::vector<double>(frames));
  for (size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      const int16_t s = static_cast<int16_t>(
          detail::rd_u16(data + 2 * (i * channels + c)));
      w.channels[c][i] = static_cast<double>(s) / 32768.0;
    }
  }
  return w;
}

inline void write_wav(const std::string& path, const dsp::Waveform& w) {
  const int channels = w.num_channels();
  if (channels < 1 || channels > 2)
    throw std::invalid_argument("wav: need 1 or 2 channels");
  const size_t frames = w.num_samples();
  const uint32_t data_len = static_cast<uint32_t>(frames * channels * 2);

  std::vector<uint8_t> out;
  out.reserve(44 + data_len);
  auto put_u32 = [&](uint32_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 24) & 0xff);
  };
  auto put_u16 = [&](uint16_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
  };
  auto put_tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };

  put_tag("RIFF");
  put_u32(36 + data_len);
  put_tag("WAVE");
  put_tag("fmt ");
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(static_cast<uint16_t>(channels));
  put_u32(static_cast<uint32_t>(w.sample_rate));
  put_u32(static_cast<uint32_t>(w.sample_rate) * channels * 2);
  put_u16(static_cast<uint16_t>(channels * 2));
  put_u16(16);
  put_tag("data");
  put_u32(data_len);
  for (size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      double v = std::clamp(w.channels[c][i], -1.0, 1.0);
      const int16_t s = static_cast<int16_t>(
          std::clamp(std::lround(v * 32767.0), -32768L, 32767L));
      put_u16(static_cast<uint16_t>(s));
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("wav: cannot open " + path + " for write");
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
}

// ----------------------------------------------------------- Depth images

// Simulator depth views: 16-byte header (8-byte magic, u32 height, u32
// width, little-endian) followed by row-major float32 meters.
inline constexpr char kDepthMagic[8] = {'A', 'M', 'B', 'D',
                                        'P', 'T', 'H', '\0'};

struct DepthImage {
  int height = 0;
  int width = 0;
  std::vector<float> meters;  // row-major; 0 marks an invalid pixel

  float at(int r, int c) const { return meters[size_t(r) * width + c]; }
};

inline void write_depth_raw(const std::string& path, const DepthImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("depth: cannot open " + path);
  f.write(kDepthMagic, 8);
  const uint32_t h = static_cast<uint32_t>(img.height);
  const uint32_t w = static_cast<uint32_t>(img.width);
  f.write(reinterpret_cast<const char*>(&h), 4);
  f.write(reinterpret_cast<const char*>(&w), 4);
  f.write(reinterpret_cast<const char*>(img.meters.data()),
          static_cast<std::streamsize>(img.meters.size() * sizeof(float)));
}

inline DepthImage read_depth_raw(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("depth: cannot open " + path);
  char magic[8];
  uint32_t h = 0, w = 0;
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kDepthMagic, 8) != 0)
    throw std::runtime_error("depth: bad magic in " + path);
  f.read(reinterpret_cast<char*>(&h), 4);
  f.read(reinterpret_cast<char*>(&w), 4);
  DepthImage img;
  img.height = static_cast<int>(h);
  img.width = static_cast<int>(w);
  img.meters.resize(size_t(h) * w);
  f.read(reinterpret_cast<char*>(img.meters.data()),
         static_cast<std::streamsize>(img.meters.size() * sizeof(float)));
  if (!f) throw std::runtime_error("depth: truncated file " + path);
  return img;
}

// Real RGB-D ingest path: 16-bit grayscale PNG holding millimeters.
inline void write_depth_png16(const std::string& path, const DepthImage& img) {
  png16::Image p;
  p.width = static_cast<uint32_t>(img.width);
  p.height = static_cast<uint32_t>(img.height);
  p.pixels.resize(img.meters.size());
  for (size_t i = 0; i < img.meters.size(); ++i) {
    const double mm = std::clamp(double(img.meters[i]) * 1000.0, 0.0, 65535.0);
    p.pixels[i] = static_cast<uint16_t>(std::lround(mm));
  }
  png16::write_file(path, p);
}

inline DepthImage read_depth_png16(const std::string& path) {
  png16::Image p = png16::read_file(path);
  DepthImage img;
  img.height = static_cast<int>(p.height);
  img.width = static_cast<int>(p.width);
  img.meters.resize(p.pixels.size());
  for (size_t i = 0; i < p.pixels.size(); ++i)
    img.meters[i] = static_cast<float>(p.pixels[i]) / 1000.0f;
  return img;
}

// Ground-truth reduction used for real recordings: mean of the valid pixels
// in the centered 320x240 crop.
inline double depth_from_depth_image(const DepthImage& img) {
  constexpr int kCropW = 320, kCropH = 240;
  if (img.width < kCropW || img.height < kCropH)
    throw std::invalid_argument("depth image smaller than 320x240 crop");
  const int r0 = (img.height - kCropH) / 2;
  const int c0 = (img.width - kCropW) / 2;
  double sum = 0.0;
  size_t n = 0;
  for (int r = r0; r < r0 + kCropH; ++r) {
    for (int c = c0; c < c0 + kCropW; ++c) {
      const float v = img.at(r, c);
      if (v > 0.0f) {
        sum += v;
        ++n;
      }
    }
  }
  if (n == 0) throw std::runtime_error("no valid depth");
  return sum / static_cast<double>(n);
}

// --------------------------------------------------------------- Manifest

inline constexpr int kManifestSchemaVersion = 1;

struct Sample {
  std::string id;
  std::string audio_path;               // relative to the dataset root
  std::string image_path;               // optional; empty when absent
  double wall_distance = 0.0;           // meters
  int room_id = 0;
  int building_id = 0;
  std::string mode;                     // static | motion | dense
  int session_id = 0;
  std::string split;                    // train | val | test
  std::optional<int> grid_cell;         // dense mode
  std::optional<int> grid_cols;         // dense mode, cells per grid row
  std::optional<int> heading_id;        // dense mode
  std::optional<int> trajectory_id;     // motion mode
  std::optional<double> timestamp;      // motion mode, seconds
};

struct Manifest {
  int schema_version = kManifestSchemaVersion;
  std::string split_key = "room";  // room | building | heading | session
  std::vector<Sample> samples;
};

inline json sample_to_json(const Sample& s) {
  json j;
  j["id"] = s.id;
  j["audio_path"] = s.audio_path;
  if (!s.image_path.empty()) j["image_path"] = s.image_path;
  j["wall_distance"] = s.wall_distance;
  j["room_id"] = s.room_id;
  j["building_id"] = s.building_id;
  j["mode"] = s.mode;
  j["session_id"] = s.session_id;
  j["split"] = s.split;
  if (s.grid_cell) j["grid_cell"] = *s.grid_cell;
  if (s.grid_cols) j["grid_cols"] = *s.grid_cols;
  if (s.heading_id) j["heading_id"] = *s.heading_id;
  if (s.trajectory_id) j["trajectory_id"] = *s.trajectory_id;
  if (s.timestamp) j["timestamp"] = *s.timestamp;
  return j;
}

inline Sample sample_from_json(const json& j) {
  Sample s;
  s.id = j.at("id").get<std::string>();
  s.audio_path = j.at("audio_path").get<std::string>();
  if (j.contains("image_path")) s.image_path = j["image_path"].get<std::string>();
  s.wall_distance = j.at("wall_distance").get<double>();
  s.room_id = j.at("room_id").get<int>();
  s.building_id = j.at("building_id").get<int>();
  s.mode = j.at("mode").get<std::string>();
  s.session_id = j.at("session_id").get<int>();
  s.split = j.at("split").get<std::string>();
  if (j.contains("grid_cell")) s.grid_cell = j["grid_cell"].get<int>();
  if (j.contains("grid_cols")) s.grid_cols = j["grid_cols"].get<int>();
  if (j.contains("heading_id")) s.heading_id = j["heading_id"].get<int>();
  if (j.contains("trajectory_id")) s.trajectory_id = j["trajectory_id"].get<int>();
  if (j.contains("timestamp")) s.timestamp = j["timestamp"].get<double>();
  if (s.wall_distance <= 0.0)
    throw std::runtime_error("manifest: sample " + s.id +
                             " has nonpositive wall_distance");
  return s;
}

// Whole key-groups must land in a single split. Violations are hard errors.
inline void validate_split_disjointness(const Manifest& m) {
  std::map<std::string, std::string> group_split;
  std::set<std::string> ids;
  for (const auto& s : m.samples) {
    if (!ids.insert(s.id).second)
      throw std::runtime_error("manifest: duplicate id " + s.id);
    std::string key;
    if (m.split_key == "room") {
      key = std::to_string(s.room_id);
    } else if (m.split_key == "building") {
      key = std::to_string(s.building_id);
    } else if (m.split_key == "heading") {
      key = std::to_string(s.room_id) + "/" +
            std::to_string(s.heading_id.value_or(-1));
    } else if (m.split_key == "session") {
      key = std::to_string(s.room_id) + "/" + std::to_string(s.session_id);
    } else {
      throw std::runtime_error("manifest: unknown split_key " + m.split_key);
    }
    auto [it, inserted] = group_split.emplace(key, s.split);
    if (!inserted && it->second != s.split)
      throw std::runtime_error("manifest: split leak, " + m.split_key +
                               " group " + key + " appears in '" + it->second +
                               "' and '" + s.split + "'");
  }
}

// One JSON object per line; the first line is a header object.
inline void write_manifest(const std::string& path, const Manifest& m) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("manifest: cannot open " + path);
  json header;
  header["schema_version"] = m.schema_version;
  header["split_key"] = m.split_key;
  f << header.dump() << "\n";
  for (const auto& s : m.samples) f << sample_to_json(s).dump() << "\n";
}

inline Manifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("manifest: cannot open " + path);
  Manifest m;
  std::string line;
  if (!std::getline(f, line))
    throw std::runtime_error("manifest: empty file " + path);
  json header = json::parse(line);
  m.schema_version = header.at("schema_version").get<int>();
  if (m.schema_version != kManifestSchemaVersion)
    throw std::runtime_error("manifest: unsupported schema version");
  m.split_key = header.value("split_key", "room");
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    m.samples.push_back(sample_from_json(json::parse(line)));
  }
  validate_split_disjointness(m);
  return m;
}

// ------------------------------------------------------------------ Splits

// Assigns whole key-groups to splits with the given fractions. Groups are
// shuffled with the seed; counts use largest-remainder rounding with at
// least one group per nonzero-fraction split.
inline void assign_splits(Manifest& m, const std::string& key,
                          const std::vector<double>& fractions, uint64_t seed) {
  static const char* kSplitNames[3] = {"train", "val", "test"};
  if (fractions.empty() || fractions.size() > 3)
    throw std::invalid_argument("assign_splits: need 1..3 fractions");
  double total = 0.0;
  for (double f : fractions) total += f;
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("assign_splits: fractions must sum to 1");

  auto group_of = [&](const Sample& s) -> std::string {
    if (key == "room") return std::to_string(s.room_id);
    if (key == "building") return std::to_string(s.building_id);
    if (key == "heading")
      return std::to_string(s.room_id) + "/" +
             std::to_string(s.heading_id.value_or(-1));
    throw std::invalid_argument("assign_splits: unknown key " + key);
  };

  std::vector<std::string> groups;
  for (const auto& s : m.samples) {
    std::string g = group_of(s);
    if (std::find(groups.begin(), groups.end(), g) == groups.end())
      groups.push_back(g);
  }
  size_t n_nonzero = 0;
  for (double f : fractions)
    if (f > 0.0) ++n_nonzero;
  if (groups.size() < n_nonzero)
    throw std::invalid_argument("assign_splits: fewer groups than splits");

  Rng rng(seed);
  rng.shuffle(groups);

  const size_t n = groups.size();
  std::vector<size_t> counts(fractions.size(), 0);
  std::vector<double> remainders(fractions.size(), 0.0);
  size_t assigned = 0;
  for (size_t i = 0; i < fractions.size(); ++i) {
    const double ideal = fractions[i] * static_cast<double>(n);
    counts[i] = static_cast<size_t>(ideal);
    remainders[i] = ideal - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < n) {
    size_t best = 0;
    for (size_t i = 1; i < fractions.size(); ++i)
      if (remainders[i] > remainders[best]) best = i;
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }
  for (size_t i = 0; i < fractions.size(); ++i) {
    if (fractions[i] > 0.0 && counts[i] == 0) {
      size_t donor = std::max_element(counts.begin(), counts.end()) -
                     counts.begin();
      --counts[donor];
      ++counts[i];
    }
  }

  std::map<std::string, std::string> split_of;
  size_t idx = 0;
  for (size_t i = 0; i < fractions.size(); ++i)
    for (size_t k = 0; k < counts[i]; ++k) split_of[groups[idx++]] = kSplitNames[i];

  for (auto& s : m.samples) s.split = split_of.at(group_of(s));
  m.split_key = key;
  validate_split_disjointness(m);
}

// ---------------------------------------------------------------- Mixing

// out = ambient + gain * distractor, with the distractor looped or cropped
// to the ambient length. Peak-normalized to 0.9 only when the sum clips.
inline dsp::Waveform mix_distractor(const dsp::Waveform& ambient,
                                    const dsp::Waveform& distractor,
                                    double gain) {
  if (ambient.sample_rate != distractor.sample_rate)
    throw std::invalid_argument("mix: sample rate mismatch");
  if (ambient.num_channels() != 1 || distractor.num_channels() != 1)
    throw std::invalid_argument("mix: expected mono inputs");
  if (distractor.num_samples() == 0)
    throw std::invalid_argument("mix: empty distractor");
  const auto& a = ambient.mono();
  const auto& d = distractor.mono();
  dsp::Waveform out;
  out.sample_rate = ambient.sample_rate;
  out.channels.resize(1);
  auto& o = out.channels[0];
  o.resize(a.size());
  for (size_t i = 0; i < a.size(); ++i) o[i] = a[i] + gain * d[i % d.size()];
  double peak = 0.0;
  for (double v : o) peak = std::max(peak, std::abs(v));
  if (peak > 0.9) {
    const double s = 0.9 / peak;
    for (auto& v : o) v *= s;
  }
  return out;
}

}  // namespace ambient::dataio

#endif  // AMBIENT_DATAIO_HPP_
