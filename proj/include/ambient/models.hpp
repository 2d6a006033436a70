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
// Depth-estimation task models: feature extraction from manifests, task
// datasets, the scaled encoders with their MLP heads, the training loop,
// checkpoints, k-means binning and the finite-difference gradient checker.

#ifndef AMBIENT_MODELS_HPP_
#define AMBIENT_MODELS_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ambient/dataio.hpp"
#include "ambient/dsp.hpp"
#include "ambient/eval.hpp"
#include "ambient/nn.hpp"
#include "ambient/rng.hpp"
#include "ambient/threadpool.hpp"

namespace ambient::models {

using json = nlohmann::json;

enum class Task {
  kObstacle,
  kRelOrder,
  kRelRatio,
  kRelRatioClass,
  kAbsDepth,
  kAbsDepthClass,
  kCondDepth,
  kLocalize,
};

enum class Modality { kAudio, kVision };

inline Task parse_task(const std::string& s) {
  if (s == "obstacle") return Task::kObstacle;
  if (s == "relative-order") return Task::kRelOrder;
  if (s == "relative-ratio") return Task::kRelRatio;
  if (s == "relative-ratio-class") return Task::kRelRatioClass;
  if (s == "absolute-depth") return Task::kAbsDepth;
  if (s == "absolute-depth-class") return Task::kAbsDepthClass;
  if (s == "conditional-depth") return Task::kCondDepth;
  if (s == "localize") return Task::kLocalize;
  throw std::invalid_argument("unknown task: " + s);
}

inline std::string task_name(Task t) {
  switch (t) {
    case Task::kObstacle: return "obstacle";
    case Task::kRelOrder: return "relative-order";
    case Task::kRelRatio: return "relative-ratio";
    case Task::kRelRatioClass: return "relative-ratio-class";
    case Task::kAbsDepth: return "absolute-depth";
    case Task::kAbsDepthClass: return "absolute-depth-class";
    case Task::kCondDepth: return "conditional-depth";
    case Task::kLocalize: return "localize";
  }
  return "?";
}

inline bool is_pair_task(Task t) {
  return t == Task::kRelOrder || t == Task::kRelRatio ||
         t == Task::kRelRatioClass;
}
inline bool is_class_task(Task t) {
  return t == Task::kRelRatioClass || t == Task::kAbsDepthClass ||
         t == Task::kLocalize;
}

// --------------------------------------------------------- Depth normalizer

// Maps train-split depths into [-0.5, 0.5]; the inverse is exact.
struct DepthNormalizer {
  double d_min = 0.0;
  double d_max = 1.0;

  void fit(const std::vector<double>& depths) {
    if (depths.empty()) throw std::invalid_argument("normalizer: no depths");
    d_min = d_max = depths[0];
    for (double d : depths) {
      d_min = std::min(d_min, d);
      d_max = std::max(d_max, d);
    }
    if (d_max <= d_min) d_max = d_min + 1.0;
  }
  double normalize(double d) const {
    return (d - d_min) / (d_max - d_min) - 0.5;
  }
  double denormalize(double z) const {
    return (z + 0.5) * (d_max - d_min) + d_min;
  }
};

// ------------------------------------------------------------------ BinSet

struct BinSet {
  std::vector<double> centers;  // ascending

  int assign(double v) const {
    if (centers.empty()) throw std::logic_error("BinSet not fitted");
    int best = 0;
    double bd = std::abs(v - centers[0]);
    for (size_t i = 1; i < centers.size(); ++i) {
      const double d = std::abs(v - centers[i]);
      if (d < bd) {
        bd = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  }
};

// Lloyd's algorithm with k-means++ seeding. Runs `restarts` seeded attempts
// and keeps the lowest-inertia result, which makes the small-input global
// optimum reliable.
inline BinSet kmeans_fit(const std::vector<double>& values, int k,
                         uint64_t seed, std::vector<double>* inertia_trace = nullptr,
                         int restarts = 8) {
  if (k < 2) throw std::invalid_argument("kmeans: k must be >= 2");
  if (static_cast<int>(values.size()) < k)
    throw std::invalid_argument("kmeans: fewer values than clusters");

  std::vector<double> best_centers;
  double best_inertia = std::numeric_limits<double>::infinity();

  for (int attempt = 0; attempt < restarts; ++attempt) {
    Rng rng(Rng::derive(seed, static_cast<uint64_t>(attempt)));
    // k-means++ seeding
    std::vector<double> centers;
    centers.push_back(values[rng.bounded(values.size())]);
    std::vector<double> d2(values.size());
    while (static_cast<int>(centers.size()) < k) {
      double total = 0.0;
      for (size_t i = 0; i < values.size(); ++i) {
        double dmin = std::numeric_limits<double>::infinity();
        for (double c : centers)
          dmin = std::min(dmin, (values[i] - c) * (values[i] - c));
        d2[i] = dmin;
        total += dmin;
      }
      if (total <= 0.0) {
        centers.push_back(values[rng.bounded(values.size())]);
        continue;
      }
      double r = rng.uniform() * total;
      size_t pick = 0;
      for (; pick + 1 < values.size(); ++pick) {
        r -= d2[pick];
        if (r <= 0.0) break;
      }
      centers.push_back(values[pick]);
    }

    std::vector<int> assign(values.size(), 0);
    double prev_inertia = std::numeric_limits<double>::infinity();
    std::vector<double> trace;
    for (int iter = 0; iter < 300; ++iter) {
      double inertia = 0.0;
      for (size_t i = 0; i < values.size(); ++i) {
        int bi = 0;
        double bd = std::abs(values[i] - centers[0]);
        for (int c = 1; c < k; ++c) {
          const double d = std::abs(values[i] - centers[c]);
          if (d < bd) {
            bd = d;
            bi = c;
          }
        }
        assign[i] = bi;
        inertia += bd * bd;
      }
      trace.push_back(inertia);
      std::vector<double> sum(k, 0.0);
      std::vector<int> cnt(k, 0);
      for (size_t i = 0; i < values.size(); ++i) {
        sum[assign[i]] += values[i];
        ++cnt[assign[i]];
      }
      for (int c = 0; c < k; ++c) {
        if (cnt[c] > 0) {
          centers[c] = sum[c] / cnt[c];
        } else {
          // reseed an empty cluster at the point farthest from its center
          size_t far = 0;
          double fd = -1.0;
          for (size_t i = 0; i < values.size(); ++i) {
            const double d = std::abs(values[i] - centers[assign[i]]);
            if (d > fd) {
              fd = d;
              far = i;
            }
          }
          centers[c] = values[far];
        }
      }
      if (prev_inertia < std::numeric_limits<double>::infinity()) {
        const double rel = std::abs(prev_inertia - inertia) /
                           std::max(prev_inertia, 1e-300);
        if (rel < 1e-6) break;
      }
      prev_inertia = inertia;
    }
    // final inertia with the last centers
    double inertia = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c)
        bd = std::min(bd, std::abs(values[i] - centers[c]));
      inertia += bd * bd;
    }
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_centers = centers;
      if (inertia_trace) *inertia_trace = trace;
    }
  }
  std::sort(best_centers.begin(), best_centers.end());
  BinSet bins;
  bins.centers = std::move(best_centers);
  return bins;
}

// --------------------------------------------------------- Depth embedding

// Sinusoidal encoding with sin/cos pairs at geometric frequencies, base
// 10000. x = 0 gives (0, 1, 0, 1, ...).
inline std::vector<double> depth_embedding(double x, int dim = 128) {
  std::vector<double> e(dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(dim));
    e[2 * i] = std::sin(x * freq);
    e[2 * i + 1] = std::cos(x * freq);
  }
  return e;
}

// ----------------------------------------------------------- Feature store

struct DspConfig {
  double mel_low_hz = 0.0;
  double mel_high_hz = 8000.0;
  double log_offset = dsp::kDefaultLogOffset;
  int patch_stride_frames = dsp::kPatchFrames;
};

inline constexpr int kAudioH = dsp::kPatchFrames;  // 96
inline constexpr int kAudioW = dsp::kMelBins;      // 64
inline constexpr int kVisionH = 64;
inline constexpr int kVisionW = 64;
inline constexpr float kDepthViewScale = 0.1f;  // meters -> model input

struct ClipFeatures {
  std::string id;
  std::string split;
  std::string mode;
  int room_id = 0, building_id = 0, session_id = 0;
  int grid_cell = -1, grid_cols = -1, heading_id = -1, trajectory_id = -1;
  double timestamp = 0.0;
  double wall_distance = 0.0;
  int frames = 0;
  std::vector<float> mel_energy;  // frames x 64, pre-log
  std::vector<float> image;       // kVisionH x kVisionW, scaled; may be empty
};

struct FeatureStore {
  DspConfig dsp_cfg;
  std::vector<ClipFeatures> clips;

  std::vector<int> split_indices(const std::string& split) const {
    std::vector<int> out;
    for (size_t i = 0; i < clips.size(); ++i)
      if (clips[i].split == split) out.push_back(static_cast<int>(i));
    return out;
  }
};

inline FeatureStore build_feature_store(const dataio::Manifest& manifest,
                                        const std::string& root,
                                        bool need_audio, bool need_vision,
                                        const DspConfig& cfg = {}) {
  FeatureStore store;
  store.dsp_cfg = cfg;
  store.clips.resize(manifest.samples.size());
  const auto fb = dsp::make_mel_filterbank(dsp::kMelBins, cfg.mel_low_hz,
                                           cfg.mel_high_hz);
  parallel_for(0, static_cast<int64_t>(manifest.samples.size()),
               [&](int64_t i) {
    const auto& s = manifest.samples[i];
    ClipFeatures c;
    c.id = s.id;
    c.split = s.split;
    c.mode = s.mode;
    c.room_id = s.room_id;
    c.building_id = s.building_id;
    c.session_id = s.session_id;
    c.grid_cell = s.grid_cell.value_or(-1);
    c.grid_cols = s.grid_cols.value_or(-1);
    c.heading_id = s.heading_id.value_or(-1);
    c.trajectory_id = s.trajectory_id.value_or(-1);
    c.timestamp = s.timestamp.value_or(0.0);
    c.wall_distance = s.wall_distance;
    if (need_audio) {
      auto w = dataio::read_wav(root + "/" + s.audio_path);
      w = dsp::to_mono(w);
      if (w.sample_rate != dsp::kSampleRate)
        w = dsp::resample(w, dsp::kSampleRate);
      auto energies = dsp::mel_energies(dsp::stft(w), fb);
      c.frames = energies.frames;
      c.mel_energy.resize(energies.v.size());
      for (size_t j = 0; j < energies.v.size(); ++j)
        c.mel_energy[j] = static_cast<float>(energies.v[j]);
    }
    if (need_vision) {
      if (s.image_path.empty())
        throw std::runtime_error("sample " + s.id + " has no image");
      auto img = dataio::read_depth_raw(root + "/" + s.image_path);
      if (img.height != kVisionH || img.width != kVisionW)
        throw std::runtime_error("depth view must be 64x64: " + s.image_path);
      c.image.resize(img.meters.size());
      for (size_t j = 0; j < img.meters.size(); ++j)
        c.image[j] = img.meters[j] * kDepthViewScale;
    }
    store.clips[i] = std::move(c);
  });
  return store;
}

// Materialized feature cache written by the `preprocess` subcommand.
inline void save_feature_store(const std::string& path,
                               const FeatureStore& store) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  auto wr_u32 = [&](uint32_t v) { f.write(reinterpret_cast<char*>(&v), 4); };
  auto wr_f64 = [&](double v) { f.write(reinterpret_cast<char*>(&v), 8); };
  auto wr_str = [&](const std::string& s) {
    wr_u32(static_cast<uint32_t>(s.size()));
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
  };
  f.write("AMBFEAT1", 8);
  wr_f64(store.dsp_cfg.mel_low_hz);
  wr_f64(store.dsp_cfg.mel_high_hz);
  wr_f64(store.dsp_cfg.log_offset);
  wr_u32(static_cast<uint32_t>(store.dsp_cfg.patch_stride_frames));
  wr_u32(static_cast<uint32_t>(store.clips.size()));
  for (const auto& c : store.clips) {
    wr_str(c.id);
    wr_str(c.split);
    wr_str(c.mode);
    int32_t ints[8] = {c.room_id, c.building_id, c.session_id, c.grid_cell,
                       c.grid_cols, c.heading_id, c.trajectory_id, c.frames};
    f.write(reinterpret_cast<char*>(ints), sizeof(ints));
    wr_f64(c.timestamp);
    wr_f64(c.wall_distance);
    wr_u32(static_cast<uint32_t>(c.mel_energy.size()));
    f.write(reinterpret_cast<const char*>(c.mel_energy.data()),
            static_cast<std::streamsize>(c.mel_energy.size() * 4));
    wr_u32(static_cast<uint32_t>(c.image.size()));
    f.write(reinterpret_cast<const char*>(c.image.data()),
            static_cast<std::streamsize>(c.image.size() * 4));
  }
}

inline FeatureStore load_feature_store(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "AMBFEAT1", 8) != 0)
    throw std::runtime_error("bad feature store magic in " + path);
  auto rd_u32 = [&] {
    uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto rd_f64 = [&] {
    double v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  auto rd_str = [&] {
    uint32_t n = rd_u32();
    std::string s(n, '\0');
    f.read(s.data(), n);
    return s;
  };
  FeatureStore store;
  store.dsp_cfg.mel_low_hz = rd_f64();
  store.dsp_cfg.mel_high_hz = rd_f64();
  store.dsp_cfg.log_offset = rd_f64();
  store.dsp_cfg.patch_stride_frames = static_cast<int>(rd_u32());
  store.clips.resize(rd_u32());
  for (auto& c : store.clips) {
    c.id = rd_str();
    c.split = rd_str();
    c.mode = rd_str();
    int32_t ints[8];
    f.read(reinterpret_cast<char*>(ints), sizeof(ints));
    c.room_id = ints[0];
    c.building_id = ints[1];
    c.session_id = ints[2];
    c.grid_cell = ints[3];
    c.grid_cols = ints[4];
    c.heading_id = ints[5];
    c.trajectory_id = ints[6];
    c.frames = ints[7];
    c.timestamp = rd_f64();
    c.wall_distance = rd_f64();
    c.mel_energy.resize(rd_u32());
    f.read(reinterpret_cast<char*>(c.mel_energy.data()),
           static_cast<std::streamsize>(c.mel_energy.size() * 4));
    c.image.resize(rd_u32());
    f.read(reinterpret_cast<char*>(c.image.data()),
           static_cast<std::streamsize>(c.image.size() * 4));
  }
  if (!f) throw std::runtime_error("truncated feature store " + path);
  return store;
}

// ------------------------------------------------------------ Task dataset

struct Item {
  int a = -1, b = -1;          // clip indices (b used by pair/cond tasks)
  int origin_a = 0, origin_b = 0;
  double d1 = 0.0, d2 = 0.0;   // wall distances (meters)
  int cls = -1;                // class index for classification tasks
  double ref_depth = 0.0;      // conditional task
};

struct TaskDataset {
  std::vector<Item> train, val, test;
  std::array<uint8_t, dsp::kMelBins> mel_keep{};  // 1 = keep
  bool masked = false;
  bool ablate_input = false;
};

struct PairingConfig {
  int pairs_train = 2000;
  int pairs_val = 300;
  int pairs_test = 500;
  double tie_epsilon = 0.01;   // meters; closer pairs are excluded
  double min_separation = 0.0;
};

namespace detail {

inline std::string pair_group_key(const ClipFeatures& c) {
  if (c.mode == "motion")
    return std::to_string(c.building_id) + "/" + std::to_string(c.trajectory_id);
  return "room" + std::to_string(c.room_id);
}

inline std::vector<Item> sample_pairs(const FeatureStore& store,
                                      const std::vector<int>& clip_idx,
                                      int count, double min_gap, Rng& rng) {
  std::map<std::string, std::vector<int>> groups;
  for (int i : clip_idx) groups[pair_group_key(store.clips[i])].push_back(i);
  std::vector<const std::vector<int>*> usable;
  for (const auto& [key, v] : groups)
    if (v.size() >= 2) usable.push_back(&v);
  if (usable.empty())
    throw std::runtime_error("pair sampling: no group with >= 2 clips");
  std::vector<Item> items;
  items.reserve(count);
  int guard = 0;
  while (static_cast<int>(items.size()) < count) {
    if (++guard > 200 * count)
      throw std::runtime_error("pair sampling: separation constraint too strict");
    const auto& g = *usable[rng.bounded(usable.size())];
    const int a = g[rng.bounded(g.size())];
    const int b = g[rng.bounded(g.size())];
    if (a == b) continue;
    const auto& ca = store.clips[a];
    const auto& cb = store.clips[b];
    if (std::abs(ca.wall_distance - cb.wall_distance) < min_gap) continue;
    Item it;
    it.a = a;
    it.b = b;
    it.d1 = ca.wall_distance;
    it.d2 = cb.wall_distance;
    it.origin_a = ca.frames > kAudioH
                      ? static_cast<int>(rng.bounded(ca.frames - kAudioH + 1))
                      : 0;
    it.origin_b = cb.frames > kAudioH
                      ? static_cast<int>(rng.bounded(cb.frames - kAudioH + 1))
                      : 0;
    items.push_back(it);
  }
  return items;
}

inline std::vector<Item> enumerate_singles(const FeatureStore& store,
                                           const std::vector<int>& clip_idx,
                                           int stride) {
  std::vector<Item> items;
  for (int i : clip_idx) {
    const auto& c = store.clips[i];
    const int max_origin = c.frames - kAudioH;
    if (!c.mel_energy.empty() && max_origin < 0) continue;
    const int span = c.mel_energy.empty() ? 0 : max_origin;
    for (int o = 0;; o += stride) {
      if (o > span) break;
      Item it;
      it.a = i;
      it.origin_a = o;
      it.d1 = c.wall_distance;
      it.cls = c.grid_cell;
      items.push_back(it);
      if (c.mel_energy.empty()) break;  // vision: one item per clip
    }
  }
  return items;
}

}  // namespace detail

// --------------------------------------------------------------- Examples

template <typename T>
struct ExampleT {
  std::vector<T> x1;
  std::vector<T> x2;         // pair/conditional second input
  double target = 0.0;       // binary label or regression target
  int cls = -1;              // class index
  double ref_depth = 0.0;    // conditional reference depth (meters)
};

using Example = ExampleT<float>;

// ------------------------------------------------------------ Model config

struct ModelConfig {
  Task task = Task::kObstacle;
  Modality modality = Modality::kAudio;
  int mlp_hidden = 64;
  int n_classes = 10;             // bins or grid cells
  double near_threshold = 0.5;    // meters, inclusive
  double log_offset = dsp::kDefaultLogOffset;

  int input_h() const { return modality == Modality::kAudio ? kAudioH : kVisionH; }
  int input_w() const { return modality == Modality::kAudio ? kAudioW : kVisionW; }
};

// ------------------------------------------------------------- Task model

struct Prediction {
  double score = 0.0;              // probability for binary tasks
  double value = 0.0;              // raw head output for regression tasks
  std::vector<double> dist;        // class distribution
};

template <typename T>
class TaskModelT {
 public:
  ModelConfig cfg;
  nn::ConvEncoder<T> enc;
  nn::Mlp<T> head;
  nn::Linear<T> widen;  // 128 -> 512 probe projection (vision interface)
  DepthNormalizer norm;
  BinSet bins;

  struct Workspace {
    typename nn::ConvEncoder<T>::Cache e1, e2;
    typename nn::Mlp<T>::Cache h;
  };

  TaskModelT(const ModelConfig& c, uint64_t init_seed)
      : cfg(c), enc(c.input_h(), c.input_w()), head(head_dims(c)),
        widen(nn::ConvEncoder<T>::kFeatDim, 512) {
    Rng rng(init_seed);
    enc.init(rng);
    head.init(rng);
    widen.init(rng);
  }

  static std::vector<int> head_dims(const ModelConfig& c) {
    const int f = nn::ConvEncoder<T>::kFeatDim;
    const int h = c.mlp_hidden;
    switch (c.task) {
      case Task::kObstacle: return {f, h, 1};
      case Task::kRelOrder: return {2 * f, h, 1};
      case Task::kRelRatio: return {2 * f, h, 1};
      case Task::kRelRatioClass: return {2 * f, h, c.n_classes};
      case Task::kAbsDepth: return {f, h, 1};
      case Task::kAbsDepthClass: return {f, h, c.n_classes};
      case Task::kCondDepth: return {2 * f, h, h, 1};
      case Task::kLocalize: return {f, h, c.n_classes};
    }
    throw std::logic_error("unreachable");
  }

  nn::ParamList<T> trainable_params() {
    nn::ParamList<T> p;
    enc.collect("enc", p);
    head.collect("head", p);
    return p;
  }

  nn::ParamList<T> all_params() {
    nn::ParamList<T> p = trainable_params();
    widen.collect("widen", p);
    return p;
  }

  void zero_grads() {
    for (auto& p : trainable_params()) p.grad->zero();
  }

  uint64_t backbone_checksum() {
    nn::ParamList<T> p;
    enc.collect("enc", p);
    return nn::params_checksum(p);
  }

  // Builds the head input (and remembers layout for backward).
  double loss_and_grad(const ExampleT<T>& ex, Workspace& ws) {
    const int f = nn::ConvEncoder<T>::kFeatDim;
    std::vector<T> hin;
    std::vector<T> f1 = enc.forward(ex.x1.data(), ws.e1);
    std::vector<T> f2;
    if (is_pair_task(cfg.task) || cfg.task == Task::kCondDepth) {
      f2 = enc.forward(ex.x2.data(), ws.e2);
      hin.resize(2 * f);
      std::copy(f1.begin(), f1.end(), hin.begin());
      if (cfg.task == Task::kCondDepth) {
        const auto emb = depth_embedding(ex.ref_depth, f);
        for (int i = 0; i < f; ++i)
          hin[f + i] = f2[i] + static_cast<T>(emb[i]);
      } else {
        std::copy(f2.begin(), f2.end(), hin.begin() + f);
      }
    } else {
      hin = f1;
    }

    std::vector<T> out(head.out_dim());
    head.forward(hin.data(), out.data(), ws.h);

    double loss = 0.0;
    std::vector<T> dout(head.out_dim(), T(0));
    switch (cfg.task) {
      case Task::kObstacle:
      case Task::kRelOrder:
        loss = nn::bce_with_logits(out[0], ex.target, &dout[0]);
        break;
      case Task::kRelRatio:
      case Task::kAbsDepth:
      case Task::kCondDepth:
        loss = nn::l1_loss(out[0], ex.target, &dout[0]);
        break;
      case Task::kRelRatioClass:
      case Task::kAbsDepthClass:
      case Task::kLocalize:
        loss = nn::softmax_ce(out.data(), head.out_dim(), ex.cls, dout.data());
        break;
    }

    std::vector<T> dhin(hin.size());
    head.backward(dout.data(), dhin.data(), ws.h);
    if (is_pair_task(cfg.task) || cfg.task == Task::kCondDepth) {
      std::vector<T> d1v(dhin.begin(), dhin.begin() + f);
      std::vector<T> d2v(dhin.begin() + f, dhin.end());
      enc.backward(d1v, ws.e1);
      enc.backward(d2v, ws.e2);  // depth embedding is constant
    } else {
      enc.backward(dhin, ws.e1);
    }
    return loss;
  }

  Prediction predict(const ExampleT<T>& ex, Workspace& ws) const {
    const int f = nn::ConvEncoder<T>::kFeatDim;
    std::vector<T> hin;
    std::vector<T> f1 = enc.forward(ex.x1.data(), ws.e1);
    if (is_pair_task(cfg.task) || cfg.task == Task::kCondDepth) {
      std::vector<T> f2 = enc.forward(ex.x2.data(), ws.e2);
      hin.resize(2 * f);
      std::copy(f1.begin(), f1.end(), hin.begin());
      if (cfg.task == Task::kCondDepth) {
        const auto emb = depth_embedding(ex.ref_depth, f);
        for (int i = 0; i < f; ++i)
          hin[f + i] = f2[i] + static_cast<T>(emb[i]);
      } else {
        std::copy(f2.begin(), f2.end(), hin.begin() + f);
      }
    } else {
      hin = f1;
    }
    std::vector<T> out(head.out_dim());
    head.forward(hin.data(), out.data(), ws.h);

    Prediction p;
    switch (cfg.task) {
      case Task::kObstacle:
      case Task::kRelOrder:
        p.score = nn::sigmoid(static_cast<double>(out[0]));
        break;
      case Task::kRelRatio:
      case Task::kAbsDepth:
      case Task::kCondDepth:
        p.value = static_cast<double>(out[0]);
        break;
      case Task::kRelRatioClass:
      case Task::kAbsDepthClass:
      case Task::kLocalize: {
        std::vector<double> probs;
        nn::softmax_ce(out.data(), head.out_dim(), 0, static_cast<T*>(nullptr),
                       &probs);
        p.dist = std::move(probs);
        break;
      }
    }
    return p;
  }

  // Frozen feature for linear probing: encoder GAP output; the vision
  // modality additionally widens to the 512-d probe interface.
  std::vector<T> probe_feature(const T* input, Workspace& ws,
                               bool widen_feature) const {
    std::vector<T> f = enc.forward(input, ws.e1);
    if (!widen_feature) return f;
    std::vector<T> wide(widen.out);
    typename nn::Linear<T>::Cache c;
    widen.forward(f.data(), wide.data(), c);
    return wide;
  }
};

using TaskModel = TaskModelT<float>;

// ------------------------------------------------------- Example assembly

namespace detail {

template <typename T>
void write_patch(const ClipFeatures& c, int origin, double gain2,
                 const TaskDataset& ds, double log_offset, T* out) {
  const double floor_value = std::log(log_offset);
  for (int t = 0; t < kAudioH; ++t) {
    const float* row = c.mel_energy.data() + size_t(origin + t) * kAudioW;
    T* orow = out + size_t(t) * kAudioW;
    for (int m = 0; m < kAudioW; ++m) {
      if (ds.masked && !ds.mel_keep[m]) {
        orow[m] = static_cast<T>(floor_value);
      } else {
        orow[m] = static_cast<T>(
            std::log(gain2 * static_cast<double>(row[m]) + log_offset));
      }
    }
  }
}

}  // namespace detail

// Builds a model input from an item. A non-null rng enables the training
// augmentation (random 0.96 s crop, amplitude gain in [0.5, 1.5]); eval
// uses the item's stored origins unmodified.
template <typename T>
ExampleT<T> make_example(const TaskModelT<T>& model, const FeatureStore& store,
                         const TaskDataset& ds, const Item& item,
                         Rng* rng = nullptr) {
  ExampleT<T> ex;
  const double off = store.dsp_cfg.log_offset;
  auto fill_input = [&](int clip_idx, int origin, std::vector<T>& dst) {
    const auto& c = store.clips[clip_idx];
    if (model.cfg.modality == Modality::kAudio) {
      dst.resize(size_t(kAudioH) * kAudioW);
      if (ds.ablate_input) {
        std::fill(dst.begin(), dst.end(), T(0));
        return;
      }
      int o = origin;
      double gain2 = 1.0;
      if (rng != nullptr) {
        o = c.frames > kAudioH
                ? static_cast<int>(rng->bounded(c.frames - kAudioH + 1))
                : 0;
        const double g = rng->uniform(0.5, 1.5);
        gain2 = g * g;
      }
      detail::write_patch(c, o, gain2, ds, off, dst.data());
    } else {
      if (c.image.empty())
        throw std::runtime_error("clip " + c.id + " has no image features");
      dst.assign(c.image.begin(), c.image.end());
      if (ds.ablate_input) std::fill(dst.begin(), dst.end(), T(0));
    }
  };

  fill_input(item.a, item.origin_a, ex.x1);
  if (is_pair_task(model.cfg.task) || model.cfg.task == Task::kCondDepth)
    fill_input(item.b, item.origin_b, ex.x2);

  switch (model.cfg.task) {
    case Task::kObstacle:
      ex.target = item.d1 <= model.cfg.near_threshold ? 1.0 : 0.0;
      break;
    case Task::kRelOrder:
      ex.target = item.d1 < item.d2 ? 1.0 : 0.0;
      break;
    case Task::kRelRatio:
      ex.target = std::log(item.d1 / item.d2);
      break;
    case Task::kAbsDepth:
      ex.target = model.norm.normalize(item.d1);
      break;
    case Task::kCondDepth:
      ex.target = model.norm.normalize(item.d1);
      ex.ref_depth = item.ref_depth;
      break;
    case Task::kRelRatioClass:
    case Task::kAbsDepthClass:
    case Task::kLocalize:
      ex.cls = item.cls;
      break;
  }
  return ex;
}

// ------------------------------------------------------- Dataset assembly

inline TaskDataset build_task_dataset(const FeatureStore& store,
                                      const ModelConfig& cfg, uint64_t seed,
                                      const PairingConfig& pairing = {}) {
  TaskDataset ds;
  ds.mel_keep.fill(1);
  Rng rng(seed);
  const int stride = store.dsp_cfg.patch_stride_frames;

  auto for_split = [&](const std::string& split, std::vector<Item>& out,
                       int pair_count) {
    auto idx = store.split_indices(split);
    if (idx.empty()) return;
    if (is_pair_task(cfg.task)) {
      const double gap = std::max(pairing.tie_epsilon, pairing.min_separation);
      out = detail::sample_pairs(store, idx, pair_count, gap, rng);
    } else {
      out = detail::enumerate_singles(store, idx, stride);
      if (cfg.task == Task::kCondDepth) {
        // attach a same-room reference clip to every item
        std::map<int, std::vector<int>> rooms;
        for (int i : idx) rooms[store.clips[i].room_id].push_back(i);
        std::vector<Item> kept;
        for (auto& it : out) {
          const auto& peers = rooms[store.clips[it.a].room_id];
          std::vector<int> others;
          for (int p : peers)
            if (p != it.a) others.push_back(p);
          if (others.empty()) continue;  // no reference available
          const bool training = split == "train";
          it.b = training
                     ? others[rng.bounded(others.size())]
                     : others.front();
          it.origin_b =
              store.clips[it.b].frames > kAudioH
                  ? static_cast<int>(
                        rng.bounded(store.clips[it.b].frames - kAudioH + 1))
                  : 0;
          it.ref_depth = store.clips[it.b].wall_distance;
          it.d2 = it.ref_depth;
          kept.push_back(it);
        }
        out = std::move(kept);
      }
      if (cfg.task == Task::kLocalize) {
        for (const auto& it : out)
          if (it.cls < 0)
            throw std::runtime_error("localize: sample lacks grid_cell");
      }
    }
  };

  for_split("train", ds.train, pairing.pairs_train);
  for_split("val", ds.val, pairing.pairs_val);
  for_split("test", ds.test, pairing.pairs_test);
  return ds;
}

// Fits the depth normalizer and, for classification-by-regression tasks,
// the k-means bins on train-split targets; assigns bin indices everywhere.
template <typename T>
void fit_targets(TaskModelT<T>& model, TaskDataset& ds, uint64_t seed) {
  std::vector<double> depths;
  for (const auto& it : ds.train) depths.push_back(it.d1);
  if (!depths.empty()) model.norm.fit(depths);

  auto target_of = [&](const Item& it) {
    return model.cfg.task == Task::kRelRatioClass
               ? std::log(it.d1 / it.d2)
               : model.norm.normalize(it.d1);
  };
  if (model.cfg.task == Task::kRelRatioClass ||
      model.cfg.task == Task::kAbsDepthClass) {
    std::vector<double> targets;
    for (const auto& it : ds.train) targets.push_back(target_of(it));
    model.bins = kmeans_fit(targets, model.cfg.n_classes, seed);
    for (auto* v : {&ds.train, &ds.val, &ds.test})
      for (auto& it : *v) it.cls = model.bins.assign(target_of(it));
  }
}

// ------------------------------------------------------------- Evaluation

struct TaskEval {
  std::vector<double> scores;                // binary
  std::vector<int> labels;                   // binary
  std::vector<double> preds, targets;        // regression (denormalized)
  std::vector<std::vector<double>> dists;    // classification
  std::vector<int> true_cls;
  std::vector<std::pair<double, double>> cell_coords;  // localize
};

template <typename T>
TaskEval eval_task(const TaskModelT<T>& model, const FeatureStore& store,
                   const TaskDataset& ds, const std::vector<Item>& items,
                   typename TaskModelT<T>::Workspace& ws) {
  TaskEval ev;
  for (const auto& item : items) {
    const auto ex = make_example(model, store, ds, item, nullptr);
    const auto p = model.predict(ex, ws);
    switch (model.cfg.task) {
      case Task::kObstacle:
      case Task::kRelOrder:
        ev.scores.push_back(p.score);
        ev.labels.push_back(ex.target > 0.5 ? 1 : 0);
        break;
      case Task::kRelRatio:
        ev.preds.push_back(p.value);
        ev.targets.push_back(ex.target);
        break;
      case Task::kAbsDepth:
      case Task::kCondDepth:
        ev.preds.push_back(model.norm.denormalize(p.value));
        ev.targets.push_back(item.d1);
        break;
      case Task::kRelRatioClass:
      case Task::kAbsDepthClass:
      case Task::kLocalize:
        ev.dists.push_back(p.dist);
        ev.true_cls.push_back(ex.cls);
        break;
    }
  }
  if (model.cfg.task == Task::kLocalize) {
    int cols = 0;
    for (const auto& c : store.clips) cols = std::max(cols, c.grid_cols);
    if (cols <= 0) cols = 1;
    for (int cell = 0; cell < model.cfg.n_classes; ++cell)
      ev.cell_coords.push_back({static_cast<double>(cell / cols),
                                static_cast<double>(cell % cols)});
  }
  return ev;
}

template <typename T>
std::map<std::string, double> task_metrics(const TaskModelT<T>& model,
                                           const TaskEval& ev) {
  std::map<std::string, double> m;
  switch (model.cfg.task) {
    case Task::kObstacle:
    case Task::kRelOrder: {
      m["accuracy"] = eval::accuracy(ev.scores, ev.labels);
      bool has_pos = false, has_neg = false;
      for (int l : ev.labels) (l ? has_pos : has_neg) = true;
      if (has_pos && has_neg)
        m["average_precision"] = eval::average_precision(ev.scores, ev.labels);
      break;
    }
    case Task::kRelRatio:
    case Task::kAbsDepth:
    case Task::kCondDepth: {
      const auto r = eval::regression_metrics(ev.preds, ev.targets);
      m["mae"] = r.mae;
      m["median_ae"] = r.median_ae;
      if (r.r2_defined) m["r2"] = r.r2;
      break;
    }
    case Task::kRelRatioClass:
    case Task::kAbsDepthClass: {
      const auto c =
          eval::classification_metrics(ev.dists, ev.true_cls, model.bins.centers);
      m["top1"] = c.top1;
      if (c.top5_defined) m["top5"] = c.top5;
      m["avg_bin_distance"] = c.avg_distance;
      break;
    }
    case Task::kLocalize: {
      const auto c = eval::grid_metrics(ev.dists, ev.true_cls, ev.cell_coords);
      m["top1"] = c.top1;
      if (c.top5_defined) m["top5"] = c.top5;
      m["avg_grid_distance"] = c.avg_distance;
      break;
    }
  }
  return m;
}

// Higher-is-better scalar used for best-checkpoint selection.
template <typename T>
double validation_score(const TaskModelT<T>& model, const TaskEval& ev) {
  switch (model.cfg.task) {
    case Task::kObstacle:
    case Task::kRelOrder:
      return eval::accuracy(ev.scores, ev.labels);
    case Task::kRelRatio:
    case Task::kAbsDepth:
    case Task::kCondDepth:
      return -eval::regression_metrics(ev.preds, ev.targets).mae;
    case Task::kRelRatioClass:
    case Task::kAbsDepthClass:
    case Task::kLocalize: {
      double correct = 0.0;
      for (size_t i = 0; i < ev.dists.size(); ++i)
        correct += eval::argmax_index(ev.dists[i]) == ev.true_cls[i];
      return correct / std::max<size_t>(1, ev.dists.size());
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------- Training

struct OptimizerConfig {
  std::string kind = "sgd";  // sgd | adam
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int epochs = 60;
  int batch_size = 64;
  uint64_t seed = 0;
};

struct TrainResult {
  int best_epoch = -1;
  double best_val = 0.0;
  std::vector<double> loss_curve;  // mean train loss per epoch
  std::vector<double> val_curve;
};

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename T>
std::vector<std::vector<T>> snapshot_params(nn::ParamList<T>& params) {
  std::vector<std::vector<T>> out;
  out.reserve(params.size());
  for (auto& p : params) out.push_back(p.value->data);
  return out;
}

template <typename T>
void restore_params(nn::ParamList<T>& params,
                    const std::vector<std::vector<T>>& snap) {
  for (size_t i = 0; i < params.size(); ++i) params[i].value->data = snap[i];
}

}  // namespace detail

// SGD/Adam with per-step cosine decay; keeps the best-validation parameters.
// Deterministic for a fixed seed: shuffling and augmentation draw from
// seeded streams in a fixed order.
inline TrainResult train_task_model(TaskModel& model, const FeatureStore& store,
                                    TaskDataset& ds,
                                    const OptimizerConfig& opt,
                                    bool verbose = false) {
  if (ds.train.empty()) throw TrainError("training split is empty");
  auto params = model.trainable_params();
  nn::SgdMomentum<float> sgd;
  nn::Adam<float> adam;
  const bool use_adam = opt.kind == "adam";
  if (!use_adam && opt.kind != "sgd")
    throw std::invalid_argument("optimizer kind must be sgd or adam");
  sgd.momentum = opt.momentum;
  sgd.weight_decay = opt.weight_decay;
  adam.weight_decay = opt.weight_decay;

  const int64_t steps_per_epoch =
      (static_cast<int64_t>(ds.train.size()) + opt.batch_size - 1) /
      opt.batch_size;
  nn::CosineSchedule sched{opt.lr, std::max<int64_t>(1, steps_per_epoch * opt.epochs)};

  typename TaskModel::Workspace ws;
  TrainResult result;
  std::vector<std::vector<float>> best;
  int64_t step = 0;

  std::vector<size_t> order(ds.train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    Rng shuffle_rng(Rng::derive(opt.seed, 0x5a5a0000u + epoch));
    Rng aug_rng(Rng::derive(opt.seed, 0xa7a70000u + epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    size_t seen = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(opt.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(opt.batch_size));
      model.zero_grads();
      double batch_loss = 0.0;
      for (size_t i = start; i < end; ++i) {
        const auto ex =
            make_example(model, store, ds, ds.train[order[i]], &aug_rng);
        batch_loss += model.loss_and_grad(ex, ws);
      }
      if (!std::isfinite(batch_loss))
        throw TrainError("non-finite loss at epoch " + std::to_string(epoch) +
                         ", step " + std::to_string(step));
      const float inv = 1.0f / static_cast<float>(end - start);
      for (auto& p : params)
        for (auto& g : p.grad->data) g *= inv;
      const double lr = sched.at(step++);
      if (use_adam)
        adam.step(params, lr);
      else
        sgd.step(params, lr);
      epoch_loss += batch_loss;
      seen += end - start;
    }
    result.loss_curve.push_back(epoch_loss / std::max<size_t>(1, seen));

    double val_score;
    if (!ds.val.empty()) {
      const auto ev = eval_task(model, store, ds, ds.val, ws);
      val_score = validation_score(model, ev);
    } else {
      val_score = -result.loss_curve.back();  // fall back to train loss
    }
    result.val_curve.push_back(val_score);
    if (result.best_epoch < 0 || val_score > result.best_val) {
      result.best_val = val_score;
      result.best_epoch = epoch;
      best = detail::snapshot_params(params);
    }
    if (verbose) {
      std::fprintf(stderr, "epoch %d loss %.4f val %.4f\n", epoch,
                   result.loss_curve.back(), val_score);
    }
  }
  if (!best.empty()) detail::restore_params(params, best);
  return result;
}

// -------------------------------------------------------------- Checkpoint

struct Checkpoint {
  std::map<std::string, nn::Tensor<float>> tensors;
  json meta;
};

inline constexpr char kCheckpointMagic[8] = {'A', 'M', 'B', 'D',
                                             'E', 'P', 'C', 'K'};

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.write(kCheckpointMagic, 8);
  const uint32_t version = 1;
  f.write(reinterpret_cast<const char*>(&version), 4);
  const uint32_t n = static_cast<uint32_t>(ckpt.tensors.size());
  f.write(reinterpret_cast<const char*>(&n), 4);
  for (const auto& [name, tensor] : ckpt.tensors) {
    const uint32_t len = static_cast<uint32_t>(name.size());
    f.write(reinterpret_cast<const char*>(&len), 4);
    f.write(name.data(), len);
    const uint32_t ndim = static_cast<uint32_t>(tensor.shape.size());
    f.write(reinterpret_cast<const char*>(&ndim), 4);
    for (int d : tensor.shape) {
      const int32_t dd = d;
      f.write(reinterpret_cast<const char*>(&dd), 4);
    }
    const uint64_t bytes = tensor.numel() * sizeof(float);
    f.write(reinterpret_cast<const char*>(&bytes), 8);
    f.write(reinterpret_cast<const char*>(tensor.data.data()),
            static_cast<std::streamsize>(bytes));
  }
  const std::string meta = ckpt.meta.dump();
  const uint64_t mlen = meta.size();
  f.write(reinterpret_cast<const char*>(&mlen), 8);
  f.write(meta.data(), static_cast<std::streamsize>(mlen));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("bad checkpoint magic in " + path);
  uint32_t version = 0, n = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  if (version != 1) throw std::runtime_error("unsupported checkpoint version");
  f.read(reinterpret_cast<char*>(&n), 4);
  Checkpoint ckpt;
  for (uint32_t i = 0; i < n; ++i) {
    uint32_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 4);
    std::string name(len, '\0');
    f.read(name.data(), len);
    uint32_t ndim = 0;
    f.read(reinterpret_cast<char*>(&ndim), 4);
    std::vector<int> shape(ndim);
    for (auto& d : shape) {
      int32_t dd = 0;
      f.read(reinterpret_cast<char*>(&dd), 4);
      d = dd;
    }
    uint64_t bytes = 0;
    f.read(reinterpret_cast<char*>(&bytes), 8);
    nn::Tensor<float> t(shape);
    if (bytes != t.numel() * sizeof(float))
      throw std::runtime_error("checkpoint tensor size mismatch: " + name);
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(bytes));
    ckpt.tensors.emplace(std::move(name), std::move(t));
  }
  uint64_t mlen = 0;
  f.read(reinterpret_cast<char*>(&mlen), 8);
  std::string meta(mlen, '\0');
  f.read(meta.data(), static_cast<std::streamsize>(mlen));
  if (!f) throw std::runtime_error("truncated checkpoint " + path);
  ckpt.meta = json::parse(meta);
  return ckpt;
}

inline Checkpoint to_checkpoint(TaskModel& model, const json& config_echo = {}) {
  Checkpoint ckpt;
  for (auto& p : model.all_params()) ckpt.tensors[p.name] = *p.value;
  ckpt.meta["kind"] = "task";
  ckpt.meta["task"] = task_name(model.cfg.task);
  ckpt.meta["modality"] =
      model.cfg.modality == Modality::kAudio ? "audio" : "vision";
  ckpt.meta["mlp_hidden"] = model.cfg.mlp_hidden;
  ckpt.meta["n_classes"] = model.cfg.n_classes;
  ckpt.meta["near_threshold"] = model.cfg.near_threshold;
  ckpt.meta["log_offset"] = model.cfg.log_offset;
  ckpt.meta["normalizer"] = {{"d_min", model.norm.d_min},
                             {"d_max", model.norm.d_max}};
  ckpt.meta["bins"] = model.bins.centers;
  if (!config_echo.is_null()) ckpt.meta["config_echo"] = config_echo;
  return ckpt;
}

inline TaskModel from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", "") != "task")
    throw std::runtime_error("checkpoint is not a task model");
  ModelConfig cfg;
  cfg.task = parse_task(ckpt.meta.at("task").get<std::string>());
  cfg.modality = ckpt.meta.at("modality").get<std::string>() == "audio"
                     ? Modality::kAudio
                     : Modality::kVision;
  cfg.mlp_hidden = ckpt.meta.at("mlp_hidden").get<int>();
  cfg.n_classes = ckpt.meta.at("n_classes").get<int>();
  cfg.near_threshold = ckpt.meta.at("near_threshold").get<double>();
  cfg.log_offset = ckpt.meta.value("log_offset", dsp::kDefaultLogOffset);
  TaskModel model(cfg, /*init_seed=*/0);
  model.norm.d_min = ckpt.meta.at("normalizer").at("d_min").get<double>();
  model.norm.d_max = ckpt.meta.at("normalizer").at("d_max").get<double>();
  model.bins.centers = ckpt.meta.at("bins").get<std::vector<double>>();
  for (auto& p : model.all_params()) {
    auto it = ckpt.tensors.find(p.name);
    if (it == ckpt.tensors.end())
      throw std::runtime_error("checkpoint missing tensor " + p.name);
    if (it->second.numel() != p.value->numel())
      throw std::runtime_error("checkpoint tensor shape mismatch " + p.name);
    *p.value = it->second;
  }
  return model;
}

// ----------------------------------------------------------- Grad checking

// Central finite differences over a random subset of parameter coordinates.
// Returns the max relative error |fd - analytic| / max(|fd| + |analytic|, 1e-6).
template <typename ModelT, typename ExampleType>
double grad_check(ModelT& model, const ExampleType& ex, double eps,
                  int n_coords, uint64_t seed) {
  auto params = model.trainable_params();
  typename ModelT::Workspace ws;
  model.zero_grads();
  model.loss_and_grad(ex, ws);
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    std::vector<double> g(p.grad->data.begin(), p.grad->data.end());
    analytic.push_back(std::move(g));
  }

  size_t total = 0;
  for (auto& p : params) total += p.value->numel();
  Rng rng(seed);
  double max_rel = 0.0;
  for (int probe = 0; probe < n_coords; ++probe) {
    size_t flat = rng.bounded(total);
    size_t ti = 0;
    while (flat >= params[ti].value->numel()) {
      flat -= params[ti].value->numel();
      ++ti;
    }
    auto& w = params[ti].value->data[flat];
    const auto orig = w;
    w = orig + eps;
    model.zero_grads();
    const double lp = model.loss_and_grad(ex, ws);
    w = orig - eps;
    model.zero_grads();
    const double lm = model.loss_and_grad(ex, ws);
    w = orig;
    const double fd = (lp - lm) / (2.0 * eps);
    const double an = analytic[ti][flat];
    const double rel =
        std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), 1e-6);
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace ambient::models

#endif  // AMBIENT_MODELS_HPP_
