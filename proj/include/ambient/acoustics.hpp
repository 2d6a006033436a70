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
// Plan-view (2D) room acoustics: rectangular rooms, image-source echoes,
// ambient noise synthesis and ray-cast depth rendering. Physics is kept to
// what the wall-distance cue needs: specular reflections with per-wall
// coefficients and 1/distance spreading; no diffraction or air absorption.

#ifndef AMBIENT_ACOUSTICS_HPP_
#define AMBIENT_ACOUSTICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ambient/dsp.hpp"
#include "ambient/fft.hpp"
#include "ambient/rng.hpp"

namespace ambient::acoustics {

inline constexpr double kSpeedOfSound = 343.0;  // m/s
inline constexpr double kMinSpreadDistance = 0.1;
inline constexpr double kTwoPi = 6.28318530717958647692528676655900577;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Vec2& a, const Vec2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

enum Wall { kWallXLow = 0, kWallXHigh = 1, kWallYLow = 2, kWallYHigh = 3 };

struct SourceSpec {
  Vec2 position;
  enum Spectrum { kWhite, kPink } spectrum = kWhite;
  double level = 0.1;  // target RMS amplitude at the source
};

struct RoomSpec {
  double width = 6.0;   // extent along x, walls at x=0 and x=width
  double height = 4.0;  // extent along y, walls at y=0 and y=height
  double reflection[4] = {0.9, 0.9, 0.9, 0.9};  // per Wall index
  std::vector<SourceSpec> sources;
  int session_id = 0;  // perturbs source spectra across recording sessions

  bool contains(const Vec2& p, double margin = 0.0) const {
    return p.x > margin && p.x < width - margin && p.y > margin &&
           p.y < height - margin;
  }
};

struct MicPose {
  Vec2 position;
  double heading = 0.0;  // radians, CCW from +x, normalized to [0, 2*pi)
};

inline double normalize_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a;
}

// ------------------------------------------------------------ Image sources

struct ImageSource {
  Vec2 position;
  double gain = 1.0;  // product of wall reflection coefficients
  int order = 0;      // total reflection count
};

// All mirror images of src with at most `order` total reflections.
// Standard rectangle enumeration: the image indexed by (p, n) along x sits
// at (1-2p)*x + 2*n*width and has hit the x=0 wall |n-p| times and the
// x=width wall |n| times; same along y.
inline std::vector<ImageSource> image_sources(const RoomSpec& room,
                                              const Vec2& src, int order) {
  if (order < 0) throw std::invalid_argument("image order must be >= 0");
  std::vector<ImageSource> images;
  for (int p = 0; p <= 1; ++p) {
    for (int n = -order; n <= order; ++n) {
      const int cx0 = std::abs(n - p);
      const int cx1 = std::abs(n);
      if (cx0 + cx1 > order) continue;
      const double ix = (1 - 2 * p) * src.x + 2.0 * n * room.width;
      for (int q = 0; q <= 1; ++q) {
        for (int m = -order; m <= order; ++m) {
          const int cy0 = std::abs(m - q);
          const int cy1 = std::abs(m);
          const int total = cx0 + cx1 + cy0 + cy1;
          if (total > order) continue;
          ImageSource img;
          img.position = {ix, (1 - 2 * q) * src.y + 2.0 * m * room.height};
          img.gain = std::pow(room.reflection[kWallXLow], cx0) *
                     std::pow(room.reflection[kWallXHigh], cx1) *
                     std::pow(room.reflection[kWallYLow], cy0) *
                     std::pow(room.reflection[kWallYHigh], cy1);
          img.order = total;
          images.push_back(img);
        }
      }
    }
  }
  return images;
}

// --------------------------------------------------------- Impulse response

struct ImpulseResponse {
  struct Tap {
    double delay = 0.0;  // seconds
    double gain = 0.0;
  };
  std::vector<Tap> taps;  // sorted by delay
  int fs = dsp::kSampleRate;
  std::vector<double> rendered;  // fractional-delay placement at fs
};

inline ImpulseResponse impulse_response(const RoomSpec& room, const Vec2& src,
                                        const MicPose& mic, int order,
                                        int fs = dsp::kSampleRate) {
  if (!room.contains(mic.position))
    throw std::invalid_argument("microphone outside room");
  ImpulseResponse ir;
  ir.fs = fs;
  auto images = image_sources(room, src, order);
  ir.taps.reserve(images.size());
  for (const auto& img : images) {
    const double dist = distance(img.position, mic.position);
    ImpulseResponse::Tap tap;
    tap.delay = dist / kSpeedOfSound;
    tap.gain = img.gain / std::max(dist, kMinSpreadDistance);
    ir.taps.push_back(tap);
  }
  std::sort(ir.taps.begin(), ir.taps.end(),
            [](const auto& a, const auto& b) { return a.delay < b.delay; });

  const double max_delay = ir.taps.empty() ? 0.0 : ir.taps.back().delay;
  ir.rendered.assign(static_cast<size_t>(std::ceil(max_delay * fs)) + 2, 0.0);
  for (const auto& tap : ir.taps) {
    const double pos = tap.delay * fs;
    const size_t i = static_cast<size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    ir.rendered[i] += tap.gain * (1.0 - frac);
    ir.rendered[i + 1] += tap.gain * frac;
  }
  return ir;
}

// Analytic two-path interference magnitude: direct path plus one wall
// reflection with extra travel 2*d. With r = 1 this is 2*|cos(2*pi*f*d/c)|,
// zero at f = (2k+1)*c/(4d).
inline double standing_wave_gain(double d, double f, double r) {
  if (d <= 0.0) throw std::invalid_argument("distance must be > 0");
  const double phase = kTwoPi * f * (2.0 * d / kSpeedOfSound);
  const double re = 1.0 + r * std::cos(phase);
  const double im = -r * std::sin(phase);
  return std::hypot(re, im);
}

// ----------------------------------------------------------- Noise sources

namespace detail {

inline std::vector<double> white_noise(size_t n, Rng& rng) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

// Paul Kellet's three-pole 1/f approximation.
inline std::vector<double> pink_noise(size_t n, Rng& rng) {
  std::vector<double> x(n);
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  for (auto& v : x) {
    const double w = rng.normal();
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    v = b0 + b1 + b2 + w * 0.1848;
  }
  return x;
}

inline void scale_to_rms(std::vector<double>& x, double target_rms) {
  double e = 0.0;
  for (double v : x) e += v * v;
  const double rms = std::sqrt(e / static_cast<double>(x.size()));
  if (rms <= 0.0) return;
  const double s = target_rms / rms;
  for (auto& v : x) v *= s;
}

inline uint64_t hash_position(const Vec2& p) {
  uint64_t a, b;
  std::memcpy(&a, &p.x, 8);
  std::memcpy(&b, &p.y, 8);
  return Rng::derive(a, b);
}

}  // namespace detail

// -------------------------------------------------------------- Synthesis

// Sum over sources of (source noise convolved with its impulse response).
// Peak-normalized to 0.9 only if the mix would exceed it. Session identity
// applies a consistent level (+-3 dB) and spectral-tilt jitter per source,
// derived from (session_id, source position) rather than from `rng`, so the
// same session keeps the same character across clips.
inline dsp::Waveform synthesize_ambient(const RoomSpec& room,
                                        const MicPose& mic, double duration,
                                        int fs, Rng& rng, int order = 3) {
  if (duration < 1.0)
    throw std::invalid_argument("duration must be at least 1 s");
  if (!room.contains(mic.position))
    throw std::invalid_argument("microphone outside room");
  const size_t n = static_cast<size_t>(std::llround(duration * fs));
  std::vector<double> mix(n, 0.0);
  for (size_t si = 0; si < room.sources.size(); ++si) {
    const auto& src = room.sources[si];
    if (src.level <= 0.0) continue;
    auto noise = src.spectrum == SourceSpec::kPink
                     ? detail::pink_noise(n, rng)
                     : detail::white_noise(n, rng);

    Rng session_rng(Rng::derive(0x5e551011u + room.session_id,
                                detail::hash_position(src.position)));
    const double level_db = session_rng.uniform(-3.0, 3.0);
    const double tilt = session_rng.uniform(-0.3, 0.3);
    if (room.session_id != 0 && tilt != 0.0) {
      double prev = 0.0;
      for (auto& v : noise) {
        const double cur = v;
        v = cur - tilt * prev;
        prev = cur;
      }
    }
    const double level =
        src.level * (room.session_id != 0 ? std::pow(10.0, level_db / 20.0)
                                          : 1.0);
    detail::scale_to_rms(noise, level);

    auto ir = impulse_response(room, src.position, mic, order, fs);
    auto wet = fft_convolve(noise, ir.rendered);
    for (size_t i = 0; i < n; ++i) mix[i] += wet[i];
  }
  double peak = 0.0;
  for (double v : mix) peak = std::max(peak, std::abs(v));
  if (peak > 0.9) {
    const double s = 0.9 / peak;
    for (auto& v : mix) v *= s;
  }
  dsp::Waveform out;
  out.sample_rate = fs;
  out.channels.push_back(std::move(mix));
  return out;
}

// ------------------------------------------------------------- Ray casting

// Distance from p along direction `angle` to the room boundary.
inline double raycast(const RoomSpec& room, const Vec2& p, double angle) {
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](double t) {
    if (t > 1e-12 && t < best) best = t;
  };
  if (dx > 0.0) consider((room.width - p.x) / dx);
  if (dx < 0.0) consider((0.0 - p.x) / dx);
  if (dy > 0.0) consider((room.height - p.y) / dy);
  if (dy < 0.0) consider((0.0 - p.y) / dy);
  return best;
}

inline double wall_distance(const RoomSpec& room, const MicPose& mic) {
  if (!room.contains(mic.position))
    throw std::invalid_argument("microphone outside room");
  return raycast(room, mic.position, mic.heading);
}

// Perpendicular distance to the nearest wall, and the heading that faces it.
inline double nearest_wall_distance(const RoomSpec& room, const Vec2& p,
                                    double* facing = nullptr) {
  const double d[4] = {p.x, room.width - p.x, p.y, room.height - p.y};
  const double headings[4] = {3.14159265358979323846, 0.0,
                              4.71238898038468985769, 1.57079632679489661923};
  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (d[i] < d[best]) best = i;
  if (facing) *facing = headings[best];
  return d[best];
}

struct DepthView {
  int height = 0;
  int width = 0;
  std::vector<double> meters;  // height x width, row-major

  double at(int r, int c) const { return meters[size_t(r) * width + c]; }
};

// Horizontal scan tiled over rows: column j looks along
// heading + fov*(j/(width-1) - 1/2).
inline DepthView render_depth_view(const RoomSpec& room, const MicPose& mic,
                                   double fov, int width, int height) {
  if (!(fov > 0.0 && fov < 3.14159265358979323846))
    throw std::invalid_argument("fov must be in (0, pi)");
  if (width < 2 || height < 1) throw std::invalid_argument("bad view size");
  if (!room.contains(mic.position))
    throw std::invalid_argument("microphone outside room");
  DepthView view;
  view.height = height;
  view.width = width;
  view.meters.resize(static_cast<size_t>(width) * height);
  for (int j = 0; j < width; ++j) {
    const double a =
        mic.heading + fov * (static_cast<double>(j) / (width - 1) - 0.5);
    const double d = raycast(room, mic.position, a);
    for (int r = 0; r < height; ++r)
      view.meters[size_t(r) * width + j] = d;
  }
  return view;
}

}  // namespace ambient::acoustics

#endif  // AMBIENT_ACOUSTICS_HPP_
