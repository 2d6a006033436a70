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
// Audio preprocessing front end: resampling, STFT, log-mel features and the
// frequency-analysis utilities built on top of them. All functions are pure;
// anything stochastic takes an explicit Rng.

#ifndef AMBIENT_DSP_HPP_
#define AMBIENT_DSP_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "ambient/fft.hpp"
#include "ambient/rng.hpp"

namespace ambient::dsp {

inline constexpr int kSampleRate = 16000;
inline constexpr int kWindowSamples = 400;  // 25 ms at 16 kHz
inline constexpr int kHopSamples = 160;     // 10 ms at 16 kHz
inline constexpr int kFftSize = 512;        // smallest power of two >= window
inline constexpr int kFftBins = kFftSize / 2 + 1;
inline constexpr int kMelBins = 64;
inline constexpr int kPatchFrames = 96;
inline constexpr int kPatchSamples = 15360;  // 0.96 s at 16 kHz
inline constexpr double kDefaultLogOffset = 0.01;

// ---------------------------------------------------------------- Waveform

struct Waveform {
  std::vector<std::vector<double>> channels;  // equal-length, amplitudes
  int sample_rate = kSampleRate;

  int num_channels() const { return static_cast<int>(channels.size()); }
  size_t num_samples() const {
    return channels.empty() ? 0 : channels[0].size();
  }
  double duration() const {
    return static_cast<double>(num_samples()) / sample_rate;
  }
  const std::vector<double>& mono() const {
    if (channels.size() != 1)
      throw std::logic_error("waveform is not mono");
    return channels[0];
  }
};

inline Waveform make_mono(std::vector<double> samples,
                          int sample_rate = kSampleRate) {
  Waveform w;
  w.sample_rate = sample_rate;
  w.channels.push_back(std::move(samples));
  return w;
}

inline Waveform to_mono(const Waveform& w) {
  if (w.num_channels() == 1) return w;
  if (w.num_channels() != 2)
    throw std::invalid_argument("to_mono: expected 1 or 2 channels");
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.channels.resize(1);
  auto& dst = out.channels[0];
  dst.resize(w.num_samples());
  const auto& l = w.channels[0];
  const auto& r = w.channels[1];
  for (size_t i = 0; i < dst.size(); ++i) dst[i] = 0.5 * (l[i] + r[i]);
  return out;
}

// ------------------------------------------------------------- Resampling

namespace detail {

// Zeroth-order modified Bessel function of the first kind, power series.
inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  double hx = 0.5 * x;
  for (int k = 1; k < 64; ++k) {
    term *= (hx / k) * (hx / k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double kPi = 3.14159265358979323846264338327950288;
  return std::sin(kPi * x) / (kPi * x);
}

}  // namespace detail

// Band-limited resampling with a 64-tap Kaiser-windowed sinc kernel
// evaluated at the exact fractional positions of each output sample.
inline Waveform resample(const Waveform& w, int target_rate) {
  if (w.num_samples() == 0) throw std::invalid_argument("empty waveform");
  if (target_rate <= 0) throw std::invalid_argument("bad target rate");
  if (target_rate == w.sample_rate) return w;

  const int taps = 64;
  const double beta = 8.6;
  const double i0_beta = detail::bessel_i0(beta);
  const double ratio = static_cast<double>(target_rate) / w.sample_rate;
  // Cutoff slightly below the narrower Nyquist to leave transition room.
  const double cutoff = 0.92 * std::min(1.0, ratio);

  Waveform out;
  out.sample_rate = target_rate;
  out.channels.resize(w.num_channels());
  const size_t in_len = w.num_samples();
  const size_t out_len = static_cast<size_t>(
      std::llround(static_cast<double>(in_len) * ratio));
  for (int c = 0; c < w.num_channels(); ++c) {
    const auto& src = w.channels[c];
    auto& dst = out.channels[c];
    dst.resize(out_len);
    for (size_t m = 0; m < out_len; ++m) {
      const double t = static_cast<double>(m) / ratio;  // position in input
      const int64_t n0 = static_cast<int64_t>(std::floor(t)) - taps / 2 + 1;
      double acc = 0.0;
      for (int k = 0; k < taps; ++k) {
        const int64_t n = n0 + k;
        if (n < 0 || n >= static_cast<int64_t>(in_len)) continue;
        const double dx = (t - static_cast<double>(n)) / (taps / 2);
        if (dx <= -1.0 || dx >= 1.0) continue;
        const double win =
            detail::bessel_i0(beta * std::sqrt(1.0 - dx * dx)) / i0_beta;
        acc += src[n] * cutoff *
               detail::sinc(cutoff * (t - static_cast<double>(n))) * win;
      }
      dst[m] = acc;
    }
  }
  return out;
}

// ------------------------------------------------------------------- STFT

struct Spectrogram {
  int frames = 0;
  int bins = kFftBins;
  std::vector<std::complex<double>> v;  // frames x bins, row-major

  std::complex<double>& at(int t, int k) { return v[size_t(t) * bins + k]; }
  const std::complex<double>& at(int t, int k) const {
    return v[size_t(t) * bins + k];
  }
};

inline std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  const double kPi = 3.14159265358979323846264338327950288;
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (n - 1));
  return w;
}

// Hann-windowed frames of 400 samples, hop 160, zero-padded to a 512 FFT.
// Frame count is 1 + floor((len - 400) / 160); no centering or padding.
inline Spectrogram stft(const Waveform& w) {
  if (w.num_channels() != 1)
    throw std::invalid_argument("stft: input must be mono");
  if (w.sample_rate != kSampleRate)
    throw std::invalid_argument("stft: input must be 16 kHz");
  const auto& x = w.mono();
  if (x.size() < static_cast<size_t>(kWindowSamples))
    throw std::invalid_argument("insufficient samples");

  static const std::vector<double> win = hann_window(kWindowSamples);
  Spectrogram s;
  s.frames = 1 + static_cast<int>((x.size() - kWindowSamples) / kHopSamples);
  s.v.resize(static_cast<size_t>(s.frames) * kFftBins);

  std::vector<std::complex<double>> buf(kFftSize);
  for (int t = 0; t < s.frames; ++t) {
    const size_t off = static_cast<size_t>(t) * kHopSamples;
    for (int i = 0; i < kWindowSamples; ++i)
      buf[i] = {x[off + i] * win[i], 0.0};
    for (int i = kWindowSamples; i < kFftSize; ++i) buf[i] = {0.0, 0.0};
    fft_inplace(buf.data(), kFftSize, false);
    for (int k = 0; k < kFftBins; ++k) s.v[size_t(t) * kFftBins + k] = buf[k];
  }
  return s;
}

// ---------------------------------------------------------- Mel filterbank

inline double hz_to_mel(double f) {
  return 2595.0 * std::log10(1.0 + f / 700.0);
}
inline double mel_to_hz(double m) {
  return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

struct MelFilterbank {
  int num_bins = kMelBins;
  double f_low = 0.0;
  double f_high = 8000.0;
  std::vector<double> weights;       // num_bins x kFftBins, row-major
  std::vector<double> center_freqs;  // peak frequency per mel bin, Hz

  double weight(int m, int k) const { return weights[size_t(m) * kFftBins + k]; }
};

namespace detail {

// Mean of the triangle (left, peak, right) over the interval [a, b].
// Area-averaging instead of point sampling keeps every FFT bin inside
// [f_low, f_high] covered, including DC, where point-sampled triangles
// would assign zero weight.
inline double triangle_mean(double left, double peak, double right, double a,
                            double b) {
  auto tri = [&](double f) {
    if (f <= left || f >= right) return 0.0;
    if (f <= peak) return (f - left) / (peak - left);
    return (right - f) / (right - peak);
  };
  auto segment = [&](double lo, double hi) {
    lo = std::max(lo, a);
    hi = std::min(hi, b);
    if (hi <= lo) return 0.0;
    return 0.5 * (tri(lo) + tri(hi)) * (hi - lo);  // linear on each segment
  };
  double area = segment(left, peak) + segment(peak, right);
  return area / (b - a);
}

}  // namespace detail

inline MelFilterbank make_mel_filterbank(int num_bins = kMelBins,
                                         double f_low = 0.0,
                                         double f_high = 8000.0,
                                         int sample_rate = kSampleRate) {
  if (num_bins < 1 || f_low < 0.0 || f_high <= f_low)
    throw std::invalid_argument("bad mel filterbank parameters");
  MelFilterbank fb;
  fb.num_bins = num_bins;
  fb.f_low = f_low;
  fb.f_high = f_high;
  fb.weights.assign(static_cast<size_t>(num_bins) * kFftBins, 0.0);
  fb.center_freqs.resize(num_bins);

  const double mel_lo = hz_to_mel(f_low);
  const double mel_hi = hz_to_mel(f_high);
  std::vector<double> edges(num_bins + 2);
  for (int i = 0; i < num_bins + 2; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (num_bins + 1));

  const double bin_hz = static_cast<double>(sample_rate) / kFftSize;
  for (int m = 0; m < num_bins; ++m) {
    fb.center_freqs[m] = edges[m + 1];
    for (int k = 0; k < kFftBins; ++k) {
      const double f = k * bin_hz;
      const double a = std::max(f - 0.5 * bin_hz, f_low);
      const double b = std::min(f + 0.5 * bin_hz, f_high);
      if (b <= a) continue;
      double w = detail::triangle_mean(edges[m], edges[m + 1], edges[m + 2],
                                       a, b);
      if (w > 0.0) fb.weights[size_t(m) * kFftBins + k] = w;
    }
  }
  return fb;
}

// ------------------------------------------------------------ Log-mel

struct MelFrames {
  int frames = 0;
  int bins = kMelBins;
  std::vector<double> v;  // frames x bins

  double& at(int t, int m) { return v[size_t(t) * bins + m]; }
  double at(int t, int m) const { return v[size_t(t) * bins + m]; }
};

// Pre-log mel energies: E[t,m] = sum_k fb[m,k] * |STFT[t,k]|^2.
inline MelFrames mel_energies(const Spectrogram& s, const MelFilterbank& fb) {
  MelFrames out;
  out.frames = s.frames;
  out.bins = fb.num_bins;
  out.v.assign(static_cast<size_t>(s.frames) * fb.num_bins, 0.0);
  for (int t = 0; t < s.frames; ++t) {
    for (int m = 0; m < fb.num_bins; ++m) {
      const double* wrow = &fb.weights[size_t(m) * kFftBins];
      double acc = 0.0;
      for (int k = 0; k < kFftBins; ++k) {
        if (wrow[k] == 0.0) continue;
        acc += wrow[k] * std::norm(s.at(t, k));
      }
      out.v[size_t(t) * fb.num_bins + m] = acc;
    }
  }
  return out;
}

inline MelFrames log_compress(MelFrames e, double log_offset) {
  if (log_offset <= 0.0) throw std::invalid_argument("log offset must be > 0");
  for (auto& x : e.v) x = std::log(x + log_offset);
  return e;
}

inline MelFrames log_mel_frames(const Waveform& w, const MelFilterbank& fb,
                                double log_offset = kDefaultLogOffset) {
  return log_compress(mel_energies(stft(w), fb), log_offset);
}

// --------------------------------------------------------------- Patches

struct LogMelPatch {
  std::vector<double> values;  // kPatchFrames x kMelBins
  int origin_frame = 0;

  double& at(int t, int m) { return values[size_t(t) * kMelBins + m]; }
  double at(int t, int m) const { return values[size_t(t) * kMelBins + m]; }
};

inline std::vector<LogMelPatch> extract_patches(const MelFrames& frames,
                                                int stride_frames) {
  if (stride_frames < 1) throw std::invalid_argument("bad patch stride");
  if (frames.bins != kMelBins)
    throw std::invalid_argument("extract_patches: expected 64 mel bins");
  if (frames.frames < kPatchFrames)
    throw std::invalid_argument("recording too short");
  std::vector<LogMelPatch> patches;
  for (int o = 0; o + kPatchFrames <= frames.frames; o += stride_frames) {
    LogMelPatch p;
    p.origin_frame = o;
    p.values.assign(frames.v.begin() + size_t(o) * kMelBins,
                    frames.v.begin() + size_t(o + kPatchFrames) * kMelBins);
    patches.push_back(std::move(p));
  }
  return patches;
}

// ----------------------------------------------------------- Augmentation

// Uniformly positioned 0.96 s crop scaled by a gain drawn from U[0.5, 1.5].
inline Waveform augment(const Waveform& w, Rng& rng) {
  if (w.num_channels() != 1)
    throw std::invalid_argument("augment: input must be mono");
  if (w.sample_rate != kSampleRate)
    throw std::invalid_argument("augment: input must be 16 kHz");
  const size_t len = w.num_samples();
  if (len <= static_cast<size_t>(kPatchSamples))
    throw std::invalid_argument("augment: input shorter than 0.96 s");
  const size_t span = len - kPatchSamples;
  const size_t start = rng.bounded(span + 1);
  const double gain = rng.uniform(0.5, 1.5);
  Waveform out;
  out.sample_rate = kSampleRate;
  out.channels.resize(1);
  auto& dst = out.channels[0];
  dst.resize(kPatchSamples);
  const auto& src = w.mono();
  for (int i = 0; i < kPatchSamples; ++i) dst[i] = gain * src[start + i];
  return out;
}

// ------------------------------------------------------------- Band mask

// Keeps mel bins whose center frequency lies in [keep_lo, keep_hi]; all
// other bins are set to the silence floor log(log_offset).
inline LogMelPatch band_mask(const LogMelPatch& p, const MelFilterbank& fb,
                             double keep_lo, double keep_hi,
                             double log_offset = kDefaultLogOffset) {
  if (!(keep_lo >= 0.0 && keep_lo < keep_hi))
    throw std::invalid_argument("band_mask: inverted or invalid range");
  if (log_offset <= 0.0) throw std::invalid_argument("log offset must be > 0");
  const double floor_value = std::log(log_offset);
  LogMelPatch out = p;
  for (int m = 0; m < kMelBins; ++m) {
    const double fc = fb.center_freqs[m];
    if (fc < keep_lo || fc > keep_hi) {
      for (int t = 0; t < kPatchFrames; ++t) out.at(t, m) = floor_value;
    }
  }
  return out;
}

// --------------------------------------------------------- Energy analysis

// Per-mel-bin share of total spectral magnitude across a corpus. Each clip
// contributes sum over frames of the mel-filtered magnitude spectrum; the
// result is normalized to sum to one.
inline std::vector<double> energy_ratio_curve(
    const std::vector<Waveform>& corpus, const MelFilterbank& fb) {
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  std::vector<double> acc(fb.num_bins, 0.0);
  for (const auto& w : corpus) {
    Waveform mono = to_mono(w);
    if (mono.sample_rate != kSampleRate) mono = resample(mono, kSampleRate);
    Spectrogram s = stft(mono);
    for (int t = 0; t < s.frames; ++t) {
      for (int m = 0; m < fb.num_bins; ++m) {
        const double* wrow = &fb.weights[size_t(m) * kFftBins];
        double sum = 0.0;
        for (int k = 0; k < kFftBins; ++k) {
          if (wrow[k] == 0.0) continue;
          sum += wrow[k] * std::abs(s.at(t, k));
        }
        acc[m] += sum;
      }
    }
  }
  const double total = std::accumulate(acc.begin(), acc.end(), 0.0);
  if (total <= 0.0) throw std::runtime_error("corpus has no spectral energy");
  for (auto& x : acc) x /= total;
  return acc;
}

}  // namespace ambient::dsp

#endif  // AMBIENT_DSP_HPP_
