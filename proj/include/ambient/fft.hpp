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

#ifndef AMBIENT_FFT_HPP_
#define AMBIENT_FFT_HPP_

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ambient {

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Iterative radix-2 Cooley-Tukey, in place. n must be a power of two.
inline void fft_inplace(std::complex<double>* a, size_t n, bool inverse) {
  if (!is_pow2(n)) throw std::invalid_argument("fft: size must be power of 2");
  // bit reversal
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double kPi = 3.14159265358979323846264338327950288;
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    double inv = 1.0 / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) a[i] *= inv;
  }
}

inline void fft(std::vector<std::complex<double>>& a, bool inverse = false) {
  fft_inplace(a.data(), a.size(), inverse);
}

// Forward real FFT: returns the n/2+1 nonnegative-frequency bins.
inline std::vector<std::complex<double>> rfft(const double* x, size_t len,
                                              size_t n) {
  std::vector<std::complex<double>> buf(n, {0.0, 0.0});
  size_t m = len < n ? len : n;
  for (size_t i = 0; i < m; ++i) buf[i] = {x[i], 0.0};
  fft_inplace(buf.data(), n, false);
  buf.resize(n / 2 + 1);
  return buf;
}

// Linear convolution via FFT overlap-add. Output length = |x| + |h| - 1.
inline std::vector<double> fft_convolve(const std::vector<double>& x,
                                        const std::vector<double>& h) {
  if (x.empty() || h.empty()) return {};
  const size_t out_len = x.size() + h.size() - 1;
  const size_t nfft = next_pow2(std::max<size_t>(256, 4 * h.size()));
  const size_t block = nfft - h.size() + 1;

  std::vector<std::complex<double>> hf(nfft, {0.0, 0.0});
  for (size_t i = 0; i < h.size(); ++i) hf[i] = {h[i], 0.0};
  fft_inplace(hf.data(), nfft, false);

  std::vector<double> out(out_len, 0.0);
  std::vector<std::complex<double>> buf(nfft);
  for (size_t start = 0; start < x.size(); start += block) {
    size_t m = std::min(block, x.size() - start);
    for (size_t i = 0; i < nfft; ++i)
      buf[i] = {i < m ? x[start + i] : 0.0, 0.0};
    fft_inplace(buf.data(), nfft, false);
    for (size_t i = 0; i < nfft; ++i) buf[i] *= hf[i];
    fft_inplace(buf.data(), nfft, true);
    size_t lim = std::min(nfft, out_len - start);
    for (size_t i = 0; i < lim; ++i) out[start + i] += buf[i].real();
  }
  return out;
}

}  // namespace ambient

#endif  // AMBIENT_FFT_HPP_
