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
// Small dependency-free neural net kernel with hand-derived backprop.
// Layers hold parameters and gradient accumulators; per-pass state lives in
// explicit Cache objects so forwards are const and reentrant. Everything is
// templated on the scalar so the finite-difference gradient checker can run
// the exact same code in double precision.

#ifndef AMBIENT_NN_HPP_
#define AMBIENT_NN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "ambient/rng.hpp"
#include "ambient/threadpool.hpp"

namespace ambient::nn {

template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel(), T(0));
  }
  size_t numel() const {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return n;
  }
  void zero() { std::fill(data.begin(), data.end(), T(0)); }
};

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

// ------------------------------------------------------------------- GEMM

namespace detail {

// Threads split output rows; each element is still computed in the same
// order as the single-threaded loop, so results are identical for any job
// count.
template <typename T, typename RowFn>
void maybe_parallel_rows(int rows, size_t flops, const RowFn& fn) {
  if (flops >= (1u << 21) && global_jobs() > 1) {
    parallel_for(0, rows, [&](int64_t i) { fn(static_cast<int>(i)); });
  } else {
    for (int i = 0; i < rows; ++i) fn(i);
  }
}

}  // namespace detail

// C += A * B with A (M x K), B (K x N), C (M x N), all row-major.
template <typename T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C) {
  detail::maybe_parallel_rows<T>(M, size_t(M) * N * K, [&](int i) {
    T* c = C + size_t(i) * N;
    const T* a = A + size_t(i) * K;
    for (int k = 0; k < K; ++k) {
      const T av = a[k];
      if (av == T(0)) continue;
      const T* b = B + size_t(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  });
}

// C += A * B^T with A (M x K), B (N x K), C (M x N).
template <typename T>
void gemm_nt(int M, int N, int K, const T* A, const T* B, T* C) {
  detail::maybe_parallel_rows<T>(M, size_t(M) * N * K, [&](int i) {
    const T* a = A + size_t(i) * K;
    T* c = C + size_t(i) * N;
    for (int j = 0; j < N; ++j) {
      const T* b = B + size_t(j) * K;
      T acc = T(0);
      for (int k = 0; k < K; ++k) acc += a[k] * b[k];
      c[j] += acc;
    }
  });
}

// C += A^T * B with A (K x M), B (K x N), C (M x N).
template <typename T>
void gemm_tn(int M, int N, int K, const T* A, const T* B, T* C) {
  detail::maybe_parallel_rows<T>(M, size_t(M) * N * K, [&](int i) {
    T* c = C + size_t(i) * N;
    for (int k = 0; k < K; ++k) {
      const T av = A[size_t(k) * M + i];
      if (av == T(0)) continue;
      const T* b = B + size_t(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  });
}

// ------------------------------------------------------------------ Layers

// 3x3 convolution, stride 1, zero padding 1 (same-size output).
template <typename T>
struct Conv3x3 {
  int in_ch = 0, out_ch = 0, h = 0, w = 0;
  Tensor<T> weight;  // (out_ch, in_ch*9)
  Tensor<T> bias;    // (out_ch)
  Tensor<T> gweight, gbias;

  struct Cache {
    std::vector<T> col;  // (in_ch*9, h*w)
  };

  Conv3x3() = default;
  Conv3x3(int ic, int oc, int hh, int ww)
      : in_ch(ic), out_ch(oc), h(hh), w(ww),
        weight({oc, ic * 9}), bias({oc}),
        gweight({oc, ic * 9}), gbias({oc}) {}

  void init(Rng& rng) {
    const double std = std::sqrt(2.0 / (in_ch * 9));
    for (auto& v : weight.data) v = static_cast<T>(rng.normal() * std);
    bias.zero();
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".w", &weight, &gweight});
    out.push_back({prefix + ".b", &bias, &gbias});
  }

  // col row (c*9 + 3*(dy+1) + (dx+1)) = channel c of x shifted by (dy, dx).
  void im2col(const T* x, std::vector<T>& col) const {
    const size_t hw = size_t(h) * w;
    col.assign(size_t(in_ch) * 9 * hw, T(0));
    for (int c = 0; c < in_ch; ++c) {
      const T* xc = x + size_t(c) * hw;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          T* row = col.data() + (size_t(c) * 9 + (dy + 1) * 3 + (dx + 1)) * hw;
          for (int y = 0; y < h; ++y) {
            const int sy = y + dy;
            if (sy < 0 || sy >= h) continue;
            const int x0 = std::max(0, -dx);
            const int x1 = std::min(w, w - dx);
            if (x1 <= x0) continue;
            std::memcpy(row + size_t(y) * w + x0,
                        xc + size_t(sy) * w + x0 + dx,
                        size_t(x1 - x0) * sizeof(T));
          }
        }
      }
    }
  }

  void forward(const T* x, T* y, Cache& cache) const {
    const int hw = h * w;
    im2col(x, cache.col);
    for (int oc = 0; oc < out_ch; ++oc)
      std::fill(y + size_t(oc) * hw, y + size_t(oc + 1) * hw, bias.data[oc]);
    gemm_nn(out_ch, hw, in_ch * 9, weight.data.data(), cache.col.data(), y);
  }

  // Accumulates parameter grads; writes input grad to dx unless null.
  void backward(const T* dy, T* dx, const Cache& cache) {
    const int hw = h * w;
    // dW += dY * col^T ; db += row sums of dY
    gemm_nt(out_ch, in_ch * 9, hw, dy, cache.col.data(), gweight.data.data());
    for (int oc = 0; oc < out_ch; ++oc) {
      T acc = T(0);
      const T* d = dy + size_t(oc) * hw;
      for (int i = 0; i < hw; ++i) acc += d[i];
      gbias.data[oc] += acc;
    }
    if (dx == nullptr) return;
    // dcol = W^T * dY, then fold shifted rows back into dx.
    std::vector<T> dcol(size_t(in_ch) * 9 * hw, T(0));
    gemm_tn(in_ch * 9, hw, out_ch, weight.data.data(), dy, dcol.data());
    std::fill(dx, dx + size_t(in_ch) * hw, T(0));
    for (int c = 0; c < in_ch; ++c) {
      T* xc = dx + size_t(c) * hw;
      for (int dyo = -1; dyo <= 1; ++dyo) {
        for (int dxo = -1; dxo <= 1; ++dxo) {
          const T* row =
              dcol.data() + (size_t(c) * 9 + (dyo + 1) * 3 + (dxo + 1)) * hw;
          for (int y = 0; y < h; ++y) {
            const int sy = y + dyo;
            if (sy < 0 || sy >= h) continue;
            const int x0 = std::max(0, -dxo);
            const int x1 = std::min(w, w - dxo);
            for (int xx = x0; xx < x1; ++xx)
              xc[size_t(sy) * w + xx + dxo] += row[size_t(y) * w + xx];
          }
        }
      }
    }
  }
};

// 2x2 max pooling, stride 2. Input dims must be even.
template <typename T>
struct MaxPool2 {
  int ch = 0, h = 0, w = 0;  // input dims

  struct Cache {
    std::vector<int> argmax;  // per output element, index into input plane
  };

  MaxPool2() = default;
  MaxPool2(int c, int hh, int ww) : ch(c), h(hh), w(ww) {}

  void forward(const T* x, T* y, Cache& cache) const {
    const int oh = h / 2, ow = w / 2;
    cache.argmax.resize(size_t(ch) * oh * ow);
    for (int c = 0; c < ch; ++c) {
      const T* xc = x + size_t(c) * h * w;
      T* yc = y + size_t(c) * oh * ow;
      int* am = cache.argmax.data() + size_t(c) * oh * ow;
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          const int base = 2 * i * w + 2 * j;
          int best = base;
          T bv = xc[base];
          if (xc[base + 1] > bv) { bv = xc[base + 1]; best = base + 1; }
          if (xc[base + w] > bv) { bv = xc[base + w]; best = base + w; }
          if (xc[base + w + 1] > bv) { bv = xc[base + w + 1]; best = base + w + 1; }
          yc[i * ow + j] = bv;
          am[i * ow + j] = best;
        }
      }
    }
  }

  void backward(const T* dy, T* dx, const Cache& cache) const {
    const int oh = h / 2, ow = w / 2;
    std::fill(dx, dx + size_t(ch) * h * w, T(0));
    for (int c = 0; c < ch; ++c) {
      const T* dc = dy + size_t(c) * oh * ow;
      T* dxc = dx + size_t(c) * h * w;
      const int* am = cache.argmax.data() + size_t(c) * oh * ow;
      for (int i = 0; i < oh * ow; ++i) dxc[am[i]] += dc[i];
    }
  }
};

template <typename T>
inline void relu_forward(T* x, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (x[i] < T(0)) x[i] = T(0);
}

// Uses the post-activation values as the mask.
template <typename T>
inline void relu_backward(const T* y, T* dy, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (y[i] <= T(0)) dy[i] = T(0);
}

template <typename T>
struct Linear {
  int in = 0, out = 0;
  Tensor<T> weight;  // (out, in)
  Tensor<T> bias;    // (out)
  Tensor<T> gweight, gbias;

  struct Cache {
    std::vector<T> input;
  };

  Linear() = default;
  Linear(int i, int o)
      : in(i), out(o), weight({o, i}), bias({o}), gweight({o, i}), gbias({o}) {}

  void init(Rng& rng) {
    const double std = std::sqrt(2.0 / in);
    for (auto& v : weight.data) v = static_cast<T>(rng.normal() * std);
    bias.zero();
  }

  void collect(const std::string& prefix, ParamList<T>& out_list) {
    out_list.push_back({prefix + ".w", &weight, &gweight});
    out_list.push_back({prefix + ".b", &bias, &gbias});
  }

  void forward(const T* x, T* y, Cache& cache) const {
    cache.input.assign(x, x + in);
    for (int o = 0; o < out; ++o) {
      const T* wrow = weight.data.data() + size_t(o) * in;
      T acc = bias.data[o];
      for (int i = 0; i < in; ++i) acc += wrow[i] * x[i];
      y[o] = acc;
    }
  }

  void backward(const T* dy, T* dx, const Cache& cache) {
    for (int o = 0; o < out; ++o) {
      const T d = dy[o];
      gbias.data[o] += d;
      T* gw = gweight.data.data() + size_t(o) * in;
      const T* x = cache.input.data();
      for (int i = 0; i < in; ++i) gw[i] += d * x[i];
    }
    if (dx == nullptr) return;
    std::fill(dx, dx + in, T(0));
    for (int o = 0; o < out; ++o) {
      const T d = dy[o];
      const T* wrow = weight.data.data() + size_t(o) * in;
      for (int i = 0; i < in; ++i) dx[i] += d * wrow[i];
    }
  }
};

// FC(-ReLU-FC)* stack; ReLU after every layer except the last.
template <typename T>
struct Mlp {
  std::vector<Linear<T>> layers;

  struct Cache {
    std::vector<typename Linear<T>::Cache> fc;
    std::vector<std::vector<T>> act;  // post-ReLU activations per hidden layer
  };

  Mlp() = default;
  Mlp(const std::vector<int>& dims) {  // e.g. {256, 64, 1}
    for (size_t i = 0; i + 1 < dims.size(); ++i)
      layers.emplace_back(dims[i], dims[i + 1]);
  }

  int in_dim() const { return layers.front().in; }
  int out_dim() const { return layers.back().out; }

  void init(Rng& rng) {
    for (auto& l : layers) l.init(rng);
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    for (size_t i = 0; i < layers.size(); ++i)
      layers[i].collect(prefix + ".fc" + std::to_string(i), out);
  }

  void forward(const T* x, T* y, Cache& cache) const {
    cache.fc.resize(layers.size());
    cache.act.resize(layers.size() > 0 ? layers.size() - 1 : 0);
    std::vector<T> cur(x, x + layers.front().in);
    for (size_t i = 0; i < layers.size(); ++i) {
      std::vector<T> next(layers[i].out);
      layers[i].forward(cur.data(), next.data(), cache.fc[i]);
      if (i + 1 < layers.size()) {
        relu_forward(next.data(), next.size());
        cache.act[i] = next;
      }
      cur = std::move(next);
    }
    std::copy(cur.begin(), cur.end(), y);
  }

  void backward(const T* dy, T* dx, Cache& cache) {
    std::vector<T> cur(dy, dy + layers.back().out);
    for (size_t i = layers.size(); i-- > 0;) {
      std::vector<T> prev(layers[i].in);
      layers[i].backward(cur.data(), i == 0 && dx == nullptr ? nullptr
                                                             : prev.data(),
                         cache.fc[i]);
      if (i == 0) {
        if (dx != nullptr) std::copy(prev.begin(), prev.end(), dx);
        return;
      }
      relu_backward(cache.act[i - 1].data(), prev.data(), prev.size());
      cur = std::move(prev);
    }
  }
};

// ------------------------------------------------------------ Conv encoder

// Four conv blocks (3x3 conv, ReLU, 2x2 max-pool) with channels
// 16/32/64/128, global average pool to a 128-d feature.
template <typename T>
struct ConvEncoder {
  int in_h = 0, in_w = 0;
  Conv3x3<T> c1, c2, c3, c4;
  MaxPool2<T> p1, p2, p3, p4;

  static constexpr int kFeatDim = 128;

  struct Cache {
    typename Conv3x3<T>::Cache cc1, cc2, cc3, cc4;
    typename MaxPool2<T>::Cache pc1, pc2, pc3, pc4;
    std::vector<T> r1, r2, r3, r4;  // post-ReLU conv outputs
    std::vector<T> o1, o2, o3, o4;  // pool outputs
  };

  ConvEncoder() = default;
  ConvEncoder(int h, int w)
      : in_h(h), in_w(w),
        c1(1, 16, h, w), c2(16, 32, h / 2, w / 2),
        c3(32, 64, h / 4, w / 4), c4(64, 128, h / 8, w / 8),
        p1(16, h, w), p2(32, h / 2, w / 2),
        p3(64, h / 4, w / 4), p4(128, h / 8, w / 8) {
    if (h % 16 != 0 || w % 16 != 0)
      throw std::invalid_argument("encoder input dims must be divisible by 16");
  }

  void init(Rng& rng) {
    c1.init(rng);
    c2.init(rng);
    c3.init(rng);
    c4.init(rng);
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    c1.collect(prefix + ".c1", out);
    c2.collect(prefix + ".c2", out);
    c3.collect(prefix + ".c3", out);
    c4.collect(prefix + ".c4", out);
  }

  // x is (1, in_h, in_w) row-major; returns the 128-d feature.
  std::vector<T> forward(const T* x, Cache& k) const {
    auto block = [&](const auto& conv, const auto& pool, const T* input,
                     std::vector<T>& r, std::vector<T>& o, auto& cc,
                     auto& pc) {
      r.resize(size_t(conv.out_ch) * conv.h * conv.w);
      conv.forward(input, r.data(), cc);
      relu_forward(r.data(), r.size());
      o.resize(size_t(conv.out_ch) * (conv.h / 2) * (conv.w / 2));
      pool.forward(r.data(), o.data(), pc);
    };
    block(c1, p1, x, k.r1, k.o1, k.cc1, k.pc1);
    block(c2, p2, k.o1.data(), k.r2, k.o2, k.cc2, k.pc2);
    block(c3, p3, k.o2.data(), k.r3, k.o3, k.cc3, k.pc3);
    block(c4, p4, k.o3.data(), k.r4, k.o4, k.cc4, k.pc4);
    const int sh = in_h / 16, sw = in_w / 16;
    const T inv = T(1) / static_cast<T>(sh * sw);
    std::vector<T> feat(kFeatDim);
    for (int c = 0; c < kFeatDim; ++c) {
      const T* plane = k.o4.data() + size_t(c) * sh * sw;
      T acc = T(0);
      for (int i = 0; i < sh * sw; ++i) acc += plane[i];
      feat[c] = acc * inv;
    }
    return feat;
  }

  // Accumulates parameter grads; the input gradient is not produced.
  void backward(const std::vector<T>& dfeat, Cache& k) {
    const int sh = in_h / 16, sw = in_w / 16;
    const T inv = T(1) / static_cast<T>(sh * sw);
    std::vector<T> d4(size_t(kFeatDim) * sh * sw);
    for (int c = 0; c < kFeatDim; ++c) {
      const T g = dfeat[c] * inv;
      std::fill_n(d4.data() + size_t(c) * sh * sw, sh * sw, g);
    }
    auto unblock = [&](auto& conv, const auto& pool, const std::vector<T>& r,
                       const std::vector<T>& dout, auto& cc, const auto& pc,
                       bool need_dx) {
      std::vector<T> dr(r.size());
      pool.backward(dout.data(), dr.data(), pc);
      relu_backward(r.data(), dr.data(), dr.size());
      std::vector<T> dx;
      if (need_dx) dx.resize(size_t(conv.in_ch) * conv.h * conv.w);
      conv.backward(dr.data(), need_dx ? dx.data() : nullptr, cc);
      return dx;
    };
    auto d3 = unblock(c4, p4, k.r4, d4, k.cc4, k.pc4, true);
    auto d2 = unblock(c3, p3, k.r3, d3, k.cc3, k.pc3, true);
    auto d1 = unblock(c2, p2, k.r2, d2, k.cc2, k.pc2, true);
    unblock(c1, p1, k.r1, d1, k.cc1, k.pc1, false);
  }
};

// -------------------------------------------------------------- Optimizers

struct CosineSchedule {
  double lr0 = 1e-3;
  int64_t total_steps = 1;

  double at(int64_t step) const {
    const double kPi = 3.14159265358979323846;
    const double t = static_cast<double>(step) / static_cast<double>(total_steps);
    return lr0 * 0.5 * (1.0 + std::cos(kPi * std::min(1.0, t)));
  }
};

// SGD with momentum. Weight decay enters as a loss-gradient term lambda*w,
// so lambda = 0 reproduces plain SGD bit for bit.
template <typename T>
struct SgdMomentum {
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::vector<std::vector<T>> velocity;

  void step(ParamList<T>& params, double lr) {
    if (velocity.empty()) {
      velocity.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i)
        velocity[i].assign(params[i].value->numel(), T(0));
    }
    for (size_t i = 0; i < params.size(); ++i) {
      T* w = params[i].value->data.data();
      const T* g = params[i].grad->data.data();
      T* v = velocity[i].data();
      const size_t n = params[i].value->numel();
      for (size_t j = 0; j < n; ++j) {
        const T grad = g[j] + static_cast<T>(weight_decay) * w[j];
        v[j] = static_cast<T>(momentum) * v[j] + grad;
        w[j] -= static_cast<T>(lr) * v[j];
      }
    }
  }
};

template <typename T>
struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double weight_decay = 0.0;
  int64_t t = 0;
  std::vector<std::vector<T>> m, v;

  void step(ParamList<T>& params, double lr) {
    if (m.empty()) {
      m.resize(params.size());
      v.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i) {
        m[i].assign(params[i].value->numel(), T(0));
        v[i].assign(params[i].value->numel(), T(0));
      }
    }
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < params.size(); ++i) {
      T* w = params[i].value->data.data();
      const T* g = params[i].grad->data.data();
      T* mi = m[i].data();
      T* vi = v[i].data();
      const size_t n = params[i].value->numel();
      for (size_t j = 0; j < n; ++j) {
        const double grad = double(g[j]) + weight_decay * double(w[j]);
        mi[j] = static_cast<T>(beta1 * mi[j] + (1.0 - beta1) * grad);
        vi[j] = static_cast<T>(beta2 * vi[j] + (1.0 - beta2) * grad * grad);
        const double mhat = mi[j] / bc1;
        const double vhat = vi[j] / bc2;
        w[j] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
      }
    }
  }
};

// ------------------------------------------------------------------ Losses

// Numerically stable binary cross-entropy on a logit. Returns the loss and
// writes dloss/dlogit.
template <typename T>
double bce_with_logits(T logit, double label, T* dlogit) {
  const double z = static_cast<double>(logit);
  const double loss =
      std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
  const double sig = 1.0 / (1.0 + std::exp(-z));
  *dlogit = static_cast<T>(sig - label);
  return loss;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

template <typename T>
double l1_loss(T pred, double target, T* dpred) {
  const double d = static_cast<double>(pred) - target;
  *dpred = static_cast<T>(d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
  return std::abs(d);
}

// Softmax cross-entropy over k logits against an integer class.
template <typename T>
double softmax_ce(const T* logits, int k, int label, T* dlogits,
                  std::vector<double>* probs_out = nullptr) {
  double mx = -1e300;
  for (int i = 0; i < k; ++i) mx = std::max(mx, double(logits[i]));
  double denom = 0.0;
  std::vector<double> p(k);
  for (int i = 0; i < k; ++i) {
    p[i] = std::exp(double(logits[i]) - mx);
    denom += p[i];
  }
  for (int i = 0; i < k; ++i) p[i] /= denom;
  if (dlogits != nullptr) {
    for (int i = 0; i < k; ++i)
      dlogits[i] = static_cast<T>(p[i] - (i == label ? 1.0 : 0.0));
  }
  const double loss = -std::log(std::max(p[label], 1e-300));
  if (probs_out) *probs_out = std::move(p);
  return loss;
}

// FNV-1a over the raw bytes of all parameter tensors, in collection order.
template <typename T>
uint64_t params_checksum(const ParamList<T>& params) {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params) {
    const uint8_t* bytes =
        reinterpret_cast<const uint8_t*>(p.value->data.data());
    const size_t n = p.value->numel() * sizeof(T);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace ambient::nn

#endif  // AMBIENT_NN_HPP_
