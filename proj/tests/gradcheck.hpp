// Copyright 2026 The antforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "antforge/autograd.hpp"

namespace antforge::testing {

// A random differentiable graph over a list of leaf tensors. Every graph uses
// conv2d, relu, maxpool2d, flatten, reshape, linear, add, mul, scale,
// scale_rows, clip01, sum and softmax cross-entropy.
struct RandomGraph {
  std::vector<TensorD> leaves;
  std::vector<int> labels;
  std::string description;
  int stride = 1;
  int kernel = 3;
  bool residual = false;
  bool deep_head = false;
  std::vector<double> row_scale;
  TensorD offset, mask, weight;

  // With `margin`, also reports the smallest distance of any ReLU or clip
  // input to its kink and half the smallest top-two gap of any pool window.
  Var<double> build(Tape<double>& tape, const std::vector<Var<double>>& v, double* margin = nullptr) const {
    // v: x, w1, b1, w2, b2, wl, bl, [wl2, bl2]
    auto note = [&](Var<double> a, bool clip) {
      if (margin == nullptr) return;
      for (double x : a.value().data()) {
        *margin = std::min(*margin, std::abs(x));
        if (clip) *margin = std::min(*margin, std::abs(x - 1.0));
      }
    };
    Var<double> h = conv2d(v[0], v[1], v[2], stride, kernel / 2);
    if (residual) h = add(h, conv2d(v[0], v[3], v[4], stride, kernel / 2));
    else h = mul(h, conv2d(v[0], v[3], v[4], stride, kernel / 2));
    note(h, false);
    h = relu(h);
    Var<double> pre_clip = add(scale(h, 0.3), tape.constant(offset));
    note(pre_clip, true);
    Var<double> squashed = clip01(pre_clip);
    h = add(h, squashed);
    if (margin != nullptr) *margin = std::min(*margin, pool_gap(h.value()) / 2);
    h = maxpool2d(h, 2, 2);
    h = scale_rows(h, row_scale);
    const Shape s = h.shape();
    h = reshape(flatten(h), s);
    h = flatten(h);
    Var<double> logits = linear(h, v[5], v[6]);
    if (deep_head) {
      note(logits, false);
      logits = linear(relu(logits), v[7], v[8]);
    }
    Var<double> ce = softmax_cross_entropy(logits, labels);
    return add(ce, scale(sum(mul(squashed, tape.constant(mask))), 0.05));
  }

  static double pool_gap(const TensorD& t) {
    double gap = 1e300;
    const int64_t N = t.dim(0) * t.dim(1), H = t.dim(2), W = t.dim(3);
    for (int64_t n = 0; n < N; ++n)
      for (int64_t i = 0; i + 1 < H; i += 2)
        for (int64_t j = 0; j + 1 < W; j += 2) {
          double a = -1e300, b = -1e300;
          for (int u = 0; u < 2; ++u)
            for (int w = 0; w < 2; ++w) {
              const double x = t[(n * H + i + u) * W + j + w];
              if (x > a) {
                b = a;
                a = x;
              } else if (x > b) {
                b = x;
              }
            }
          gap = std::min(gap, a - b);
        }
    return gap;
  }
};

inline double kink_margin(const RandomGraph& g) {
  Tape<double> tape(false);
  std::vector<Var<double>> v;
  for (const auto& t : g.leaves) v.push_back(tape.constant(t));
  double m = 1e300;
  g.build(tape, v, &m);
  return m;
}

inline RandomGraph sample_graph(uint64_t seed) {
  std::mt19937_64 gen(seed);
  auto unif = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); };
  auto tensor = [&](Shape shape, double lo, double hi) {
    TensorD t(std::move(shape));
    for (auto& x : t.storage()) x = unif(lo, hi);
    return t;
  };
  RandomGraph g;
  const int64_t B = 2 + static_cast<int64_t>(gen() % 2);
  const int64_t C = 1 + static_cast<int64_t>(gen() % 2);
  const int64_t F = 2 + static_cast<int64_t>(gen() % 2);
  const int64_t H = 8;
  const int64_t K = 3 + static_cast<int64_t>(gen() % 3);
  g.kernel = gen() % 2 ? 3 : 1;
  g.stride = gen() % 3 == 0 ? 2 : 1;
  g.residual = gen() % 2;
  g.deep_head = gen() % 2;
  const int64_t Ho = window_out(H, g.kernel, g.stride, g.kernel / 2);
  const int64_t P = Ho / 2;
  const int64_t feat = F * P * P;
  g.leaves.push_back(tensor({B, C, H, H}, 0.05, 0.95));
  g.leaves.push_back(tensor({F, C, g.kernel, g.kernel}, -0.8, 0.8));
  g.leaves.push_back(tensor({F}, -0.2, 0.2));
  g.leaves.push_back(tensor({F, C, g.kernel, g.kernel}, -0.8, 0.8));
  g.leaves.push_back(tensor({F}, 0.1, 0.4));
  g.leaves.push_back(tensor({K, feat}, -0.5, 0.5));
  g.leaves.push_back(tensor({K}, -0.1, 0.1));
  if (g.deep_head) {
    g.leaves.push_back(tensor({K, K}, -0.8, 0.8));
    g.leaves.push_back(tensor({K}, -0.1, 0.1));
  }
  for (int64_t b = 0; b < B; ++b) {
    g.labels.push_back(static_cast<int>(gen() % K));
    g.row_scale.push_back(unif(0.5, 1.5));
  }
  g.offset = tensor({B, F, Ho, Ho}, 0.2, 0.8);
  g.mask = tensor({B, F, Ho, Ho}, -1.0, 1.0);
  g.description = "seed=" + std::to_string(seed) + " B=" + std::to_string(B) + " C=" + std::to_string(C) + " F=" + std::to_string(F) +
                  " k=" + std::to_string(g.kernel) + " s=" + std::to_string(g.stride) +
                  (g.residual ? " residual" : " gated") + (g.deep_head ? " deep" : "");
  return g;
}

// Resamples until every kink is at least `margin` away, so finite
// differences never straddle a nondifferentiable point.
inline RandomGraph make_random_graph(uint64_t seed, double margin = 1e-2) {
  for (uint64_t attempt = 0;; ++attempt) {
    RandomGraph g = sample_graph(seed * 1000003 + attempt);
    if (kink_margin(g) >= margin) return g;
  }
}

inline double graph_loss(const RandomGraph& g, const std::vector<TensorD>& leaves) {
  Tape<double> tape(false);
  std::vector<Var<double>> v;
  for (const auto& t : leaves) v.push_back(tape.constant(t));
  return g.build(tape, v).value()[0];
}

struct GradCheck {
  double max_rel_error = 0.0;
  int64_t checked = 0;
};

// Analytic gradients of every leaf against central differences. The relative
// error of each coordinate is |a - n| / max(|a|, |n|, floor).
inline GradCheck check_graph(const RandomGraph& g, double h = 1e-3, double floor = 1e-6) {
  Tape<double> tape;
  std::vector<Var<double>> v;
  for (const auto& t : g.leaves) v.push_back(tape.input(t));
  tape.backward(g.build(tape, v));
  GradCheck out;
  std::vector<TensorD> leaves = g.leaves;
  for (size_t l = 0; l < leaves.size(); ++l) {
    const auto analytic = tape.grad(v[l]);
    for (int64_t i = 0; i < leaves[l].numel(); ++i) {
      const double x0 = leaves[l][i];
      leaves[l][i] = x0 + h;
      const double up = graph_loss(g, leaves);
      leaves[l][i] = x0 - h;
      const double down = graph_loss(g, leaves);
      leaves[l][i] = x0;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[static_cast<size_t>(i)];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      out.max_rel_error = std::max(out.max_rel_error, rel);
      ++out.checked;
    }
  }
  return out;
}

}  // namespace antforge::testing
