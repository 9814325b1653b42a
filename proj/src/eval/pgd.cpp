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

#include <algorithm>
#include <cmath>

#include "antforge/eval.hpp"

namespace antforge {

std::string_view to_string(PgdNorm n) { return n == PgdNorm::kLinf ? "linf" : "l2"; }

PgdNorm parse_pgd_norm(std::string_view s) {
  if (s == "linf") return PgdNorm::kLinf;
  if (s == "l2") return PgdNorm::kL2;
  throw ConfigError("unknown pgd norm '" + std::string(s) + "' (linf, l2)");
}

std::pair<float, float> linf_bounds(float x, double epsilon) {
  const double xd = x;
  float lo = static_cast<float>(std::max(0.0, xd - epsilon));
  float hi = static_cast<float>(std::min(1.0, xd + epsilon));
  while (xd - static_cast<double>(lo) > epsilon) lo = std::nextafter(lo, 2.0f);
  while (static_cast<double>(hi) - xd > epsilon) hi = std::nextafter(hi, -1.0f);
  // epsilon = 0 or rounding can cross the bounds; x itself is always feasible.
  lo = std::min(lo, x);
  hi = std::max(hi, x);
  return {lo, hi};
}

namespace {

// Scales delta down to the l2 ball and clips x + delta to the box.
void project_l2(const float* x, float* xa, int64_t n, double epsilon) {
  double sq = 0.0;
  for (int64_t p = 0; p < n; ++p) {
    const double d = static_cast<double>(xa[p]) - x[p];
    sq += d * d;
  }
  const double norm = std::sqrt(sq);
  // The small shrink keeps float rounding from pushing the norm past epsilon.
  const double f = norm > epsilon ? epsilon / norm * (1.0 - 1e-7) : 1.0;
  for (int64_t p = 0; p < n; ++p) {
    const double d = (static_cast<double>(xa[p]) - x[p]) * f;
    xa[p] = static_cast<float>(std::clamp(x[p] + d, 0.0, 1.0));
  }
}

}  // namespace

PgdResult pgd_attack(const ArchSpec& arch, const ParamSet& params, const TensorF& x,
                     std::span<const int> labels, const PgdConfig& config, uint64_t seed, EvalOptions opts) {
  if (!(config.epsilon >= 0.0)) throw ConfigError("pgd epsilon must be >= 0");
  if (config.iters < 0) throw ConfigError("pgd iters must be >= 0");
  if (x.rank() != 4 || static_cast<int64_t>(labels.size()) != x.dim(0)) {
    throw InputError("pgd needs x [B,C,H,W] with one label per row");
  }
  const int64_t n = x.dim(0);
  const int64_t numel = n == 0 ? 0 : x.numel() / n;
  PgdResult out;
  out.x_adv = x;
  out.success.assign(static_cast<size_t>(n), 0);
  if (n == 0) return out;
  const bool linf = config.norm == PgdNorm::kLinf;

  std::vector<float> lo, hi;
  if (linf) {
    lo.resize(x.storage().size());
    hi.resize(x.storage().size());
    for (size_t p = 0; p < lo.size(); ++p) std::tie(lo[p], hi[p]) = linf_bounds(x.storage()[p], config.epsilon);
  }

  const int64_t chunk = std::max<int64_t>(1, opts.chunk);
  std::vector<int64_t> correct(static_cast<size_t>((n + chunk - 1) / chunk), 0);
  parallel_for(static_cast<int64_t>(correct.size()), opts.threads, [&](int64_t c) {
    const int64_t b = c * chunk, e = std::min(n, b + chunk);
    const float* x0 = x.ptr() + b * numel;
    TensorF xa = x.slice_rows(b, e);
    const std::vector<int> y(labels.begin() + b, labels.begin() + e);
    auto project = [&] {
      for (int64_t r = 0; r < e - b; ++r) {
        if (linf) {
          for (int64_t p = 0; p < numel; ++p) {
            const size_t g = static_cast<size_t>((b + r) * numel + p);
            xa[r * numel + p] = std::clamp(xa[r * numel + p], lo[g], hi[g]);
          }
        } else {
          project_l2(x0 + r * numel, xa.ptr() + r * numel, numel, config.epsilon);
        }
      }
    };
    if (config.random_start) {
      Rng rng = Rng::named(seed, "pgd-start").split(static_cast<uint64_t>(c));
      for (auto& v : xa.storage()) {
        v += static_cast<float>(linf ? rng.uniform(-config.epsilon, config.epsilon)
                                     : rng.normal(0.0, config.epsilon / std::sqrt(static_cast<double>(numel))));
      }
      project();
    }
    auto& frozen = const_cast<ParamSet&>(params);
    for (int it = 0; it < config.iters; ++it) {
      Tape<float> tape;
      Var<float> in = tape.input(xa);
      Var<float> loss = softmax_cross_entropy(forward(arch, frozen, in, false), y);
      tape.backward(loss);
      const auto g = tape.grad(in);
      for (int64_t r = 0; r < e - b; ++r) {
        const float* gr = g.data() + r * numel;
        float* xr = xa.ptr() + r * numel;
        if (linf) {
          // Sign step rounded inward so one iteration never moves a pixel by more than step.
          for (int64_t p = 0; p < numel; ++p) {
            if (gr[p] == 0.0f) continue;
            const auto [down, up] = linf_bounds(xr[p], config.step);
            xr[p] = gr[p] > 0 ? up : down;
          }
        } else {
          double sq = 0.0;
          for (int64_t p = 0; p < numel; ++p) sq += static_cast<double>(gr[p]) * gr[p];
          if (sq > 0.0) {
            const double f = config.step / std::sqrt(sq);
            for (int64_t p = 0; p < numel; ++p) xr[p] = static_cast<float>(xr[p] + f * gr[p]);
          }
        }
      }
      project();
    }
    const auto pred = predict_labels(arch, params, xa);
    for (int64_t r = 0; r < e - b; ++r) {
      out.success[b + r] = pred[r] != y[r];
      correct[c] += pred[r] == y[r];
    }
    std::copy(xa.storage().begin(), xa.storage().end(), out.x_adv.ptr() + b * numel);
  });
  int64_t total = 0;
  for (int64_t v : correct) total += v;
  out.accuracy = static_cast<double>(total) / static_cast<double>(n);
  return out;
}

}  // namespace antforge
