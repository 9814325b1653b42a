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

#include "antforge/config.hpp"
#include "antforge/eval.hpp"

namespace antforge {

std::string_view to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::kGaussian: return "gaussian";
    case NoiseFamily::kUniform: return "uniform";
    case NoiseFamily::kAdversarial: return "adversarial";
  }
  return "?";
}

NoiseFamily parse_noise_family(std::string_view s) {
  if (s == "gaussian") return NoiseFamily::kGaussian;
  if (s == "uniform") return NoiseFamily::kUniform;
  if (s == "adversarial") return NoiseFamily::kAdversarial;
  throw ConfigError("unknown noise family '" + std::string(s) + "' (gaussian, uniform, adversarial)");
}

double inf_aware_median(std::vector<double> values) {
  if (values.empty()) throw InputError("median of an empty set");
  // std::sort already places +inf after every finite value.
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  const double a = values[n / 2 - 1], b = values[n / 2];
  if (std::isinf(a) || std::isinf(b)) return kInf;
  return 0.5 * (a + b);
}

TensorF line_search_direction(const DirectionSource& src, const TensorF& image, uint64_t seed, int64_t index) {
  Rng rng = Rng(seed).split(static_cast<uint64_t>(index));
  TensorF d(image.shape());
  switch (src.family) {
    case NoiseFamily::kGaussian:
      for (auto& v : d.storage()) v = static_cast<float>(rng.normal());
      break;
    case NoiseFamily::kUniform:
      for (auto& v : d.storage()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
      break;
    case NoiseFamily::kAdversarial: {
      if (src.generator == nullptr) throw InputError("adversarial directions need a generator");
      // The generator works on batches; a bare [C,H,W] image becomes a batch of one.
      Shape s = image.shape();
      if (s.size() == 3) s.insert(s.begin(), 1);
      TensorF z(s);
      for (auto& v : z.storage()) v = static_cast<float>(rng.normal());
      d = generator_sample(*src.generator, z);
      d.reshape(image.shape());
      break;
    }
  }
  return d;
}

namespace {

enum class Phase { kSweep, kBisect, kDone };

struct Search {
  TensorF x;
  TensorF d;
  int label = 0;
  Phase phase = Phase::kSweep;
  double lo = 0.0;
  double hi = 0.0;
  double hi_norm = 0.0;
  double m = 0.0;
};

}  // namespace

EpsilonStarResult epsilon_star(const ArchSpec& arch, const ParamSet& params, const Dataset& data,
                               const DirectionSource& src, const LineSearchConfig& config, uint64_t seed,
                               EvalOptions opts) {
  if (data.size() == 0) throw InputError("epsilon_star on an empty dataset");
  if (!(config.tol > 0.0)) throw ConfigError("line search tol must be > 0");
  if (!(config.m0 > 0.0)) throw ConfigError("line search m0 must be > 0");
  const int64_t n = data.size();
  const int64_t numel = data.image_numel();
  const double m_max = config.m_max > 0.0 ? config.m_max : 2.0 * std::sqrt(static_cast<double>(numel));

  EpsilonStarResult result;
  result.family = src.family;
  result.count = n;
  result.norms.assign(static_cast<size_t>(n), kInf);
  result.lower.assign(static_cast<size_t>(n), 0.0);

  const int64_t chunk = std::max<int64_t>(1, opts.chunk);
  parallel_for((n + chunk - 1) / chunk, opts.threads, [&](int64_t c) {
    const int64_t b = c * chunk, e = std::min(n, b + chunk);
    const auto clean = predict_labels(arch, params, data.images.slice_rows(b, e));
    std::vector<Search> st(static_cast<size_t>(e - b));
    for (int64_t i = b; i < e; ++i) {
      Search& s = st[i - b];
      s.x = data.images.slice_rows(i, i + 1);
      s.label = data.labels[i];
      if (clean[i - b] != s.label) {
        result.norms[i] = 0.0;
        s.phase = Phase::kDone;
        continue;
      }
      s.d = line_search_direction(src, s.x, seed, i);
      s.m = std::min(config.m0, m_max);
    }

    for (;;) {
      std::vector<size_t> active;
      for (size_t k = 0; k < st.size(); ++k) {
        if (st[k].phase != Phase::kDone) active.push_back(k);
      }
      if (active.empty()) break;
      Shape shape = data.images.shape();
      shape[0] = static_cast<int64_t>(active.size());
      TensorF batch(shape);
      std::vector<SphereProjection<float>> proj;
      proj.reserve(active.size());
      for (size_t a = 0; a < active.size(); ++a) {
        const Search& s = st[active[a]];
        proj.push_back(project_sphere_clipped<float>(s.x.data(), s.d.data(), s.m));
        float* out = batch.ptr() + static_cast<int64_t>(a) * numel;
        for (int64_t p = 0; p < numel; ++p) out[p] = std::clamp(s.x[p] + proj.back().delta[p], 0.0f, 1.0f);
      }
      const auto pred = predict_labels(arch, params, batch);
      for (size_t a = 0; a < active.size(); ++a) {
        Search& s = st[active[a]];
        const int64_t i = b + static_cast<int64_t>(active[a]);
        const bool flipped = pred[a] != s.label;
        if (s.phase == Phase::kSweep) {
          if (flipped) {
            s.hi = s.m;
            s.hi_norm = proj[a].achieved_norm;
            s.phase = Phase::kBisect;
          } else if (proj[a].saturated || s.m >= m_max) {
            s.phase = Phase::kDone;  // stays kInf
            continue;
          } else {
            s.lo = s.m;
            s.m = std::min(2.0 * s.m, m_max);
            continue;
          }
        } else if (flipped) {
          s.hi = s.m;
          s.hi_norm = proj[a].achieved_norm;
        } else {
          s.lo = s.m;
        }
        if (s.hi - s.lo <= config.tol * s.hi) {
          result.norms[i] = s.hi_norm;
          result.lower[i] = s.lo;
          s.phase = Phase::kDone;
        } else {
          s.m = 0.5 * (s.lo + s.hi);
        }
      }
    }
  });
  result.median = inf_aware_median(result.norms);
  return result;
}

std::string epsilon_star_csv(const EpsilonStarResult& r) {
  std::string out = "index,family,norm,lower\n";
  for (size_t i = 0; i < r.norms.size(); ++i) {
    out += std::to_string(i) + "," + std::string(to_string(r.family)) + "," +
           (std::isinf(r.norms[i]) ? std::string("inf") : format_double(r.norms[i])) + "," +
           format_double(r.lower[i]) + "\n";
  }
  return out;
}

}  // namespace antforge
