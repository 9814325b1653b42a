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
#include <numeric>
#include <string>

#include "antforge/errors.hpp"
#include "antforge/perturb.hpp"

namespace antforge {

template <typename T>
SphereProjection<T> project_sphere_clipped(std::span<const T> x, std::span<const T> d, double epsilon) {
  if (x.size() != d.size()) throw InputError("projection: image and direction sizes differ");
  if (!(epsilon > 0.0)) throw InputError("projection: epsilon must be positive");
  const size_t n = x.size();

  // Per pixel: slope a_i = d_i^2, budget b_i^2, breakpoint u_i = b_i^2 / a_i.
  struct Pixel {
    double breakpoint;
    double slope;
    double budget_sq;
  };
  std::vector<Pixel> active;
  active.reserve(n);
  double slope = 0.0;
  double total_budget = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double di = d[i];
    if (di == 0.0) continue;
    const double xi = x[i];
    const double b = std::max(0.0, di < 0.0 ? xi : 1.0 - xi);
    const double a = di * di;
    active.push_back({b * b / a, a, b * b});
    slope += a;
    total_budget += b * b;
  }
  if (active.empty()) throw InputError("projection: direction is the zero vector");

  SphereProjection<T> out;
  out.epsilon = epsilon;
  out.delta.assign(n, T{0});
  const double target = epsilon * epsilon;
  double u = 0.0;
  if (target > total_budget) {
    out.saturated = true;
    for (const Pixel& p : active) u = std::max(u, p.breakpoint);
  } else {
    std::sort(active.begin(), active.end(),
              [](const Pixel& a, const Pixel& b) { return a.breakpoint < b.breakpoint; });
    // S(u) = clipped_sq + u * slope on the current segment. The remaining
    // slope comes from suffix sums; subtracting from the total cancels badly
    // when only a few small-|d| pixels are left unclipped.
    std::vector<double> suffix(active.size() + 1, 0.0);
    for (size_t k = active.size(); k-- > 0;) suffix[k] = suffix[k + 1] + active[k].slope;
    double clipped_sq = 0.0;
    bool found = false;
    for (size_t k = 0; k < active.size(); ++k) {
      const Pixel& p = active[k];
      slope = suffix[k];
      if (clipped_sq + p.breakpoint * slope >= target) {
        u = (target - clipped_sq) / slope;
        found = true;
        break;
      }
      clipped_sq += p.budget_sq;
    }
    if (!found) u = active.back().breakpoint;
  }

  out.gamma = std::sqrt(u);
  double norm_sq = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    const double di = d[i];
    // Saturated pixels sit exactly on their bound; sqrt(u) d_i can fall an ulp short.
    const double v = out.saturated ? (di > 0.0 ? 1.0 - xi : di < 0.0 ? -xi : 0.0)
                                   : std::clamp(out.gamma * di, -xi, 1.0 - xi);
    out.delta[i] = static_cast<T>(v);
    norm_sq += v * v;
  }
  out.achieved_norm = std::sqrt(norm_sq);
  return out;
}

template SphereProjection<float> project_sphere_clipped(std::span<const float>, std::span<const float>, double);
template SphereProjection<double> project_sphere_clipped(std::span<const double>, std::span<const double>, double);

namespace {

int64_t row_size(const TensorF& t) {
  if (t.rank() < 2 || t.dim(0) == 0) throw InputError("expected a non-empty batch");
  return t.numel() / t.dim(0);
}

}  // namespace

TensorF perturb_along(const TensorF& x, const TensorF& directions, double epsilon) {
  if (x.shape() != directions.shape()) throw InputError("perturb_along: shape mismatch");
  const int64_t row = row_size(x);
  TensorF out(x.shape());
  for (int64_t b = 0; b < x.dim(0); ++b) {
    auto xs = x.data().subspan(static_cast<size_t>(b * row), static_cast<size_t>(row));
    auto ds = directions.data().subspan(static_cast<size_t>(b * row), static_cast<size_t>(row));
    const auto proj = project_sphere_clipped<float>(xs, ds, epsilon);
    for (int64_t i = 0; i < row; ++i) {
      out[b * row + i] = std::clamp(xs[static_cast<size_t>(i)] + proj.delta[static_cast<size_t>(i)], 0.0f, 1.0f);
    }
  }
  return out;
}

std::string_view to_string(GammaGrad g) { return g == GammaGrad::kConstant ? "constant" : "renorm"; }

GammaGrad parse_gamma_grad(std::string_view s) {
  if (s == "constant") return GammaGrad::kConstant;
  if (s == "renorm") return GammaGrad::kRenorm;
  throw ConfigError("unknown gamma gradient '" + std::string(s) + "' (expected constant or renorm)");
}

Var<float> sample_adversarial_noise(Tape<float>& tape, NoiseGenerator& g, const TensorF& x,
                                    double epsilon, Rng& rng, bool track_generator, GammaGrad gamma_grad) {
  if (x.rank() != 4 || x.dim(1) != g.channels) {
    throw ConfigError("generator has " + std::to_string(g.channels) + " channels, images are " +
                      shape_str(x.shape()));
  }
  TensorF z(x.shape());
  for (auto& v : z.storage()) v = static_cast<float>(rng.normal());
  Var<float> noise = generator_forward(g.arch, g.params, tape.constant(std::move(z)), track_generator);
  const TensorF& raw = noise.value();
  const int64_t row = row_size(x);
  std::vector<float> gammas(static_cast<size_t>(x.dim(0)));
  std::vector<uint8_t> active;
  if (gamma_grad == GammaGrad::kRenorm) active.assign(static_cast<size_t>(x.numel()), 0);
  for (int64_t b = 0; b < x.dim(0); ++b) {
    const auto xb = x.data().subspan(static_cast<size_t>(b * row), static_cast<size_t>(row));
    const auto db = raw.data().subspan(static_cast<size_t>(b * row), static_cast<size_t>(row));
    const auto proj = project_sphere_clipped<float>(xb, db, epsilon);
    gammas[static_cast<size_t>(b)] = static_cast<float>(proj.gamma);
    if (gamma_grad == GammaGrad::kRenorm && !proj.saturated) {
      for (int64_t i = 0; i < row; ++i) {
        const double step = proj.gamma * static_cast<double>(db[i]);
        active[static_cast<size_t>(b * row + i)] = step > -xb[i] && step < 1.0 - xb[i];
      }
    }
  }
  Var<float> scaled = gamma_grad == GammaGrad::kRenorm
                          ? scale_rows_renorm(noise, std::move(gammas), std::move(active))
                          : scale_rows(noise, std::move(gammas));
  return clip01(add(tape.constant(x), scaled));
}

TensorF sample_adversarial_noise(const NoiseGenerator& g, const TensorF& x, double epsilon, Rng& rng) {
  Tape<float> tape(false);
  auto& gen = const_cast<NoiseGenerator&>(g);
  return sample_adversarial_noise(tape, gen, x, epsilon, rng, false).value();
}

}  // namespace antforge
