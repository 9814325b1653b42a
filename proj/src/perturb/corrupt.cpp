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
#include <numbers>

#include "antforge/perturb.hpp"

namespace antforge {

namespace {

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

int64_t poisson_from_uniform(double u, double lambda) {
  if (lambda <= 0.0) return 0;
  double p = std::exp(-lambda);
  double cdf = p;
  int64_t k = 0;
  const int64_t cap = static_cast<int64_t>(lambda + 40.0 * std::sqrt(lambda) + 100.0);
  while (u > cdf && k < cap) {
    ++k;
    p *= lambda / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

// Bilinear sample at (y, x) in pixel-center coordinates; zero outside.
double bilinear(std::span<const float> plane, int64_t h, int64_t w, double y, double x) {
  const double fy = std::floor(y), fx = std::floor(x);
  const int64_t y0 = static_cast<int64_t>(fy), x0 = static_cast<int64_t>(fx);
  const double ty = y - fy, tx = x - fx;
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const int64_t yy = y0 + dy, xx = x0 + dx;
      if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
      const double wgt = (dy ? ty : 1.0 - ty) * (dx ? tx : 1.0 - tx);
      acc += wgt * plane[static_cast<size_t>(yy * w + xx)];
    }
  }
  return acc;
}

template <typename Map>
void inverse_map_into(std::span<const float> x, ImageShape s, std::span<float> out, Map&& source) {
  const double cy = (static_cast<double>(s.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(s.width) - 1.0) / 2.0;
  const int64_t plane = s.height * s.width;
  for (int64_t c = 0; c < s.channels; ++c) {
    auto src = x.subspan(static_cast<size_t>(c * plane), static_cast<size_t>(plane));
    for (int64_t i = 0; i < s.height; ++i) {
      for (int64_t j = 0; j < s.width; ++j) {
        auto [sy, sx] = source(static_cast<double>(i) - cy, static_cast<double>(j) - cx);
        out[static_cast<size_t>(c * plane + i * s.width + j)] =
            clamp01(bilinear(src, s.height, s.width, sy + cy, sx + cx));
      }
    }
  }
}

void check_sizes(std::span<const float> x, ImageShape s, std::span<float> out) {
  if (static_cast<int64_t>(x.size()) != s.size() || out.size() != x.size()) {
    throw InputError("corruption: buffer sizes do not match image shape");
  }
}

}  // namespace

void translate_into(std::span<const float> x, ImageShape s, int64_t dx, int64_t dy, std::span<float> out) {
  check_sizes(x, s, out);
  const int64_t plane = s.height * s.width;
  for (int64_t c = 0; c < s.channels; ++c) {
    for (int64_t i = 0; i < s.height; ++i) {
      for (int64_t j = 0; j < s.width; ++j) {
        const int64_t si = i - dy, sj = j - dx;
        const bool inside = si >= 0 && si < s.height && sj >= 0 && sj < s.width;
        out[static_cast<size_t>(c * plane + i * s.width + j)] =
            inside ? x[static_cast<size_t>(c * plane + si * s.width + sj)] : 0.0f;
      }
    }
  }
}

void rotate_into(std::span<const float> x, ImageShape s, double degrees, std::span<float> out) {
  check_sizes(x, s, out);
  const double a = degrees * std::numbers::pi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  // Output pixel p comes from R(-a) p; rows grow downward, so a positive
  // angle turns the content counter-clockwise on screen.
  inverse_map_into(x, s, out, [ca, sa](double y, double xx) {
    return std::pair{ca * y + sa * xx, -sa * y + ca * xx};
  });
}

void zoom_into(std::span<const float> x, ImageShape s, double factor, std::span<float> out) {
  check_sizes(x, s, out);
  if (!(factor > 0.0)) throw ConfigError("scale factor must be positive");
  inverse_map_into(x, s, out, [factor](double y, double xx) {
    return std::pair{y / factor, xx / factor};
  });
}

void gaussian_blur_into(std::span<const float> x, ImageShape s, double sigma, std::span<float> out) {
  check_sizes(x, s, out);
  if (sigma <= 0.0) {
    std::copy(x.begin(), x.end(), out.begin());
    return;
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[static_cast<size_t>(k + radius)] = std::exp(-0.5 * k * k / (sigma * sigma));
    total += kernel[static_cast<size_t>(k + radius)];
  }
  for (double& k : kernel) k /= total;
  const int64_t plane = s.height * s.width;
  std::vector<double> tmp(static_cast<size_t>(plane));
  for (int64_t c = 0; c < s.channels; ++c) {
    const float* src = x.data() + c * plane;
    for (int64_t i = 0; i < s.height; ++i) {
      for (int64_t j = 0; j < s.width; ++j) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int64_t jj = std::clamp<int64_t>(j + k, 0, s.width - 1);
          acc += kernel[static_cast<size_t>(k + radius)] * src[i * s.width + jj];
        }
        tmp[static_cast<size_t>(i * s.width + j)] = acc;
      }
    }
    for (int64_t i = 0; i < s.height; ++i) {
      for (int64_t j = 0; j < s.width; ++j) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int64_t ii = std::clamp<int64_t>(i + k, 0, s.height - 1);
          acc += kernel[static_cast<size_t>(k + radius)] * tmp[static_cast<size_t>(ii * s.width + j)];
        }
        out[static_cast<size_t>(c * plane + i * s.width + j)] = clamp01(acc);
      }
    }
  }
}

void corrupt_into(std::span<const float> x, ImageShape shape, const CorruptionSpec& spec,
                  std::span<float> out, const SeverityTables& tables) {
  check_sizes(x, shape, out);
  const double p = tables.param(spec.kind, spec.severity);
  const Rng rng(spec.sample_seed, fnv1a64(to_string(spec.kind)));
  const size_t n = x.size();
  switch (spec.kind) {
    case CorruptionKind::kGaussianNoise:
      for (size_t i = 0; i < n; ++i) out[i] = clamp01(x[i] + p * normal_at(rng, i));
      break;
    case CorruptionKind::kUniformNoise: {
      const double half_width = p * std::sqrt(3.0);
      for (size_t i = 0; i < n; ++i) {
        out[i] = clamp01(x[i] + half_width * (2.0 * uniform_at(rng, i) - 1.0));
      }
      break;
    }
    case CorruptionKind::kShotNoise:
      for (size_t i = 0; i < n; ++i) {
        const double counts = static_cast<double>(poisson_from_uniform(uniform_at(rng, i), p * x[i]));
        out[i] = clamp01(counts / p);
      }
      break;
    case CorruptionKind::kImpulseNoise: {
      const Rng salt = rng.split("salt");
      for (size_t i = 0; i < n; ++i) {
        if (uniform_at(rng, i) < p) {
          out[i] = uniform_at(salt, i) < 0.5 ? 0.0f : 1.0f;
        } else {
          out[i] = x[i];
        }
      }
      break;
    }
    case CorruptionKind::kSpeckleNoise:
      for (size_t i = 0; i < n; ++i) out[i] = clamp01(x[i] + x[i] * p * normal_at(rng, i));
      break;
    case CorruptionKind::kGaussianBlur:
      gaussian_blur_into(x, shape, p, out);
      break;
    case CorruptionKind::kBrightness:
      for (size_t i = 0; i < n; ++i) out[i] = clamp01(x[i] + p);
      break;
    case CorruptionKind::kContrast: {
      const int64_t plane = shape.height * shape.width;
      for (int64_t c = 0; c < shape.channels; ++c) {
        double mean = 0.0;
        for (int64_t i = 0; i < plane; ++i) mean += x[static_cast<size_t>(c * plane + i)];
        mean /= static_cast<double>(plane);
        for (int64_t i = 0; i < plane; ++i) {
          const size_t k = static_cast<size_t>(c * plane + i);
          out[k] = clamp01((x[k] - mean) * p + mean);
        }
      }
      break;
    }
    case CorruptionKind::kTranslate: {
      const auto t = static_cast<int64_t>(std::lround(p));
      translate_into(x, shape, t, t, out);
      break;
    }
    case CorruptionKind::kRotate:
      rotate_into(x, shape, p, out);
      break;
    case CorruptionKind::kScale:
      zoom_into(x, shape, p, out);
      break;
  }
}

TensorF corrupt(const TensorF& x, const CorruptionSpec& spec) {
  static const SeverityTables tables = SeverityTables::defaults();
  return corrupt(x, spec, tables);
}

TensorF corrupt(const TensorF& x, const CorruptionSpec& spec, const SeverityTables& tables) {
  if (x.rank() != 3) throw InputError("corrupt expects a [C,H,W] image, got " + shape_str(x.shape()));
  TensorF out(x.shape());
  corrupt_into(x.data(), {x.dim(0), x.dim(1), x.dim(2)}, spec, out.data(), tables);
  return out;
}

TensorF gaussian_perturb(const TensorF& x, double sigma, Rng& rng) {
  if (sigma < 0.0) throw InputError("gaussian_perturb: sigma must be >= 0");
  TensorF out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double n = rng.normal();
    out[i] = clamp01(x[i] + sigma * n);
  }
  return out;
}

TensorF speckle_perturb(const TensorF& x, double sigma, Rng& rng) {
  if (sigma < 0.0) throw InputError("speckle_perturb: sigma must be >= 0");
  TensorF out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double n = rng.normal();
    out[i] = clamp01(x[i] + x[i] * sigma * n);
  }
  return out;
}

}  // namespace antforge
