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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "antforge/nets.hpp"
#include "antforge/rng.hpp"
#include "antforge/tensor.hpp"

namespace antforge {

enum class CorruptionKind {
  kGaussianNoise,
  kUniformNoise,
  kShotNoise,
  kImpulseNoise,
  kSpeckleNoise,
  kGaussianBlur,
  kBrightness,
  kContrast,
  kTranslate,
  kRotate,
  kScale,
};

inline constexpr std::array<CorruptionKind, 11> kAllCorruptions = {
    CorruptionKind::kGaussianNoise, CorruptionKind::kUniformNoise, CorruptionKind::kShotNoise,
    CorruptionKind::kImpulseNoise,  CorruptionKind::kSpeckleNoise, CorruptionKind::kGaussianBlur,
    CorruptionKind::kBrightness,    CorruptionKind::kContrast,     CorruptionKind::kTranslate,
    CorruptionKind::kRotate,        CorruptionKind::kScale,
};

inline constexpr int kSeverityLevels = 5;

// The five Gaussian standard deviations matching the ImageNet-C noise levels.
inline constexpr std::array<double, 5> kGaussianSigmaPreset = {0.08, 0.12, 0.18, 0.26, 0.38};

std::string_view to_string(CorruptionKind kind);
CorruptionKind parse_corruption_kind(std::string_view name);
std::vector<CorruptionKind> parse_corruption_kinds(std::string_view list);
bool is_noise_kind(CorruptionKind kind);
// Noise kinds draw from their seed; all others are deterministic maps.
bool is_stochastic(CorruptionKind kind);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::kGaussianNoise;
  int severity = 1;
  uint64_t sample_seed = 0;
};

// One parameter per (kind, severity). Meaning per kind:
//   gaussian/uniform/speckle noise: standard deviation
//   shot noise: photon count scale c (x ~ Poisson(c x) / c)
//   impulse noise: replaced fraction
//   gaussian blur: kernel sigma in pixels
//   brightness: additive shift
//   contrast: contrast factor (1 = unchanged)
//   translate: shift in pixels along both axes
//   rotate: degrees counter-clockwise
//   scale: zoom factor (< 1 shrinks)
class SeverityTables {
 public:
  static SeverityTables defaults();
  static SeverityTables parse(std::string_view text, std::string_view origin = "<string>");
  static SeverityTables load(const std::filesystem::path& path);

  int version() const { return version_; }
  double param(CorruptionKind kind, int severity) const;
  const std::array<double, 5>& row(CorruptionKind kind) const;
  void set_row(CorruptionKind kind, std::array<double, 5> values);
  std::string serialize() const;

  bool operator==(const SeverityTables&) const = default;

 private:
  int version_ = 1;
  std::map<CorruptionKind, std::array<double, 5>> rows_;
};

// Image layout within a [C,H,W] span.
struct ImageShape {
  int64_t channels = 1;
  int64_t height = 0;
  int64_t width = 0;
  int64_t size() const { return channels * height * width; }
};

// out may not alias x.
void corrupt_into(std::span<const float> x, ImageShape shape, const CorruptionSpec& spec,
                  std::span<float> out, const SeverityTables& tables);
// x is [C,H,W]; uses the default tables unless given others.
TensorF corrupt(const TensorF& x, const CorruptionSpec& spec);
TensorF corrupt(const TensorF& x, const CorruptionSpec& spec, const SeverityTables& tables);

// Geometric kernels, exposed for tests and reuse.
void translate_into(std::span<const float> x, ImageShape s, int64_t dx, int64_t dy, std::span<float> out);
void rotate_into(std::span<const float> x, ImageShape s, double degrees, std::span<float> out);
void zoom_into(std::span<const float> x, ImageShape s, double factor, std::span<float> out);
void gaussian_blur_into(std::span<const float> x, ImageShape s, double sigma, std::span<float> out);

// clip01(x + n), n ~ N(0, sigma^2) iid. Works on any shape.
TensorF gaussian_perturb(const TensorF& x, double sigma, Rng& rng);
// clip01(x + x * n), n ~ N(0, sigma^2) iid.
TensorF speckle_perturb(const TensorF& x, double sigma, Rng& rng);

// Result of rescaling a direction d so that the clipped perturbation has a
// prescribed l2 norm.
template <typename T>
struct SphereProjection {
  std::vector<T> delta;        // effective post-clip perturbation
  double gamma = 0.0;          // scale applied to d
  double epsilon = 0.0;        // requested radius
  double achieved_norm = 0.0;  // ||delta||_2
  bool saturated = false;      // every pixel hit its box bound before reaching epsilon
};

// Finds gamma >= 0 with ||clip01(x + gamma d) - x||_2 = epsilon. The squared
// norm S(u) = sum_i min(u d_i^2, b_i^2), u = gamma^2, is piecewise linear in u,
// so walking the sorted breakpoints u_i = (b_i / d_i)^2 gives the exact
// solution. If epsilon^2 exceeds the total box budget the fully saturated
// perturbation is returned.
template <typename T>
SphereProjection<T> project_sphere_clipped(std::span<const T> x, std::span<const T> d, double epsilon);

// How the projection scale gamma enters the backward pass. kConstant stops
// the gradient at gamma; kRenorm differentiates gamma as the renormalization
// onto the sphere with the clipped pixel set frozen.
enum class GammaGrad { kConstant, kRenorm };

std::string_view to_string(GammaGrad g);
GammaGrad parse_gamma_grad(std::string_view s);

// Draws z ~ N(0,1) with the batch shape of x, runs the generator and projects
// each image's noise onto the epsilon sphere. The returned var equals
// clip01(x + gamma_i g(z_i)). With track_generator the generator parameters
// receive gradients.
Var<float> sample_adversarial_noise(Tape<float>& tape, NoiseGenerator& g, const TensorF& x,
                                    double epsilon, Rng& rng, bool track_generator,
                                    GammaGrad gamma_grad = GammaGrad::kRenorm);
TensorF sample_adversarial_noise(const NoiseGenerator& g, const TensorF& x, double epsilon, Rng& rng);

// Projects each row of the batch x along the matching row of directions.
TensorF perturb_along(const TensorF& x, const TensorF& directions, double epsilon);

}  // namespace antforge
