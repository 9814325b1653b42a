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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "antforge/autograd.hpp"
#include "antforge/rng.hpp"
#include "antforge/tensor.hpp"

namespace antforge {

enum class LayerKind { kConv, kLinear, kRelu, kFlatten, kMaxPool, kResidualAddInput };

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  int64_t out = 0;       // conv channels / linear features
  int kernel = 1;        // conv or pool window
  int stride = 1;
  int pad = 0;
  int64_t in = 0;        // linear: declared input features, 0 = inferred
  double scale = 1.0;    // residual-add-input: multiplier on the network input

  bool operator==(const LayerSpec&) const = default;
};

// Layer list plus the input shape (C, H, W) it is meant for. Spatial extents
// of 0 mark a fully-convolutional net that accepts any H, W.
struct ArchSpec {
  Shape input;
  std::vector<LayerSpec> layers;

  // Token list such as "conv:32:5,relu,maxpool:2,flatten,linear:10".
  static ArchSpec parse(std::string_view text, Shape input);
  std::string to_string() const;
  // Shape after every layer (batch dimension omitted). Throws ConfigError if
  // the layers do not compose.
  std::vector<Shape> infer_shapes() const;
  uint64_t fingerprint() const;
  int64_t parameter_count() const;

  bool operator==(const ArchSpec&) const = default;
};

// The classifier used throughout the MNIST experiments: two 5x5 conv blocks
// (32, 64 channels) with 2x2 max-pooling, fc-1024, fc-10.
ArchSpec madry_mnist_arch();

// Ordered named parameters tied to an architecture fingerprint.
template <typename T>
class BasicParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
  };

  BasicParamSet() = default;
  explicit BasicParamSet(uint64_t fingerprint) : fingerprint_(fingerprint) {}

  uint64_t fingerprint() const { return fingerprint_; }
  void add(std::string name, Tensor<T> tensor);
  Tensor<T>& at(std::string_view name);
  const Tensor<T>& at(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  int64_t parameter_count() const;

  void set_requires_grad(bool on);
  void zero_grad();

  template <typename U>
  BasicParamSet<U> cast() const {
    BasicParamSet<U> out(fingerprint_);
    for (const auto& e : entries_) out.add(e.name, e.tensor.template cast<U>());
    return out;
  }

  // Bitwise equality of names, shapes, and values.
  bool operator==(const BasicParamSet& other) const;

 private:
  uint64_t fingerprint_ = 0;
  std::vector<Entry> entries_;
};

using ParamSet = BasicParamSet<float>;

// He-normal weights, zero biases.
ParamSet build_classifier(const ArchSpec& spec, Rng rng);

template <typename T>
BasicParamSet<T> init_params(const ArchSpec& spec, Rng rng);

// Runs the net on x [B, C, H, W]. Parameters are tape leaves; pass
// track_params = false to keep them frozen while still differentiating
// w.r.t. the input.
template <typename T>
Var<T> forward(const ArchSpec& spec, BasicParamSet<T>& params, Var<T> x, bool track_params = true);

// Logits without building a gradient graph.
TensorF predict_logits(const ArchSpec& spec, const ParamSet& params, const TensorF& x);
std::vector<int> predict_labels(const ArchSpec& spec, const ParamSet& params, const TensorF& x);

// ---- noise generator --------------------------------------------------------

enum class GeneratorVariant { kPointwise1x1, kLocal3x3 };

std::string_view to_string(GeneratorVariant v);
GeneratorVariant parse_generator_variant(std::string_view s);

// Four conv layers (width-width-width-C) with ReLU between them and a
// residual connection from input to output. The k3 variant swaps the second
// layer's 1x1 kernel for a 3x3 one (zero padding), bounding the correlation
// length of the output to 3x3 pixels.
struct NoiseGenerator {
  GeneratorVariant variant = GeneratorVariant::kPointwise1x1;
  int64_t channels = 1;
  int64_t width = 20;
  double sigma_init = 0.5;
  ArchSpec arch;
  ParamSet params;
};

ArchSpec generator_arch(GeneratorVariant variant, int64_t channels, double sigma_init,
                        int64_t width = 20);

// Hidden layers get He-normal weights; the last conv is zeroed so that the
// freshly built generator is exactly g(z) = sigma_init * z.
NoiseGenerator build_generator(GeneratorVariant variant, int64_t channels, Rng rng,
                               double sigma_init, int64_t width = 20);

template <typename T>
Var<T> generator_forward(const ArchSpec& arch, BasicParamSet<T>& params, Var<T> z,
                         bool track_params = true);
TensorF generator_sample(const NoiseGenerator& g, const TensorF& z);

// ---- checkpoints -------------------------------------------------------------

inline constexpr uint32_t kCheckpointVersion = 1;

// Layout: "ANTC", u32 version, u64 fingerprint, u32 tensor count, then per
// tensor u32 name length, name bytes, u32 rank, u64 extents, f32 payload.
// All integers and floats little-endian.
void save_checkpoint(const ParamSet& params, const std::filesystem::path& path);
ParamSet load_checkpoint(const std::filesystem::path& path,
                         std::optional<uint64_t> expected_fingerprint = std::nullopt);
// Header size plus payload for a parameter set, in bytes.
uint64_t checkpoint_size(const ParamSet& params);

}  // namespace antforge
