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
#include <span>
#include <string>
#include <vector>

#include "antforge/rng.hpp"
#include "antforge/tensor.hpp"

namespace antforge {

// Images [N, C, H, W] with pixels in [0, 1] plus integer labels.
struct Dataset {
  TensorF images;
  std::vector<int> labels;
  std::string provenance;  // "mnist", "synthetic", "corrupted:<kind>", ...

  int64_t size() const { return static_cast<int64_t>(labels.size()); }
  Shape image_shape() const { return {images.dim(1), images.dim(2), images.dim(3)}; }
  int64_t image_numel() const { return images.dim(1) * images.dim(2) * images.dim(3); }
  int num_classes() const;

  // Copies the selected rows into a fresh batch.
  TensorF gather(std::span<const int64_t> indices) const;
  std::vector<int> gather_labels(std::span<const int64_t> indices) const;
  Dataset slice(int64_t begin, int64_t end) const;
  void validate() const;
};

// IDX (big-endian) files. Images use magic 0x00000803 (N, H, W); the 4-d form
// 0x00000804 (N, C, H, W) is accepted for multi-channel data. Labels use
// 0x00000801. Bytes are scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);
// Inverse of load_idx; pixels are quantized as round-half-to-even(255 x).
void write_idx(const Dataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);
uint8_t quantize_pixel(float v);

struct SynthOptions {
  // Per-sample geometric variation in pixels (0 = every sample of a class is
  // its template, which keeps the classes linearly separable).
  double jitter = 0.0;
  int strokes = 3;
};

// Class-conditional stroke templates plus Gaussian pixel noise, clipped to
// [0,1]. Labels are assigned round-robin.
Dataset synth_blobs(int64_t n, int classes, int64_t image_size, double noise, uint64_t seed,
                    SynthOptions options = {});

// Epoch permutations as a pure function of (seed, epoch).
class BatchSampler {
 public:
  BatchSampler(int64_t dataset_size, int64_t batch_size, uint64_t seed);

  std::vector<int64_t> permutation(int64_t epoch) const;
  // Consecutive chunks of the permutation; the last one may be short.
  std::vector<std::vector<int64_t>> batches(int64_t epoch) const;
  int64_t batches_per_epoch() const { return (size_ + batch_size_ - 1) / batch_size_; }
  int64_t batch_size() const { return batch_size_; }

 private:
  int64_t size_;
  int64_t batch_size_;
  uint64_t seed_;
};

}  // namespace antforge
