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
#include <cstdio>
#include <fstream>
#include <iterator>

#include "antforge/data.hpp"

namespace antforge {

namespace {

constexpr uint32_t kImagesMagic3 = 0x00000803;
constexpr uint32_t kImagesMagic4 = 0x00000804;
constexpr uint32_t kLabelsMagic = 0x00000801;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

uint32_t be32(const std::string& buf, size_t offset, const std::filesystem::path& path) {
  if (buf.size() < offset + 4) throw TruncatedDataError(path.string() + ": truncated IDX header");
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + offset);
  return (uint32_t{p[0]} << 24) | (uint32_t{p[1]} << 16) | (uint32_t{p[2]} << 8) | uint32_t{p[3]};
}

void put_be32(std::string& buf, uint32_t v) {
  buf.push_back(static_cast<char>(v >> 24));
  buf.push_back(static_cast<char>(v >> 16));
  buf.push_back(static_cast<char>(v >> 8));
  buf.push_back(static_cast<char>(v));
}

void write_file(const std::filesystem::path& path, const std::string& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

int Dataset::num_classes() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

TensorF Dataset::gather(std::span<const int64_t> indices) const {
  const int64_t row = image_numel();
  Shape s = images.shape();
  s[0] = static_cast<int64_t>(indices.size());
  TensorF out(s);
  for (size_t b = 0; b < indices.size(); ++b) {
    const int64_t i = indices[b];
    if (i < 0 || i >= size()) throw InputError("dataset index out of range");
    std::copy_n(images.ptr() + i * row, row, out.ptr() + static_cast<int64_t>(b) * row);
  }
  return out;
}

std::vector<int> Dataset::gather_labels(std::span<const int64_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (int64_t i : indices) out.push_back(labels.at(static_cast<size_t>(i)));
  return out;
}

Dataset Dataset::slice(int64_t begin, int64_t end) const {
  Dataset d;
  d.images = images.slice_rows(begin, end);
  d.labels.assign(labels.begin() + begin, labels.begin() + end);
  d.provenance = provenance;
  return d;
}

void Dataset::validate() const {
  if (images.rank() != 4) throw DataError("dataset images must be [N,C,H,W]");
  if (images.dim(0) != size()) throw CountMismatchError("image and label counts differ");
  for (float v : images.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw DataError("dataset pixel outside [0,1]");
  }
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const std::string ib = read_file(images_path);
  const std::string lb = read_file(labels_path);

  const uint32_t imagic = be32(ib, 0, images_path);
  if (imagic != kImagesMagic3 && imagic != kImagesMagic4) {
    throw WrongMagicError(images_path.string() + ": expected image magic 0x00000803, got 0x" +
                          [&] { char s[16]; std::snprintf(s, sizeof s, "%08x", imagic); return std::string(s); }());
  }
  const uint32_t lmagic = be32(lb, 0, labels_path);
  if (lmagic != kLabelsMagic) {
    throw WrongMagicError(labels_path.string() + ": expected label magic 0x00000801");
  }
  const int ndims = imagic == kImagesMagic3 ? 3 : 4;
  Shape dims;
  for (int d = 0; d < ndims; ++d) dims.push_back(be32(ib, 4 + 4 * static_cast<size_t>(d), images_path));
  if (ndims == 3) dims.insert(dims.begin() + 1, 1);
  const size_t ihead = 4 + 4 * static_cast<size_t>(ndims);
  const int64_t count = dims[0];
  const int64_t total = numel(dims);
  if (static_cast<int64_t>(ib.size() - ihead) < total) {
    throw TruncatedDataError(images_path.string() + ": payload shorter than declared " + shape_str(dims));
  }
  const int64_t lcount = be32(lb, 4, labels_path);
  if (static_cast<int64_t>(lb.size()) - 8 < lcount) {
    throw TruncatedDataError(labels_path.string() + ": payload shorter than declared count");
  }
  if (lcount != count) {
    throw CountMismatchError("image file declares " + std::to_string(count) + " items, label file " +
                             std::to_string(lcount));
  }

  Dataset data;
  data.images = TensorF(dims);
  const auto* px = reinterpret_cast<const unsigned char*>(ib.data() + ihead);
  for (int64_t i = 0; i < total; ++i) data.images[i] = static_cast<float>(px[i]) / 255.0f;
  const auto* lp = reinterpret_cast<const unsigned char*>(lb.data() + 8);
  data.labels.assign(lp, lp + lcount);
  data.provenance = "idx:" + images_path.filename().string();
  return data;
}

uint8_t quantize_pixel(float v) {
  const double scaled = std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0;
  return static_cast<uint8_t>(std::nearbyint(scaled));
}

void write_idx(const Dataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  if (data.images.rank() != 4 || data.images.dim(0) != data.size()) {
    throw DataError("write_idx: malformed dataset");
  }
  const bool gray = data.images.dim(1) == 1;
  std::string ib;
  ib.reserve(static_cast<size_t>(data.images.numel()) + 20);
  put_be32(ib, gray ? kImagesMagic3 : kImagesMagic4);
  for (size_t d = 0; d < 4; ++d) {
    if (gray && d == 1) continue;
    put_be32(ib, static_cast<uint32_t>(data.images.dim(d)));
  }
  for (float v : data.images.data()) ib.push_back(static_cast<char>(quantize_pixel(v)));
  std::string lb;
  put_be32(lb, kLabelsMagic);
  put_be32(lb, static_cast<uint32_t>(data.size()));
  for (int l : data.labels) {
    if (l < 0 || l > 255) throw DataError("write_idx: label does not fit in a byte");
    lb.push_back(static_cast<char>(l));
  }
  write_file(images_path, ib);
  write_file(labels_path, lb);
}

// ---- synthetic data ---------------------------------------------------------

namespace {

struct Segment {
  double y0, x0, y1, x1;
};

double distance_to_segment(double y, double x, const Segment& s) {
  const double vy = s.y1 - s.y0, vx = s.x1 - s.x0;
  const double len2 = vy * vy + vx * vx;
  double t = len2 > 0 ? ((y - s.y0) * vy + (x - s.x0) * vx) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dy = y - (s.y0 + t * vy), dx = x - (s.x0 + t * vx);
  return std::sqrt(dy * dy + dx * dx);
}

}  // namespace

Dataset synth_blobs(int64_t n, int classes, int64_t image_size, double noise, uint64_t seed,
                    SynthOptions options) {
  if (classes < 2) throw ConfigError("synth_blobs needs at least two classes");
  if (n < 0 || image_size < 4) throw ConfigError("synth_blobs needs n >= 0 and image_size >= 4");
  if (noise < 0.0 || options.jitter < 0.0) throw ConfigError("synth_blobs: noise and jitter must be >= 0");
  const Rng root = Rng::named(seed, "synth_blobs");
  const double size = static_cast<double>(image_size);

  std::vector<std::vector<Segment>> templates(static_cast<size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    Rng r = root.split("template").split(static_cast<uint64_t>(c));
    for (int s = 0; s < options.strokes; ++s) {
      Segment seg{};
      seg.y0 = r.uniform(0.2, 0.8) * size;
      seg.x0 = r.uniform(0.2, 0.8) * size;
      seg.y1 = r.uniform(0.2, 0.8) * size;
      seg.x1 = r.uniform(0.2, 0.8) * size;
      templates[static_cast<size_t>(c)].push_back(seg);
    }
  }

  Dataset data;
  data.images = TensorF(Shape{n, 1, image_size, image_size});
  data.labels.resize(static_cast<size_t>(n));
  data.provenance = "synthetic";
  const double thickness = std::max(1.0, size / 28.0 * 1.2);
  const double center = (size - 1.0) / 2.0;
  for (int64_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % classes);
    data.labels[static_cast<size_t>(i)] = label;
    Rng r = root.split("sample").split(static_cast<uint64_t>(i));
    std::vector<Segment> segs = templates[static_cast<size_t>(label)];
    double half_width = thickness;
    if (options.jitter > 0.0) {
      const double j = options.jitter;
      const double ty = r.uniform(-j, j), tx = r.uniform(-j, j);
      const double angle = r.uniform(-1.0, 1.0) * 0.08 * j;
      const double zoom = 1.0 + r.uniform(-1.0, 1.0) * 0.04 * j;
      const double ca = std::cos(angle), sa = std::sin(angle);
      auto move = [&](double& y, double& x) {
        y += r.normal() * 0.3 * j;
        x += r.normal() * 0.3 * j;
        const double yc = (y - center) * zoom, xc = (x - center) * zoom;
        y = center + ca * yc - sa * xc + ty;
        x = center + sa * yc + ca * xc + tx;
      };
      for (Segment& s : segs) {
        move(s.y0, s.x0);
        move(s.y1, s.x1);
      }
      half_width *= 1.0 + r.uniform(-0.25, 0.25);
    }
    float* img = data.images.ptr() + i * image_size * image_size;
    for (int64_t y = 0; y < image_size; ++y) {
      for (int64_t x = 0; x < image_size; ++x) {
        double dist = 1e9;
        for (const Segment& s : segs) dist = std::min(dist, distance_to_segment(y, x, s));
        double v = std::clamp(half_width + 0.5 - dist, 0.0, 1.0);
        if (noise > 0.0) v += noise * r.normal();
        img[y * image_size + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return data;
}

// ---- sampling ------------------------------------------------------------------

BatchSampler::BatchSampler(int64_t dataset_size, int64_t batch_size, uint64_t seed)
    : size_(dataset_size), batch_size_(batch_size), seed_(seed) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (dataset_size < 1) throw DataError("cannot sample batches from an empty dataset");
}

std::vector<int64_t> BatchSampler::permutation(int64_t epoch) const {
  std::vector<int64_t> perm(static_cast<size_t>(size_));
  for (int64_t i = 0; i < size_; ++i) perm[static_cast<size_t>(i)] = i;
  Rng r = Rng::named(seed_, "shuffle").split(static_cast<uint64_t>(epoch));
  for (int64_t i = size_ - 1; i > 0; --i) {
    const auto j = static_cast<int64_t>(r.below(static_cast<uint64_t>(i + 1)));
    std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
  }
  return perm;
}

std::vector<std::vector<int64_t>> BatchSampler::batches(int64_t epoch) const {
  const auto perm = permutation(epoch);
  std::vector<std::vector<int64_t>> out;
  for (int64_t start = 0; start < size_; start += batch_size_) {
    const int64_t end = std::min(size_, start + batch_size_);
    out.emplace_back(perm.begin() + start, perm.begin() + end);
  }
  return out;
}

}  // namespace antforge
