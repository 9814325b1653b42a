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
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>

#include "antforge/nets.hpp"

namespace antforge {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (start <= s.size()) {
    const size_t end = s.find(sep, start);
    out.push_back(s.substr(start, end == std::string_view::npos ? s.size() - start : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int64_t to_int(std::string_view s, std::string_view token) {
  int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ConfigError("bad integer '" + std::string(s) + "' in layer '" + std::string(token) + "'");
  }
  return v;
}

double to_double(std::string_view s, std::string_view token) {
  try {
    size_t used = 0;
    const double v = std::stod(std::string(s), &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + std::string(s) + "' in layer '" + std::string(token) + "'");
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

ArchSpec ArchSpec::parse(std::string_view text, Shape input) {
  ArchSpec spec;
  spec.input = std::move(input);
  for (std::string_view raw : split(text, ',')) {
    const std::string_view token = trim(raw);
    if (token.empty()) continue;
    const auto parts = split(token, ':');
    const std::string_view kind = parts[0];
    const auto arg = [&](size_t i) { return to_int(parts.at(i), token); };
    LayerSpec l;
    if (kind == "conv") {
      if (parts.size() < 3 || parts.size() > 5) throw ConfigError("conv:out:k[:stride[:pad]], got '" + std::string(token) + "'");
      l.kind = LayerKind::kConv;
      l.out = arg(1);
      l.kernel = static_cast<int>(arg(2));
      l.stride = parts.size() > 3 ? static_cast<int>(arg(3)) : 1;
      l.pad = parts.size() > 4 ? static_cast<int>(arg(4)) : l.kernel / 2;
    } else if (kind == "linear") {
      if (parts.size() < 2 || parts.size() > 3) throw ConfigError("linear:out[:in], got '" + std::string(token) + "'");
      l.kind = LayerKind::kLinear;
      l.out = arg(1);
      l.in = parts.size() > 2 ? arg(2) : 0;
    } else if (kind == "maxpool") {
      if (parts.size() < 2 || parts.size() > 3) throw ConfigError("maxpool:k[:stride], got '" + std::string(token) + "'");
      l.kind = LayerKind::kMaxPool;
      l.kernel = static_cast<int>(arg(1));
      l.stride = parts.size() > 2 ? static_cast<int>(arg(2)) : l.kernel;
    } else if (kind == "relu" && parts.size() == 1) {
      l.kind = LayerKind::kRelu;
    } else if (kind == "flatten" && parts.size() == 1) {
      l.kind = LayerKind::kFlatten;
    } else if (kind == "residual" && parts.size() <= 2) {
      l.kind = LayerKind::kResidualAddInput;
      l.scale = parts.size() > 1 ? to_double(parts[1], token) : 1.0;
    } else {
      throw ConfigError("unknown layer '" + std::string(token) + "'");
    }
    spec.layers.push_back(l);
  }
  if (spec.layers.empty()) throw ConfigError("architecture has no layers");
  spec.infer_shapes();
  return spec;
}

std::string ArchSpec::to_string() const {
  std::ostringstream os;
  for (size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (i) os << ',';
    switch (l.kind) {
      case LayerKind::kConv:
        os << "conv:" << l.out << ':' << l.kernel << ':' << l.stride << ':' << l.pad;
        break;
      case LayerKind::kLinear:
        os << "linear:" << l.out;
        if (l.in) os << ':' << l.in;
        break;
      case LayerKind::kMaxPool:
        os << "maxpool:" << l.kernel << ':' << l.stride;
        break;
      case LayerKind::kRelu:
        os << "relu";
        break;
      case LayerKind::kFlatten:
        os << "flatten";
        break;
      case LayerKind::kResidualAddInput:
        os << "residual:" << format_double(l.scale);
        break;
    }
  }
  return os.str();
}

std::vector<Shape> ArchSpec::infer_shapes() const {
  if (input.size() != 3 || input[0] <= 0 || input[1] < 0 || input[2] < 0) {
    throw ConfigError("architecture input must be (C, H, W), got " + shape_str(input));
  }
  // Fully-convolutional specs are validated at a nominal 8x8.
  Shape cur = input;
  if (cur[1] == 0 || cur[2] == 0) cur = {input[0], 8, 8};
  const Shape in_shape = cur;
  std::vector<Shape> shapes;
  for (size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + ": ";
    switch (l.kind) {
      case LayerKind::kConv: {
        if (cur.size() != 3) throw ConfigError(where + "conv needs a (C,H,W) input, got " + shape_str(cur));
        if (l.out <= 0 || l.kernel <= 0 || l.kernel % 2 == 0 || l.stride < 1 || l.pad < 0) {
          throw ConfigError(where + "conv needs out > 0, odd kernel, stride >= 1, pad >= 0");
        }
        const int64_t h = window_out(cur[1], l.kernel, l.stride, l.pad);
        const int64_t w = window_out(cur[2], l.kernel, l.stride, l.pad);
        if (h <= 0 || w <= 0) throw ConfigError(where + "conv kernel exceeds input " + shape_str(cur));
        cur = {l.out, h, w};
        break;
      }
      case LayerKind::kMaxPool: {
        if (cur.size() != 3) throw ConfigError(where + "maxpool needs a (C,H,W) input");
        if (l.kernel < 1 || l.stride < 1) throw ConfigError(where + "maxpool needs kernel, stride >= 1");
        const int64_t h = window_out(cur[1], l.kernel, l.stride, 0);
        const int64_t w = window_out(cur[2], l.kernel, l.stride, 0);
        if (h <= 0 || w <= 0) throw ConfigError(where + "pool window exceeds input " + shape_str(cur));
        cur = {cur[0], h, w};
        break;
      }
      case LayerKind::kFlatten:
        cur = {numel(cur)};
        break;
      case LayerKind::kLinear:
        if (cur.size() != 1) throw ConfigError(where + "linear needs a flat input (add flatten), got " + shape_str(cur));
        if (l.out <= 0) throw ConfigError(where + "linear needs out > 0");
        if (l.in != 0 && l.in != cur[0]) {
          throw ConfigError(where + "linear declares " + std::to_string(l.in) + " inputs but receives " +
                            std::to_string(cur[0]));
        }
        cur = {l.out};
        break;
      case LayerKind::kRelu:
        break;
      case LayerKind::kResidualAddInput:
        if (cur != in_shape) {
          throw ConfigError(where + "residual-add-input needs output shape " + shape_str(in_shape) +
                            ", got " + shape_str(cur));
        }
        break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

uint64_t ArchSpec::fingerprint() const {
  return fnv1a64("antforge-arch;input=" + shape_str(input) + ";" + to_string());
}

int64_t ArchSpec::parameter_count() const {
  const auto shapes = infer_shapes();
  Shape cur = input;
  if (cur[1] == 0 || cur[2] == 0) cur = {input[0], 8, 8};
  int64_t total = 0;
  for (size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (l.kind == LayerKind::kConv) total += l.out * cur[0] * l.kernel * l.kernel + l.out;
    if (l.kind == LayerKind::kLinear) total += l.out * cur[0] + l.out;
    cur = shapes[i];
  }
  return total;
}

ArchSpec madry_mnist_arch() {
  return ArchSpec::parse(
      "conv:32:5:1:2,relu,maxpool:2:2,conv:64:5:1:2,relu,maxpool:2:2,flatten,linear:1024,relu,linear:10",
      Shape{1, 28, 28});
}

// ---- parameters --------------------------------------------------------------

template <typename T>
void BasicParamSet<T>::add(std::string name, Tensor<T> tensor) {
  if (contains(name)) throw ConfigError("duplicate parameter name " + name);
  entries_.push_back({std::move(name), std::move(tensor)});
}

template <typename T>
Tensor<T>& BasicParamSet<T>::at(std::string_view name) {
  for (auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw ConfigError("no parameter named " + std::string(name));
}

template <typename T>
const Tensor<T>& BasicParamSet<T>::at(std::string_view name) const {
  return const_cast<BasicParamSet*>(this)->at(name);
}

template <typename T>
bool BasicParamSet<T>::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

template <typename T>
int64_t BasicParamSet<T>::parameter_count() const {
  int64_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

template <typename T>
void BasicParamSet<T>::set_requires_grad(bool on) {
  for (auto& e : entries_) e.tensor.set_requires_grad(on);
}

template <typename T>
void BasicParamSet<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename T>
bool BasicParamSet<T>::operator==(const BasicParamSet& other) const {
  if (fingerprint_ != other.fingerprint_ || entries_.size() != other.entries_.size()) return false;
  for (size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.tensor.shape() != b.tensor.shape()) return false;
    if (!std::equal(a.tensor.data().begin(), a.tensor.data().end(), b.tensor.data().begin(),
                    [](T x, T y) { return std::memcmp(&x, &y, sizeof(T)) == 0; })) {
      return false;
    }
  }
  return true;
}

template class BasicParamSet<float>;
template class BasicParamSet<double>;

namespace {

std::string layer_name(const LayerSpec& l, size_t index) {
  return (l.kind == LayerKind::kConv ? "conv" : "linear") + std::to_string(index);
}

}  // namespace

template <typename T>
BasicParamSet<T> init_params(const ArchSpec& spec, Rng rng) {
  const auto shapes = spec.infer_shapes();
  BasicParamSet<T> params(spec.fingerprint());
  Shape cur = spec.input;
  if (cur[1] == 0 || cur[2] == 0) cur = {spec.input[0], 8, 8};
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.kind == LayerKind::kConv || l.kind == LayerKind::kLinear) {
      const Shape wshape = l.kind == LayerKind::kConv ? Shape{l.out, cur[0], l.kernel, l.kernel}
                                                      : Shape{l.out, cur[0]};
      const int64_t fan_in = numel(wshape) / l.out;
      const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
      Rng layer_rng = rng.split(i);
      Tensor<T> w(wshape);
      for (int64_t k = 0; k < w.numel(); ++k) w[k] = static_cast<T>(layer_rng.normal() * stddev);
      w.set_requires_grad(true);
      Tensor<T> b(Shape{l.out});
      b.set_requires_grad(true);
      params.add(layer_name(l, i) + ".weight", std::move(w));
      params.add(layer_name(l, i) + ".bias", std::move(b));
    }
    cur = shapes[i];
  }
  return params;
}

template BasicParamSet<float> init_params(const ArchSpec&, Rng);
template BasicParamSet<double> init_params(const ArchSpec&, Rng);

ParamSet build_classifier(const ArchSpec& spec, Rng rng) { return init_params<float>(spec, rng); }

template <typename T>
Var<T> forward(const ArchSpec& spec, BasicParamSet<T>& params, Var<T> x, bool track_params) {
  if (params.fingerprint() != spec.fingerprint()) {
    throw ConfigError("parameter set does not belong to architecture " + spec.to_string());
  }
  const Shape& xs = x.shape();
  if (xs.size() != 4 || xs[1] != spec.input[0] || (spec.input[1] != 0 && xs[2] != spec.input[1]) ||
      (spec.input[2] != 0 && xs[3] != spec.input[2])) {
    throw ConfigError("input " + shape_str(xs) + " does not match architecture input " +
                      shape_str(spec.input));
  }
  Tape<T>& tape = *x.tape;
  Var<T> h = x;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    switch (l.kind) {
      case LayerKind::kConv:
      case LayerKind::kLinear: {
        const std::string name = layer_name(l, i);
        Var<T> w = tape.parameter(params.at(name + ".weight"), track_params);
        Var<T> b = tape.parameter(params.at(name + ".bias"), track_params);
        h = l.kind == LayerKind::kConv ? conv2d(h, w, b, l.stride, l.pad) : linear(h, w, b);
        break;
      }
      case LayerKind::kRelu:
        h = relu(h);
        break;
      case LayerKind::kFlatten:
        h = flatten(h);
        break;
      case LayerKind::kMaxPool:
        h = maxpool2d(h, l.kernel, l.stride);
        break;
      case LayerKind::kResidualAddInput:
        h = add(l.scale == 1.0 ? x : scale(x, static_cast<T>(l.scale)), h);
        break;
    }
  }
  return h;
}

template Var<float> forward(const ArchSpec&, BasicParamSet<float>&, Var<float>, bool);
template Var<double> forward(const ArchSpec&, BasicParamSet<double>&, Var<double>, bool);

TensorF predict_logits(const ArchSpec& spec, const ParamSet& params, const TensorF& x) {
  Tape<float> tape(false);
  // The tape only reads parameters when not recording.
  auto& p = const_cast<ParamSet&>(params);
  return forward(spec, p, tape.constant(x), false).value();
}

std::vector<int> predict_labels(const ArchSpec& spec, const ParamSet& params, const TensorF& x) {
  const TensorF logits = predict_logits(spec, params, x);
  const int64_t B = logits.dim(0), K = logits.dim(1);
  std::vector<int> out(static_cast<size_t>(B));
  for (int64_t i = 0; i < B; ++i) {
    const float* row = logits.ptr() + i * K;
    out[static_cast<size_t>(i)] = static_cast<int>(std::max_element(row, row + K) - row);
  }
  return out;
}

}  // namespace antforge
