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

#include <cmath>
#include <sstream>

#include "antforge/nets.hpp"

namespace antforge {

std::string_view to_string(GeneratorVariant v) {
  return v == GeneratorVariant::kPointwise1x1 ? "k1" : "k3";
}

GeneratorVariant parse_generator_variant(std::string_view s) {
  if (s == "k1" || s == "1x1") return GeneratorVariant::kPointwise1x1;
  if (s == "k3" || s == "3x3") return GeneratorVariant::kLocal3x3;
  throw ConfigError("unknown generator variant '" + std::string(s) + "' (expected k1 or k3)");
}

ArchSpec generator_arch(GeneratorVariant variant, int64_t channels, double sigma_init, int64_t width) {
  if (channels < 1) throw ConfigError("generator needs at least one channel");
  if (width < 1) throw ConfigError("generator width must be positive");
  if (!(sigma_init > 0.0)) throw ConfigError("generator sigma_init must be positive");
  const std::string w = std::to_string(width);
  const std::string second = variant == GeneratorVariant::kLocal3x3 ? "conv:" + w + ":3:1:1"
                                                                    : "conv:" + w + ":1:1:0";
  std::ostringstream os;
  os.precision(17);
  os << "conv:" << w << ":1:1:0,relu," << second << ",relu,conv:" << w << ":1:1:0,relu,conv:"
     << channels << ":1:1:0,residual:" << sigma_init;
  return ArchSpec::parse(os.str(), Shape{channels, 0, 0});
}

NoiseGenerator build_generator(GeneratorVariant variant, int64_t channels, Rng rng,
                               double sigma_init, int64_t width) {
  NoiseGenerator g;
  g.variant = variant;
  g.channels = channels;
  g.width = width;
  g.sigma_init = sigma_init;
  g.arch = generator_arch(variant, channels, sigma_init, width);
  g.params = init_params<float>(g.arch, rng);
  // Zero the output conv: the non-residual path is then the zero map.
  auto& entries = g.params.entries();
  for (size_t i = entries.size() - 2; i < entries.size(); ++i) {
    for (auto& v : entries[i].tensor.storage()) v = 0.0f;
  }
  return g;
}

template <typename T>
Var<T> generator_forward(const ArchSpec& arch, BasicParamSet<T>& params, Var<T> z, bool track_params) {
  return forward(arch, params, z, track_params);
}

template Var<float> generator_forward(const ArchSpec&, BasicParamSet<float>&, Var<float>, bool);
template Var<double> generator_forward(const ArchSpec&, BasicParamSet<double>&, Var<double>, bool);

TensorF generator_sample(const NoiseGenerator& g, const TensorF& z) {
  if (z.rank() != 4 || z.dim(1) != g.channels) {
    throw ConfigError("generator expects [B," + std::to_string(g.channels) + ",H,W], got " +
                      shape_str(z.shape()));
  }
  Tape<float> tape(false);
  auto& p = const_cast<ParamSet&>(g.params);
  return generator_forward(g.arch, p, tape.constant(z), false).value();
}

}  // namespace antforge
