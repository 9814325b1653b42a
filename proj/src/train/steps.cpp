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
#include <map>

#include "antforge/perturb.hpp"
#include "antforge/train.hpp"

namespace antforge {

namespace {

int64_t row_numel(const TensorF& x) { return x.dim(0) == 0 ? 0 : x.numel() / x.dim(0); }

void copy_rows(const TensorF& src, int64_t src_row, TensorF& dst, int64_t dst_row, int64_t rows) {
  const int64_t n = row_numel(src);
  std::copy_n(src.ptr() + src_row * n, rows * n, dst.ptr() + dst_row * n);
}

void require_batch(const TensorF& x, std::span<const int> labels) {
  if (x.rank() != 4 || x.dim(0) == 0) throw InputError("empty batch");
  if (static_cast<int64_t>(labels.size()) != x.dim(0)) throw InputError("label count does not match batch");
}

NoiseGenerator with_params(const NoiseGenerator& like, const ParamSet& params) {
  NoiseGenerator g;
  g.variant = like.variant;
  g.channels = like.channels;
  g.width = like.width;
  g.sigma_init = like.sigma_init;
  g.arch = like.arch;
  g.params = params;
  return g;
}

}  // namespace

double batch_loss(const ArchSpec& arch, const ParamSet& params, const TensorF& x, std::span<const int> labels) {
  Tape<float> tape(false);
  auto& p = const_cast<ParamSet&>(params);
  return softmax_cross_entropy(forward(arch, p, tape.constant(x), false), labels).value()[0];
}

double supervised_step(const ArchSpec& arch, ParamSet& params, const TensorF& x,
                       std::span<const int> labels, Optimizer& opt) {
  require_batch(x, labels);
  Tape<float> tape;
  Var<float> loss = softmax_cross_entropy(forward(arch, params, tape.constant(x), true), labels);
  const double value = loss.value()[0];
  tape.backward(loss);
  opt.step(params);
  return value;
}

TensorF gnt_compose(const TensorF& x, const GntConfig& config, Rng& rng) {
  if (config.sigmas.empty()) throw ConfigError("gnt needs at least one sigma");
  for (double s : config.sigmas) {
    if (!(s >= 0.0)) throw ConfigError("gnt sigma must be >= 0");
  }
  const auto counts = config.plan.counts(x.dim(0));
  const int64_t noisy = counts.at(1);
  const int64_t first = x.dim(0) - noisy;
  const int64_t row = row_numel(x);
  TensorF out = x;
  for (int64_t b = first; b < x.dim(0); ++b) {
    const double sigma = config.sigmas.size() == 1 ? config.sigmas[0]
                                                   : config.sigmas[rng.below(config.sigmas.size())];
    float* p = out.ptr() + b * row;
    for (int64_t i = 0; i < row; ++i) {
      const double v = p[i] + sigma * rng.normal();
      p[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

double gnt_step(const ArchSpec& arch, ParamSet& params, const TensorF& x, std::span<const int> labels,
                const GntConfig& config, Optimizer& opt, Rng& rng) {
  require_batch(x, labels);
  return supervised_step(arch, params, gnt_compose(x, config, rng), labels, opt);
}

double generator_step(const ArchSpec& arch, const ParamSet& classifier, NoiseGenerator& g,
                      const TensorF& x, std::span<const int> labels, double epsilon, Optimizer& adam,
                      Rng& rng, GammaGrad gamma_grad) {
  require_batch(x, labels);
  Tape<float> tape;
  Var<float> noisy = sample_adversarial_noise(tape, g, x, epsilon, rng, true, gamma_grad);
  auto& frozen = const_cast<ParamSet&>(classifier);
  Var<float> ce = softmax_cross_entropy(forward(arch, frozen, noisy, false), labels);
  const double value = ce.value()[0];
  tape.backward(scale(ce, -1.0f));
  adam.step(g.params);
  return value;
}

std::vector<double> train_generator(const ArchSpec& arch, const ParamSet& classifier, NoiseGenerator& g,
                                    const Dataset& data, double epsilon, int64_t steps, Optimizer& adam,
                                    int64_t batch_size, Rng& rng, GammaGrad gamma_grad) {
  std::vector<double> losses;
  if (steps <= 0) return losses;
  const BatchSampler sampler(data.size(), std::min(batch_size, data.size()), rng.next_u64());
  int64_t epoch = 0;
  while (static_cast<int64_t>(losses.size()) < steps) {
    for (const auto& idx : sampler.batches(epoch)) {
      if (static_cast<int64_t>(losses.size()) == steps) break;
      const TensorF x = data.gather(idx);
      const auto y = data.gather_labels(idx);
      losses.push_back(generator_step(arch, classifier, g, x, y, epsilon, adam, rng, gamma_grad));
    }
    ++epoch;
  }
  return losses;
}

AntState make_ant_state(const AntConfig& config, int64_t channels, Rng rng) {
  config.plan.validate();
  return AntState{build_generator(config.variant, channels, rng, config.sigma_init, config.generator_width),
                  Optimizer(config.generator_optim), ReplayBuffer(config.replay_capacity), 0, 0};
}

namespace {

// Current-generator noise whose pixels are drawn iid from the pooled
// marginal of the generator output over the sub-batch.
TensorF resampled_marginal_noise(const NoiseGenerator& g, const TensorF& x, double epsilon, Rng& rng) {
  TensorF z(x.shape());
  for (auto& v : z.storage()) v = static_cast<float>(rng.normal());
  const TensorF raw = generator_sample(g, z);
  TensorF dirs(x.shape());
  const auto pool = raw.data();
  for (auto& v : dirs.storage()) v = pool[rng.below(pool.size())];
  return perturb_along(x, dirs, epsilon);
}

}  // namespace

AntMetrics ant_step(const ArchSpec& arch, ParamSet& classifier, AntState& state, const TensorF& x,
                    std::span<const int> labels, const AntConfig& config, Optimizer& classifier_opt,
                    Rng& rng) {
  require_batch(x, labels);
  const auto counts = config.plan.counts(x.dim(0));
  AntMetrics m;
  m.clean = counts[0];
  m.current = counts.size() > 1 ? counts[1] : 0;
  m.replayed = counts.size() > 2 ? counts[2] : 0;
  if (state.replay.empty()) {
    m.current += m.replayed;
    m.replayed = 0;
  }
  const int64_t cur_begin = m.clean;
  const int64_t rep_begin = m.clean + m.current;

  TensorF composed = x;
  if (m.current > 0) {
    const TensorF x_cur = x.slice_rows(cur_begin, rep_begin);
    const std::vector<int> y_cur(labels.begin() + cur_begin, labels.begin() + rep_begin);
    for (int s = 0; s < config.inner_steps; ++s) {
      m.generator_loss = generator_step(arch, classifier, state.generator, x_cur, y_cur, config.epsilon,
                                        state.generator_opt, rng, config.gamma_grad);
    }
    const TensorF noisy = config.resample_marginal
                              ? resampled_marginal_noise(state.generator, x_cur, config.epsilon, rng)
                              : sample_adversarial_noise(state.generator, x_cur, config.epsilon, rng);
    copy_rows(noisy, 0, composed, cur_begin, m.current);
  }
  if (m.replayed > 0) {
    // Each replayed row gets its own uniformly drawn snapshot; rows sharing a
    // snapshot are perturbed together.
    std::map<size_t, std::vector<int64_t>> by_snapshot;
    for (int64_t r = rep_begin; r < x.dim(0); ++r) by_snapshot[state.replay.sample_index(rng)].push_back(r);
    for (const auto& [snap, rows] : by_snapshot) {
      Shape sub_shape = x.shape();
      sub_shape[0] = static_cast<int64_t>(rows.size());
      TensorF sub(sub_shape);
      for (size_t k = 0; k < rows.size(); ++k) copy_rows(x, rows[k], sub, static_cast<int64_t>(k), 1);
      const NoiseGenerator past = with_params(state.generator, state.replay.at(snap));
      const TensorF noisy = sample_adversarial_noise(past, sub, config.epsilon, rng);
      for (size_t k = 0; k < rows.size(); ++k) copy_rows(noisy, static_cast<int64_t>(k), composed, rows[k], 1);
    }
  }

  m.loss = supervised_step(arch, classifier, composed, labels, classifier_opt);
  ++state.step;
  if (config.snapshot_interval > 0 && state.step % config.snapshot_interval == 0) {
    state.replay.push(state.generator.params);
  }
  return m;
}

void restart_generator(AntState& state, const ArchSpec& arch, const ParamSet& classifier,
                       const Dataset& data, const AntConfig& config, int64_t warmup_steps,
                       int64_t batch_size, Rng& rng) {
  state.replay.push(state.generator.params);
  ++state.restarts;
  Rng init = rng.split("restart").split(static_cast<uint64_t>(state.restarts));
  state.generator = build_generator(config.variant, state.generator.channels, init, config.sigma_init,
                                    config.generator_width);
  state.generator_opt = Optimizer(config.generator_optim);
  train_generator(arch, classifier, state.generator, data, config.epsilon, warmup_steps, state.generator_opt,
                  batch_size, rng, config.gamma_grad);
}

}  // namespace antforge
