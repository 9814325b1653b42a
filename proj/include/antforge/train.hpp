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
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "antforge/data.hpp"
#include "antforge/nets.hpp"
#include "antforge/perturb.hpp"
#include "antforge/rng.hpp"

namespace antforge {

// ---- optimizers --------------------------------------------------------------

enum class OptimKind { kSgdMomentum, kAdam };

struct OptimConfig {
  OptimKind kind = OptimKind::kSgdMomentum;
  double lr = 1e-3;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

// Optimizer plus its per-parameter moment buffers. SGD-M follows
// v <- mu v + g, theta <- theta - lr v. Adam uses bias-corrected moments.
class Optimizer {
 public:
  explicit Optimizer(OptimConfig config = {});

  // Updates every parameter that requires grad and carries a gradient, then
  // clears the gradients.
  void step(ParamSet& params);

  const OptimConfig& config() const { return config_; }
  double lr() const { return config_.lr; }
  void set_lr(double lr) { config_.lr = lr; }
  int64_t steps() const { return t_; }
  const std::vector<std::vector<float>>& first_moments() const { return m_; }
  const std::vector<std::vector<float>>& second_moments() const { return v_; }

 private:
  OptimConfig config_;
  int64_t t_ = 0;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

// ---- batch composition ---------------------------------------------------------

// Fractions of a batch routed to each source. For GNT the sources are
// (clean, gaussian); for ANT (clean, current generator, replay).
struct BatchPlan {
  std::vector<double> fractions;

  static BatchPlan gnt_default() { return {{0.5, 0.5}}; }
  static BatchPlan ant_default() { return {{0.5, 0.3, 0.2}}; }

  void validate() const;
  // Non-clean shares are rounded to nearest; clean takes the remainder.
  std::vector<int64_t> counts(int64_t batch) const;
};

// ---- experience replay ----------------------------------------------------------

// Ring of generator snapshots; the oldest snapshot is evicted at capacity.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity = 32);

  void push(const ParamSet& snapshot);
  // Uniform over stored snapshots. Throws StateError when empty.
  const ParamSet& sample(Rng& rng) const;
  size_t sample_index(Rng& rng) const;
  const ParamSet& at(size_t i) const { return snapshots_.at(i); }

  size_t size() const { return snapshots_.size(); }
  bool empty() const { return snapshots_.empty(); }
  size_t capacity() const { return capacity_; }
  int64_t total_pushed() const { return total_pushed_; }

 private:
  size_t capacity_;
  std::deque<ParamSet> snapshots_;
  int64_t total_pushed_ = 0;
};

// ---- configs ----------------------------------------------------------------------

struct GntConfig {
  // One entry = fixed sigma; several = sigma drawn uniformly per image.
  std::vector<double> sigmas = {0.5};
  BatchPlan plan = BatchPlan::gnt_default();
};

struct AntConfig {
  double epsilon = 10.0;
  BatchPlan plan = BatchPlan::ant_default();
  int inner_steps = 1;
  int64_t snapshot_interval = 50;   // classifier steps between replay snapshots
  size_t replay_capacity = 32;
  int64_t restart_interval = 0;     // classifier steps between restarts, 0 = never
  int64_t restart_warmup = 200;     // generator steps for a fresh generator
  GeneratorVariant variant = GeneratorVariant::kPointwise1x1;
  int64_t generator_width = 20;
  double sigma_init = 0.5;
  OptimConfig generator_optim{OptimKind::kAdam, 1e-4};
  GammaGrad gamma_grad = GammaGrad::kRenorm;
  // Experimental: draw the current share's noise iid from the generator's
  // empirical marginal instead of from the generator directly.
  bool resample_marginal = false;
};

enum class TrainMode { kVanilla, kGnt, kAnt };

std::string_view to_string(TrainMode mode);

struct TrainConfig {
  TrainMode mode = TrainMode::kVanilla;
  int64_t epochs = 10;
  int64_t batch_size = 300;
  OptimConfig classifier_optim{OptimKind::kSgdMomentum, 1e-3, 0.9};
  int64_t lr_decay_epoch = 0;  // 0 = no decay
  double lr_decay_factor = 0.1;
  int64_t eval_every = 1;      // epochs between test-accuracy rows, 0 = never
  uint64_t seed = 0;
  GntConfig gnt;
  AntConfig ant;
};

struct MetricRow {
  int64_t step = 0;
  int64_t epoch = 0;
  std::string split;
  std::string metric;
  double value = 0.0;
};

std::string metrics_csv(const std::vector<MetricRow>& rows);

// ---- single steps --------------------------------------------------------------------

// Mean CE of the batch without a gradient.
double batch_loss(const ArchSpec& arch, const ParamSet& params, const TensorF& x, std::span<const int> labels);

// One optimizer step on plain cross-entropy; returns the pre-step loss.
double supervised_step(const ArchSpec& arch, ParamSet& params, const TensorF& x,
                       std::span<const int> labels, Optimizer& opt);

// Perturbs the non-clean share of the batch (the trailing rows) with clipped
// Gaussian noise, then takes one classifier step; returns the batch loss.
double gnt_step(const ArchSpec& arch, ParamSet& params, const TensorF& x, std::span<const int> labels,
                const GntConfig& config, Optimizer& opt, Rng& rng);

// Rows [n - noisy, n) replaced by clip01(x + N(0, sigma^2)), sigma per row.
TensorF gnt_compose(const TensorF& x, const GntConfig& config, Rng& rng);

// One ascent step on the generator against a frozen classifier; returns the
// classifier loss on the perturbed batch before the update.
double generator_step(const ArchSpec& arch, const ParamSet& classifier, NoiseGenerator& g,
                      const TensorF& x, std::span<const int> labels, double epsilon, Optimizer& adam,
                      Rng& rng, GammaGrad gamma_grad = GammaGrad::kRenorm);

// `steps` generator ascent steps on batches drawn from data. The classifier
// is never modified. Returns the per-step losses.
std::vector<double> train_generator(const ArchSpec& arch, const ParamSet& classifier, NoiseGenerator& g,
                                    const Dataset& data, double epsilon, int64_t steps, Optimizer& adam,
                                    int64_t batch_size, Rng& rng,
                                    GammaGrad gamma_grad = GammaGrad::kRenorm);

struct AntState {
  NoiseGenerator generator;
  Optimizer generator_opt;
  ReplayBuffer replay;
  int64_t step = 0;
  int64_t restarts = 0;
};

AntState make_ant_state(const AntConfig& config, int64_t channels, Rng rng);

struct AntMetrics {
  double loss = 0.0;
  double generator_loss = 0.0;
  int64_t clean = 0;
  int64_t current = 0;
  int64_t replayed = 0;
};

// Inner generator steps on the current-generator share, then one classifier
// step on clean + current-noise + replay-noise rows. Appends a snapshot to
// the replay buffer every snapshot_interval classifier steps.
AntMetrics ant_step(const ArchSpec& arch, ParamSet& classifier, AntState& state, const TensorF& x,
                    std::span<const int> labels, const AntConfig& config, Optimizer& classifier_opt,
                    Rng& rng);

// Snapshot the incumbent into replay, then replace it with a fresh Gaussian
// generator trained for `warmup_steps` against the current classifier.
void restart_generator(AntState& state, const ArchSpec& arch, const ParamSet& classifier,
                       const Dataset& data, const AntConfig& config, int64_t warmup_steps,
                       int64_t batch_size, Rng& rng);

// ---- full runs -----------------------------------------------------------------------

struct TrainResult {
  ParamSet classifier;
  std::optional<NoiseGenerator> generator;
  int64_t replay_size = 0;
  std::vector<MetricRow> metrics;
};

using ProgressFn = std::function<void(const MetricRow&)>;

// Runs `config.epochs` epochs starting from `init` (or a fresh He-normal
// classifier when absent). The test set, when given, is scored every
// eval_every epochs.
TrainResult train(const TrainConfig& config, const ArchSpec& arch, const Dataset& train_data,
                  const Dataset* test_data, std::optional<ParamSet> init = std::nullopt,
                  ProgressFn progress = nullptr);

TrainResult train_vanilla(TrainConfig config, const ArchSpec& arch, const Dataset& train_data,
                          const Dataset* test_data, std::optional<ParamSet> init = std::nullopt);
TrainResult train_gnt(TrainConfig config, const ArchSpec& arch, const Dataset& train_data,
                      const Dataset* test_data, std::optional<ParamSet> init = std::nullopt);
TrainResult train_ant(TrainConfig config, const ArchSpec& arch, const Dataset& train_data,
                      const Dataset* test_data, std::optional<ParamSet> init = std::nullopt);

}  // namespace antforge
