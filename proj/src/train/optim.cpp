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
#include <numeric>
#include <sstream>

#include "antforge/config.hpp"
#include "antforge/train.hpp"

namespace antforge {

Optimizer::Optimizer(OptimConfig config) : config_(config) {
  if (!(config_.lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (config_.momentum < 0.0 || config_.momentum >= 1.0) throw ConfigError("momentum must be in [0,1)");
  if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 || config_.beta2 >= 1.0) {
    throw ConfigError("Adam betas must be in [0,1)");
  }
}

void Optimizer::step(ParamSet& params) {
  auto& entries = params.entries();
  if (m_.size() != entries.size()) {
    m_.assign(entries.size(), {});
    v_.assign(entries.size(), {});
  }
  ++t_;
  const double lr = config_.lr;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (size_t k = 0; k < entries.size(); ++k) {
    TensorF& p = entries[k].tensor;
    if (!p.requires_grad() || !p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.data();
    auto& m = m_[k];
    if (m.size() != w.size()) m.assign(w.size(), 0.0f);
    if (config_.kind == OptimKind::kSgdMomentum) {
      const auto mu = static_cast<float>(config_.momentum);
      for (size_t i = 0; i < w.size(); ++i) {
        m[i] = mu * m[i] + g[i];
        w[i] -= static_cast<float>(lr) * m[i];
      }
    } else {
      auto& v = v_[k];
      if (v.size() != w.size()) v.assign(w.size(), 0.0f);
      const auto b1 = static_cast<float>(config_.beta1);
      const auto b2 = static_cast<float>(config_.beta2);
      for (size_t i = 0; i < w.size(); ++i) {
        m[i] = b1 * m[i] + (1.0f - b1) * g[i];
        v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        w[i] = static_cast<float>(w[i] - lr * mhat / (std::sqrt(vhat) + config_.adam_eps));
      }
    }
    p.zero_grad();
  }
}

void BatchPlan::validate() const {
  if (fractions.size() < 2) throw ConfigError("batch plan needs at least two fractions");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("batch plan fractions must be >= 0");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("batch plan fractions must sum to 1, got " + format_double(total));
  }
}

std::vector<int64_t> BatchPlan::counts(int64_t batch) const {
  validate();
  std::vector<int64_t> out(fractions.size(), 0);
  int64_t rest = batch;
  for (size_t i = 1; i < fractions.size(); ++i) {
    out[i] = std::min<int64_t>(rest, std::llround(fractions[i] * static_cast<double>(batch)));
    rest -= out[i];
  }
  out[0] = rest;
  return out;
}

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be >= 1");
}

void ReplayBuffer::push(const ParamSet& snapshot) {
  if (snapshots_.size() == capacity_) snapshots_.pop_front();
  snapshots_.push_back(snapshot);
  ++total_pushed_;
}

size_t ReplayBuffer::sample_index(Rng& rng) const {
  if (snapshots_.empty()) throw StateError("replay buffer is empty");
  return static_cast<size_t>(rng.below(snapshots_.size()));
}

const ParamSet& ReplayBuffer::sample(Rng& rng) const { return snapshots_[sample_index(rng)]; }

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kVanilla:
      return "vanilla";
    case TrainMode::kGnt:
      return "gnt";
    case TrainMode::kAnt:
      return "ant";
  }
  return "unknown";
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os << "step,epoch,split,metric,value\n";
  for (const auto& r : rows) {
    os << r.step << ',' << r.epoch << ',' << r.split << ',' << r.metric << ',' << format_double(r.value) << '\n';
  }
  return os.str();
}

}  // namespace antforge
