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

#include "antforge/eval.hpp"
#include "antforge/train.hpp"

namespace antforge {

TrainResult train(const TrainConfig& config, const ArchSpec& arch, const Dataset& train_data,
                  const Dataset* test_data, std::optional<ParamSet> init, ProgressFn progress) {
  if (config.epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (config.batch_size <= 0) throw ConfigError("train.batch_size must be > 0");
  if (train_data.size() == 0) throw InputError("training set is empty");
  if (config.mode == TrainMode::kGnt) config.gnt.plan.validate();
  if (config.mode == TrainMode::kAnt) config.ant.plan.validate();

  TrainResult result;
  result.classifier = init ? std::move(*init) : build_classifier(arch, Rng::named(config.seed, "init"));
  if (result.classifier.fingerprint() != arch.fingerprint()) {
    throw ConfigError("initial classifier does not match architecture " + arch.to_string());
  }
  ParamSet& params = result.classifier;
  params.set_requires_grad(true);

  Optimizer opt(config.classifier_optim);
  const BatchSampler sampler(train_data.size(), config.batch_size, config.seed);
  Rng noise = Rng::named(config.seed, "noise");
  Rng gen_rng = Rng::named(config.seed, "generator");
  std::optional<AntState> ant;
  if (config.mode == TrainMode::kAnt) {
    ant.emplace(make_ant_state(config.ant, train_data.images.dim(1), gen_rng.split("init")));
  }

  auto emit = [&](MetricRow row) {
    if (progress) progress(row);
    result.metrics.push_back(std::move(row));
  };

  int64_t step = 0;
  for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.lr_decay_epoch > 0 && epoch == config.lr_decay_epoch) {
      opt.set_lr(opt.lr() * config.lr_decay_factor);
    }
    double loss_sum = 0.0, gen_sum = 0.0;
    int64_t batches = 0;
    for (const auto& idx : sampler.batches(epoch)) {
      const TensorF x = train_data.gather(idx);
      const auto y = train_data.gather_labels(idx);
      switch (config.mode) {
        case TrainMode::kVanilla:
          loss_sum += supervised_step(arch, params, x, y, opt);
          break;
        case TrainMode::kGnt:
          loss_sum += gnt_step(arch, params, x, y, config.gnt, opt, noise);
          break;
        case TrainMode::kAnt: {
          const AntMetrics m = ant_step(arch, params, *ant, x, y, config.ant, opt, gen_rng);
          loss_sum += m.loss;
          gen_sum += m.generator_loss;
          if (config.ant.restart_interval > 0 && ant->step % config.ant.restart_interval == 0) {
            restart_generator(*ant, arch, params, train_data, config.ant, config.ant.restart_warmup,
                              config.batch_size, gen_rng);
          }
          break;
        }
      }
      ++step;
      ++batches;
    }
    const int64_t ep = epoch + 1;
    emit({step, ep, "train", "loss", batches ? loss_sum / static_cast<double>(batches) : 0.0});
    emit({step, ep, "train", "lr", opt.lr()});
    if (ant) {
      emit({step, ep, "train", "generator_loss", batches ? gen_sum / static_cast<double>(batches) : 0.0});
      emit({step, ep, "train", "replay_size", static_cast<double>(ant->replay.size())});
    }
    if (test_data != nullptr && test_data->size() > 0 && config.eval_every > 0 && ep % config.eval_every == 0) {
      emit({step, ep, "test", "accuracy", accuracy(arch, params, *test_data)});
    }
  }
  if (ant) {
    result.replay_size = static_cast<int64_t>(ant->replay.size());
    result.generator = std::move(ant->generator);
  }
  return result;
}

TrainResult train_vanilla(TrainConfig config, const ArchSpec& arch, const Dataset& train_data,
                          const Dataset* test_data, std::optional<ParamSet> init) {
  config.mode = TrainMode::kVanilla;
  return train(config, arch, train_data, test_data, std::move(init));
}

TrainResult train_gnt(TrainConfig config, const ArchSpec& arch, const Dataset& train_data,
                      const Dataset* test_data, std::optional<ParamSet> init) {
  config.mode = TrainMode::kGnt;
  return train(config, arch, train_data, test_data, std::move(init));
}

TrainResult train_ant(TrainConfig config, const ArchSpec& arch, const Dataset& train_data,
                      const Dataset* test_data, std::optional<ParamSet> init) {
  config.mode = TrainMode::kAnt;
  return train(config, arch, train_data, test_data, std::move(init));
}

}  // namespace antforge
