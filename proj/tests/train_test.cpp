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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "antforge/errors.hpp"
#include "antforge/perturb.hpp"
#include "antforge/train.hpp"

namespace antforge {
namespace {

ParamSet single_param(std::vector<float> values) {
  ParamSet p(1);
  TensorF t(Shape{static_cast<int64_t>(values.size())}, values);
  t.set_requires_grad(true);
  p.add("w", std::move(t));
  return p;
}

void set_grad(ParamSet& p, const std::vector<float>& g) {
  auto dst = p.at("w").mutable_grad();
  std::copy(g.begin(), g.end(), dst.begin());
}

TEST(OptimizerTest, SgdMomentumMatchesClosedForm) {
  // Constant gradient g: v_t = g (1 - mu^t) / (1 - mu), so after k steps
  // w = w0 - lr g sum_{t=1..k} (1 - mu^t) / (1 - mu).
  const double lr = 0.1, mu = 0.9;
  const std::vector<float> w0 = {1.0f, -2.0f, 0.5f}, g = {0.3f, -0.1f, 0.0f};
  ParamSet p = single_param(w0);
  Optimizer opt({OptimKind::kSgdMomentum, lr, mu});
  const int k = 7;
  for (int t = 0; t < k; ++t) {
    set_grad(p, g);
    opt.step(p);
    for (float v : p.at("w").grad()) EXPECT_EQ(v, 0.0f);
  }
  double factor = 0;
  for (int t = 1; t <= k; ++t) factor += (1.0 - std::pow(mu, t)) / (1.0 - mu);
  for (size_t i = 0; i < w0.size(); ++i) {
    EXPECT_NEAR(p.at("w")[static_cast<int64_t>(i)], w0[i] - lr * g[i] * factor, 1e-5);
  }
  EXPECT_EQ(opt.steps(), k);
}

TEST(OptimizerTest, AdamWithConstantGradientStepsByLr) {
  // Bias correction makes m_hat = g and v_hat = g^2 for a constant gradient.
  const double lr = 0.01, eps = 1e-8;
  const std::vector<float> w0 = {0.0f, 1.0f}, g = {2.0f, -0.5f};
  ParamSet p = single_param(w0);
  OptimConfig c{OptimKind::kAdam, lr};
  c.adam_eps = eps;
  Optimizer opt(c);
  for (int t = 0; t < 5; ++t) {
    set_grad(p, g);
    opt.step(p);
  }
  for (size_t i = 0; i < w0.size(); ++i) {
    const double step = lr * g[i] / (std::abs(g[i]) + eps);
    EXPECT_NEAR(p.at("w")[static_cast<int64_t>(i)], w0[i] - 5 * step, 1e-5);
  }
}

TEST(OptimizerTest, SkipsFrozenParameters) {
  ParamSet p = single_param({1.0f});
  set_grad(p, {1.0f});
  p.at("w").set_requires_grad(false);
  Optimizer opt({OptimKind::kSgdMomentum, 0.5, 0.0});
  opt.step(p);
  EXPECT_EQ(p.at("w")[0], 1.0f);
}

TEST(OptimizerTest, RejectsBadHyperparameters) {
  EXPECT_THROW(Optimizer({OptimKind::kSgdMomentum, -1.0}), ConfigError);
  EXPECT_THROW(Optimizer({OptimKind::kSgdMomentum, 0.1, 1.0}), ConfigError);
  OptimConfig c{OptimKind::kAdam, 0.1};
  c.beta2 = 1.0;
  EXPECT_THROW(Optimizer{c}, ConfigError);
}

TEST(BatchPlanTest, CountsRoundAndSumToBatch) {
  EXPECT_EQ(BatchPlan::ant_default().counts(300), (std::vector<int64_t>{150, 90, 60}));
  EXPECT_EQ(BatchPlan::gnt_default().counts(7), (std::vector<int64_t>{3, 4}));
  EXPECT_EQ(BatchPlan({{0.0, 1.0}}).counts(5), (std::vector<int64_t>{0, 5}));
  for (int64_t b = 1; b < 60; ++b) {
    const auto c = BatchPlan({{0.2, 0.45, 0.35}}).counts(b);
    EXPECT_EQ(std::accumulate(c.begin(), c.end(), int64_t{0}), b);
    for (int64_t v : c) EXPECT_GE(v, 0);
  }
  EXPECT_THROW(BatchPlan({{0.5, 0.6}}).validate(), ConfigError);
  EXPECT_THROW(BatchPlan({{1.0}}).validate(), ConfigError);
  EXPECT_THROW(BatchPlan({{1.5, -0.5}}).validate(), ConfigError);
}

TEST(ReplayBufferTest, EvictsOldestAtCapacity) {
  ReplayBuffer r(3);
  for (int i = 0; i < 5; ++i) r.push(single_param({static_cast<float>(i)}));
  EXPECT_EQ(r.size(), 3u);
  EXPECT_EQ(r.total_pushed(), 5);
  for (size_t i = 0; i < 3; ++i) EXPECT_EQ(r.at(i).at("w")[0], static_cast<float>(i + 2));
}

TEST(ReplayBufferTest, SamplesUniformly) {
  ReplayBuffer r(4);
  Rng rng(3);
  EXPECT_THROW(r.sample(rng), StateError);
  EXPECT_THROW(ReplayBuffer(0), ConfigError);
  for (int i = 0; i < 4; ++i) r.push(single_param({static_cast<float>(i)}));
  std::vector<int> hist(4, 0);
  const int draws = 8000;
  for (int i = 0; i < draws; ++i) ++hist[r.sample_index(rng)];
  double chi2 = 0;
  for (int h : hist) chi2 += (h - draws / 4.0) * (h - draws / 4.0) / (draws / 4.0);
  EXPECT_LT(chi2, 16.27);  // chi^2_3 quantile at 0.999
}

// ---- steps on a small net ---------------------------------------------------------

struct SmallTask {
  Dataset data = synth_blobs(200, 10, 12, 0.05, 1, {0.5, 3});
  ArchSpec arch = ArchSpec::parse("conv:4:3:1:1,relu,maxpool:2:2,flatten,linear:10", {1, 12, 12});
  TensorF x = data.images.slice_rows(0, 20);
  std::vector<int> y{data.labels.begin(), data.labels.begin() + 20};
};

TEST(GntTest, ComposeLeavesCleanRowsUntouched) {
  SmallTask t;
  GntConfig cfg;
  Rng rng(4);
  const TensorF c = gnt_compose(t.x, cfg, rng);
  const int64_t row = 144;
  for (int64_t i = 0; i < 10 * row; ++i) ASSERT_EQ(c[i], t.x[i]);
  int64_t diff = 0;
  for (int64_t i = 10 * row; i < 20 * row; ++i) {
    diff += c[i] != t.x[i];
    ASSERT_TRUE(c[i] >= 0.0f && c[i] <= 1.0f);
  }
  // Background pixels are 0, so half of their noise clips back to 0.
  EXPECT_GT(diff, 5 * row);
  cfg.sigmas = {0.0};
  EXPECT_EQ(gnt_compose(t.x, cfg, rng).storage(), t.x.storage());
}

TEST(GntTest, MixedSigmasArePerRow) {
  TensorF x(Shape{400, 1, 10, 10}, 0.5f);
  GntConfig cfg;
  cfg.sigmas = {0.02, 0.1};
  cfg.plan = {{0.0, 1.0}};
  Rng rng(5);
  const TensorF c = gnt_compose(x, cfg, rng);
  int small = 0;
  for (int64_t r = 0; r < 400; ++r) {
    double s = 0;
    for (int64_t i = 0; i < 100; ++i) s += (c[r * 100 + i] - 0.5) * (c[r * 100 + i] - 0.5);
    const double sd = std::sqrt(s / 100);
    // Row standard deviations separate cleanly between the two settings.
    EXPECT_TRUE(std::abs(sd - 0.02) < 0.01 || std::abs(sd - 0.1) < 0.03) << sd;
    small += sd < 0.05;
  }
  EXPECT_NEAR(small, 200, 3 * std::sqrt(400 * 0.25));
}

TEST(GeneratorStepTest, FreezesClassifierAndRaisesLoss) {
  SmallTask t;
  TrainConfig tc;
  tc.epochs = 8;
  tc.batch_size = 20;
  tc.classifier_optim = {OptimKind::kSgdMomentum, 0.05, 0.9};
  const ParamSet classifier = train_vanilla(tc, t.arch, t.data, nullptr).classifier;
  const ParamSet before = classifier;

  NoiseGenerator g = build_generator(GeneratorVariant::kPointwise1x1, 1, Rng(6), 0.5);
  const ParamSet g0 = g.params;
  Optimizer adam({OptimKind::kAdam, 1e-2});
  auto mean_noisy_loss = [&](const NoiseGenerator& gen) {
    Rng r(77);
    double s = 0;
    for (int k = 0; k < 5; ++k) {
      s += batch_loss(t.arch, classifier, sample_adversarial_noise(gen, t.data.images, 3.0, r), t.data.labels);
    }
    return s / 5;
  };
  const double l0 = mean_noisy_loss(g);
  Rng rng(8);
  const auto losses = train_generator(t.arch, classifier, g, t.data, 3.0, 200, adam, 50, rng);
  EXPECT_EQ(losses.size(), 200u);
  EXPECT_TRUE(classifier == before);
  EXPECT_FALSE(g.params == g0);
  EXPECT_GT(mean_noisy_loss(g), l0);
}

TEST(AntStepTest, ReplayShareFallsBackUntilFirstSnapshot) {
  SmallTask t;
  ParamSet classifier = build_classifier(t.arch, Rng(1));
  classifier.set_requires_grad(true);
  const ParamSet before = classifier;
  AntConfig cfg;
  cfg.epsilon = 2.0;
  cfg.snapshot_interval = 1;
  AntState st = make_ant_state(cfg, 1, Rng(2));
  Optimizer opt({OptimKind::kSgdMomentum, 0.01, 0.9});
  Rng rng(3);
  const AntMetrics m1 = ant_step(t.arch, classifier, st, t.x, t.y, cfg, opt, rng);
  EXPECT_EQ(m1.clean, 10);
  EXPECT_EQ(m1.current, 10);
  EXPECT_EQ(m1.replayed, 0);
  EXPECT_EQ(st.replay.size(), 1u);
  const AntMetrics m2 = ant_step(t.arch, classifier, st, t.x, t.y, cfg, opt, rng);
  EXPECT_EQ(m2.clean, 10);
  EXPECT_EQ(m2.current, 6);
  EXPECT_EQ(m2.replayed, 4);
  EXPECT_EQ(st.step, 2);
  EXPECT_FALSE(classifier == before);
}

TEST(AntStepTest, RestartArchivesIncumbent) {
  SmallTask t;
  const ParamSet classifier = build_classifier(t.arch, Rng(1));
  AntConfig cfg;
  cfg.epsilon = 2.0;
  AntState st = make_ant_state(cfg, 1, Rng(2));
  const ParamSet incumbent = st.generator.params;
  Rng rng(4);
  restart_generator(st, t.arch, classifier, t.data, cfg, 5, 20, rng);
  EXPECT_EQ(st.restarts, 1);
  ASSERT_EQ(st.replay.size(), 1u);
  EXPECT_TRUE(st.replay.at(0) == incumbent);
  EXPECT_FALSE(st.generator.params == incumbent);
}

// Histogram of g(z) / rms(g(z)); the projection removes the overall scale.
std::vector<double> noise_histogram(const NoiseGenerator& g, int bins) {
  Rng rng(77);
  TensorF z({1, 1, 100, 100});
  for (auto& v : z.storage()) v = static_cast<float>(rng.normal());
  const TensorF o = generator_sample(g, z);
  double ss = 0.0;
  for (float v : o.data()) ss += static_cast<double>(v) * v;
  const double rms = std::sqrt(ss / static_cast<double>(o.numel()));
  std::vector<double> h(static_cast<size_t>(bins), 0.0);
  for (float v : o.data()) {
    const double u = std::clamp((v / rms + 4.0) / 8.0, 0.0, 1.0 - 1e-12);
    h[static_cast<size_t>(u * bins)] += 1.0 / static_cast<double>(o.numel());
  }
  return h;
}

TEST(AntStepTest, RestartsReachDistinctNoiseDistributions) {
  SmallTask t;
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 20;
  tc.classifier_optim = {OptimKind::kSgdMomentum, 0.05, 0.9};
  tc.eval_every = 0;
  const ParamSet classifier = train_vanilla(tc, t.arch, t.data, nullptr).classifier;
  AntConfig cfg;
  cfg.epsilon = 3.0;
  cfg.generator_optim.lr = 1e-2;
  AntState st = make_ant_state(cfg, 1, Rng(2));
  Rng rng(4);
  std::vector<std::vector<double>> converged;
  for (int r = 0; r < 4; ++r) {
    restart_generator(st, t.arch, classifier, t.data, cfg, 150, 50, rng);
    converged.push_back(noise_histogram(st.generator, 40));
  }
  double max_tv = 0.0;
  for (size_t a = 0; a < converged.size(); ++a) {
    for (size_t b = a + 1; b < converged.size(); ++b) {
      double tv = 0.0;
      for (size_t k = 0; k < converged[a].size(); ++k) tv += 0.5 * std::abs(converged[a][k] - converged[b][k]);
      max_tv = std::max(max_tv, tv);
    }
  }
  EXPECT_EQ(st.replay.size(), 4u);
  EXPECT_GT(max_tv, 0.1) << max_tv;
}

// ---- full runs ---------------------------------------------------------------------

TrainConfig small_config(TrainMode mode) {
  TrainConfig tc;
  tc.mode = mode;
  tc.epochs = 3;
  tc.batch_size = 25;
  tc.classifier_optim = {OptimKind::kSgdMomentum, 0.05, 0.9};
  tc.seed = 11;
  tc.ant.epsilon = 2.0;
  tc.ant.snapshot_interval = 4;
  return tc;
}

TEST(TrainTest, RunsAreDeterministic) {
  SmallTask t;
  for (TrainMode mode : {TrainMode::kVanilla, TrainMode::kGnt, TrainMode::kAnt}) {
    const auto a = train(small_config(mode), t.arch, t.data, &t.data);
    const auto b = train(small_config(mode), t.arch, t.data, &t.data);
    EXPECT_TRUE(a.classifier == b.classifier) << to_string(mode);
    EXPECT_EQ(metrics_csv(a.metrics), metrics_csv(b.metrics));
    auto other = small_config(mode);
    other.seed = 12;
    EXPECT_FALSE(train(other, t.arch, t.data, nullptr).classifier == a.classifier);
    EXPECT_EQ(a.generator.has_value(), mode == TrainMode::kAnt);
  }
}

TEST(TrainTest, VanillaLossDecreasesAndMetricsAreComplete) {
  SmallTask t;
  auto tc = small_config(TrainMode::kVanilla);
  tc.epochs = 6;
  const auto r = train(tc, t.arch, t.data, &t.data);
  std::vector<double> losses;
  int acc_rows = 0;
  for (const auto& m : r.metrics) {
    if (m.split == "train" && m.metric == "loss") losses.push_back(m.value);
    acc_rows += m.split == "test" && m.metric == "accuracy";
  }
  ASSERT_EQ(losses.size(), 6u);
  EXPECT_LT(losses.back(), 0.5 * losses.front());
  EXPECT_EQ(acc_rows, 6);
  EXPECT_EQ(metrics_csv(r.metrics).substr(0, 30), "step,epoch,split,metric,value\n");
}

TEST(TrainTest, AntReportsReplayGrowth) {
  SmallTask t;
  const auto r = train(small_config(TrainMode::kAnt), t.arch, t.data, nullptr);
  // 8 steps per epoch, one snapshot every 4 steps.
  EXPECT_EQ(r.replay_size, 6);
}

TEST(TrainTest, LrDecayAndInitChecks) {
  SmallTask t;
  auto tc = small_config(TrainMode::kVanilla);
  tc.lr_decay_epoch = 2;
  const auto r = train(tc, t.arch, t.data, nullptr);
  std::vector<double> lrs;
  for (const auto& m : r.metrics) {
    if (m.metric == "lr") lrs.push_back(m.value);
  }
  ASSERT_EQ(lrs.size(), 3u);
  EXPECT_DOUBLE_EQ(lrs[1], 0.05);
  EXPECT_NEAR(lrs[2], 0.005, 1e-12);
  const ArchSpec other = ArchSpec::parse("flatten,linear:10", {1, 12, 12});
  EXPECT_THROW(train(tc, t.arch, t.data, nullptr, build_classifier(other, Rng(1))), ConfigError);
  auto zero = tc;
  zero.epochs = 0;
  const auto init = build_classifier(t.arch, Rng(5));
  EXPECT_TRUE(train(zero, t.arch, t.data, nullptr, init).classifier == init);
}

}  // namespace
}  // namespace antforge
