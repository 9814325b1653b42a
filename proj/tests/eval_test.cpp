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

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "antforge/errors.hpp"
#include "antforge/eval.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace antforge {
namespace {

constexpr int64_t kSide = 8;
constexpr int64_t kPix = kSide * kSide;

ArchSpec linear_arch() { return ArchSpec::parse("flatten,linear:10", {1, kSide, kSide}); }

// Linear classifier with random weights; returned in float and double.
ParamSet linear_model(uint64_t seed, double scale = 1.0) {
  ParamSet p = build_classifier(linear_arch(), Rng(seed));
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, scale);
  for (auto& e : p.entries()) {
    for (auto& v : e.tensor.storage()) v = static_cast<float>(nd(gen));
  }
  return p;
}

// Every prediction is class `c`.
ParamSet constant_model(int c) {
  ParamSet p = build_classifier(linear_arch(), Rng(0));
  for (auto& v : p.entries()[0].tensor.storage()) v = 0.0f;
  for (auto& v : p.entries()[1].tensor.storage()) v = 0.0f;
  p.entries()[1].tensor[c] = 1.0f;
  return p;
}

Dataset gray_images(int64_t n, const std::vector<int>& labels) {
  Dataset d;
  d.images = TensorF(Shape{n, 1, kSide, kSide}, 0.5f);
  d.labels = labels;
  return d;
}

// Labels set to the model's own clean predictions so every image starts correct.
Dataset self_labeled(const ParamSet& model, int64_t n, uint64_t seed, double lo = 0.3, double hi = 0.7) {
  Dataset d;
  d.images = testing::random_tensor<float>({n, 1, kSide, kSide}, seed, lo, hi);
  d.labels = predict_labels(linear_arch(), model, d.images);
  return d;
}

// ---- inf-aware median ---------------------------------------------------------

TEST(MedianTest, HandlesInfinity) {
  EXPECT_EQ(inf_aware_median({3, 1, 2}), 2);
  EXPECT_EQ(inf_aware_median({4, 1, 2, 3}), 2.5);
  EXPECT_EQ(inf_aware_median({1, kInf, kInf}), kInf);
  EXPECT_EQ(inf_aware_median({1, 2, kInf, kInf}), kInf);
  EXPECT_EQ(inf_aware_median({1, 2, 3, kInf}), 2.5);
  EXPECT_EQ(inf_aware_median({0, 0, kInf}), 0);
  EXPECT_THROW(inf_aware_median({}), InputError);
}

// ---- epsilon star ----------------------------------------------------------------

TEST(EpsilonStarTest, ConstantModelNeverFlips) {
  const Dataset d = gray_images(6, std::vector<int>(6, 3));
  const auto r = epsilon_star(linear_arch(), constant_model(3), d, {NoiseFamily::kGaussian}, {}, 1);
  for (double v : r.norms) EXPECT_EQ(v, kInf);
  EXPECT_EQ(r.median, kInf);
}

TEST(EpsilonStarTest, MisclassifiedCleanScoresZero) {
  const Dataset d = gray_images(4, {1, 3, 1, 1});
  const auto r = epsilon_star(linear_arch(), constant_model(3), d, {NoiseFamily::kUniform}, {}, 1);
  EXPECT_EQ(r.norms[0], 0.0);
  EXPECT_EQ(r.norms[1], kInf);
  EXPECT_EQ(r.norms[2], 0.0);
  EXPECT_LE(r.norms[0], LineSearchConfig{}.m0);
  EXPECT_EQ(r.median, 0.0);
}

// For a linear model with no pixel reaching the box, the first class change
// along unit direction u is min over j of margin_j / -(w_y - w_j).u.
TEST(EpsilonStarTest, MatchesLinearOracle) {
  // Zero-mean weight rows and no bias keep the flips close to the gray
  // images, well inside the box.
  ParamSet model = linear_model(4, 0.05);
  for (int j = 0; j < 10; ++j) {
    double mean = 0;
    for (int64_t p = 0; p < kPix; ++p) mean += model.entries()[0].tensor[j * kPix + p];
    for (int64_t p = 0; p < kPix; ++p) model.entries()[0].tensor[j * kPix + p] -= static_cast<float>(mean / kPix);
    model.entries()[1].tensor[j] = 0.0f;
  }
  const Dataset d = self_labeled(model, 40, 5, 0.45, 0.55);
  const LineSearchConfig cfg{0.01, 0.0, 1e-4};
  const DirectionSource src{NoiseFamily::kGaussian};
  const auto r = epsilon_star(linear_arch(), model, d, src, cfg, 9);
  const auto& W = model.entries()[0].tensor;
  const auto& bias = model.entries()[1].tensor;
  int checked = 0;
  for (int64_t i = 0; i < d.size(); ++i) {
    const TensorF x = d.images.slice_rows(i, i + 1);
    const TensorF dir = line_search_direction(src, x, 9, i);
    double dn = 0;
    for (float v : dir.storage()) dn += static_cast<double>(v) * v;
    dn = std::sqrt(dn);
    const int y = d.labels[static_cast<size_t>(i)];
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 10; ++j) {
      if (j == y) continue;
      double margin = bias[y] - bias[j], slope = 0;
      for (int64_t p = 0; p < kPix; ++p) {
        const double dw = static_cast<double>(W[y * kPix + p]) - W[j * kPix + p];
        margin += dw * x[p];
        slope += dw * dir[p] / dn;
      }
      if (slope < 0) best = std::min(best, margin / -slope);
    }
    // Only score pixels that stay strictly inside the box up to the flip.
    double worst = 0;
    for (int64_t p = 0; p < kPix; ++p) {
      worst = std::max(worst, std::abs(dir[p] / dn) * best / std::min<double>(x[p], 1 - x[p]));
    }
    if (!std::isfinite(best) || worst >= 1.0 || best > 2.0 * std::sqrt(kPix)) continue;
    ++checked;
    EXPECT_NEAR(r.norms[static_cast<size_t>(i)], best, 2e-4 * best + 1e-5) << i;
    EXPECT_LE(r.lower[static_cast<size_t>(i)], best * (1 + 1e-5)) << i;
  }
  EXPECT_GE(checked, 20);
}

TEST(EpsilonStarTest, BracketHoldsPostHoc) {
  const ParamSet model = linear_model(6, 0.3);
  const Dataset d = self_labeled(model, 30, 7, 0.0, 1.0);
  const LineSearchConfig cfg{0.1, 0.0, 1e-3};
  for (NoiseFamily f : {NoiseFamily::kGaussian, NoiseFamily::kUniform}) {
    const auto r = epsilon_star(linear_arch(), model, d, {f}, cfg, 3);
    int finite = 0;
    for (int64_t i = 0; i < d.size(); ++i) {
      const double hi_norm = r.norms[static_cast<size_t>(i)];
      if (!std::isfinite(hi_norm)) continue;
      ++finite;
      const TensorF x = d.images.slice_rows(i, i + 1);
      const TensorF dir = line_search_direction({f}, x, 3, i);
      const double lo = r.lower[static_cast<size_t>(i)];
      // Re-evaluate: lo keeps the label (or is the zero start), the recorded
      // upper perturbation flips it, and the gap is within tolerance.
      if (lo > 0) {
        const TensorF xl = perturb_along(x, dir, lo);
        EXPECT_EQ(predict_labels(linear_arch(), model, xl)[0], d.labels[static_cast<size_t>(i)]);
      }
      EXPECT_LE(hi_norm, 2.0 * std::sqrt(kPix));
      EXPECT_GE(hi_norm, lo * (1 - 1e-6));
      EXPECT_LE(hi_norm - lo, 1e-3 * hi_norm + 1e-6);
    }
    EXPECT_GT(finite, 10);
  }
}

TEST(EpsilonStarTest, LargerGridAlignedCapNeverIncreasesNorms) {
  const ParamSet model = linear_model(8, 0.05);
  const Dataset d = self_labeled(model, 30, 9, 0.2, 0.8);
  const double m0 = 0.05;
  const auto small = epsilon_star(linear_arch(), model, d, {NoiseFamily::kGaussian}, {m0, m0 * 8, 1e-3}, 2);
  const auto big = epsilon_star(linear_arch(), model, d, {NoiseFamily::kGaussian}, {m0, m0 * 256, 1e-3}, 2);
  int finite = 0, newly = 0;
  for (size_t i = 0; i < small.norms.size(); ++i) {
    EXPECT_LE(big.norms[i], small.norms[i]);
    if (std::isfinite(small.norms[i])) {
      ++finite;
      EXPECT_EQ(big.norms[i], small.norms[i]);
    } else if (std::isfinite(big.norms[i])) {
      ++newly;
    }
  }
  EXPECT_GT(finite, 0);
  EXPECT_GT(newly, 0);
}

TEST(EpsilonStarTest, IndependentOfThreadsAndChunks) {
  const ParamSet model = linear_model(10, 0.2);
  const Dataset d = self_labeled(model, 50, 11, 0.0, 1.0);
  const auto a = epsilon_star(linear_arch(), model, d, {NoiseFamily::kGaussian}, {}, 5, {1, 64});
  const auto b = epsilon_star(linear_arch(), model, d, {NoiseFamily::kGaussian}, {}, 5, {3, 7});
  EXPECT_EQ(a.norms, b.norms);
  EXPECT_EQ(a.lower, b.lower);
}

TEST(EpsilonStarTest, AdversarialFamilyNeedsGenerator) {
  const Dataset d = gray_images(2, {0, 0});
  EXPECT_THROW(epsilon_star(linear_arch(), linear_model(1), d, {NoiseFamily::kAdversarial}, {}, 1), InputError);
  EXPECT_THROW(epsilon_star(linear_arch(), linear_model(1), d, {NoiseFamily::kGaussian}, {0.1, 0, 0}, 1),
               ConfigError);
  EXPECT_EQ(parse_noise_family("uniform"), NoiseFamily::kUniform);
  EXPECT_THROW(parse_noise_family("pink"), ConfigError);
}

// ---- corruption suite ----------------------------------------------------------------

TEST(CorruptionSuiteTest, IdentityCorruptionEqualsClean) {
  const ParamSet model = linear_model(12, 0.2);
  Dataset d;
  d.images = testing::random_tensor<float>({100, 1, kSide, kSide}, 13, 0.0, 1.0);
  d.labels = predict_labels(linear_arch(), model, d.images);
  for (int i = 0; i < 100; i += 3) d.labels[static_cast<size_t>(i)] = (d.labels[static_cast<size_t>(i)] + 1) % 10;
  SeverityTables t = SeverityTables::defaults();
  t.set_row(CorruptionKind::kBrightness, {0, 0, 0, 0, 0});
  const std::vector<CorruptionKind> kinds = {CorruptionKind::kBrightness};
  const std::vector<int> sev = {1, 2, 3, 4, 5};
  const auto r = corruption_accuracy(linear_arch(), model, d, kinds, sev, 1, t);
  EXPECT_NEAR(r.clean_accuracy, 0.66, 1e-12);
  for (const auto& c : r.cells) EXPECT_EQ(c.accuracy, r.clean_accuracy);
  EXPECT_EQ(r.mean_accuracy, r.clean_accuracy);
}

TEST(CorruptionSuiteTest, RandomModelScoresChance) {
  const ParamSet model = linear_model(14, 0.2);
  Dataset d;
  const int64_t n = 2000;
  d.images = testing::random_tensor<float>({n, 1, kSide, kSide}, 15, 0.0, 1.0);
  std::mt19937_64 gen(16);
  for (int64_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(gen() % 10));
  const std::vector<CorruptionKind> kinds = {CorruptionKind::kGaussianNoise, CorruptionKind::kRotate};
  const std::vector<int> sev = {1, 5};
  const auto r = corruption_accuracy(linear_arch(), model, d, kinds, sev, 2, SeverityTables::defaults());
  const double slack = 3.0 * std::sqrt(0.1 * 0.9 / n);
  for (const auto& c : r.cells) EXPECT_NEAR(c.accuracy, 0.1, slack) << c.kind << c.severity;
  EXPECT_EQ(r.cells.size(), 4u);
  EXPECT_EQ(r.kinds(), (std::vector<std::string>{"gaussian_noise", "rotate"}));
  // Only rotate counts towards the non-noise mean.
  EXPECT_DOUBLE_EQ(r.non_noise_mean_accuracy, r.kind_mean("rotate"));
}

TEST(CorruptionSuiteTest, DeterministicAcrossThreads) {
  const ParamSet model = linear_model(17, 0.2);
  const Dataset d = self_labeled(model, 150, 18, 0.0, 1.0);
  const std::vector<CorruptionKind> kinds = {CorruptionKind::kGaussianNoise, CorruptionKind::kImpulseNoise};
  const std::vector<int> sev = {3, 5};
  const auto a = corruption_accuracy(linear_arch(), model, d, kinds, sev, 4, SeverityTables::defaults(), {1, 64});
  const auto b = corruption_accuracy(linear_arch(), model, d, kinds, sev, 4, SeverityTables::defaults(), {4, 64});
  EXPECT_EQ(report_csv(a), report_csv(b));
  const auto c = corruption_accuracy(linear_arch(), model, d, kinds, sev, 5, SeverityTables::defaults(), {1, 64});
  EXPECT_NE(report_csv(a), report_csv(c));
}

// ---- mCE ---------------------------------------------------------------------------

TEST(MceTest, IdentityAndWorkedExample) {
  const ErrorTable base = {{"a", {0.4, 0.5, 0.6, 0.7, 0.8}}, {"b", {0.1, 0.2, 0.3, 0.4, 0.5}}};
  const auto same = mce(base, base);
  EXPECT_DOUBLE_EQ(same.mce_percent, 100.0);
  const ErrorTable model = {{"a", {0.2, 0.3, 0.4, 0.5, 0.6}}};
  const ErrorTable baseline = {{"a", {0.4, 0.5, 0.6, 0.7, 0.8}}};
  const auto r = mce(model, baseline);
  EXPECT_NEAR(r.ce_percent.at("a"), 200.0 / 3.0, 1e-9);
  EXPECT_NEAR(r.mce_percent, 66.67, 5e-3);
}

TEST(MceTest, HalfErrorsAndScaleInvariance) {
  const ErrorTable base = {{"a", {0.4, 0.5, 0.6}}, {"b", {0.2, 0.2, 0.9}}};
  ErrorTable half = base, scaled_m = base, scaled_b = base;
  for (auto& [k, v] : half) {
    for (auto& e : v) e *= 0.5;
  }
  EXPECT_NEAR(mce(half, base).mce_percent, 50.0, 1e-9);
  for (auto& [k, v] : scaled_m) {
    for (auto& e : v) e *= 0.37;
  }
  for (auto& [k, v] : scaled_b) {
    for (auto& e : v) e *= 0.37;
  }
  EXPECT_NEAR(mce(scaled_m, scaled_b).ce_percent.at("b"), mce(base, base).ce_percent.at("b"), 1e-9);
  EXPECT_NEAR(mce(half, base).mce_percent, mce(half, base).mce_percent, 0);
  EXPECT_NEAR(mce(scaled_m, scaled_b).mce_percent, 100.0, 1e-9);
}

TEST(MceTest, Errors) {
  const ErrorTable base = {{"a", {0.4, 0.5}}};
  EXPECT_THROW(mce({{"b", {0.1, 0.1}}}, base), InputError);
  EXPECT_THROW(mce({{"a", {0.1}}}, base), InputError);
  EXPECT_THROW(mce({{"a", {0.1, 0.1}}}, {{"a", {0.0, 0.0}}}), UndefinedCeError);
  EXPECT_THROW(mce({}, base), InputError);
}

// ---- PGD ----------------------------------------------------------------------------

struct PgdFixture {
  ParamSet model = linear_model(20, 0.2);
  Dataset d = self_labeled(model, 60, 21, 0.0, 1.0);
};

TEST(PgdTest, ZeroEpsilonReturnsInput) {
  PgdFixture f;
  PgdConfig cfg;
  cfg.epsilon = 0.0;
  const auto r = pgd_attack(linear_arch(), f.model, f.d.images, f.d.labels, cfg);
  EXPECT_EQ(r.x_adv.storage(), f.d.images.storage());
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
}

TEST(PgdTest, SingleIterationMovesAtMostStep) {
  PgdFixture f;
  for (double eps : {0.1, 0.005}) {
    PgdConfig cfg;
    cfg.epsilon = eps;
    cfg.step = 0.01;
    cfg.iters = 1;
    const auto r = pgd_attack(linear_arch(), f.model, f.d.images, f.d.labels, cfg);
    for (int64_t i = 0; i < r.x_adv.numel(); ++i) {
      ASSERT_LE(std::abs(static_cast<double>(r.x_adv[i]) - f.d.images[i]), std::min(cfg.step, eps));
    }
  }
}

TEST(PgdTest, LinfAdversarialExamplesAreFeasibleAndEffective) {
  PgdFixture f;
  PgdConfig cfg;  // eps 0.1, step 0.01, 100 iterations
  for (bool start : {false, true}) {
    cfg.random_start = start;
    const auto r = pgd_attack(linear_arch(), f.model, f.d.images, f.d.labels, cfg, 3);
    for (int64_t i = 0; i < r.x_adv.numel(); ++i) {
      const double v = r.x_adv[i];
      ASSERT_LE(std::abs(v - f.d.images[i]), cfg.epsilon);
      ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    }
    EXPECT_LT(r.accuracy, 1.0);
    const auto pred = predict_labels(linear_arch(), f.model, r.x_adv);
    for (size_t k = 0; k < pred.size(); ++k) EXPECT_EQ(r.success[k] != 0, pred[k] != f.d.labels[k]);
  }
}

TEST(PgdTest, L2StaysInBall) {
  PgdFixture f;
  PgdConfig cfg;
  cfg.norm = PgdNorm::kL2;
  cfg.epsilon = 0.8;
  cfg.step = 0.1;
  cfg.iters = 50;
  cfg.random_start = true;
  const auto r = pgd_attack(linear_arch(), f.model, f.d.images, f.d.labels, cfg, 4);
  for (int64_t b = 0; b < f.d.size(); ++b) {
    double s = 0;
    for (int64_t p = 0; p < kPix; ++p) {
      const double v = r.x_adv[b * kPix + p];
      ASSERT_TRUE(v >= 0.0 && v <= 1.0);
      s += (v - f.d.images[b * kPix + p]) * (v - f.d.images[b * kPix + p]);
    }
    EXPECT_LE(std::sqrt(s), cfg.epsilon + 1e-6);
  }
  EXPECT_LT(r.accuracy, 1.0);
}

TEST(PgdTest, IndependentOfThreads) {
  PgdFixture f;
  PgdConfig cfg;
  cfg.random_start = true;
  const auto a = pgd_attack(linear_arch(), f.model, f.d.images, f.d.labels, cfg, 5, {1, 16});
  const auto b = pgd_attack(linear_arch(), f.model, f.d.images, f.d.labels, cfg, 5, {3, 16});
  EXPECT_EQ(a.x_adv.storage(), b.x_adv.storage());
}

TEST(PgdTest, LinfBoundsAreInward) {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int i = 0; i < 10000; ++i) {
    const float x = u(gen);
    const double eps = 0.1;
    const auto [lo, hi] = linf_bounds(x, eps);
    EXPECT_LE(static_cast<double>(x) - lo, eps);
    EXPECT_LE(static_cast<double>(hi) - x, eps);
    EXPECT_GE(lo, 0.0f);
    EXPECT_LE(hi, 1.0f);
    EXPECT_LE(lo, x);
    EXPECT_GE(hi, x);
  }
}

// ---- reports ----------------------------------------------------------------------------

EvalReport sample_report() {
  EvalReport r;
  r.clean_accuracy = 0.9875;
  r.cells = {{"gaussian_noise", 1, 0.95, 100}, {"gaussian_noise", 2, 0.9, 100}, {"rotate", 1, 0.5, 100},
             {"rotate", 2, 0.25, 100}};
  finalize_report(r);
  return r;
}

TEST(ReportTest, CsvRoundTrip) {
  const EvalReport r = sample_report();
  const std::string csv = report_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "kind,severity,accuracy,error");
  const EvalReport back = parse_report_csv(csv);
  EXPECT_EQ(back.clean_accuracy, r.clean_accuracy);
  ASSERT_EQ(back.cells.size(), r.cells.size());
  for (size_t i = 0; i < r.cells.size(); ++i) {
    EXPECT_EQ(back.cells[i].kind, r.cells[i].kind);
    EXPECT_EQ(back.cells[i].accuracy, r.cells[i].accuracy);
  }
  EXPECT_DOUBLE_EQ(r.mean_accuracy, (0.95 + 0.9 + 0.5 + 0.25) / 4);
  EXPECT_DOUBLE_EQ(r.non_noise_mean_accuracy, 0.375);
  EXPECT_EQ(r.errors().at("rotate"), (std::vector<double>{0.5, 0.75}));
  EXPECT_THROW(parse_report_csv("kind,severity\nx,1\n"), Error);
}

TEST(ReportTest, JsonAndMarkdown) {
  EvalReport r = sample_report();
  r.epsilon_star["gaussian"] = kInf;
  const auto j = nlohmann::json::parse(summary_json(r));
  EXPECT_DOUBLE_EQ(j["clean_accuracy"].get<double>(), 0.9875);
  const std::string md = markdown_table({{"vanilla", r}});
  EXPECT_NE(md.find("| model |"), std::string::npos) << md;
  EXPECT_NE(md.find("vanilla"), std::string::npos);
  EXPECT_NE(md.find("98.8"), std::string::npos) << md;
}

}  // namespace
}  // namespace antforge
