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
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "antforge/nets.hpp"
#include "test_util.hpp"

namespace antforge {
namespace {

using testing::random_tensor;
using testing::temp_dir;

constexpr const char* kSmallCnn = "conv:4:3,relu,maxpool:2,conv:6:3:2,relu,flatten,linear:8,relu,linear:3";

TEST(ArchSpec, ParseAndCanonicalForm) {
  const ArchSpec a = ArchSpec::parse("conv:8:3, relu ,maxpool:2,flatten,linear:10", {1, 12, 12});
  EXPECT_EQ(a.to_string(), "conv:8:3:1:1,relu,maxpool:2:2,flatten,linear:10");
  EXPECT_EQ(ArchSpec::parse(a.to_string(), {1, 12, 12}), a);
  EXPECT_THROW(ArchSpec::parse("conv:8", {1, 8, 8}), ConfigError);
  EXPECT_THROW(ArchSpec::parse("pool:2", {1, 8, 8}), ConfigError);
  EXPECT_THROW(ArchSpec::parse("conv:8:4", {1, 8, 8}), ConfigError);
}

TEST(ArchSpec, MadryShapesAndParameterCount) {
  const ArchSpec a = madry_mnist_arch();
  const auto shapes = a.infer_shapes();
  EXPECT_EQ(shapes.back(), (Shape{10}));
  // conv 5x5 1->32, conv 5x5 32->64, fc 7*7*64 -> 1024, fc 1024 -> 10.
  const int64_t want = (25 * 1 * 32 + 32) + (25 * 32 * 64 + 64) + (7 * 7 * 64 * 1024 + 1024) + (1024 * 10 + 10);
  EXPECT_EQ(a.parameter_count(), want);
  const ParamSet p = build_classifier(a, Rng(1));
  EXPECT_EQ(p.parameter_count(), want);
  EXPECT_EQ(predict_logits(a, p, TensorF({1, 1, 28, 28}, 0.5f)).shape(), (Shape{1, 10}));
}

TEST(ArchSpec, MismatchedLinearInputIsConfigError) {
  EXPECT_THROW(ArchSpec::parse("flatten,linear:10:100", {1, 8, 8}).infer_shapes(), ConfigError);
  EXPECT_NO_THROW(ArchSpec::parse("flatten,linear:10:64", {1, 8, 8}).infer_shapes());
  EXPECT_THROW(ArchSpec::parse("conv:3:3,residual", {1, 8, 8}).infer_shapes(), ConfigError);
}

TEST(ArchSpec, FingerprintTracksArchitecture) {
  const ArchSpec a = ArchSpec::parse(kSmallCnn, {1, 10, 10});
  EXPECT_EQ(a.fingerprint(), ArchSpec::parse(kSmallCnn, {1, 10, 10}).fingerprint());
  EXPECT_NE(a.fingerprint(), ArchSpec::parse(kSmallCnn, {1, 12, 12}).fingerprint());
  EXPECT_NE(a.fingerprint(), ArchSpec::parse("conv:4:3,relu,flatten,linear:3", {1, 10, 10}).fingerprint());
}

TEST(Classifier, SameSeedSameParameters) {
  const ArchSpec a = ArchSpec::parse(kSmallCnn, {1, 10, 10});
  EXPECT_EQ(build_classifier(a, Rng(7)), build_classifier(a, Rng(7)));
  EXPECT_FALSE(build_classifier(a, Rng(7)) == build_classifier(a, Rng(8)));
}

TEST(Classifier, HeNormalWeightsZeroBiases) {
  const ArchSpec a = ArchSpec::parse("flatten,linear:400", {1, 20, 20});
  const ParamSet p = build_classifier(a, Rng(3));
  const auto& w = p.entries()[0].tensor;
  double s2 = 0;
  for (float v : w.data()) s2 += double(v) * v;
  EXPECT_NEAR(s2 / w.numel(), 2.0 / 400, 0.05 * 2.0 / 400);
  for (float v : p.entries()[1].tensor.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Classifier, ForwardRejectsForeignParameters) {
  const ArchSpec a = ArchSpec::parse(kSmallCnn, {1, 10, 10});
  const ArchSpec b = ArchSpec::parse(kSmallCnn, {1, 12, 12});
  EXPECT_THROW(predict_logits(a, build_classifier(b, Rng(1)), TensorF({1, 1, 10, 10})), ConfigError);
  EXPECT_THROW(predict_logits(a, build_classifier(a, Rng(1)), TensorF({1, 1, 12, 12})), ConfigError);
}

// Every parameter gradient of a 2 conv + 2 linear net against central
// differences in double precision.
TEST(Classifier, SmallCnnGradientsMatchFiniteDifferences) {
  const ArchSpec a = ArchSpec::parse(kSmallCnn, {2, 10, 10});
  BasicParamSet<double> p = build_classifier(a, Rng(5)).cast<double>();
  p.set_requires_grad(true);
  const TensorD x = random_tensor<double>({3, 2, 10, 10}, 9, 0, 1);
  const std::vector<int> y = {0, 2, 1};
  auto loss = [&](BasicParamSet<double>& ps) {
    Tape<double> t(false);
    return softmax_cross_entropy(forward(a, ps, t.constant(x), false), y).value()[0];
  };
  {
    Tape<double> t;
    t.backward(softmax_cross_entropy(forward(a, p, t.constant(x), true), y));
  }
  double worst = 0;
  const double h = 1e-5;
  for (auto& e : p.entries()) {
    ASSERT_TRUE(e.tensor.has_grad()) << e.name;
    const std::vector<double> g(e.tensor.grad().begin(), e.tensor.grad().end());
    BasicParamSet<double> q = p;
    auto& t = q.at(e.name);
    for (int64_t i = 0; i < t.numel(); ++i) {
      const double x0 = t[i];
      t[i] = x0 + h;
      const double up = loss(q);
      t[i] = x0 - h;
      const double down = loss(q);
      t[i] = x0;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6}));
    }
  }
  EXPECT_LT(worst, 1e-4);
}

// ---- generator ----------------------------------------------------------------------

TensorF randn(Shape s, uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n;
  TensorF t(std::move(s));
  for (auto& v : t.storage()) v = static_cast<float>(n(gen));
  return t;
}

// Random parameters everywhere, so structure claims are not an artifact of the
// zero-initialized output layer.
void randomize(NoiseGenerator& g, uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n(0.0, 0.4);
  for (auto& e : g.params.entries())
    for (auto& v : e.tensor.storage()) v = static_cast<float>(n(gen));
}

TEST(Generator, ArchitectureHasExpectedKernels) {
  for (auto variant : {GeneratorVariant::kPointwise1x1, GeneratorVariant::kLocal3x3}) {
    const NoiseGenerator g = build_generator(variant, 3, Rng(1), 0.5);
    int convs = 0, k3 = 0;
    bool residual = false;
    for (const auto& l : g.arch.layers) {
      if (l.kind == LayerKind::kConv) {
        ++convs;
        k3 += l.kernel == 3;
        EXPECT_TRUE(l.kernel == 1 || l.kernel == 3);
      }
      residual = residual || l.kind == LayerKind::kResidualAddInput;
    }
    EXPECT_EQ(convs, 4);
    EXPECT_EQ(k3, variant == GeneratorVariant::kLocal3x3 ? 1 : 0);
    EXPECT_TRUE(residual);
    const auto& last = g.params.entries().back().tensor;
    EXPECT_EQ(last.shape(), (Shape{3}));
  }
}

TEST(Generator, InitializedGeneratorIsScaledIdentity) {
  for (auto variant : {GeneratorVariant::kPointwise1x1, GeneratorVariant::kLocal3x3}) {
    const double sigma = 0.37;
    const NoiseGenerator g = build_generator(variant, 2, Rng(4), sigma);
    const TensorF z = randn({3, 2, 9, 7}, 11);
    const TensorF out = generator_sample(g, z);
    for (int64_t i = 0; i < z.numel(); ++i) EXPECT_EQ(out[i], static_cast<float>(sigma) * z[i]);
  }
}

TEST(Generator, InitialOutputMomentsMatchSigma) {
  const double sigma = 0.5;
  const NoiseGenerator g = build_generator(GeneratorVariant::kPointwise1x1, 1, Rng(2), sigma);
  const TensorF out = generator_sample(g, randn({10, 1, 100, 100}, 3));
  const double n = static_cast<double>(out.numel());
  double s = 0, s2 = 0;
  for (float v : out.data()) {
    s += v;
    s2 += double(v) * v;
  }
  const double mean = s / n, sd = std::sqrt(s2 / n - mean * mean);
  EXPECT_NEAR(mean, 0.0, 3 * sigma / std::sqrt(n));
  EXPECT_NEAR(sd, sigma, 3 * sigma / std::sqrt(n));
}

TEST(Generator, PointwiseVariantIsPermutationEquivariant) {
  NoiseGenerator g = build_generator(GeneratorVariant::kPointwise1x1, 2, Rng(6), 0.5);
  randomize(g, 17);
  const int64_t H = 6, W = 5, P = H * W;
  const TensorF z = randn({1, 2, H, W}, 5);
  std::vector<int64_t> perm(P);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
  TensorF zp(z.shape());
  for (int c = 0; c < 2; ++c)
    for (int64_t p = 0; p < P; ++p) zp[c * P + p] = z[c * P + perm[p]];
  const TensorF a = generator_sample(g, z), b = generator_sample(g, zp);
  for (int c = 0; c < 2; ++c)
    for (int64_t p = 0; p < P; ++p) EXPECT_EQ(b[c * P + p], a[c * P + perm[p]]);
}

TEST(Generator, LocalVariantReceptiveFieldIsThreeByThree) {
  NoiseGenerator g = build_generator(GeneratorVariant::kLocal3x3, 1, Rng(6), 0.5);
  randomize(g, 23);
  const int64_t H = 9, W = 9;
  const TensorF z = randn({1, 1, H, W}, 8);
  const TensorF base = generator_sample(g, z);
  const int64_t pi = 4, pj = 4;
  TensorF far = z;  // change every z pixel at Chebyshev distance >= 2 from (pi, pj)
  for (int64_t i = 0; i < H; ++i)
    for (int64_t j = 0; j < W; ++j)
      if (std::max(std::abs(i - pi), std::abs(j - pj)) >= 2) far[i * W + j] += 1.0f;
  EXPECT_EQ(generator_sample(g, far)[pi * W + pj], base[pi * W + pj]);
  TensorF near = z;
  near[(pi + 1) * W + pj] += 1.0f;
  EXPECT_NE(generator_sample(g, near)[pi * W + pj], base[pi * W + pj]);
}

TEST(Generator, RejectsChannelMismatch) {
  const NoiseGenerator g = build_generator(GeneratorVariant::kPointwise1x1, 1, Rng(1), 0.5);
  EXPECT_THROW(generator_sample(g, TensorF({1, 3, 4, 4})), ConfigError);
  EXPECT_THROW(build_generator(GeneratorVariant::kPointwise1x1, 1, Rng(1), 0.0), ConfigError);
}

// A trained k1 generator stored under tests/fixtures reproduces its recorded
// output. ANTFORGE_REGEN_FIXTURES=1 rewrites the fixture.
TEST(Generator, TrainedFixtureReproducesStoredOutput) {
  const std::filesystem::path dir = std::filesystem::path(ANTFORGE_SOURCE_DIR) / "tests" / "fixtures";
  const auto ckpt = dir / "generator_k1.ckpt";
  const auto expected_path = dir / "generator_k1_output.bin";
  const NoiseGenerator like = build_generator(GeneratorVariant::kPointwise1x1, 1, Rng(0), 0.5);
  const TensorF z = randn({2, 1, 6, 6}, 99);
  if (std::getenv("ANTFORGE_REGEN_FIXTURES") != nullptr) {
    NoiseGenerator g = like;
    randomize(g, 1234);
    std::filesystem::create_directories(dir);
    save_checkpoint(g.params, ckpt);
    const TensorF out = generator_sample(g, z);
    std::ofstream f(expected_path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(out.ptr()), static_cast<std::streamsize>(out.numel() * 4));
  }
  NoiseGenerator g = like;
  g.params = load_checkpoint(ckpt, like.arch.fingerprint());
  std::vector<float> want(static_cast<size_t>(z.numel()));
  std::ifstream f(expected_path, std::ios::binary);
  ASSERT_TRUE(f.good());
  f.read(reinterpret_cast<char*>(want.data()), static_cast<std::streamsize>(want.size() * 4));
  const TensorF out = generator_sample(g, z);
  for (int64_t i = 0; i < z.numel(); ++i) EXPECT_NEAR(out[i], want[i], 1e-6 * std::max(1.0f, std::abs(want[i])));
}

// ---- checkpoints ----------------------------------------------------------------------

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = temp_dir("ckpt");
    arch_ = ArchSpec::parse(kSmallCnn, {1, 10, 10});
    params_ = build_classifier(arch_, Rng(3));
    path_ = dir_ / "c.ckpt";
    save_checkpoint(params_, path_);
  }

  std::string bytes() const {
    std::ifstream in(path_, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  void write(const std::string& b) const {
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    out << b;
  }

  std::filesystem::path dir_, path_;
  ArchSpec arch_;
  ParamSet params_;
};

TEST_F(CheckpointTest, RoundTripIsBitIdentical) {
  const ParamSet back = load_checkpoint(path_, arch_.fingerprint());
  EXPECT_EQ(back, params_);
  EXPECT_EQ(back.fingerprint(), arch_.fingerprint());
}

TEST_F(CheckpointTest, SizeIsHeaderPlusPayload) {
  uint64_t want = 4 + 4 + 8 + 4;
  for (const auto& e : params_.entries()) want += 4 + e.name.size() + 4 + 8 * e.tensor.rank() + 4 * e.tensor.numel();
  EXPECT_EQ(checkpoint_size(params_), want);
  EXPECT_EQ(std::filesystem::file_size(path_), want);
  EXPECT_EQ(bytes().substr(0, 4), "ANTC");
}

TEST_F(CheckpointTest, MadryCheckpointSize) {
  const ParamSet p = build_classifier(madry_mnist_arch(), Rng(1));
  const uint64_t payload = 4ull * static_cast<uint64_t>(madry_mnist_arch().parameter_count());
  EXPECT_GT(checkpoint_size(p), payload);
  EXPECT_LT(checkpoint_size(p), payload + 512);
}

TEST_F(CheckpointTest, AlteredFingerprintIsRejected) {
  std::string b = bytes();
  b[8] ^= 0x01;
  write(b);
  EXPECT_THROW(load_checkpoint(path_, arch_.fingerprint()), FingerprintMismatchError);
}

TEST_F(CheckpointTest, VersionMismatch) {
  std::string b = bytes();
  b[4] = 9;
  write(b);
  EXPECT_THROW(load_checkpoint(path_), VersionMismatchError);
}

TEST_F(CheckpointTest, TruncatedFile) {
  const std::string b = bytes();
  for (size_t cut : {size_t{6}, size_t{20}, b.size() - 1}) {
    write(b.substr(0, cut));
    EXPECT_THROW(load_checkpoint(path_), TruncatedCheckpointError) << cut;
  }
}

TEST_F(CheckpointTest, BadMagicAndTrailingBytes) {
  std::string b = bytes();
  write("XNTC" + b.substr(4));
  EXPECT_THROW(load_checkpoint(path_), CheckpointError);
  write(b + "x");
  EXPECT_THROW(load_checkpoint(path_), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir_ / "missing.ckpt"), CheckpointError);
}

}  // namespace
}  // namespace antforge
