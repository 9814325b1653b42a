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

#include <cstdlib>

#include "antforge/run.hpp"

namespace antforge {

namespace {

constexpr const char* kDefaults = R"(# antforge run configuration
[data]
# synthetic | mnist | idx
source = synthetic
# mnist: directory holding the four standard IDX files
dir = mnist
train_images =
train_labels =
test_images =
test_labels =
# 0 = use every image
train_limit = 0
test_limit = 0
synth_train = 2000
synth_test = 500
synth_classes = 10
synth_size = 28
synth_noise = 0.05
synth_jitter = 1.5
synth_strokes = 3

[model]
# layer list or "madry"
arch = madry

[optim]
epochs = 10
batch_size = 300
# sgdm | adam
kind = sgdm
lr = 0.001
momentum = 0.9
beta1 = 0.9
beta2 = 0.999
adam_eps = 1e-08
# 0 = no decay
lr_decay_epoch = 0
lr_decay_factor = 0.1
eval_every = 1

[gnt]
sigmas = 0.5
fractions = 0.5, 0.5

[ant]
epsilon = 10
fractions = 0.5, 0.3, 0.2
inner_steps = 1
snapshot_interval = 50
replay_capacity = 32
restart_interval = 0
restart_warmup = 200
variant = k1
generator_width = 20
sigma_init = 0.5
generator_lr = 0.0001
# renorm differentiates the sphere projection scale, constant stops it
gamma_grad = renorm
resample_marginal = false

[eval]
kinds = all
severities = 1, 2, 3, 4, 5
# empty = built-in tables
severity_tables =
chunk = 64
test_limit = 0
line_search_m0 = 0.1
# 0 = 2 sqrt(N)
line_search_m_max = 0
line_search_tol = 0.001
direction = gaussian
probe_steps = 300
probe_batch = 100
probe_epsilon = 10
probe_variant = k1
pgd_norm = linf
pgd_eps = 0.1
pgd_step = 0.01
pgd_iters = 100
pgd_random_start = false

[seed]
master = 0
)";

OptimKind parse_optim_kind(const std::string& s) {
  if (s == "sgdm") return OptimKind::kSgdMomentum;
  if (s == "adam") return OptimKind::kAdam;
  throw ConfigError("optim.kind: expected sgdm or adam, got '" + s + "'");
}

template <typename F>
auto field(std::string_view section, std::string_view key, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    const std::string prefix = std::string(section) + "." + std::string(key);
    const std::string what = e.what();
    if (what.rfind(prefix, 0) == 0) throw;
    throw ConfigError(prefix + ": " + what);
  }
}

void require(bool ok, std::string_view section, std::string_view key, const std::string& msg) {
  if (!ok) throw ConfigError(std::string(section) + "." + std::string(key) + ": " + msg);
}

Dataset apply_limit(Dataset d, int64_t limit) {
  if (limit > 0 && limit < d.size()) return d.slice(0, limit);
  return d;
}

}  // namespace

ConfigFile default_run_config() { return ConfigFile::parse(kDefaults, "<defaults>"); }

void apply_override(ConfigFile& config, std::string_view assignment) {
  const size_t eq = assignment.find('=');
  const size_t dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
    throw ConfigError("override '" + std::string(assignment) + "': expected section.key=value");
  }
  auto trim = [](std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    return std::string(s);
  };
  const std::string section = trim(assignment.substr(0, dot));
  const std::string key = trim(assignment.substr(dot + 1, eq - dot - 1));
  if (!config.has(section, key)) throw ConfigError(section + "." + key + ": unknown key");
  config.set(section, key, trim(assignment.substr(eq + 1)));
}

ConfigFile resolve_run_config(const ConfigFile& user, std::span<const std::string> overrides) {
  ConfigFile out = default_run_config();
  for (const auto& sec : user.sections()) {
    for (const auto& [key, value] : user.entries(sec)) {
      if (!out.has(sec, key)) throw ConfigError((sec.empty() ? std::string("<top>") : sec) + "." + key + ": unknown key");
      out.set(sec, key, value);
    }
  }
  for (const auto& o : overrides) apply_override(out, o);
  // Touch every typed accessor so bad values fail now, not mid-run.
  train_config_from(out, TrainMode::kAnt);
  eval_settings_from(out);
  const std::string source = out.get_string("data", "source", "");
  require(source == "synthetic" || source == "mnist" || source == "idx", "data", "source",
          "expected synthetic, mnist or idx, got '" + source + "'");
  return out;
}

TrainConfig train_config_from(const ConfigFile& c, TrainMode mode) {
  TrainConfig t;
  t.mode = mode;
  t.epochs = c.get_int("optim", "epochs", t.epochs);
  require(t.epochs >= 0, "optim", "epochs", "must be >= 0");
  t.batch_size = c.get_int("optim", "batch_size", t.batch_size);
  require(t.batch_size > 0, "optim", "batch_size", "must be > 0");
  t.classifier_optim.kind = parse_optim_kind(c.get_string("optim", "kind", "sgdm"));
  t.classifier_optim.lr = c.get_double("optim", "lr", t.classifier_optim.lr);
  require(t.classifier_optim.lr > 0, "optim", "lr", "must be > 0");
  t.classifier_optim.momentum = c.get_double("optim", "momentum", t.classifier_optim.momentum);
  t.classifier_optim.beta1 = c.get_double("optim", "beta1", t.classifier_optim.beta1);
  t.classifier_optim.beta2 = c.get_double("optim", "beta2", t.classifier_optim.beta2);
  t.classifier_optim.adam_eps = c.get_double("optim", "adam_eps", t.classifier_optim.adam_eps);
  t.lr_decay_epoch = c.get_int("optim", "lr_decay_epoch", 0);
  require(t.lr_decay_epoch >= 0, "optim", "lr_decay_epoch", "must be >= 0");
  t.lr_decay_factor = c.get_double("optim", "lr_decay_factor", t.lr_decay_factor);
  t.eval_every = c.get_int("optim", "eval_every", t.eval_every);
  t.seed = c.get_uint("seed", "master", 0);

  t.gnt.sigmas = c.get_doubles("gnt", "sigmas", t.gnt.sigmas);
  require(!t.gnt.sigmas.empty(), "gnt", "sigmas", "needs at least one value");
  for (double s : t.gnt.sigmas) require(s >= 0, "gnt", "sigmas", "must be >= 0");
  t.gnt.plan.fractions = c.get_doubles("gnt", "fractions", t.gnt.plan.fractions);
  require(t.gnt.plan.fractions.size() == 2, "gnt", "fractions", "expected clean, noisy");
  field("gnt", "fractions", [&] { t.gnt.plan.validate(); });

  AntConfig& a = t.ant;
  a.epsilon = c.get_double("ant", "epsilon", a.epsilon);
  require(a.epsilon > 0, "ant", "epsilon", "must be > 0");
  a.plan.fractions = c.get_doubles("ant", "fractions", a.plan.fractions);
  require(a.plan.fractions.size() == 3, "ant", "fractions", "expected clean, current, replay");
  field("ant", "fractions", [&] { a.plan.validate(); });
  a.inner_steps = static_cast<int>(c.get_int("ant", "inner_steps", a.inner_steps));
  require(a.inner_steps >= 1, "ant", "inner_steps", "must be >= 1");
  a.snapshot_interval = c.get_int("ant", "snapshot_interval", a.snapshot_interval);
  require(a.snapshot_interval >= 0, "ant", "snapshot_interval", "must be >= 0");
  a.replay_capacity = static_cast<size_t>(c.get_uint("ant", "replay_capacity", a.replay_capacity));
  require(a.replay_capacity >= 1, "ant", "replay_capacity", "must be >= 1");
  a.restart_interval = c.get_int("ant", "restart_interval", a.restart_interval);
  require(a.restart_interval >= 0, "ant", "restart_interval", "must be >= 0");
  a.restart_warmup = c.get_int("ant", "restart_warmup", a.restart_warmup);
  require(a.restart_warmup >= 0, "ant", "restart_warmup", "must be >= 0");
  a.variant = field("ant", "variant", [&] { return parse_generator_variant(c.get_string("ant", "variant", "k1")); });
  a.generator_width = c.get_int("ant", "generator_width", a.generator_width);
  require(a.generator_width >= 1, "ant", "generator_width", "must be >= 1");
  a.sigma_init = c.get_double("ant", "sigma_init", a.sigma_init);
  require(a.sigma_init > 0, "ant", "sigma_init", "must be > 0");
  a.generator_optim.lr = c.get_double("ant", "generator_lr", a.generator_optim.lr);
  require(a.generator_optim.lr > 0, "ant", "generator_lr", "must be > 0");
  a.gamma_grad = field("ant", "gamma_grad", [&] { return parse_gamma_grad(c.get_string("ant", "gamma_grad", "renorm")); });
  a.resample_marginal = c.get_bool("ant", "resample_marginal", false);
  return t;
}

ArchSpec arch_from(const ConfigFile& c, const Shape& input) {
  const std::string text = c.get_string("model", "arch", "madry");
  return field("model", "arch", [&] {
    ArchSpec a = text == "madry" ? madry_mnist_arch() : ArchSpec::parse(text, input);
    if (text == "madry" && a.input != input) {
      throw ConfigError("madry architecture needs input " + shape_str(a.input) + ", data has " + shape_str(input));
    }
    a.infer_shapes();
    return a;
  });
}

EvalSettings eval_settings_from(const ConfigFile& c) {
  EvalSettings e;
  const auto kinds = c.get_list("eval", "kinds", {"all"});
  for (const auto& k : kinds) {
    const auto parsed = field("eval", "kinds", [&] { return parse_corruption_kinds(k); });
    e.kinds.insert(e.kinds.end(), parsed.begin(), parsed.end());
  }
  require(!e.kinds.empty(), "eval", "kinds", "needs at least one kind");
  for (double s : c.get_doubles("eval", "severities", {1, 2, 3, 4, 5})) {
    require(s == static_cast<int>(s) && s >= 1 && s <= kSeverityLevels, "eval", "severities",
            "expected integers in 1..5");
    e.severities.push_back(static_cast<int>(s));
  }
  require(!e.severities.empty(), "eval", "severities", "needs at least one severity");
  const std::string tables = c.get_string("eval", "severity_tables", "");
  e.tables = tables.empty() ? SeverityTables::defaults() : SeverityTables::load(tables);
  e.chunk = c.get_int("eval", "chunk", e.chunk);
  require(e.chunk >= 1, "eval", "chunk", "must be >= 1");
  e.test_limit = c.get_int("eval", "test_limit", 0);
  e.line_search.m0 = c.get_double("eval", "line_search_m0", e.line_search.m0);
  require(e.line_search.m0 > 0, "eval", "line_search_m0", "must be > 0");
  e.line_search.m_max = c.get_double("eval", "line_search_m_max", 0.0);
  require(e.line_search.m_max >= 0, "eval", "line_search_m_max", "must be >= 0");
  e.line_search.tol = c.get_double("eval", "line_search_tol", e.line_search.tol);
  require(e.line_search.tol > 0, "eval", "line_search_tol", "must be > 0");
  e.direction = field("eval", "direction", [&] { return parse_noise_family(c.get_string("eval", "direction", "gaussian")); });
  e.probe_steps = c.get_int("eval", "probe_steps", e.probe_steps);
  require(e.probe_steps >= 0, "eval", "probe_steps", "must be >= 0");
  e.probe_batch = c.get_int("eval", "probe_batch", e.probe_batch);
  require(e.probe_batch >= 1, "eval", "probe_batch", "must be >= 1");
  e.probe_epsilon = c.get_double("eval", "probe_epsilon", e.probe_epsilon);
  require(e.probe_epsilon > 0, "eval", "probe_epsilon", "must be > 0");
  e.probe_variant = field("eval", "probe_variant",
                          [&] { return parse_generator_variant(c.get_string("eval", "probe_variant", "k1")); });
  e.pgd.norm = field("eval", "pgd_norm", [&] { return parse_pgd_norm(c.get_string("eval", "pgd_norm", "linf")); });
  e.pgd.epsilon = c.get_double("eval", "pgd_eps", e.pgd.epsilon);
  require(e.pgd.epsilon >= 0, "eval", "pgd_eps", "must be >= 0");
  e.pgd.step = c.get_double("eval", "pgd_step", e.pgd.step);
  require(e.pgd.step >= 0, "eval", "pgd_step", "must be >= 0");
  e.pgd.iters = static_cast<int>(c.get_int("eval", "pgd_iters", e.pgd.iters));
  require(e.pgd.iters >= 0, "eval", "pgd_iters", "must be >= 0");
  e.pgd.random_start = c.get_bool("eval", "pgd_random_start", false);
  return e;
}

std::filesystem::path data_path(const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative()) {
    if (const char* root = std::getenv("ANTFORGE_DATA_DIR"); root != nullptr && *root != '\0') {
      return std::filesystem::path(root) / path;
    }
  }
  return path;
}

Splits load_splits(const ConfigFile& c) {
  const std::string source = c.get_string("data", "source", "synthetic");
  Splits s;
  if (source == "synthetic") {
    const int64_t n_train = c.get_int("data", "synth_train", 2000);
    const int64_t n_test = c.get_int("data", "synth_test", 500);
    const int classes = static_cast<int>(c.get_int("data", "synth_classes", 10));
    const int64_t size = c.get_int("data", "synth_size", 28);
    const double noise = c.get_double("data", "synth_noise", 0.05);
    SynthOptions opts;
    opts.jitter = c.get_double("data", "synth_jitter", 1.5);
    opts.strokes = static_cast<int>(c.get_int("data", "synth_strokes", 3));
    require(n_train > 0 && n_test > 0, "data", "synth_train", "split sizes must be > 0");
    require(classes >= 2, "data", "synth_classes", "must be >= 2");
    require(size >= 8, "data", "synth_size", "must be >= 8");
    const uint64_t seed = c.get_uint("seed", "master", 0);
    // Train and test share class templates and differ in their samples.
    Dataset all = field("data", "source", [&] {
      return synth_blobs(n_train + n_test, classes, size, noise, Rng::named(seed, "data").next_u64(), opts);
    });
    s.train = all.slice(0, n_train);
    s.test = all.slice(n_train, n_train + n_test);
  } else {
    std::filesystem::path ti, tl, vi, vl;
    if (source == "mnist") {
      const auto dir = data_path(c.get_string("data", "dir", "mnist"));
      ti = dir / "train-images-idx3-ubyte";
      tl = dir / "train-labels-idx1-ubyte";
      vi = dir / "t10k-images-idx3-ubyte";
      vl = dir / "t10k-labels-idx1-ubyte";
    } else if (source == "idx") {
      auto get = [&](const char* key) {
        const std::string v = c.get_string("data", key, "");
        require(!v.empty(), "data", key, "required when data.source = idx");
        return data_path(v);
      };
      ti = get("train_images");
      tl = get("train_labels");
      vi = get("test_images");
      vl = get("test_labels");
    } else {
      throw ConfigError("data.source: expected synthetic, mnist or idx, got '" + source + "'");
    }
    s.train = load_idx(ti, tl);
    s.test = load_idx(vi, vl);
    s.train.provenance = s.test.provenance = source;
  }
  s.train = apply_limit(std::move(s.train), c.get_int("data", "train_limit", 0));
  s.test = apply_limit(std::move(s.test), c.get_int("data", "test_limit", 0));
  if (s.train.image_shape() != s.test.image_shape()) {
    throw DataError("train and test images differ in shape: " + shape_str(s.train.image_shape()) + " vs " +
                     shape_str(s.test.image_shape()));
  }
  return s;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const CheckpointError*>(&e)) return 3;
  return 4;
}

}  // namespace antforge
