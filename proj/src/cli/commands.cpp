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
#include <fstream>

#include "json.hpp"

#include "antforge/run.hpp"

#ifndef ANTFORGE_VERSION
#define ANTFORGE_VERSION "0.0.0"
#endif
#ifndef ANTFORGE_GIT_DESCRIBE
#define ANTFORGE_GIT_DESCRIBE "unknown"
#endif

namespace antforge {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("short write to " + path.string());
}

// Resolved config, seed and version: enough to replay the run.
void write_run_header(const RunContext& ctx) {
  fs::create_directories(ctx.out_dir);
  ctx.config.save(ctx.out_dir / "config.resolved.ini");
  write_text(ctx.out_dir / "seed.txt", std::to_string(ctx.config.get_uint("seed", "master", 0)) + "\n");
  write_text(ctx.out_dir / "version.txt", version_string() + "\n");
}

void log(const RunContext& ctx, const std::string& line) {
  if (ctx.log != nullptr) *ctx.log << line << "\n" << std::flush;
}

uint64_t master_seed(const RunContext& ctx) { return ctx.config.get_uint("seed", "master", 0); }

struct Evaluated {
  Dataset train;
  Dataset test;
  ArchSpec arch;
  ParamSet params;
  EvalSettings settings;
};

Evaluated prepare_eval(const RunContext& ctx, const fs::path& checkpoint) {
  if (checkpoint.empty()) throw ConfigError("--checkpoint is required");
  Splits splits = load_splits(ctx.config);
  Evaluated e;
  e.arch = arch_from(ctx.config, splits.test.image_shape());
  e.params = load_checkpoint(checkpoint, e.arch.fingerprint());
  e.settings = eval_settings_from(ctx.config);
  e.train = std::move(splits.train);
  e.test = std::move(splits.test);
  if (e.settings.test_limit > 0 && e.settings.test_limit < e.test.size()) {
    e.test = e.test.slice(0, e.settings.test_limit);
  }
  return e;
}

nlohmann::ordered_json json_number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return "inf";
  return v;
}

}  // namespace

std::string version_string() { return std::string("antforge ") + ANTFORGE_VERSION + " (" + ANTFORGE_GIT_DESCRIBE + ")"; }

void cmd_train(const RunContext& ctx, TrainMode mode, const fs::path& init_checkpoint) {
  const Splits splits = load_splits(ctx.config);
  const ArchSpec arch = arch_from(ctx.config, splits.train.image_shape());
  std::optional<ParamSet> init;
  if (!init_checkpoint.empty()) init = load_checkpoint(init_checkpoint, arch.fingerprint());
  const TrainConfig tc = train_config_from(ctx.config, mode);
  write_run_header(ctx);
  log(ctx, "train " + std::string(to_string(mode)) + ": " + std::to_string(splits.train.size()) + " train, " +
               std::to_string(splits.test.size()) + " test, " + std::to_string(arch.parameter_count()) +
               " parameters");
  const TrainResult r = train(tc, arch, splits.train, &splits.test, std::move(init), [&](const MetricRow& m) {
    log(ctx, "epoch " + std::to_string(m.epoch) + " " + m.split + "." + m.metric + " = " + format_double(m.value));
  });
  save_checkpoint(r.classifier, ctx.out_dir / "classifier.ckpt");
  if (r.generator) save_checkpoint(r.generator->params, ctx.out_dir / "generator.ckpt");
  write_text(ctx.out_dir / "metrics.csv", metrics_csv(r.metrics));
}

void cmd_eval_corruptions(const RunContext& ctx, const fs::path& checkpoint, const fs::path& mce_baseline) {
  const Evaluated e = prepare_eval(ctx, checkpoint);
  std::optional<ErrorTable> baseline;
  if (!mce_baseline.empty()) baseline = load_error_table(mce_baseline);
  write_run_header(ctx);
  EvalOptions opts{ctx.threads, e.settings.chunk};
  EvalReport report = corruption_accuracy(e.arch, e.params, e.test, e.settings.kinds, e.settings.severities,
                                          Rng::named(master_seed(ctx), "corrupt").next_u64(), e.settings.tables,
                                          opts);
  if (baseline) {
    report.mce = mce(report.errors(), *baseline);
    std::string csv = "kind,ce_percent\n";
    for (const auto& [k, v] : report.mce->ce_percent) csv += k + "," + format_double(v) + "\n";
    csv += "mean," + format_double(report.mce->mce_percent) + "\n";
    write_text(ctx.out_dir / "mce.csv", csv);
  }
  write_text(ctx.out_dir / "corruptions.csv", report_csv(report));
  write_text(ctx.out_dir / "corruptions.json", summary_json(report));
  log(ctx, "clean " + format_double(report.clean_accuracy) + ", corruption mean " +
               format_double(report.mean_accuracy));
}

void cmd_eval_epsilon_star(const RunContext& ctx, const fs::path& checkpoint) {
  const Evaluated e = prepare_eval(ctx, checkpoint);
  write_run_header(ctx);
  const uint64_t seed = master_seed(ctx);
  const std::string family(to_string(e.settings.direction));
  std::optional<NoiseGenerator> probe;
  if (e.settings.direction == NoiseFamily::kAdversarial) {
    const TrainConfig tc = train_config_from(ctx.config, TrainMode::kAnt);
    probe = build_generator(e.settings.probe_variant, e.test.images.dim(1), Rng::named(seed, "probe"),
                            tc.ant.sigma_init, tc.ant.generator_width);
    Optimizer adam(tc.ant.generator_optim);
    Rng rng = Rng::named(seed, "probe-train");
    const auto losses = train_generator(e.arch, e.params, *probe, e.train, e.settings.probe_epsilon,
                                        e.settings.probe_steps, adam, e.settings.probe_batch, rng, tc.ant.gamma_grad);
    if (!losses.empty()) log(ctx, "probe generator final loss " + format_double(losses.back()));
    save_checkpoint(probe->params, ctx.out_dir / "probe_generator.ckpt");
  }
  const DirectionSource src{e.settings.direction, probe ? &*probe : nullptr};
  const EpsilonStarResult r =
      epsilon_star(e.arch, e.params, e.test, src, e.settings.line_search,
                   Rng::named(seed, "attack").split(family).next_u64(), {ctx.threads, e.settings.chunk});
  write_text(ctx.out_dir / ("epsilon_star_" + family + ".csv"), epsilon_star_csv(r));
  nlohmann::ordered_json j;
  j["family"] = family;
  j["count"] = r.count;
  j["median"] = json_number(r.median);
  int64_t infs = 0;
  for (double v : r.norms) infs += std::isinf(v);
  j["inf_count"] = infs;
  write_text(ctx.out_dir / ("epsilon_star_" + family + ".json"), j.dump(2) + "\n");
  log(ctx, "epsilon star (" + family + ") median " + (std::isinf(r.median) ? std::string("inf") : format_double(r.median)));
}

void cmd_eval_pgd(const RunContext& ctx, const fs::path& checkpoint) {
  const Evaluated e = prepare_eval(ctx, checkpoint);
  write_run_header(ctx);
  const EvalOptions opts{ctx.threads, e.settings.chunk};
  const PgdConfig& pc = e.settings.pgd;
  const PgdResult r = pgd_attack(e.arch, e.params, e.test.images, e.test.labels, pc,
                                 Rng::named(master_seed(ctx), "attack").split("pgd").next_u64(), opts);
  const int64_t n = e.test.size();
  const int64_t numel = e.test.image_numel();
  double max_linf = 0.0, max_l2 = 0.0;
  bool box_ok = true;
  for (int64_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (int64_t p = 0; p < numel; ++p) {
      const double a = r.x_adv[i * numel + p];
      const double d = a - static_cast<double>(e.test.images[i * numel + p]);
      max_linf = std::max(max_linf, std::abs(d));
      sq += d * d;
      box_ok = box_ok && a >= 0.0 && a <= 1.0;
    }
    max_l2 = std::max(max_l2, std::sqrt(sq));
  }
  int64_t successes = 0;
  for (auto s : r.success) successes += s;
  nlohmann::ordered_json j;
  j["norm"] = std::string(to_string(pc.norm));
  j["epsilon"] = pc.epsilon;
  j["step"] = pc.step;
  j["iters"] = pc.iters;
  j["random_start"] = pc.random_start;
  j["count"] = n;
  j["clean_accuracy"] = accuracy(e.arch, e.params, e.test, opts);
  j["adversarial_accuracy"] = r.accuracy;
  j["success_rate"] = static_cast<double>(successes) / static_cast<double>(n);
  j["max_linf"] = max_linf;
  j["max_l2"] = max_l2;
  j["box_ok"] = box_ok;
  write_text(ctx.out_dir / "pgd.json", j.dump(2) + "\n");
  log(ctx, "pgd " + std::string(to_string(pc.norm)) + " accuracy " + format_double(r.accuracy));
}

void cmd_corrupt(const RunContext& ctx, const std::string& split) {
  Splits splits = load_splits(ctx.config);
  const EvalSettings s = eval_settings_from(ctx.config);
  if (split != "train" && split != "test") throw ConfigError("--split: expected train or test");
  const Dataset& src = split == "train" ? splits.train : splits.test;
  write_run_header(ctx);
  const uint64_t seed = Rng::named(master_seed(ctx), "corrupt").next_u64();
  const int64_t numel = src.image_numel();
  const ImageShape shape{src.images.dim(1), src.images.dim(2), src.images.dim(3)};

  ConfigFile manifest;
  manifest.set("meta", "version", "1");
  manifest.set("meta", "split", split);
  manifest.set("meta", "count", std::to_string(src.size()));
  manifest.set("meta", "seed", std::to_string(seed));
  manifest.set("meta", "severity_tables_version", std::to_string(s.tables.version()));
  for (CorruptionKind kind : s.kinds) {
    for (int severity : s.severities) {
      Dataset out;
      out.images = TensorF(src.images.shape());
      out.labels = src.labels;
      out.provenance = "corrupted:" + std::string(to_string(kind));
      parallel_for(src.size(), ctx.threads, [&](int64_t i) {
        const CorruptionSpec spec{kind, severity, corruption_seed(seed, kind, severity, i)};
        corrupt_into(std::span<const float>(src.images.ptr() + i * numel, numel), shape, spec,
                     std::span<float>(out.images.ptr() + i * numel, numel), s.tables);
      });
      const std::string stem = std::string(to_string(kind)) + "-s" + std::to_string(severity);
      write_idx(out, ctx.out_dir / (stem + "-images-idx3-ubyte"), ctx.out_dir / (stem + "-labels-idx1-ubyte"));
      manifest.set(stem, "kind", std::string(to_string(kind)));
      manifest.set(stem, "severity", std::to_string(severity));
      manifest.set(stem, "param", format_double(s.tables.param(kind, severity)));
      manifest.set(stem, "images", stem + "-images-idx3-ubyte");
      manifest.set(stem, "labels", stem + "-labels-idx1-ubyte");
    }
  }
  manifest.save(ctx.out_dir / "manifest.ini");
  log(ctx, "wrote " + std::to_string(s.kinds.size() * s.severities.size()) + " corrupted datasets");
}

void cmd_report(const std::vector<std::pair<std::string, fs::path>>& inputs, const fs::path& out) {
  if (inputs.empty()) throw ConfigError("report needs at least one --input name=path.csv");
  std::vector<std::pair<std::string, EvalReport>> rows;
  for (const auto& [name, path] : inputs) rows.emplace_back(name, load_report_csv(path));
  const std::string table = markdown_table(rows);
  if (out.empty()) {
    std::fwrite(table.data(), 1, table.size(), stdout);
  } else {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_text(out, table);
  }
}

}  // namespace antforge
