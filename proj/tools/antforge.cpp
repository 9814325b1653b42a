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

// Command-line front end: antforge <train|eval|corrupt|report> ...

#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "antforge/run.hpp"

namespace {

using antforge::ConfigFile;

struct Common {
  std::string config;
  std::string out = "run";
  std::vector<std::string> overrides;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "Run configuration file");
  app->add_option("-o,--out", c.out, "Output directory")->capture_default_str();
  app->add_option("--set", c.overrides, "Override section.key=value (repeatable)");
}

antforge::RunContext context(const Common& c, std::vector<std::string> extra, int threads) {
  ConfigFile user = c.config.empty() ? ConfigFile{} : ConfigFile::load(c.config);
  std::vector<std::string> all = c.overrides;
  all.insert(all.end(), extra.begin(), extra.end());
  return {antforge::resolve_run_config(user, all), c.out, threads, &std::cerr};
}

template <typename T>
void add_override(std::vector<std::string>& out, const std::string& key, const std::optional<T>& v) {
  if (!v) return;
  if constexpr (std::is_same_v<T, std::string>) {
    out.push_back(key + "=" + *v);
  } else if constexpr (std::is_same_v<T, bool>) {
    out.push_back(key + "=" + (*v ? "true" : "false"));
  } else if constexpr (std::is_floating_point_v<T>) {
    out.push_back(key + "=" + antforge::format_double(*v));
  } else {
    out.push_back(key + "=" + std::to_string(*v));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"antforge: noise-robust training and robustness evaluation"};
  app.set_version_flag("--version", antforge::version_string());
  app.require_subcommand(1);
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("-j,--threads", threads, "Worker threads for evaluation (results do not depend on it)")
      ->check(CLI::PositiveNumber);

  // train
  auto* train = app.add_subcommand("train", "Train a classifier");
  train->require_subcommand(1);
  Common train_common;
  std::string init;
  std::optional<uint64_t> seed;
  std::optional<int64_t> epochs;
  std::optional<std::string> sigma;
  std::optional<double> epsilon;
  std::vector<antforge::TrainMode> modes;
  for (auto [name, mode, help] : {std::tuple{"vanilla", antforge::TrainMode::kVanilla, "Plain cross-entropy"},
                                  std::tuple{"gnt", antforge::TrainMode::kGnt, "Gaussian noise training"},
                                  std::tuple{"ant", antforge::TrainMode::kAnt, "Adversarial noise training"}}) {
    auto* sub = train->add_subcommand(name, help);
    add_common(sub, train_common);
    sub->add_option("--init", init, "Start from this classifier checkpoint");
    sub->add_option("--seed", seed, "Master seed");
    sub->add_option("--epochs", epochs, "Training epochs");
    if (mode == antforge::TrainMode::kGnt) sub->add_option("--sigma", sigma, "Noise std, or a comma list");
    if (mode == antforge::TrainMode::kAnt) sub->add_option("--epsilon", epsilon, "Noise l2 radius");
    sub->callback([&, mode = mode] {
      std::vector<std::string> extra;
      add_override(extra, "seed.master", seed);
      add_override(extra, "optim.epochs", epochs);
      add_override(extra, "gnt.sigmas", sigma);
      add_override(extra, "ant.epsilon", epsilon);
      antforge::cmd_train(context(train_common, extra, threads), mode, init);
    });
  }

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a classifier checkpoint");
  eval->require_subcommand(1);
  Common eval_common;
  std::string checkpoint;
  std::optional<uint64_t> eval_seed;
  auto eval_sub = [&](const char* name, const char* help) {
    auto* sub = eval->add_subcommand(name, help);
    add_common(sub, eval_common);
    sub->add_option("--checkpoint", checkpoint, "Classifier checkpoint")->required();
    sub->add_option("--seed", eval_seed, "Master seed");
    return sub;
  };
  std::string mce_baseline;
  auto* corr = eval_sub("corruptions", "Accuracy over the corruption suite");
  corr->add_option("--mce", mce_baseline, "Baseline CSV (kind,severity,accuracy) for mCE");
  corr->callback([&] {
    std::vector<std::string> extra;
    add_override(extra, "seed.master", eval_seed);
    antforge::cmd_eval_corruptions(context(eval_common, extra, threads), checkpoint, mce_baseline);
  });
  std::optional<std::string> direction;
  auto* eps = eval_sub("epsilon-star", "Median minimal l2 noise magnitude that flips the prediction");
  eps->add_option("--direction", direction, "gaussian, uniform or adversarial")
      ->check(CLI::IsMember({"gaussian", "uniform", "adversarial"}));
  eps->callback([&] {
    std::vector<std::string> extra;
    add_override(extra, "seed.master", eval_seed);
    add_override(extra, "eval.direction", direction);
    antforge::cmd_eval_epsilon_star(context(eval_common, extra, threads), checkpoint);
  });
  std::optional<std::string> norm;
  std::optional<double> pgd_eps, pgd_step;
  std::optional<int64_t> pgd_iters;
  std::optional<bool> random_start;
  auto* pgd = eval_sub("pgd", "Projected gradient descent attack");
  pgd->add_option("--norm", norm, "linf or l2")->check(CLI::IsMember({"linf", "l2"}));
  pgd->add_option("--eps", pgd_eps, "Perturbation bound");
  pgd->add_option("--step", pgd_step, "Step size");
  pgd->add_option("--iters", pgd_iters, "Iterations");
  pgd->add_flag("--random-start", random_start, "Start from a random point inside the ball");
  pgd->callback([&] {
    std::vector<std::string> extra;
    add_override(extra, "seed.master", eval_seed);
    add_override(extra, "eval.pgd_norm", norm);
    add_override(extra, "eval.pgd_eps", pgd_eps);
    add_override(extra, "eval.pgd_step", pgd_step);
    add_override(extra, "eval.pgd_iters", pgd_iters);
    add_override(extra, "eval.pgd_random_start", random_start);
    antforge::cmd_eval_pgd(context(eval_common, extra, threads), checkpoint);
  });

  // corrupt
  auto* corrupt = app.add_subcommand("corrupt", "Write corrupted copies of a dataset split as IDX files");
  Common corrupt_common;
  add_common(corrupt, corrupt_common);
  std::optional<std::string> kinds, severities;
  std::optional<uint64_t> corrupt_seed;
  std::string split = "test";
  corrupt->add_option("--kinds", kinds, "Comma list of corruption kinds, or all");
  corrupt->add_option("--severities", severities, "Comma list of severities in 1..5");
  corrupt->add_option("--split", split, "train or test")->capture_default_str();
  corrupt->add_option("--seed", corrupt_seed, "Master seed");
  corrupt->callback([&] {
    std::vector<std::string> extra;
    add_override(extra, "eval.kinds", kinds);
    add_override(extra, "eval.severities", severities);
    add_override(extra, "seed.master", corrupt_seed);
    antforge::cmd_corrupt(context(corrupt_common, extra, threads), split);
  });

  // report
  auto* report = app.add_subcommand("report", "Merge corruption CSVs into a Markdown table");
  std::vector<std::string> inputs;
  std::string report_out;
  report->add_option("-i,--input", inputs, "name=path.csv (repeatable, in row order)")->required();
  report->add_option("-o,--out", report_out, "Markdown file (default stdout)");
  report->callback([&] {
    std::vector<std::pair<std::string, std::filesystem::path>> rows;
    for (const auto& in : inputs) {
      const size_t eq = in.find('=');
      if (eq == std::string::npos || eq == 0) throw antforge::ConfigError("--input '" + in + "': expected name=path");
      rows.emplace_back(in.substr(0, eq), in.substr(eq + 1));
    }
    antforge::cmd_report(rows, report_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return antforge::exit_code_for(e);
  }
  return 0;
}
