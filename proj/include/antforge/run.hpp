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

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "antforge/config.hpp"
#include "antforge/data.hpp"
#include "antforge/eval.hpp"
#include "antforge/nets.hpp"
#include "antforge/train.hpp"

namespace antforge {

// Every recognised key with its default value. Sections: data, model, optim,
// gnt, ant, eval, seed.
ConfigFile default_run_config();

// Defaults, then the user's file, then "section.key=value" overrides. Unknown
// keys and malformed values fail with a field-level ConfigError.
ConfigFile resolve_run_config(const ConfigFile& user, std::span<const std::string> overrides);
void apply_override(ConfigFile& config, std::string_view assignment);

TrainConfig train_config_from(const ConfigFile& config, TrainMode mode);
ArchSpec arch_from(const ConfigFile& config, const Shape& input);

struct EvalSettings {
  std::vector<CorruptionKind> kinds;
  std::vector<int> severities;
  SeverityTables tables;
  int64_t chunk = 64;
  LineSearchConfig line_search;
  NoiseFamily direction = NoiseFamily::kGaussian;
  int64_t probe_steps = 300;
  int64_t probe_batch = 100;
  double probe_epsilon = 10.0;
  GeneratorVariant probe_variant = GeneratorVariant::kPointwise1x1;
  PgdConfig pgd;
  int64_t test_limit = 0;
};

EvalSettings eval_settings_from(const ConfigFile& config);

// Relative dataset paths resolve against ANTFORGE_DATA_DIR when it is set.
std::filesystem::path data_path(const std::string& p);

struct Splits {
  Dataset train;
  Dataset test;
};

Splits load_splits(const ConfigFile& config);

std::string version_string();

// CLI entry points. Each writes its artifacts under out_dir and returns 0.
struct RunContext {
  ConfigFile config;
  std::filesystem::path out_dir;
  int threads = 1;
  std::ostream* log = nullptr;
};

void cmd_train(const RunContext& ctx, TrainMode mode, const std::filesystem::path& init_checkpoint);
void cmd_eval_corruptions(const RunContext& ctx, const std::filesystem::path& checkpoint,
                          const std::filesystem::path& mce_baseline);
void cmd_eval_epsilon_star(const RunContext& ctx, const std::filesystem::path& checkpoint);
void cmd_eval_pgd(const RunContext& ctx, const std::filesystem::path& checkpoint);
void cmd_corrupt(const RunContext& ctx, const std::string& split);
void cmd_report(const std::vector<std::pair<std::string, std::filesystem::path>>& inputs,
                const std::filesystem::path& out);

// Maps an exception to the process exit code: 2 config, 3 data, 4 runtime.
int exit_code_for(const std::exception& e);

}  // namespace antforge
