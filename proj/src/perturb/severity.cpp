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

#include "antforge/config.hpp"
#include "antforge/perturb.hpp"

namespace antforge {

namespace {

struct KindName {
  CorruptionKind kind;
  std::string_view name;
};

constexpr std::array<KindName, 11> kNames = {{
    {CorruptionKind::kGaussianNoise, "gaussian_noise"},
    {CorruptionKind::kUniformNoise, "uniform_noise"},
    {CorruptionKind::kShotNoise, "shot_noise"},
    {CorruptionKind::kImpulseNoise, "impulse_noise"},
    {CorruptionKind::kSpeckleNoise, "speckle_noise"},
    {CorruptionKind::kGaussianBlur, "gaussian_blur"},
    {CorruptionKind::kBrightness, "brightness"},
    {CorruptionKind::kContrast, "contrast"},
    {CorruptionKind::kTranslate, "translate"},
    {CorruptionKind::kRotate, "rotate"},
    {CorruptionKind::kScale, "scale"},
}};

}  // namespace

std::string_view to_string(CorruptionKind kind) {
  for (const auto& kn : kNames) {
    if (kn.kind == kind) return kn.name;
  }
  return "unknown";
}

CorruptionKind parse_corruption_kind(std::string_view name) {
  for (const auto& kn : kNames) {
    if (kn.name == name) return kn.kind;
  }
  throw ConfigError("unknown corruption kind '" + std::string(name) + "'");
}

std::vector<CorruptionKind> parse_corruption_kinds(std::string_view list) {
  std::vector<CorruptionKind> out;
  for (const auto& item : split_list(list)) {
    if (item == "all") {
      out.insert(out.end(), kAllCorruptions.begin(), kAllCorruptions.end());
    } else {
      out.push_back(parse_corruption_kind(item));
    }
  }
  if (out.empty()) throw ConfigError("empty corruption list");
  return out;
}

bool is_noise_kind(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::kGaussianNoise:
    case CorruptionKind::kUniformNoise:
    case CorruptionKind::kShotNoise:
    case CorruptionKind::kImpulseNoise:
    case CorruptionKind::kSpeckleNoise:
      return true;
    default:
      return false;
  }
}

bool is_stochastic(CorruptionKind kind) { return is_noise_kind(kind); }

SeverityTables SeverityTables::defaults() {
  SeverityTables t;
  t.version_ = 1;
  const auto sigmas = kGaussianSigmaPreset;
  t.rows_[CorruptionKind::kGaussianNoise] = sigmas;
  t.rows_[CorruptionKind::kUniformNoise] = sigmas;
  t.rows_[CorruptionKind::kSpeckleNoise] = sigmas;
  t.rows_[CorruptionKind::kShotNoise] = {60, 25, 12, 5, 3};
  t.rows_[CorruptionKind::kImpulseNoise] = {0.03, 0.06, 0.09, 0.17, 0.27};
  t.rows_[CorruptionKind::kGaussianBlur] = {0.5, 0.75, 1.0, 1.25, 1.5};
  t.rows_[CorruptionKind::kBrightness] = {0.1, 0.2, 0.3, 0.4, 0.5};
  t.rows_[CorruptionKind::kContrast] = {0.4, 0.3, 0.2, 0.1, 0.05};
  t.rows_[CorruptionKind::kTranslate] = {1, 2, 3, 4, 5};
  t.rows_[CorruptionKind::kRotate] = {10, 20, 30, 40, 50};
  t.rows_[CorruptionKind::kScale] = {0.9, 0.8, 0.7, 0.6, 0.5};
  return t;
}

SeverityTables SeverityTables::parse(std::string_view text, std::string_view origin) {
  const ConfigFile cfg = ConfigFile::parse(text, origin);
  SeverityTables t = defaults();
  t.version_ = static_cast<int>(cfg.get_int("meta", "version", 1));
  if (t.version_ != 1) {
    throw ConfigError("severity tables: unsupported version " + std::to_string(t.version_));
  }
  for (const auto& [key, value] : cfg.entries("severity")) {
    const CorruptionKind kind = parse_corruption_kind(key);
    const auto values = cfg.get_doubles("severity", key, {});
    if (values.size() != kSeverityLevels) {
      throw ConfigError("severity." + key + ": expected 5 values, got " + std::to_string(values.size()));
    }
    std::array<double, 5> row{};
    std::copy(values.begin(), values.end(), row.begin());
    t.set_row(kind, row);
  }
  return t;
}

SeverityTables SeverityTables::load(const std::filesystem::path& path) {
  const ConfigFile cfg = ConfigFile::load(path);
  return parse(cfg.serialize(), path.string());
}

double SeverityTables::param(CorruptionKind kind, int severity) const {
  if (severity < 1 || severity > kSeverityLevels) {
    throw ConfigError("severity must be in 1..5, got " + std::to_string(severity));
  }
  return row(kind)[static_cast<size_t>(severity - 1)];
}

const std::array<double, 5>& SeverityTables::row(CorruptionKind kind) const {
  auto it = rows_.find(kind);
  if (it == rows_.end()) throw ConfigError("no severity table for " + std::string(to_string(kind)));
  return it->second;
}

void SeverityTables::set_row(CorruptionKind kind, std::array<double, 5> values) {
  for (double v : values) {
    if (!(v >= 0.0)) {
      throw ConfigError("severity." + std::string(to_string(kind)) + ": values must be >= 0");
    }
  }
  rows_[kind] = values;
}

std::string SeverityTables::serialize() const {
  ConfigFile cfg;
  cfg.set("meta", "version", std::to_string(version_));
  for (const auto& kn : kNames) {
    auto it = rows_.find(kn.kind);
    if (it == rows_.end()) continue;
    std::string line;
    for (size_t i = 0; i < it->second.size(); ++i) {
      if (i) line += ", ";
      line += format_double(it->second[i]);
    }
    cfg.set("severity", kn.name, line);
  }
  return "# Corruption severity tables, one value per severity level 1..5.\n" + cfg.serialize();
}

}  // namespace antforge
