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

#include "antforge/eval.hpp"

namespace antforge {

namespace {

bool is_noise_name(std::string_view kind) {
  for (CorruptionKind k : kAllCorruptions) {
    if (to_string(k) == kind) return is_noise_kind(k);
  }
  return false;
}

}  // namespace

uint64_t corruption_seed(uint64_t seed, CorruptionKind kind, int severity, int64_t index) {
  Rng rng = Rng(seed).split(to_string(kind)).split(static_cast<uint64_t>(severity)).split(
      static_cast<uint64_t>(index));
  return rng.next_u64();
}

std::vector<std::string> EvalReport::kinds() const {
  std::vector<std::string> out;
  for (const auto& c : cells) {
    if (std::find(out.begin(), out.end(), c.kind) == out.end()) out.push_back(c.kind);
  }
  return out;
}

double EvalReport::kind_mean(std::string_view kind) const {
  double s = 0.0;
  int n = 0;
  for (const auto& c : cells) {
    if (c.kind == kind) {
      s += c.accuracy;
      ++n;
    }
  }
  if (n == 0) throw InputError("report has no kind '" + std::string(kind) + "'");
  return s / n;
}

ErrorTable EvalReport::errors() const {
  ErrorTable t;
  for (const auto& c : cells) {
    auto& row = t[c.kind];
    if (static_cast<int>(row.size()) < c.severity) row.resize(static_cast<size_t>(c.severity), 0.0);
    row[static_cast<size_t>(c.severity - 1)] = 1.0 - c.accuracy;
  }
  return t;
}

void finalize_report(EvalReport& report) {
  double all = 0.0, rest = 0.0;
  int64_t n_all = 0, n_rest = 0;
  for (const auto& c : report.cells) {
    all += c.accuracy;
    ++n_all;
    if (!is_noise_name(c.kind)) {
      rest += c.accuracy;
      ++n_rest;
    }
  }
  report.mean_accuracy = n_all > 0 ? all / static_cast<double>(n_all) : std::nan("");
  report.non_noise_mean_accuracy = n_rest > 0 ? rest / static_cast<double>(n_rest) : std::nan("");
}

EvalReport corruption_accuracy(const ArchSpec& arch, const ParamSet& params, const Dataset& data,
                               std::span<const CorruptionKind> kinds, std::span<const int> severities,
                               uint64_t seed, const SeverityTables& tables, EvalOptions opts) {
  if (kinds.empty()) throw ConfigError("corruption suite needs at least one kind");
  if (severities.empty()) throw ConfigError("corruption suite needs at least one severity");
  if (data.size() == 0) throw InputError("corruption_accuracy on an empty dataset");
  for (int s : severities) tables.param(kinds.front(), s);  // validates the range

  EvalReport report;
  report.clean_accuracy = accuracy(arch, params, data, opts);
  const int64_t n = data.size();
  const int64_t numel = data.image_numel();
  const ImageShape shape{data.images.dim(1), data.images.dim(2), data.images.dim(3)};
  const int64_t chunk = std::max<int64_t>(1, opts.chunk);
  const int64_t chunks = (n + chunk - 1) / chunk;

  for (CorruptionKind kind : kinds) {
    for (int severity : severities) {
      std::vector<int64_t> correct(static_cast<size_t>(chunks), 0);
      parallel_for(chunks, opts.threads, [&](int64_t c) {
        const int64_t b = c * chunk, e = std::min(n, b + chunk);
        TensorF batch = data.images.slice_rows(b, e);
        for (int64_t i = b; i < e; ++i) {
          const CorruptionSpec spec{kind, severity, corruption_seed(seed, kind, severity, i)};
          corrupt_into(std::span<const float>(data.images.ptr() + i * numel, numel), shape, spec,
                       std::span<float>(batch.ptr() + (i - b) * numel, numel), tables);
        }
        const auto pred = predict_labels(arch, params, batch);
        for (int64_t i = b; i < e; ++i) correct[c] += pred[i - b] == data.labels[i];
      });
      int64_t total = 0;
      for (int64_t v : correct) total += v;
      report.cells.push_back({std::string(to_string(kind)), severity,
                              static_cast<double>(total) / static_cast<double>(n), n});
    }
  }
  finalize_report(report);
  return report;
}

MceResult mce(const ErrorTable& model, const ErrorTable& baseline) {
  if (model.empty()) throw InputError("mce of an empty error table");
  MceResult r;
  double total = 0.0;
  for (const auto& [kind, errs] : model) {
    auto it = baseline.find(kind);
    if (it == baseline.end()) throw InputError("baseline has no errors for '" + kind + "'");
    if (it->second.size() != errs.size()) {
      throw InputError("severity count mismatch for '" + kind + "': " + std::to_string(errs.size()) + " vs " +
                       std::to_string(it->second.size()));
    }
    double sm = 0.0, sb = 0.0;
    for (size_t s = 0; s < errs.size(); ++s) {
      sm += errs[s];
      sb += it->second[s];
    }
    if (!(sb > 0.0)) throw UndefinedCeError("CE undefined for '" + kind + "': baseline error sum is zero");
    r.ce_percent[kind] = 100.0 * sm / sb;
    total += r.ce_percent[kind];
  }
  r.mce_percent = total / static_cast<double>(model.size());
  return r;
}

}  // namespace antforge
