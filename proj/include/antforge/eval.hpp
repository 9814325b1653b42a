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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "antforge/data.hpp"
#include "antforge/errors.hpp"
#include "antforge/nets.hpp"
#include "antforge/perturb.hpp"

namespace antforge {

// A CE whose baseline errors sum to zero.
class UndefinedCeError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Work is split into fixed-size chunks, so results never depend on the number
// of worker threads.
struct EvalOptions {
  int threads = 1;
  int64_t chunk = 64;
};

// Runs fn(chunk_index) for every chunk on up to `threads` workers. The first
// exception thrown by any worker is rethrown on the caller.
void parallel_for(int64_t chunks, int threads, const std::function<void(int64_t)>& fn);

double accuracy(const ArchSpec& arch, const ParamSet& params, const Dataset& data, EvalOptions opts = {});
std::vector<int> predict_all(const ArchSpec& arch, const ParamSet& params, const TensorF& images,
                             EvalOptions opts = {});

// ---- epsilon star -----------------------------------------------------------

enum class NoiseFamily { kGaussian, kUniform, kAdversarial };

std::string_view to_string(NoiseFamily f);
NoiseFamily parse_noise_family(std::string_view s);

// Where line-search directions come from. Adversarial needs a generator.
struct DirectionSource {
  NoiseFamily family = NoiseFamily::kGaussian;
  const NoiseGenerator* generator = nullptr;
};

struct LineSearchConfig {
  double m0 = 0.1;
  double m_max = 0.0;  // 0 = 2 sqrt(N)
  double tol = 1e-3;   // relative bracket width
};

struct EpsilonStarResult {
  NoiseFamily family = NoiseFamily::kGaussian;
  // Post-clip norm of the smallest misclassifying perturbation found; kInf when
  // none exists in (0, m_max]. Zero when the clean image is already wrong.
  std::vector<double> norms;
  // Largest magnitude probed that did not flip the prediction (bracket low end).
  std::vector<double> lower;
  double median = 0.0;
  int64_t count = 0;
};

// Median with +inf ranked above every finite value. An even count averages
// the two middle entries (inf if either is inf). Throws InputError if empty.
double inf_aware_median(std::vector<double> values);

// One direction per image, drawn from Rng(seed).split(image index).
TensorF line_search_direction(const DirectionSource& src, const TensorF& image, uint64_t seed, int64_t index);

EpsilonStarResult epsilon_star(const ArchSpec& arch, const ParamSet& params, const Dataset& data,
                               const DirectionSource& src, const LineSearchConfig& config, uint64_t seed,
                               EvalOptions opts = {});

// ---- corruption suite ---------------------------------------------------------

struct CorruptionCell {
  std::string kind;
  int severity = 1;
  double accuracy = 0.0;
  int64_t count = 0;
};

// kind -> severity-indexed errors (index 0 = severity 1).
using ErrorTable = std::map<std::string, std::vector<double>>;

struct MceResult {
  std::map<std::string, double> ce_percent;
  double mce_percent = 0.0;
};

struct EvalReport {
  double clean_accuracy = 0.0;
  std::vector<CorruptionCell> cells;
  double mean_accuracy = 0.0;
  // NaN when the suite contains no non-noise kind.
  double non_noise_mean_accuracy = 0.0;
  std::optional<MceResult> mce;
  std::map<std::string, double> epsilon_star;

  std::vector<std::string> kinds() const;
  double kind_mean(std::string_view kind) const;
  ErrorTable errors() const;
};

// Seed for one (kind, severity, image) triple.
uint64_t corruption_seed(uint64_t seed, CorruptionKind kind, int severity, int64_t index);

EvalReport corruption_accuracy(const ArchSpec& arch, const ParamSet& params, const Dataset& data,
                               std::span<const CorruptionKind> kinds, std::span<const int> severities,
                               uint64_t seed, const SeverityTables& tables = SeverityTables::defaults(),
                               EvalOptions opts = {});

// Fills the derived means from the cells.
void finalize_report(EvalReport& report);

// CE_c = sum_s E_sc / sum_s E_sc^base in percent; mCE = mean over kinds.
MceResult mce(const ErrorTable& model, const ErrorTable& baseline);

// ---- PGD ------------------------------------------------------------------------

enum class PgdNorm { kLinf, kL2 };

std::string_view to_string(PgdNorm n);
PgdNorm parse_pgd_norm(std::string_view s);

struct PgdConfig {
  PgdNorm norm = PgdNorm::kLinf;
  double epsilon = 0.1;
  double step = 0.01;
  int iters = 100;
  bool random_start = false;
};

struct PgdResult {
  TensorF x_adv;
  std::vector<uint8_t> success;  // final prediction differs from the label
  double accuracy = 0.0;         // fraction of final predictions equal to the label
};

PgdResult pgd_attack(const ArchSpec& arch, const ParamSet& params, const TensorF& x,
                     std::span<const int> labels, const PgdConfig& config, uint64_t seed = 0,
                     EvalOptions opts = {});

// Bounds of the l-inf box intersected with [0,1], rounded inward so that the
// float result satisfies |x_adv - x| <= epsilon in exact arithmetic.
std::pair<float, float> linf_bounds(float x, double epsilon);

// ---- reports ----------------------------------------------------------------------

// Rows "kind,severity,accuracy,error"; the clean row uses kind "clean", severity 0.
std::string report_csv(const EvalReport& report);
EvalReport parse_report_csv(std::string_view text, std::string_view origin = "<string>");
EvalReport load_report_csv(const std::filesystem::path& path);
ErrorTable load_error_table(const std::filesystem::path& path);

std::string summary_json(const EvalReport& report);

// Markdown table: model, clean acc, mean, then one column per kind (percent).
std::string markdown_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

std::string epsilon_star_csv(const EpsilonStarResult& r);

}  // namespace antforge
