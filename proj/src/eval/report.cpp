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
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "antforge/config.hpp"
#include "antforge/eval.hpp"

namespace antforge {

namespace {

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

std::string report_csv(const EvalReport& report) {
  std::string out = "kind,severity,accuracy,error\n";
  out += "clean,0," + format_double(report.clean_accuracy) + "," + format_double(1.0 - report.clean_accuracy) + "\n";
  for (const auto& c : report.cells) {
    out += c.kind + "," + std::to_string(c.severity) + "," + format_double(c.accuracy) + "," +
           format_double(1.0 - c.accuracy) + "\n";
  }
  return out;
}

EvalReport parse_report_csv(std::string_view text, std::string_view origin) {
  EvalReport r;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  bool header = false;
  bool have_clean = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto f = split_list(t, ',');
    const std::string where = std::string(origin) + ":" + std::to_string(lineno);
    if (!header) {
      if (f.size() < 3 || f[0] != "kind" || f[1] != "severity" || f[2] != "accuracy") {
        throw InputError(where + ": expected header kind,severity,accuracy[,error]");
      }
      header = true;
      continue;
    }
    if (f.size() < 3) throw InputError(where + ": expected at least 3 fields");
    int sev = 0;
    double acc = 0.0;
    try {
      size_t used = 0;
      sev = std::stoi(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument("trailing");
      acc = std::stod(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError(where + ": malformed number");
    }
    if (!(acc >= 0.0 && acc <= 1.0)) throw InputError(where + ": accuracy outside [0,1]");
    if (f[0] == "clean") {
      r.clean_accuracy = acc;
      have_clean = true;
    } else {
      if (sev < 1) throw InputError(where + ": severity must be >= 1");
      r.cells.push_back({f[0], sev, acc, 0});
    }
  }
  if (!header) throw InputError(std::string(origin) + ": empty report");
  if (!have_clean) r.clean_accuracy = std::nan("");
  finalize_report(r);
  return r;
}

EvalReport load_report_csv(const std::filesystem::path& path) {
  return parse_report_csv(read_file(path), path.string());
}

ErrorTable load_error_table(const std::filesystem::path& path) { return load_report_csv(path).errors(); }

std::string summary_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["clean_accuracy"] = number(report.clean_accuracy);
  j["mean_accuracy"] = number(report.mean_accuracy);
  j["non_noise_mean_accuracy"] = number(report.non_noise_mean_accuracy);
  if (report.mce) {
    j["mce_percent"] = number(report.mce->mce_percent);
    nlohmann::ordered_json ce = nlohmann::ordered_json::object();
    for (const auto& [k, v] : report.mce->ce_percent) ce[k] = number(v);
    j["ce_percent"] = ce;
  }
  if (!report.epsilon_star.empty()) {
    nlohmann::ordered_json e = nlohmann::ordered_json::object();
    for (const auto& [k, v] : report.epsilon_star) e[k] = number(v);
    j["epsilon_star_median"] = e;
  }
  nlohmann::ordered_json kinds = nlohmann::ordered_json::object();
  for (const auto& k : report.kinds()) kinds[k] = number(report.kind_mean(k));
  j["kind_mean_accuracy"] = kinds;
  return j.dump(2) + "\n";
}

std::string markdown_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::vector<std::string> kinds;
  for (const auto& [_, r] : rows) {
    for (const auto& k : r.kinds()) {
      if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
    }
  }
  auto pct = [](double v, int digits) {
    if (std::isnan(v)) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, 100.0 * v);
    return std::string(buf);
  };
  std::string out = "| model | clean acc | mean |";
  std::string rule = "|---|---:|---:|";
  for (const auto& k : kinds) {
    out += " " + k + " |";
    rule += "---:|";
  }
  out += "\n" + rule + "\n";
  for (const auto& [name, r] : rows) {
    out += "| " + name + " | " + pct(r.clean_accuracy, 1) + " | " + pct(r.mean_accuracy, 1) + " |";
    const auto have = r.kinds();
    for (const auto& k : kinds) {
      const bool present = std::find(have.begin(), have.end(), k) != have.end();
      out += " " + (present ? pct(r.kind_mean(k), 0) : std::string("-")) + " |";
    }
    out += "\n";
  }
  return out;
}

}  // namespace antforge
