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

#include "antforge/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "antforge/errors.hpp"

namespace antforge {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string field(std::string_view section, std::string_view key) {
  return section.empty() ? std::string(key) : std::string(section) + "." + std::string(key);
}

}  // namespace

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= s.size()) {
    size_t end = s.find(sep, start);
    if (end == std::string_view::npos) end = s.size();
    const std::string_view item = trim(s.substr(start, end - start));
    if (!item.empty()) out.emplace_back(item);
    start = end + 1;
  }
  return out;
}

std::string format_double(double v) {
  // Shortest text that parses back to exactly v.
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

ConfigFile ConfigFile::parse(std::string_view text, std::string_view origin) {
  ConfigFile cfg;
  cfg.sections_.push_back({"", {}});
  Section* cur = &cfg.sections_.back();
  size_t line_no = 0;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      const std::string name(trim(line.substr(1, line.size() - 2)));
      if (name.empty()) throw ConfigError(where + "empty section name");
      cur = cfg.section(name);
      if (!cur) {
        cfg.sections_.push_back({name, {}});
        cur = &cfg.sections_.back();
      }
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(where + "empty key");
    const std::string value(trim(line.substr(eq + 1)));
    auto it = std::find_if(cur->values.begin(), cur->values.end(),
                           [&](const auto& kv) { return kv.first == key; });
    if (it != cur->values.end()) throw ConfigError(where + "duplicate key " + field(cur->name, key));
    cur->values.emplace_back(key, value);
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

ConfigFile::Section* ConfigFile::section(std::string_view name) {
  for (auto& s : sections_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const ConfigFile::Section* ConfigFile::section(std::string_view name) const {
  return const_cast<ConfigFile*>(this)->section(name);
}

std::optional<std::string> ConfigFile::find(std::string_view sec, std::string_view key) const {
  const Section* s = section(sec);
  if (!s) return std::nullopt;
  for (const auto& [k, v] : s->values) {
    if (k == key) return v;
  }
  return std::nullopt;
}

bool ConfigFile::has(std::string_view sec, std::string_view key) const { return find(sec, key).has_value(); }

void ConfigFile::set(std::string_view sec, std::string_view key, std::string value) {
  Section* s = section(sec);
  if (!s) {
    sections_.push_back({std::string(sec), {}});
    s = &sections_.back();
  }
  for (auto& [k, v] : s->values) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  s->values.emplace_back(std::string(key), std::move(value));
}

std::string ConfigFile::get_string(std::string_view sec, std::string_view key, std::string fallback) const {
  auto v = find(sec, key);
  return v ? *v : fallback;
}

int64_t ConfigFile::get_int(std::string_view sec, std::string_view key, int64_t fallback) const {
  auto v = find(sec, key);
  if (!v) return fallback;
  int64_t out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) {
    throw ConfigError(field(sec, key) + ": expected an integer, got '" + *v + "'");
  }
  return out;
}

uint64_t ConfigFile::get_uint(std::string_view sec, std::string_view key, uint64_t fallback) const {
  auto v = find(sec, key);
  if (!v) return fallback;
  uint64_t out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) {
    throw ConfigError(field(sec, key) + ": expected a non-negative integer, got '" + *v + "'");
  }
  return out;
}

double ConfigFile::get_double(std::string_view sec, std::string_view key, double fallback) const {
  auto v = find(sec, key);
  if (!v) return fallback;
  try {
    size_t used = 0;
    const double out = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(field(sec, key) + ": expected a number, got '" + *v + "'");
  }
}

bool ConfigFile::get_bool(std::string_view sec, std::string_view key, bool fallback) const {
  auto v = find(sec, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError(field(sec, key) + ": expected true/false, got '" + *v + "'");
}

std::vector<double> ConfigFile::get_doubles(std::string_view sec, std::string_view key,
                                            std::vector<double> fallback) const {
  auto v = find(sec, key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(*v)) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError(field(sec, key) + ": bad number '" + item + "' in list");
    }
  }
  return out;
}

std::vector<std::string> ConfigFile::get_list(std::string_view sec, std::string_view key,
                                              std::vector<std::string> fallback) const {
  auto v = find(sec, key);
  return v ? split_list(*v) : fallback;
}

std::vector<std::string> ConfigFile::sections() const {
  std::vector<std::string> out;
  for (const auto& s : sections_) {
    if (!s.values.empty() || !s.name.empty()) out.push_back(s.name);
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> ConfigFile::entries(std::string_view sec) const {
  const Section* s = section(sec);
  return s ? s->values : std::vector<std::pair<std::string, std::string>>{};
}

std::string ConfigFile::serialize() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& s : sections_) {
    if (s.values.empty() && s.name.empty()) continue;
    if (!first) os << '\n';
    first = false;
    if (!s.name.empty()) os << '[' << s.name << "]\n";
    for (const auto& [k, v] : s.values) os << k << " = " << v << '\n';
  }
  return os.str();
}

void ConfigFile::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << serialize();
}

}  // namespace antforge
