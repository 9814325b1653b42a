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
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace antforge {

// Sectioned key=value text:
//
//   # comment
//   [section]
//   key = value
//
// Keys before the first header belong to section "". Order is preserved so
// serialize() reproduces a stable file.
class ConfigFile {
 public:
  static ConfigFile parse(std::string_view text, std::string_view origin = "<string>");
  static ConfigFile load(const std::filesystem::path& path);

  bool has(std::string_view section, std::string_view key) const;
  std::optional<std::string> find(std::string_view section, std::string_view key) const;
  void set(std::string_view section, std::string_view key, std::string value);

  std::string get_string(std::string_view section, std::string_view key, std::string fallback) const;
  int64_t get_int(std::string_view section, std::string_view key, int64_t fallback) const;
  uint64_t get_uint(std::string_view section, std::string_view key, uint64_t fallback) const;
  double get_double(std::string_view section, std::string_view key, double fallback) const;
  bool get_bool(std::string_view section, std::string_view key, bool fallback) const;
  std::vector<double> get_doubles(std::string_view section, std::string_view key,
                                  std::vector<double> fallback) const;
  std::vector<std::string> get_list(std::string_view section, std::string_view key,
                                    std::vector<std::string> fallback) const;

  std::vector<std::string> sections() const;
  std::vector<std::pair<std::string, std::string>> entries(std::string_view section) const;

  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

 private:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> values;
  };
  Section* section(std::string_view name);
  const Section* section(std::string_view name) const;

  std::vector<Section> sections_;
};

std::vector<std::string> split_list(std::string_view s, char sep = ',');
std::string format_double(double v);

}  // namespace antforge
