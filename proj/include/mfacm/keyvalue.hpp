// Copyright 2026 The mfacm Authors
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

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <string>
#include <string_view>
#include <type_traits>

#include "mfacm/tensor.hpp"

namespace mfacm {

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "size_t must be 64-bit");

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Flat `key=value` text: one pair per line, `#` starts a comment, blank
/// lines ignored, surrounding whitespace trimmed. Later assignments win.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text) {
    KeyValues kv;
    std::size_t line_no = 0, start = 0;
    while (start <= text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      auto line = text.substr(start, end - start);
      ++line_no;
      start = end + 1;
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      kv.assign(line, "line " + std::to_string(line_no));
    }
    return kv;
  }

  /// Parses one `key=value` assignment; `where` labels errors.
  void assign(std::string_view assignment, const std::string& where = "override") {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(where + ": expected key=value, got \"" + std::string(assignment) + "\"");
    const auto key = trim(assignment.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    values_[std::string(key)] = std::string(trim(assignment.substr(eq + 1)));
  }

  bool contains(std::string_view key) const { return values_.find(key) != values_.end(); }

  const std::map<std::string, std::string, std::less<>>& entries() const { return values_; }

  void merge(const KeyValues& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }

  /// Throws naming the first key not accepted by `known(key)`.
  template <typename Pred>
  void reject_unknown(Pred&& known) const {
    for (const auto& [k, _] : values_)
      if (!known(k)) throw ConfigError("unknown configuration key \"" + k + "\"");
  }

  void get(std::string_view key, double& out) const {
    if (auto v = find(key)) {
      char* end = nullptr;
      errno = 0;
      const double d = std::strtod(v->c_str(), &end);
      if (v->empty() || end != v->c_str() + v->size() || errno == ERANGE || !std::isfinite(d))
        throw ConfigError(bad(key, *v, "a finite real"));
      out = d;
    }
  }

  void get(std::string_view key, std::uint64_t& out) const {
    if (auto v = find(key)) {
      char* end = nullptr;
      errno = 0;
      const unsigned long long n = std::strtoull(v->c_str(), &end, 10);
      if (v->empty() || (*v)[0] == '-' || end != v->c_str() + v->size() || errno == ERANGE)
        throw ConfigError(bad(key, *v, "a non-negative integer"));
      out = n;
    }
  }

  void get(std::string_view key, std::string& out) const {
    if (auto v = find(key)) out = *v;
  }

 private:
  static std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  }

  const std::string* find(std::string_view key) const {
    auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
  }

  static std::string bad(std::string_view key, const std::string& v, const char* expected) {
    return "configuration key \"" + std::string(key) + "\" expects " + expected + ", got \"" + v + "\"";
  }

  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace mfacm
