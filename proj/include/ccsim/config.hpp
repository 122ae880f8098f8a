// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat INI-style config: [section] headers over key = value lines. Lines
// whose first non-blank character is '#' or ';' are comments. List values
// are comma-separated. "inf" is a valid double.

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ccsim/errors.hpp"

namespace ccsim {

class IniConfig {
 public:
  IniConfig() = default;

  static IniConfig parse(const std::string& text) {
    IniConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']') {
          throw InvalidArgumentError("config line " + std::to_string(lineno) +
                                     ": unterminated section header");
        }
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw InvalidArgumentError("config line " + std::to_string(lineno) +
                                   ": expected key = value");
      }
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty()) {
        throw InvalidArgumentError("config line " + std::to_string(lineno) +
                                   ": empty key");
      }
      cfg.kv_[section + "." + key] = value;
    }
    return cfg;
  }

  static IniConfig parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidArgumentError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& section, const std::string& key) const {
    return kv_.count(section + "." + key) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& def) const {
    auto it = kv_.find(section + "." + key);
    return it == kv_.end() ? def : it->second;
  }

  double get_double(const std::string& section, const std::string& key, double def) const {
    auto it = kv_.find(section + "." + key);
    return it == kv_.end() ? def : to_double(it->second, section + "." + key);
  }

  std::int64_t get_int(const std::string& section, const std::string& key,
                       std::int64_t def) const {
    auto it = kv_.find(section + "." + key);
    return it == kv_.end() ? def : to_int(it->second, section + "." + key);
  }

  std::vector<std::string> get_list(const std::string& section, const std::string& key,
                                    const std::vector<std::string>& def) const {
    auto it = kv_.find(section + "." + key);
    if (it == kv_.end()) return def;
    std::vector<std::string> out;
    std::istringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string v = trim(item);
      if (!v.empty()) out.push_back(v);
    }
    return out;
  }

  std::vector<std::int64_t> get_int_list(const std::string& section, const std::string& key,
                                         const std::vector<std::int64_t>& def) const {
    if (!has(section, key)) return def;
    std::vector<std::int64_t> out;
    for (const auto& s : get_list(section, key, {})) {
      out.push_back(to_int(s, section + "." + key));
    }
    return out;
  }

  static double to_double(const std::string& s, const std::string& where) {
    if (s == "inf" || s == "infinity") return INFINITY;
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw InvalidArgumentError("config " + where + ": bad number '" + s + "'");
    }
  }

  static std::int64_t to_int(const std::string& s, const std::string& where) {
    try {
      std::size_t pos = 0;
      const std::int64_t v = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw InvalidArgumentError("config " + where + ": bad integer '" + s + "'");
    }
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> kv_;
};

}  // namespace ccsim
