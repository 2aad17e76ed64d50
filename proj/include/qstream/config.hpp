#pragma once

// Flat key=value experiment configuration. One entry per line; '#' starts a
// comment; surrounding whitespace is ignored; later keys override earlier ones.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qstream/errors.hpp"

namespace qstream {

class ConfigError : public Error {
 public:
  using Error::Error;
};

class Config {
 public:
  static Config parse(std::istream& in) {
    Config c;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string_view body = trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
      const std::string key(trim(body.substr(0, eq)));
      if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      c.values_[key] = std::string(trim(body.substr(eq + 1)));
    }
    return c;
  }

  static Config parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse(in);
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    return has(key) ? to_double(key, values_.at(key)) : fallback;
  }

  double require_double(const std::string& key) const { return to_double(key, require_string(key)); }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = values_.at(key);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      throw ConfigError("config key '" + key + "': expected a nonnegative integer, got '" + s + "'");
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = values_.at(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + s + "'");
  }

  std::vector<std::string> get_list(const std::string& key, const std::string& fallback) const {
    return split(get_string(key, fallback));
  }

  std::vector<double> get_double_list(const std::string& key, const std::string& fallback) const {
    std::vector<double> out;
    for (const auto& item : get_list(key, fallback)) out.push_back(to_double(key, item));
    return out;
  }

  /// Every entry as "key=value", sorted by key and separated by single spaces.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) {
      if (!out.empty()) out += ' ';
      out += k + '=' + v;
    }
    return out;
  }

  static std::vector<std::string> split(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
      const auto comma = s.find(',', start);
      const auto end = comma == std::string_view::npos ? s.size() : comma;
      if (auto item = trim(s.substr(start, end - start)); !item.empty()) out.emplace_back(item);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return out;
  }

 private:
  static std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static double to_double(const std::string& key, const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError("config key '" + key + "': expected a number, got '" + s + "'");
    return v;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace qstream
