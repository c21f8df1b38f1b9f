#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mflab {

/// Flat `key = value` configuration with `#` comments. Values are typed on
/// access; every accessor records the key so unused keys can be reported.
class Config {
public:
  /// Throws ConfigError with `source:line` on malformed lines or duplicate keys.
  static Config parse(const std::string& text, const std::string& source = "<string>");
  /// Throws IoError when the file cannot be read.
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  /// Strictly positive finite double.
  double get_positive(const std::string& key) const;
  double get_positive(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  /// Integer >= 1.
  std::size_t get_count(const std::string& key) const;
  std::size_t get_count(const std::string& key, std::size_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list of doubles.
  std::vector<double> get_list(const std::string& key) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  /// Throws ConfigError naming keys never read.
  void check_all_used() const;
  const std::map<std::string, std::string>& entries() const { return values_; }
  const std::string& source() const { return source_; }

private:
  const std::string& raw(const std::string& key) const;
  [[noreturn]] void bad(const std::string& key, const std::string& what) const;

  std::map<std::string, std::string> values_;
  std::string source_;
  mutable std::set<std::string> used_;
};

}  // namespace mflab
