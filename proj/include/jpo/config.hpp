#pragma once

// A small TOML subset: [section] headers, `key = value` lines, # comments.
// Values are strings, integers, floats, booleans or flat arrays of numbers.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace jpo::config {

using Value = std::variant<std::string, std::int64_t, double, bool, std::vector<double>>;

class Table {
 public:
  // Throws Errc::ConfigInvalid with the offending line number.
  static Table parse(std::string_view text);
  // Throws Errc::MissingInput.
  static Table load(const std::filesystem::path& path);

  // Keys are "section.key" (or "key" before any section).
  const std::map<std::string, Value>& values() const { return values_; }
  bool contains(const std::string& key) const { return values_.contains(key); }

  // Typed lookups throw Errc::ConfigInvalid on a type mismatch.
  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;  // accepts integers
  std::optional<bool> get_bool(const std::string& key) const;
  std::optional<std::vector<double>> get_array(const std::string& key) const;

  void set(const std::string& key, Value v) { values_[key] = std::move(v); }

  // Sections in key order; parse(to_toml()) reproduces the table.
  std::string to_toml() const;

 private:
  std::map<std::string, Value> values_;
};

}  // namespace jpo::config
