#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lrsense {

// Plain-text run configuration:
//
//   # comment
//   key = value
//   list_key = 1, 2, 3
//
// Keys are case-sensitive, later assignments override earlier ones, and
// values keep interior whitespace. Lists are comma-separated.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& source = "<stream>");
  static KeyValueConfig load(const std::filesystem::path& path);

  /// Applies a "key=value" override as given on the command line.
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;

  /// Throws InvalidConfig naming the first key not in `known`.
  void require_known(const std::set<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace lrsense
