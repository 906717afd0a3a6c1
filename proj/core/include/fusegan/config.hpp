#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fusegan {

/// Flat key/value run configuration. Every key is declared in a registry
/// with a default; unknown keys in files or overrides are rejected so typos
/// fail loudly. Values are strings until a typed getter parses them.
class Config {
 public:
  static Config defaults();
  static Config from_file(const std::string& path);

  void merge_file(const std::string& path);
  /// `spec` has the form key=value (the CLI --set payload).
  void set_override(const std::string& spec);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// Canonical "key = value" lines, sorted; embedded in manifests and
  /// checkpoints verbatim.
  std::string snapshot() const;
  static Config from_snapshot(const std::string& text);

  bool operator==(const Config& other) const { return values_ == other.values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace fusegan
