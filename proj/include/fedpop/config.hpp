#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fedpop {

// Flat key=value experiment configuration. Files hold one pair per line
// ('#' comments allowed); command-line overrides use the same syntax.
// The canonical form (sorted keys) is hashed into every artifact.
class ExperimentConfig {
 public:
  static ExperimentConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& key_equals_value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;

  // Required variants throw std::invalid_argument naming the key.
  std::string require_string(const std::string& key) const;

  std::string canonical() const;
  std::uint64_t hash() const;
  std::uint64_t seed() const { return static_cast<std::uint64_t>(get_int("seed", 1)); }

  // "# config_hash=... seed=..." comment stamped into every CSV artifact.
  std::string provenance() const;

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace fedpop
