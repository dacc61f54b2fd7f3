#include "fedpop/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fedpop/csv.hpp"
#include "fedpop/errors.hpp"

namespace fedpop {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path);
  ExperimentConfig cfg;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw io_error("config line is not key=value", line_no);
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (key.empty()) throw std::invalid_argument("empty config key");
  kv_[key] = value;
}

void ExperimentConfig::apply_override(const std::string& kev) {
  const auto eq = kev.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must be key=value: " + kev);
  set(trim(kev.substr(0, eq)), trim(kev.substr(eq + 1)));
}

bool ExperimentConfig::has(const std::string& key) const {
  return kv_.count(key) != 0;
}

std::string ExperimentConfig::get_string(const std::string& key,
                                         const std::string& fallback) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

long long ExperimentConfig::get_int(const std::string& key,
                                    long long fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  long long v = 0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("config key '" + key + "' is not an integer");
  return v;
}

double ExperimentConfig::get_double(const std::string& key,
                                    double fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "' is not a number");
  }
}

bool ExperimentConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::invalid_argument("config key '" + key + "' is not a boolean");
}

std::vector<double> ExperimentConfig::get_double_list(
    const std::string& key, const std::vector<double>& fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<double> out;
  std::istringstream ss(it->second);
  std::string cell;
  while (std::getline(ss, cell, ';')) {
    if (trim(cell).empty()) continue;
    out.push_back(std::stod(trim(cell)));
  }
  return out;
}

std::string ExperimentConfig::require_string(const std::string& key) const {
  const auto it = kv_.find(key);
  if (it == kv_.end() || it->second.empty())
    throw std::invalid_argument("missing required config key '" + key + "'");
  return it->second;
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : kv_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(canonical()); }

std::string ExperimentConfig::provenance() const {
  std::ostringstream out;
  out << "config_hash=" << std::hex << hash() << std::dec << " seed=" << seed();
  return out.str();
}

}  // namespace fedpop
