#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace helios {

/// Plain-text `key = value` configuration. Lines starting with '#' and blank
/// lines are ignored; keys are unique. Tracks which keys were read so that
/// callers can reject anything left unrecognised.
class KvConfig {
 public:
  static KvConfig parse(std::istream& in, const std::string& source = "<config>");
  static KvConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  void set(const std::string& key, std::uint64_t value);
  void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;

  /// Reads into `out` when the key is present; leaves it untouched otherwise.
  void read(const std::string& key, std::string& out) const;
  void read(const std::string& key, double& out) const;
  void read(const std::string& key, int& out) const;
  void read(const std::string& key, std::uint64_t& out) const;
  void read(const std::string& key, bool& out) const;

  /// Throws ErrorCode::config listing every key never read.
  void require_all_consumed() const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::string to_string() const;
  void save(const std::filesystem::path& path) const;

 private:
  const std::string* find(const std::string& key) const;

  std::string source_ = "<config>";
  std::vector<std::pair<std::string, std::string>> entries_;
  mutable std::set<std::string> consumed_;
};

}  // namespace helios
