#include "helios/pv/kv_config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "helios/core/error.hpp"
#include "helios/data/record.hpp"

namespace helios {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KvConfig KvConfig::parse(std::istream& in, const std::string& source) {
  KvConfig cfg;
  cfg.source_ = source;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::config, source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) fail(ErrorCode::config, source + ":" + std::to_string(line_no) + ": empty key");
    if (cfg.find(key)) fail(ErrorCode::config, source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    cfg.entries_.emplace_back(key, trim(t.substr(eq + 1)));
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open config " + path.string());
  return parse(in, path.string());
}

const std::string* KvConfig::find(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return &v;
  }
  return nullptr;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void KvConfig::set(const std::string& key, double value) { set(key, format_double(value)); }
void KvConfig::set(const std::string& key, long long value) { set(key, std::to_string(value)); }
void KvConfig::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

bool KvConfig::has(const std::string& key) const { return find(key) != nullptr; }

std::string KvConfig::get_string(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) fail(ErrorCode::config, source_ + ": missing key '" + key + "'");
  consumed_.insert(key);
  return *v;
}

double KvConfig::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    return parse_double(v);
  } catch (const Error&) {
    fail(ErrorCode::config, source_ + ": key '" + key + "' is not a number: '" + v + "'");
  }
}

long long KvConfig::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    fail(ErrorCode::config, source_ + ": key '" + key + "' is not an integer: '" + v + "'");
  }
  return out;
}

std::uint64_t KvConfig::get_u64(const std::string& key) const {
  const std::string v = get_string(key);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    fail(ErrorCode::config, source_ + ": key '" + key + "' is not an unsigned integer: '" + v + "'");
  }
  return out;
}

void KvConfig::read(const std::string& key, std::string& out) const {
  if (has(key)) out = get_string(key);
}
void KvConfig::read(const std::string& key, double& out) const {
  if (has(key)) out = get_double(key);
}
void KvConfig::read(const std::string& key, int& out) const {
  if (has(key)) out = static_cast<int>(get_int(key));
}
void KvConfig::read(const std::string& key, std::uint64_t& out) const {
  if (has(key)) out = get_u64(key);
}
void KvConfig::read(const std::string& key, bool& out) const {
  if (!has(key)) return;
  const std::string v = get_string(key);
  if (v == "true" || v == "on" || v == "1") {
    out = true;
  } else if (v == "false" || v == "off" || v == "0") {
    out = false;
  } else {
    fail(ErrorCode::config, source_ + ": key '" + key + "' is not a boolean: '" + v + "'");
  }
}

void KvConfig::require_all_consumed() const {
  std::string unknown;
  for (const auto& [k, v] : entries_) {
    if (!consumed_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  }
  if (!unknown.empty()) fail(ErrorCode::config, source_ + ": unrecognised keys: " + unknown);
}

std::string KvConfig::to_string() const {
  std::ostringstream os;
  for (const auto& [k, v] : entries_) os << k << " = " << v << '\n';
  return os.str();
}

void KvConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot open " + path.string() + " for writing");
  out << to_string();
  if (!out) fail(ErrorCode::io, "write failed: " + path.string());
}

}  // namespace helios
