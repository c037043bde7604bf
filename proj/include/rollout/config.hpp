#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace rollout {

/// Flat key = value configuration. Lines starting with '#' are comments.
/// Later assignments override earlier ones. Typed getters throw ConfigError.
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  /// Applies a "key=value" override.
  void apply_override(std::string_view assignment);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Sorted "key=value\n" lines; parse(canonical()) reproduces it byte for byte.
  std::string canonical() const;

  /// Lower-case hex SHA-256 of canonical().
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Lower-case hex SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view bytes);

}  // namespace rollout
