#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace speedrs {

/// Plain-text `key = value` settings. '#' starts a comment; blank lines are
/// ignored; later assignments win.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<config>");
  static Config load(const std::string& file);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  /// Copies every key of `other` over this one.
  void merge(const Config& other);

  // Typed getters; malformed values throw InvalidConfig naming the key.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list of non-negative integers.
  std::vector<std::size_t> get_size_list(const std::string& key, const std::vector<std::size_t>& fallback) const;

  /// Throws InvalidConfig for keys outside `known`.
  void require_known(const std::vector<std::string>& known) const;

  /// Sorted `key = value` lines; the form hashed into manifests.
  std::string canonical() const;

 private:
  std::map<std::string, std::string> values_;
};

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string digest_hex(const std::string& bytes);

}  // namespace speedrs
