#pragma once

#include "liouville/common.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace liouville {

/// Flat `key = value` text with optional `[section]` headers. `#` starts a comment.
/// Keys before the first header live in the unnamed section "".
class Config {
 public:
  static Config parse(std::istream& in, const std::string& source = "<config>");
  static Config parse_string(const std::string& text, const std::string& source = "<config>");
  static Config load(const std::string& path);

  /// Canonical text: top-level keys first, then sections in lexicographic order.
  std::string serialize() const;

  bool has(const std::string& section, const std::string& key) const;
  std::string text(const std::string& section, const std::string& key) const;
  std::string text(const std::string& section, const std::string& key, const std::string& fallback) const;
  double number(const std::string& section, const std::string& key) const;
  double number(const std::string& section, const std::string& key, double fallback) const;
  int integer(const std::string& section, const std::string& key, int fallback) const;
  Vec vector(const std::string& section, const std::string& key) const;
  /// Points separated by ';', coordinates by ','.
  std::vector<Vec> points(const std::string& section, const std::string& key) const;

  void set(const std::string& section, const std::string& key, const std::string& value);
  const std::map<std::string, std::map<std::string, std::string>>& entries() const { return entries_; }

  bool operator==(const Config& other) const { return entries_ == other.entries_; }

 private:
  std::map<std::string, std::map<std::string, std::string>> entries_;
};

}  // namespace liouville
