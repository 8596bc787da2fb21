#pragma once

#include <map>
#include <string>

#include "udepth/common.hpp"

namespace udepth {

struct KeyValueEntry {
  std::string value;
  int line = 0;
};

/// Parses flat "key = value" text. Blank lines and '#' comments are skipped.
/// Malformed lines and duplicate keys throw ConfigError naming `origin` and
/// the 1-based line number.
std::map<std::string, KeyValueEntry> parse_key_values(const std::string& text, const std::string& origin);

double parse_double(const std::string& value, const std::string& what);
int64_t parse_int(const std::string& value, const std::string& what);
bool parse_bool(const std::string& value, const std::string& what);

}  // namespace udepth
