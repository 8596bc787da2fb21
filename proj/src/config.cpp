#include "udepth/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace udepth {

namespace {

std::string trim(const std::string& s) {
  auto begin = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  auto end = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
  return begin < end ? std::string(begin, end) : std::string();
}

}  // namespace

std::map<std::string, KeyValueEntry> parse_key_values(const std::string& text, const std::string& origin) {
  std::map<std::string, KeyValueEntry> out;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto hash = raw.find('#');
    auto content = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (content.empty()) {
      continue;
    }
    auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line) + ": expected 'key = value'");
    }
    auto key = trim(content.substr(0, eq));
    auto value = trim(content.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(line) + ": empty key");
    }
    if (out.count(key) != 0) {
      throw ConfigError(origin + ":" + std::to_string(line) + ": duplicate key '" + key + "' (first set on line " +
                        std::to_string(out[key].line) + ")");
    }
    out[key] = {value, line};
  }
  return out;
}

double parse_double(const std::string& value, const std::string& what) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) {
      throw ConfigError(what + ": '" + value + "' is not a number");
    }
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError(what + ": '" + value + "' is not a number");
  }
}

int64_t parse_int(const std::string& value, const std::string& what) {
  int64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(what + ": '" + value + "' is not an integer");
  }
  return v;
}

bool parse_bool(const std::string& value, const std::string& what) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "on" || v == "yes") {
    return true;
  }
  if (v == "false" || v == "0" || v == "off" || v == "no") {
    return false;
  }
  throw ConfigError(what + ": '" + value + "' is not a boolean");
}

}  // namespace udepth
