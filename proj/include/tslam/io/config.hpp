#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "tslam/core/error.hpp"

namespace tslam {

/// One `section.key = value` line.
struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Blank lines and '#' comments are skipped. Keys must contain a dot.
inline std::vector<ConfigEntry> parse_config(std::istream& is, const std::string& name = "<config>") {
  std::vector<ConfigEntry> out;
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidArgument(name + ":" + std::to_string(lineno) + ": expected 'section.key = value'");
    ConfigEntry e{trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)), lineno};
    if (e.key.find('.') == std::string::npos || e.key.front() == '.' || e.key.back() == '.') {
      throw InvalidArgument(name + ":" + std::to_string(lineno) + ": key '" + e.key + "' is not 'section.key'");
    }
    if (e.value.empty()) throw InvalidArgument(name + ":" + std::to_string(lineno) + ": empty value for '" + e.key + "'");
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<ConfigEntry> parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open config '" + path + "'");
  return parse_config(is, path);
}

inline double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw InvalidArgument(what + ": '" + s + "' is not a number");
  return v;
}

inline long long parse_int(const std::string& s, const std::string& what) {
  long long v = 0;
  const char* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw InvalidArgument(what + ": '" + s + "' is not an integer");
  return v;
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const char* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw InvalidArgument(what + ": '" + s + "' is not an unsigned integer");
  return v;
}

inline bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw InvalidArgument(what + ": '" + s + "' is not a boolean");
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error(ErrorKind::Internal, "format_double failed");
  return std::string(buf, p);
}

inline std::string format_float(float v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error(ErrorKind::Internal, "format_float failed");
  return std::string(buf, p);
}

}  // namespace tslam
