// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <cstdio>
#include <string>
#include <vector>

namespace rdml {

// 17 significant digits: enough text for an IEEE double to round-trip exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
    ++b;
  }
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
    --e;
  }
  return s.substr(b, e - b);
}

inline std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(delim, start);
    if (pos == std::string::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

// strtod/strtoll wrappers that demand the whole token parses.
bool try_parse_double(const std::string& token, double& out);
bool try_parse_int64(const std::string& token, long long& out);
bool try_parse_uint64(const std::string& token, unsigned long long& out);

}  // namespace rdml
