// SPDX-License-Identifier: Apache-2.0
#include "rdml/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rdml/text.hpp"

namespace rdml {

bool try_parse_double(const std::string& token, double& out) {
  if (token.empty()) {
    return false;
  }
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size() || errno == ERANGE) {
    return false;
  }
  out = v;
  return true;
}

bool try_parse_int64(const std::string& token, long long& out) {
  if (token.empty()) {
    return false;
  }
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(token.c_str(), &end, 10);
  if (end != token.c_str() + token.size() || errno == ERANGE) {
    return false;
  }
  out = v;
  return true;
}

bool try_parse_uint64(const std::string& token, unsigned long long& out) {
  if (token.empty() || token[0] == '-') {
    return false;
  }
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(token.c_str(), &end, 10);
  if (end != token.c_str() + token.size() || errno == ERANGE) {
    return false;
  }
  out = v;
  return true;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw std::runtime_error("config '" + path + "': cannot open");
  }
  std::ostringstream text;
  text << file.rdbuf();
  return parse_string(text.str(), path);
}

ConfigFile ConfigFile::parse_string(const std::string& text,
                                    const std::string& origin) {
  ConfigFile config;
  config.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    // Strip comments that start a token; '#' or ';' inside values is not
    // supported by design (values are plain numbers, names, and lists).
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) {
      line = line.substr(0, comment);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const std::string at =
        origin + ":" + std::to_string(line_number) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw std::runtime_error(at + "malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw std::runtime_error(at + "empty section name");
      }
      config.sections_[section];  // a section may be declared and left empty
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(at + "expected 'key = value'");
    }
    if (section.empty()) {
      throw std::runtime_error(at + "key outside any [section]");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error(at + "empty key");
    }
    if (value.empty()) {
      throw std::runtime_error(at + "empty value for key '" + key + "'");
    }
    auto& sec = config.sections_[section];
    if (!sec.emplace(key, value).second) {
      throw std::runtime_error(at + "duplicate key '" + key + "' in [" +
                               section + "]");
    }
  }
  return config;
}

void ConfigFile::fail(const std::string& what) const {
  throw std::runtime_error("config '" + origin_ + "': " + what);
}

bool ConfigFile::has_section(const std::string& section) const {
  return sections_.count(section) > 0;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  return it != sections_.end() && it->second.count(key) > 0;
}

const std::string& ConfigFile::raw(const std::string& section,
                                   const std::string& key) const {
  auto it = sections_.find(section);
  if (it == sections_.end()) {
    fail("missing section [" + section + "]");
  }
  auto kv = it->second.find(key);
  if (kv == it->second.end()) {
    fail("missing key '" + key + "' in [" + section + "]");
  }
  return kv->second;
}

std::string ConfigFile::get_string(const std::string& section,
                                   const std::string& key) const {
  return raw(section, key);
}

double ConfigFile::get_double(const std::string& section,
                              const std::string& key) const {
  double v = 0.0;
  if (!try_parse_double(raw(section, key), v)) {
    fail("key '" + key + "' in [" + section + "] is not a number");
  }
  return v;
}

std::uint64_t ConfigFile::get_uint(const std::string& section,
                                   const std::string& key) const {
  unsigned long long v = 0;
  if (!try_parse_uint64(raw(section, key), v)) {
    fail("key '" + key + "' in [" + section +
         "] is not a non-negative integer");
  }
  return v;
}

std::size_t ConfigFile::get_size(const std::string& section,
                                 const std::string& key) const {
  return static_cast<std::size_t>(get_uint(section, key));
}

bool ConfigFile::get_bool(const std::string& section,
                          const std::string& key) const {
  const std::string& v = raw(section, key);
  if (v == "true") {
    return true;
  }
  if (v == "false") {
    return false;
  }
  fail("key '" + key + "' in [" + section + "] must be 'true' or 'false'");
}

namespace {

std::vector<std::string> list_tokens(const std::string& value) {
  if (value == "none") {
    return {};
  }
  std::vector<std::string> tokens = split(value, ',');
  for (std::string& token : tokens) {
    token = trim(token);
  }
  return tokens;
}

}  // namespace

std::vector<double> ConfigFile::get_double_list(const std::string& section,
                                                const std::string& key) const {
  std::vector<double> out;
  for (const std::string& token : list_tokens(raw(section, key))) {
    double v = 0.0;
    if (!try_parse_double(token, v)) {
      fail("key '" + key + "' in [" + section + "] has a bad number '" +
           token + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> ConfigFile::get_size_list(
    const std::string& section, const std::string& key) const {
  std::vector<std::size_t> out;
  for (const std::string& token : list_tokens(raw(section, key))) {
    unsigned long long v = 0;
    if (!try_parse_uint64(token, v)) {
      fail("key '" + key + "' in [" + section + "] has a bad integer '" +
           token + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<std::uint64_t> ConfigFile::get_uint_list(
    const std::string& section, const std::string& key) const {
  std::vector<std::uint64_t> out;
  for (const std::string& token : list_tokens(raw(section, key))) {
    unsigned long long v = 0;
    if (!try_parse_uint64(token, v)) {
      fail("key '" + key + "' in [" + section + "] has a bad integer '" +
           token + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::optional<double> ConfigFile::get_optional_double(
    const std::string& section, const std::string& key) const {
  const std::string& v = raw(section, key);
  if (v == "none") {
    return std::nullopt;
  }
  double value = 0.0;
  if (!try_parse_double(v, value)) {
    fail("key '" + key + "' in [" + section +
         "] must be a number or 'none'");
  }
  return value;
}

void ConfigFile::require_known_keys(
    const std::string& section, const std::vector<std::string>& allowed) const {
  auto it = sections_.find(section);
  if (it == sections_.end()) {
    return;
  }
  for (const auto& [key, value] : it->second) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      fail("unknown key '" + key + "' in [" + section + "]");
    }
  }
}

}  // namespace rdml
