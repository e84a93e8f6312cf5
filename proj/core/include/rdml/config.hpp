// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rdml {

// INI-style config: [section] headers, key = value lines, '#' or ';'
// comments, blank lines ignored. Keys are unique within a section. Every
// getter throws std::runtime_error naming the section and key (and the file)
// so validation failures point at the exact field.
class ConfigFile {
 public:
  using Section = std::map<std::string, std::string>;

  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text,
                                 const std::string& origin);

  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section,
                         const std::string& key) const;
  double get_double(const std::string& section, const std::string& key) const;
  std::uint64_t get_uint(const std::string& section,
                         const std::string& key) const;
  std::size_t get_size(const std::string& section,
                       const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;

  // Comma-separated lists; the literal "none" means an empty list.
  std::vector<double> get_double_list(const std::string& section,
                                      const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& section,
                                         const std::string& key) const;
  std::vector<std::uint64_t> get_uint_list(const std::string& section,
                                           const std::string& key) const;

  // The literal "none" yields an unset optional.
  std::optional<double> get_optional_double(const std::string& section,
                                            const std::string& key) const;

  const std::map<std::string, Section>& sections() const { return sections_; }
  const std::string& origin() const { return origin_; }

  // Rejects keys outside `allowed` in the given section (strictness guard so
  // misspelled hyperparameters fail loudly instead of being ignored).
  void require_known_keys(const std::string& section,
                          const std::vector<std::string>& allowed) const;

 private:
  [[noreturn]] void fail(const std::string& what) const;
  const std::string& raw(const std::string& section,
                         const std::string& key) const;

  std::map<std::string, Section> sections_;
  std::string origin_;
};

}  // namespace rdml
