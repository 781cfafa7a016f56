#ifndef CODIS_CONFIG_HPP
#define CODIS_CONFIG_HPP

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace codis {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sectioned UTF-8 key-value text ([section] headers, key = value lines,
// '#' comments). Keys reuse the parameter-table names verbatim, so values
// like "E-2" (meaning 1e-2) and tuples like "(25, 3)" parse too.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  std::int64_t get_int(const std::string& section, const std::string& key,
                       std::int64_t fallback) const;
  std::uint64_t get_seed(const std::string& section, std::uint64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& section, const std::string& key) const;
  std::vector<std::string> get_str_list(const std::string& section,
                                        const std::string& key) const;

  void set(const std::string& section, const std::string& key, const std::string& value);

  // rejects keys outside the allowed set for the section
  void require_known(const std::string& section, const std::set<std::string>& allowed) const;
  const std::set<std::string>& sections() const { return section_names_; }

  // canonical dump; parsing the dump reproduces the config exactly
  std::string dump() const;

  static double parse_number(const std::string& raw);

 private:
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> data_;
  std::set<std::string> section_names_;
};

}  // namespace codis

#endif
