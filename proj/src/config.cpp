#include "codis/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace codis {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_string(ss.str());
}

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      cfg.section_names_.insert(section);
      cfg.data_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    cfg.set(section, key, value);
  }
  return cfg;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  section_names_.insert(section);
  auto& entries = data_[section];
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries.emplace_back(key, value);
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto it = data_.find(section);
  if (it == data_.end()) return false;
  for (const auto& [k, v] : it->second)
    if (k == key) return true;
  return false;
}

std::string Config::get(const std::string& section, const std::string& key) const {
  const auto it = data_.find(section);
  if (it != data_.end()) {
    for (const auto& [k, v] : it->second)
      if (k == key) return v;
  }
  throw ConfigError("missing config key [" + section + "] " + key);
}

std::string Config::get(const std::string& section, const std::string& key,
                        const std::string& fallback) const {
  return has(section, key) ? get(section, key) : fallback;
}

double Config::parse_number(const std::string& raw) {
  std::string s = trim(raw);
  if (s.empty()) throw ConfigError("empty numeric value");
  // parameter tables write tolerances like "E-2" and values like "14 E-6"
  std::string compact;
  for (char c : s)
    if (c != ' ' && c != '\t') compact.push_back(c);
  if (compact.front() == 'e' || compact.front() == 'E') compact.insert(compact.begin(), '1');
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(compact, &pos);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + raw + "'");
  }
  if (pos != compact.size()) throw ConfigError("not a number: '" + raw + "'");
  return v;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  return has(section, key) ? parse_number(get(section, key)) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key) const {
  return parse_number(get(section, key));
}

std::int64_t Config::get_int(const std::string& section, const std::string& key,
                             std::int64_t fallback) const {
  if (!has(section, key)) return fallback;
  const double v = parse_number(get(section, key));
  const auto r = static_cast<std::int64_t>(std::llround(v));
  if (std::abs(v - static_cast<double>(r)) > 1e-9)
    throw ConfigError("expected integer for [" + section + "] " + key);
  return r;
}

std::uint64_t Config::get_seed(const std::string& section, std::uint64_t fallback) const {
  if (!has(section, "seed")) return fallback;
  return static_cast<std::uint64_t>(std::stoull(get(section, "seed")));
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  std::string v = get(section, key);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected boolean for [" + section + "] " + key);
}

std::vector<double> Config::get_list(const std::string& section, const std::string& key) const {
  std::string v = get(section, key);
  // tuple syntax "(25, 3)" is list syntax with parentheses
  std::erase(v, '(');
  std::erase(v, ')');
  std::vector<double> out;
  std::istringstream is(v);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(parse_number(tok));
  }
  return out;
}

std::vector<std::string> Config::get_str_list(const std::string& section,
                                              const std::string& key) const {
  const std::string v = get(section, key);
  std::vector<std::string> out;
  std::istringstream is(v);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

void Config::require_known(const std::string& section,
                           const std::set<std::string>& allowed) const {
  const auto it = data_.find(section);
  if (it == data_.end()) return;
  for (const auto& [k, v] : it->second) {
    if (!allowed.count(k))
      throw ConfigError("unknown config key [" + section + "] " + k);
  }
}

std::string Config::dump() const {
  std::ostringstream os;
  for (const auto& [section, entries] : data_) {
    os << "[" << section << "]\n";
    for (const auto& [k, v] : entries) os << k << " = " << v << "\n";
    os << "\n";
  }
  return os.str();
}

}  // namespace codis
