#pragma once

// Line-based "key = value" config files. '#' starts a comment.

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace latt {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

class Config {
 public:
  static Config parse(std::istream& in) {
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::string t = trim(line);
      if (t.empty()) continue;
      std::size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("config: line " + std::to_string(lineno) +
                                 ": expected key = value");
      cfg.values_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
  }

  long get_int(const std::string& key, long dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : std::stol(it->second);
  }

  double get_double(const std::string& key, double dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : std::stod(it->second);
  }

  std::vector<long> get_int_list(const std::string& key,
                                 std::vector<long> dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    std::vector<long> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(std::stol(item));
    }
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace latt
