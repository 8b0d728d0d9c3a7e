#pragma once

// Plain "key = value" report documents and the config hash.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qlm/errors.hpp"
#include "qlm/minkowski.hpp"

namespace qlm {

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Round-trip formatting for doubles.
inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class KeyValueReport {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& kv : entries_)
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    entries_.emplace_back(key, value);
  }
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set(const std::string& key, double value) { set(key, fmt(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }
  void set(const std::string& key, const FourVector& v) {
    set(key, "[" + fmt(v.x1) + ", " + fmt(v.x2) + ", " + fmt(v.x3) + ", " + fmt(v.t) + "]");
  }
  void set(const std::string& key, const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    set(key, s + "]");
  }
  void set(const std::string& key, const std::vector<std::string>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
    set(key, s + "]");
  }

  const std::string* get(const std::string& key) const {
    for (const auto& kv : entries_)
      if (kv.first == key) return &kv.second;
    return nullptr;
  }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string str() const {
    std::ostringstream o;
    for (const auto& [k, v] : entries_) o << k << " = " << v << '\n';
    return o.str();
  }
  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    out << str();
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Parses a report written by KeyValueReport::write.
inline KeyValueReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  KeyValueReport r;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    r.set(line.substr(0, eq), line.substr(eq + 3));
  }
  return r;
}

}  // namespace qlm
