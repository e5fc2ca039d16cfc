// Plain-text `key = value` files. Lines starting with '#' are comments; a
// key may repeat (e.g. one `plane = ...` line per primitive).
#pragma once

#include "egosgm/core.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace egosgm {

class ParseError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline double parse_double(const std::string& text, const std::string& where) {
  std::istringstream in(text);
  double v = 0.0;
  std::string rest;
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (!(in >> v) || (in >> rest)) throw ParseError(where + ": expected a number, got '" + text + "'");
  return v;
}

inline long long parse_integer(const std::string& text, const std::string& where) {
  long long v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(where + ": expected an integer, got '" + text + "'");
  }
  return v;
}

inline std::vector<double> parse_doubles(const std::string& text, const std::string& where) {
  std::istringstream in(text);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_double(tok, where));
  return out;
}

}  // namespace detail

class KeyValueFile {
 public:
  struct Entry {
    std::string key;
    std::string value;
    int line = 0;
  };

  KeyValueFile() = default;

  static KeyValueFile parse(std::string_view text, std::string source = "<string>") {
    KeyValueFile kv;
    kv.source_ = std::move(source);
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      const std::string t = detail::trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw ParseError(kv.source_ + ":" + std::to_string(number) + ": expected 'key = value'");
      }
      Entry e{detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)), number};
      if (e.key.empty()) {
        throw ParseError(kv.source_ + ":" + std::to_string(number) + ": empty key");
      }
      kv.entries_.push_back(std::move(e));
    }
    return kv;
  }

  static KeyValueFile load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
  }

  const std::string& source() const { return source_; }
  const std::vector<Entry>& entries() const { return entries_; }

  bool has(const std::string& key) const { return find(key) != nullptr; }

  /// Last value for `key`; later lines override earlier ones.
  std::optional<std::string> get(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    return e->value;
  }

  std::vector<std::string> get_all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& e : entries_) {
      if (e.key == key) out.push_back(e.value);
    }
    return out;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
  }

  double get_double(const std::string& key, double fallback) const {
    const Entry* e = find(key);
    return e ? detail::parse_double(e->value, where(*e)) : fallback;
  }

  long long get_int(const std::string& key, long long fallback) const {
    const Entry* e = find(key);
    return e ? detail::parse_integer(e->value, where(*e)) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
    if (e->value == "false" || e->value == "0" || e->value == "no") return false;
    throw ParseError(where(*e) + ": expected a boolean, got '" + e->value + "'");
  }

  std::vector<double> get_doubles(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return {};
    return detail::parse_doubles(e->value, where(*e));
  }

  void set(const std::string& key, const std::string& value) {
    entries_.push_back({key, value, 0});
  }
  void add(const std::string& key, const std::string& value) { set(key, value); }

  /// Throws on any key not listed in `known`.
  void require_known(const std::set<std::string>& known) const {
    for (const auto& e : entries_) {
      if (!known.count(e.key)) throw ParseError(where(e) + ": unknown key '" + e.key + "'");
    }
  }

  std::string to_string() const {
    std::string out;
    for (const auto& e : entries_) out += e.key + " = " + e.value + "\n";
    return out;
  }

  std::string where(const Entry& e) const {
    return e.line > 0 ? source_ + ":" + std::to_string(e.line) : source_ + " (key " + e.key + ")";
  }

 private:
  const Entry* find(const std::string& key) const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      if (it->key == key) return &*it;
    }
    return nullptr;
  }

  std::string source_ = "<string>";
  std::vector<Entry> entries_;
};

}  // namespace egosgm
