#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "randgan/error.hpp"

namespace randgan {

// Strict reader for one JSON object section. Every unknown key and every type
// error is collected so a config can be rejected with the full list.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& obj, std::string section, std::vector<std::string>& errors)
      : obj_(obj), section_(std::move(section)), errors_(errors) {
    if (!obj_.is_object()) errors_.push_back(section_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!obj_.is_object() || !obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      errors_.push_back(section_ + "." + key + ": " + e.what());
    }
  }

  // Marks a key as known and returns its raw value (or null).
  const nlohmann::json* raw(const std::string& key) {
    seen_.insert(key);
    if (!obj_.is_object() || !obj_.contains(key)) return nullptr;
    return &obj_.at(key);
  }

  void error(const std::string& key, const std::string& message) {
    errors_.push_back(section_ + "." + key + ": " + message);
  }

  const std::string& section() const { return section_; }
  std::vector<std::string>& errors() { return errors_; }

  // Reports keys that were never requested.
  void finish() {
    if (!obj_.is_object()) return;
    for (const auto& [k, v] : obj_.items())
      if (!seen_.contains(k)) errors_.push_back(section_ + "." + k + ": unknown key");
  }

 private:
  const nlohmann::json& obj_;
  std::string section_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

inline void throw_if_errors(const std::vector<std::string>& errors) {
  if (errors.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& e : errors) msg += "\n  " + e;
  throw Error(msg);
}

}  // namespace randgan
