#pragma once

#include <algorithm>
#include <initializer_list>
#include <set>
#include <string>

#include "json.hpp"
#include "masaat/errors.hpp"

namespace masaat {

// Reads fields of one JSON object and rejects keys nobody asked for.
// `path` prefixes every error so users see e.g. "model.encoder.num_heads".
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key, const T& fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(key);
  }

  template <typename T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key) + ": required field is missing");
    return convert<T>(key);
  }

  const nlohmann::json& child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key) + ": required field is missing");
    return j_.at(key);
  }

  // Early unknown-key check, for objects whose fields are read piecemeal.
  void expect_only(std::initializer_list<const char*> keys) const {
    for (const auto& [key, _] : j_.items()) {
      if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end()) {
        throw ConfigError(field(key) + ": unknown key");
      }
    }
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  // Call after all reads.
  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError(field(key) + ": unknown key");
    }
  }

 private:
  template <typename T>
  T convert(const std::string& key) const {
    const auto& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.get<long long>() < 0) throw ConfigError("");
        }
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      return v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(field(key) + ": wrong type (" + std::string(v.type_name()) + ")");
    }
  }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace masaat
