#pragma once

#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "ckpk/error.hpp"

namespace ckpk {

using json = nlohmann::json;

namespace detail {

/// Rejects non-objects, missing required keys and unknown keys.
inline void check_object(const json& j, std::string_view type,
                         std::initializer_list<std::string_view> required,
                         std::initializer_list<std::string_view> optional = {}) {
  if (!j.is_object()) fail(Errc::schema, std::string(type) + ": expected JSON object");
  for (auto key : required) {
    if (!j.contains(std::string(key))) {
      fail(Errc::schema, std::string(type) + ": missing field '" + std::string(key) + "'");
    }
  }
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (auto k : required) known = known || key == k;
    for (auto k : optional) known = known || key == k;
    if (!known) fail(Errc::schema, std::string(type) + ": unknown field '" + key + "'");
  }
}

template <typename T>
T get_field(const json& j, std::string_view type, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::schema, std::string(type) + "." + key + ": " + e.what());
  }
}

template <typename T>
std::optional<T> get_optional(const json& j, std::string_view type, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get_field<T>(j, type, key);
}

template <typename T>
json optional_to_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace detail
}  // namespace ckpk
