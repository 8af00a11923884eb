#pragma once
// Field accessors that turn JSON type errors into ValidationError naming the
// type and key.

#include <initializer_list>
#include <optional>
#include <string_view>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "seqstory/error.hpp"

namespace seqstory::jsonf {

using json = nlohmann::json;

/// Throws on non-objects and, unless a LenientJson guard is alive, on keys
/// outside `known`.
void reject_unknown(const json& j, std::initializer_list<std::string_view> known,
                    std::string_view type);

template <typename T>
T field(const json& j, const char* key, std::string_view type) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ValidationError(fmt::format("{}: missing field '{}'", type, key));
  }
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(
        fmt::format("{}: field '{}' has the wrong type ({})", type, key, e.what()));
  }
}

template <typename T>
std::optional<T> opt_field(const json& j, const char* key, std::string_view type) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return field<T>(j, key, type);
}

template <typename T>
T field_or(const json& j, const char* key, T fallback, std::string_view type) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return field<T>(j, key, type);
}

}  // namespace seqstory::jsonf
