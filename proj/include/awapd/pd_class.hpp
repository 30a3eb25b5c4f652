#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "awapd/error.hpp"

namespace awapd {

// The six discharge source conditions, in canonical order. The ordinal is
// used for matrix axes and for every tie-break in the toolkit.
enum class PdClass : std::size_t { C = 0, I, S, CI, CS, SI };

inline constexpr std::size_t kNumClasses = 6;

inline constexpr std::array<PdClass, kNumClasses> kAllClasses = {
    PdClass::C, PdClass::I, PdClass::S, PdClass::CI, PdClass::CS, PdClass::SI};

constexpr std::size_t index_of(PdClass c) { return static_cast<std::size_t>(c); }

constexpr std::string_view name_of(PdClass c) {
  constexpr std::array<std::string_view, kNumClasses> names = {"C", "I", "S", "CI", "CS", "SI"};
  return names[index_of(c)];
}

inline std::optional<PdClass> try_parse_class(std::string_view s) {
  for (PdClass c : kAllClasses) {
    if (name_of(c) == s) return c;
  }
  return std::nullopt;
}

inline PdClass parse_class(std::string_view s) {
  if (auto c = try_parse_class(s)) return *c;
  throw InvalidArgument("unknown PD class '" + std::string(s) + "'");
}

inline PdClass class_from_index(std::size_t i) {
  if (i >= kNumClasses) throw InvalidArgument("class index out of range: " + std::to_string(i));
  return kAllClasses[i];
}

// Single-source constituents of a class. Single sources return themselves once.
inline std::array<PdClass, 2> constituents(PdClass c) {
  switch (c) {
    case PdClass::CI: return {PdClass::C, PdClass::I};
    case PdClass::CS: return {PdClass::C, PdClass::S};
    case PdClass::SI: return {PdClass::S, PdClass::I};
    default: return {c, c};
  }
}

constexpr bool is_mixed(PdClass c) { return index_of(c) >= 3; }

}  // namespace awapd
