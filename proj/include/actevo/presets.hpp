#pragma once

#include <span>
#include <string>

#include "actevo/expr.hpp"

namespace actevo::presets {

// Named activation functions resolvable wherever an expression is accepted.
// Each entry records the grammar encoding and the conventional formula.
// Entries built around arctan need the extended alphabet.
struct Preset {
  std::string_view name;
  std::string_view formula;
  std::string_view grammar;
  bool requires_extended;
};

std::span<const Preset> registry();
const Preset* find(std::string_view name);

// Resolves either a preset name or grammar text into a tree. Preset names
// that need the extended alphabet fail under the standard one.
expr::ExprTree resolve(const std::string& text, const expr::Alphabet& alphabet);

}  // namespace actevo::presets
