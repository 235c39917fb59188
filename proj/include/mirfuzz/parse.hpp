#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "mirfuzz/ir.hpp"

namespace mirfuzz {

struct ParseResult {
  std::optional<Program> program;  // present iff diagnostics is empty
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return program.has_value(); }
};

// Parses and validates a textual mini-IR module. Total: malformed input
// yields diagnostics with line/column, never a crash.
ParseResult parse_module(std::string_view text);

}  // namespace mirfuzz
