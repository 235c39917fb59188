#pragma once

#include <string>

#include "mirfuzz/ir.hpp"

namespace mirfuzz {

// Canonical textual form: types, then externs, then functions, each in
// declaration order. Deterministic; parse(render(p)) == p.
std::string render_module(const Program& p);

std::string render_instruction(const Instruction& inst);

}  // namespace mirfuzz
