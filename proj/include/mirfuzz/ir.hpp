#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mirfuzz/types.hpp"

namespace mirfuzz {

enum class Opcode {
  Load,
  Store,
  Gep,
  Call,
  Cmp,
  Br,
  Jmp,
  Ret,
  Const,
  Add,
  Sub,
  Mul,
  Alloc,
  Free,
  Memcpy,
  Memset,
  Trap,
  // Instrumentation markers inserted by the synthesizer. loadhook/storehook
  // carry the accessed type; rangeload/rangestore carry (ptr, length) and
  // realize the memcpy/memset expansion into load and store semantics.
  LoadHook,
  StoreHook,
  RangeLoad,
  RangeStore,
};

enum class CmpCond { Eq, Ne, Lt, Le, Gt, Ge };

struct Operand {
  bool is_literal = false;
  uint64_t literal = 0;
  std::string value;  // SSA value name when !is_literal

  static Operand lit(uint64_t v) { return Operand{true, v, {}}; }
  static Operand val(std::string name) { return Operand{false, 0, std::move(name)}; }
  bool operator==(const Operand&) const = default;
};

struct Instruction {
  Opcode op = Opcode::Trap;
  std::string result;       // empty when the instruction produces no value
  bool has_type = false;
  TypeDesc type;            // load/store/gep/const/alloc/loadhook/storehook
  std::vector<Operand> args;
  std::string callee;       // direct call target
  bool indirect_call = false;  // call through args[0]; remaining args are call args
  CmpCond cond = CmpCond::Eq;
  std::vector<std::string> labels;  // br: [true, false]; jmp: [target]
  int line = 0;

  bool is_terminator() const {
    return op == Opcode::Br || op == Opcode::Jmp || op == Opcode::Ret || op == Opcode::Trap;
  }
  bool operator==(const Instruction&) const;
};

struct Block {
  std::string label;
  std::vector<Instruction> insts;  // last instruction is the terminator
  bool operator==(const Block&) const = default;
};

struct Param {
  std::string name;
  TypeDesc type;
  bool operator==(const Param&) const = default;
};

struct Function {
  std::string name;
  std::vector<Param> params;
  TypeDesc ret;
  std::vector<Block> blocks;
  bool operator==(const Function&) const = default;
};

struct ExternDecl {
  std::string name;
  std::vector<TypeDesc> params;
  TypeDesc ret;
  bool memory = false;  // declared memory-intrinsic attribute
  bool operator==(const ExternDecl&) const = default;
};

struct Program {
  TypeTable types;
  std::vector<ExternDecl> externs;
  std::vector<Function> funcs;

  const Function* find_func(std::string_view name) const;
  Function* find_func(std::string_view name);
  const ExternDecl* find_extern(std::string_view name) const;

  bool operator==(const Program&) const = default;
};

struct Diagnostic {
  int line = 0;
  int col = 0;
  std::string message;
};

// Structural validation: resolution of labels/types/callees/values, SSA
// uniqueness, terminator placement, type well-formedness, type-table
// acyclicity outside Ptr indirection. Total: never throws.
std::vector<Diagnostic> validate(const Program& p);

}  // namespace mirfuzz
