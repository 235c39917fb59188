#include "mirfuzz/print.hpp"

namespace mirfuzz {

namespace {

std::string operand_str(const Operand& o) {
  if (o.is_literal) return std::to_string(o.literal);
  return "%" + o.value;
}

const char* cond_str(CmpCond c) {
  switch (c) {
    case CmpCond::Eq: return "eq";
    case CmpCond::Ne: return "ne";
    case CmpCond::Lt: return "lt";
    case CmpCond::Le: return "le";
    case CmpCond::Gt: return "gt";
    case CmpCond::Ge: return "ge";
  }
  return "?";
}

}  // namespace

std::string render_instruction(const Instruction& inst) {
  std::string s;
  if (!inst.result.empty()) s += "%" + inst.result + " = ";
  switch (inst.op) {
    case Opcode::Load:
      s += "load " + type_to_string(inst.type) + ", " + operand_str(inst.args[0]);
      break;
    case Opcode::Store:
      s += "store " + type_to_string(inst.type) + " " + operand_str(inst.args[0]) + ", " +
           operand_str(inst.args[1]);
      break;
    case Opcode::Gep:
      s += "gep " + type_to_string(inst.type) + ", " + operand_str(inst.args[0]) + ", " +
           operand_str(inst.args[1]);
      break;
    case Opcode::Call: {
      s += "call ";
      size_t first_arg = 0;
      if (inst.indirect_call) {
        s += operand_str(inst.args[0]);
        first_arg = 1;
      } else {
        s += "@" + inst.callee;
      }
      s += "(";
      for (size_t i = first_arg; i < inst.args.size(); ++i) {
        if (i > first_arg) s += ", ";
        s += operand_str(inst.args[i]);
      }
      s += ")";
      break;
    }
    case Opcode::Cmp:
      s += std::string("cmp ") + cond_str(inst.cond) + " " + operand_str(inst.args[0]) +
           ", " + operand_str(inst.args[1]);
      break;
    case Opcode::Br:
      s += "br " + operand_str(inst.args[0]) + ", " + inst.labels[0] + ", " + inst.labels[1];
      break;
    case Opcode::Jmp:
      s += "jmp " + inst.labels[0];
      break;
    case Opcode::Ret:
      s += "ret";
      if (!inst.args.empty()) s += " " + operand_str(inst.args[0]);
      break;
    case Opcode::Const:
      s += "const " + type_to_string(inst.type) + " " + operand_str(inst.args[0]);
      break;
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul: {
      const char* name = inst.op == Opcode::Add ? "add" : inst.op == Opcode::Sub ? "sub" : "mul";
      s += std::string(name) + " " + operand_str(inst.args[0]) + ", " + operand_str(inst.args[1]);
      break;
    }
    case Opcode::Alloc:
      s += "alloc " + type_to_string(inst.type);
      break;
    case Opcode::Free:
      s += "free " + operand_str(inst.args[0]);
      break;
    case Opcode::Memcpy:
    case Opcode::Memset: {
      const char* name = inst.op == Opcode::Memcpy ? "memcpy" : "memset";
      s += std::string(name) + " " + operand_str(inst.args[0]) + ", " +
           operand_str(inst.args[1]) + ", " + operand_str(inst.args[2]);
      break;
    }
    case Opcode::Trap:
      s += "trap";
      break;
    case Opcode::LoadHook:
    case Opcode::StoreHook: {
      const char* name = inst.op == Opcode::LoadHook ? "loadhook" : "storehook";
      s += std::string(name) + " " + type_to_string(inst.type) + ", " + operand_str(inst.args[0]);
      break;
    }
    case Opcode::RangeLoad:
    case Opcode::RangeStore: {
      const char* name = inst.op == Opcode::RangeLoad ? "rangeload" : "rangestore";
      s += std::string(name) + " " + operand_str(inst.args[0]) + ", " + operand_str(inst.args[1]);
      break;
    }
  }
  return s;
}

std::string render_module(const Program& p) {
  std::string out;
  for (const auto& [name, t] : p.types) {
    out += "type %" + name + " = " + type_to_string(t) + "\n";
  }
  if (!p.types.empty() && (!p.externs.empty() || !p.funcs.empty())) out += "\n";
  for (const auto& e : p.externs) {
    out += "extern @" + e.name + "(";
    for (size_t i = 0; i < e.params.size(); ++i) {
      if (i) out += ", ";
      out += type_to_string(e.params[i]);
    }
    out += ") -> " + type_to_string(e.ret);
    if (e.memory) out += " memory";
    out += "\n";
  }
  if (!p.externs.empty() && !p.funcs.empty()) out += "\n";
  for (size_t fi = 0; fi < p.funcs.size(); ++fi) {
    const Function& f = p.funcs[fi];
    if (fi) out += "\n";
    out += "func @" + f.name + "(";
    for (size_t i = 0; i < f.params.size(); ++i) {
      if (i) out += ", ";
      out += "%" + f.params[i].name + ": " + type_to_string(f.params[i].type);
    }
    out += ") -> " + type_to_string(f.ret) + " {\n";
    for (const auto& b : f.blocks) {
      out += b.label + ":\n";
      for (const auto& inst : b.insts) {
        out += "  " + render_instruction(inst) + "\n";
      }
    }
    out += "}\n";
  }
  return out;
}

}  // namespace mirfuzz
