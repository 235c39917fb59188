#include "mirfuzz/ir.hpp"

#include <set>
#include <unordered_map>
#include <unordered_set>

namespace mirfuzz {

// Structural equality; source line numbers are not part of program identity.
bool Instruction::operator==(const Instruction& o) const {
  return op == o.op && result == o.result && has_type == o.has_type &&
         (!has_type || type == o.type) && args == o.args && callee == o.callee &&
         indirect_call == o.indirect_call && cond == o.cond && labels == o.labels;
}

const Function* Program::find_func(std::string_view name) const {
  for (const auto& f : funcs) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

Function* Program::find_func(std::string_view name) {
  for (auto& f : funcs) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

const ExternDecl* Program::find_extern(std::string_view name) const {
  for (const auto& e : externs) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

namespace {

class Validator {
 public:
  explicit Validator(const Program& p) : p_(p) {}

  std::vector<Diagnostic> run() {
    check_type_table();
    check_externs();
    for (const auto& f : p_.funcs) check_function(f);
    return std::move(diags_);
  }

 private:
  void error(int line, const std::string& msg) { diags_.push_back({line, 0, msg}); }

  void check_type_well_formed(const TypeDesc& t, int line) {
    switch (t.kind) {
      case TypeDesc::Kind::Scalar:
        if (t.width_bits != 8 && t.width_bits != 16 && t.width_bits != 32 &&
            t.width_bits != 64) {
          error(line, "invalid scalar width i" + std::to_string(t.width_bits));
        }
        break;
      case TypeDesc::Kind::Record:
        if (t.sub.empty()) error(line, "record must have at least one field");
        for (const auto& f : t.sub) check_type_well_formed(f, line);
        break;
      case TypeDesc::Kind::Named:
        if (!lookup_type(p_.types, t.name))
          error(line, "unresolved type " + t.name);
        break;
      case TypeDesc::Kind::Ptr:
      case TypeDesc::Kind::Array:
      case TypeDesc::Kind::FuncRef:
        for (const auto& s : t.sub) check_type_well_formed(s, line);
        break;
      default:
        break;
    }
  }

  // Detects cycles among named types that do not pass through Ptr.
  bool type_cycle(const TypeDesc& t, std::set<std::string>& path) {
    switch (t.kind) {
      case TypeDesc::Kind::Named: {
        if (path.count(t.name)) return true;
        const TypeDesc* resolved = lookup_type(p_.types, t.name);
        if (!resolved) return false;
        path.insert(t.name);
        bool cyc = type_cycle(*resolved, path);
        path.erase(t.name);
        return cyc;
      }
      case TypeDesc::Kind::Record:
      case TypeDesc::Kind::Array:
        for (const auto& s : t.sub) {
          if (type_cycle(s, path)) return true;
        }
        return false;
      default:
        return false;  // Ptr / FuncRef break the cycle; leaves are finite
    }
  }

  void check_type_table() {
    std::unordered_set<std::string> seen;
    for (const auto& [name, t] : p_.types) {
      if (!seen.insert(name).second) error(0, "duplicate type " + name);
      if (t.kind != TypeDesc::Kind::Record) {
        error(0, "named type " + name + " must be a record");
        continue;
      }
      check_type_well_formed(t, 0);
      std::set<std::string> path{name};
      if (type_cycle(t, path)) error(0, "type cycle through " + name + " without pointer indirection");
    }
  }

  void check_externs() {
    std::unordered_set<std::string> seen;
    for (const auto& e : p_.externs) {
      if (!seen.insert(e.name).second) error(0, "duplicate extern " + e.name);
      for (const auto& t : e.params) check_type_well_formed(t, 0);
      check_type_well_formed(e.ret, 0);
    }
  }

  void check_callee(const Instruction& inst) {
    if (inst.indirect_call) return;  // indirect targets are values
    if (p_.find_func(inst.callee) || p_.find_extern(inst.callee)) return;
    error(inst.line, "unresolved function " + inst.callee);
  }

  void check_function(const Function& f) {
    if (!func_names_.insert(f.name).second) {
      error(0, "duplicate function " + f.name);
      return;
    }
    if (p_.find_extern(f.name)) error(0, "function " + f.name + " shadows an extern");
    if (f.blocks.empty()) {
      error(0, "function " + f.name + " has no blocks");
      return;
    }
    check_type_well_formed(f.ret, 0);

    std::unordered_set<std::string> labels;
    for (const auto& b : f.blocks) {
      if (!labels.insert(b.label).second)
        error(0, "duplicate label " + b.label + " in " + f.name);
    }

    std::unordered_set<std::string> defs;
    for (const auto& prm : f.params) {
      check_type_well_formed(prm.type, 0);
      if (!defs.insert(prm.name).second)
        error(0, "duplicate parameter " + prm.name + " in " + f.name);
    }

    // SSA: every result defined exactly once per function.
    for (const auto& b : f.blocks) {
      for (const auto& inst : b.insts) {
        if (!inst.result.empty() && !defs.insert(inst.result).second)
          error(inst.line, "duplicate SSA definition " + inst.result + " in " + f.name);
      }
    }

    for (const auto& b : f.blocks) {
      if (b.insts.empty()) {
        error(0, "block " + b.label + " in " + f.name + " is empty");
        continue;
      }
      for (size_t i = 0; i < b.insts.size(); ++i) {
        const Instruction& inst = b.insts[i];
        bool last = i + 1 == b.insts.size();
        if (last && !inst.is_terminator())
          error(inst.line, "block " + b.label + " in " + f.name + " lacks a terminator");
        if (!last && inst.is_terminator())
          error(inst.line, "terminator before end of block " + b.label + " in " + f.name);
        check_instruction(f, inst, labels, defs);
      }
    }
  }

  void check_instruction(const Function& f, const Instruction& inst,
                         const std::unordered_set<std::string>& labels,
                         const std::unordered_set<std::string>& defs) {
    if (inst.has_type) check_type_well_formed(inst.type, inst.line);
    for (const auto& a : inst.args) {
      if (!a.is_literal && !defs.count(a.value))
        error(inst.line, "unresolved value " + a.value + " in " + f.name);
    }
    for (const auto& l : inst.labels) {
      if (!labels.count(l)) error(inst.line, "unresolved label " + l + " in " + f.name);
    }
    switch (inst.op) {
      case Opcode::Call:
        check_callee(inst);
        break;
      case Opcode::Load:
      case Opcode::Store:
      case Opcode::Alloc:
      case Opcode::LoadHook:
      case Opcode::StoreHook:
        if (!type_size(inst.type, p_.types))
          error(inst.line, "unsized type in " + f.name);
        break;
      case Opcode::Gep: {
        const TypeDesc* base = resolve_type(inst.type, p_.types);
        if (!base || (!base->is_record() && !base->is_array())) {
          error(inst.line, "gep base must be a record or array");
          break;
        }
        const Operand& idx = inst.args[1];
        if (base->is_record()) {
          if (!idx.is_literal)
            error(inst.line, "gep field index into a record must be a literal");
          else if (idx.literal >= base->sub.size())
            error(inst.line, "gep field index out of range");
        }
        break;
      }
      default:
        break;
    }
  }

  const Program& p_;
  std::vector<Diagnostic> diags_;
  std::unordered_set<std::string> func_names_;
};

}  // namespace

std::vector<Diagnostic> validate(const Program& p) { return Validator(p).run(); }

}  // namespace mirfuzz
