#include "mirfuzz/synth.hpp"

#include <algorithm>
#include <set>

#include "mirfuzz/types.hpp"

namespace mirfuzz {

namespace {

ArgPlan plan_for_type(const TypeDesc& type, const Program& p, const SynthOptions& opts) {
  ArgPlan plan;
  plan.type = type;
  const TypeDesc* t = resolve_type(type, p.types);
  if (!t) t = &type;
  switch (t->kind) {
    case TypeDesc::Kind::Scalar:
      plan.kind = ArgPlan::Kind::ScalarFromBuffer;
      plan.size = static_cast<uint64_t>(t->width_bits / 8);
      break;
    case TypeDesc::Kind::Ptr: {
      plan.kind = ArgPlan::Kind::FreshAllocation;
      auto psize = type_size(t->pointee(), p.types);
      plan.size = std::max<uint64_t>(psize.value_or(0), opts.alloc_size);
      break;
    }
    case TypeDesc::Kind::Record:
    case TypeDesc::Kind::Array: {
      plan.kind = ArgPlan::Kind::RecursiveAggregate;
      plan.size = type_size(*t, p.types).value_or(0);
      if (t->is_record()) {
        for (const auto& field : t->sub) plan.children.push_back(plan_for_type(field, p, opts));
      } else {
        for (uint64_t i = 0; i < t->count; ++i)
          plan.children.push_back(plan_for_type(t->sub.front(), p, opts));
      }
      break;
    }
    case TypeDesc::Kind::FuncRef:
      plan.kind = ArgPlan::Kind::FuncRefTrap;
      plan.size = 8;
      break;
    default:
      // void / opaque parameters are degenerate; feed them 8 raw bytes
      plan.kind = ArgPlan::Kind::ScalarFromBuffer;
      plan.size = 8;
      break;
  }
  return plan;
}

}  // namespace

std::vector<ArgPlan> plan_arguments(const Function& f, const Program& p,
                                    const SynthOptions& opts) {
  std::vector<ArgPlan> plans;
  plans.reserve(f.params.size());
  for (const auto& prm : f.params) plans.push_back(plan_for_type(prm.type, p, opts));
  return plans;
}

namespace {

struct Derived {
  std::string root;  // originating parameter
  int width = 8;     // byte width of the value, when scalar-typed
};

// Values reachable from parameters via load/gep chains, to fixpoint.
std::map<std::string, Derived> derived_values(const Function& f, const Program& p) {
  std::map<std::string, Derived> derived;
  for (const auto& prm : f.params) {
    int w = prm.type.is_scalar() ? prm.type.width_bits / 8 : 8;
    derived[prm.name] = {prm.name, w};
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& b : f.blocks) {
      for (const auto& inst : b.insts) {
        if (inst.result.empty() || derived.count(inst.result)) continue;
        if (inst.op != Opcode::Load && inst.op != Opcode::Gep) continue;
        const Operand& base = inst.args[0];
        if (base.is_literal) continue;
        auto it = derived.find(base.value);
        if (it == derived.end()) continue;
        int w = 8;
        if (inst.op == Opcode::Load) {
          const TypeDesc* t = resolve_type(inst.type, p.types);
          if (t && t->is_scalar()) w = t->width_bits / 8;
        }
        derived[inst.result] = {it->second.root, w};
        changed = true;
      }
    }
  }
  return derived;
}

void add_candidate(ConstantTable& table, const std::string& param, HarvestedConst c) {
  auto& list = table.per_param[param];
  if (std::find(list.begin(), list.end(), c) == list.end()) list.push_back(c);
  if (std::find(table.all.begin(), table.all.end(), c) == table.all.end())
    table.all.push_back(c);
}

// Candidates from f's own cmp instructions, keyed by f's parameters.
ConstantTable harvest_local(const Function& f, const Program& p) {
  ConstantTable table;
  auto derived = derived_values(f, p);
  for (const auto& b : f.blocks) {
    for (const auto& inst : b.insts) {
      if (inst.op != Opcode::Cmp) continue;
      const Operand& a = inst.args[0];
      const Operand& c = inst.args[1];
      const Operand* value = nullptr;
      const Operand* literal = nullptr;
      if (!a.is_literal && c.is_literal) {
        value = &a;
        literal = &c;
      } else if (a.is_literal && !c.is_literal) {
        value = &c;
        literal = &a;
      } else {
        continue;
      }
      auto it = derived.find(value->value);
      if (it == derived.end()) continue;
      add_candidate(table, it->second.root, {literal->literal, it->second.width});
    }
  }
  return table;
}

}  // namespace

ConstantTable harvest_comparison_constants(const Function& f, const Program& p) {
  ConstantTable table = harvest_local(f, p);
  auto derived = derived_values(f, p);
  // Depth 1: a callee's candidates attach to the caller parameter that flows
  // into the corresponding call argument.
  for (const auto& b : f.blocks) {
    for (const auto& inst : b.insts) {
      if (inst.op != Opcode::Call || inst.indirect_call) continue;
      const Function* callee = p.find_func(inst.callee);
      if (!callee || callee->name == f.name) continue;
      ConstantTable inner = harvest_local(*callee, p);
      for (size_t i = 0; i < inst.args.size() && i < callee->params.size(); ++i) {
        const Operand& arg = inst.args[i];
        if (arg.is_literal) continue;
        auto dit = derived.find(arg.value);
        if (dit == derived.end()) continue;
        auto cit = inner.per_param.find(callee->params[i].name);
        if (cit == inner.per_param.end()) continue;
        for (const auto& c : cit->second) add_candidate(table, dit->second.root, c);
      }
    }
  }
  return table;
}

namespace {

// Incremental builder for the driver function body.
class DriverBuilder {
 public:
  explicit DriverBuilder(std::string name) {
    fn_.name = std::move(name);
    fn_.params = {{"buf", TypeDesc::ptr(TypeDesc::scalar(8))}, {"len", TypeDesc::scalar(64)}};
    fn_.ret = TypeDesc::scalar(32);
    cur_.label = "entry";
  }

  std::string fresh() { return "t" + std::to_string(tmp_++); }
  std::string fresh_label() { return "b" + std::to_string(blk_++); }

  void emit(Instruction inst) { cur_.insts.push_back(std::move(inst)); }

  Instruction call(const std::string& callee, std::vector<Operand> args,
                   std::string result = {}) {
    Instruction i;
    i.op = Opcode::Call;
    i.callee = callee;
    i.args = std::move(args);
    i.result = std::move(result);
    return i;
  }

  void store(TypeDesc type, Operand value, Operand ptr) {
    Instruction i;
    i.op = Opcode::Store;
    i.has_type = true;
    i.type = std::move(type);
    i.args = {std::move(value), std::move(ptr)};
    emit(std::move(i));
  }

  std::string load(TypeDesc type, Operand ptr) {
    Instruction i;
    i.op = Opcode::Load;
    i.result = fresh();
    i.has_type = true;
    i.type = std::move(type);
    i.args = {std::move(ptr)};
    std::string r = i.result;
    emit(std::move(i));
    return r;
  }

  std::string alloc(TypeDesc type) {
    Instruction i;
    i.op = Opcode::Alloc;
    i.result = fresh();
    i.has_type = true;
    i.type = std::move(type);
    std::string r = i.result;
    emit(std::move(i));
    return r;
  }

  std::string gep(TypeDesc base, Operand ptr, uint64_t index) {
    Instruction i;
    i.op = Opcode::Gep;
    i.result = fresh();
    i.has_type = true;
    i.type = std::move(base);
    i.args = {std::move(ptr), Operand::lit(index)};
    std::string r = i.result;
    emit(std::move(i));
    return r;
  }

  void branch(Operand cond, const std::string& yes, const std::string& no) {
    Instruction i;
    i.op = Opcode::Br;
    i.args = {std::move(cond)};
    i.labels = {yes, no};
    close(std::move(i));
  }

  void jump(const std::string& target) {
    Instruction i;
    i.op = Opcode::Jmp;
    i.labels = {target};
    close(std::move(i));
  }

  void start(const std::string& label) { cur_.label = label; }

  void ret(Operand value) {
    Instruction i;
    i.op = Opcode::Ret;
    i.args = {std::move(value)};
    close(std::move(i));
  }

  Function take() {
    fn_.blocks = std::move(blocks_);
    return std::move(fn_);
  }

 private:
  void close(Instruction terminator) {
    cur_.insts.push_back(std::move(terminator));
    blocks_.push_back(std::move(cur_));
    cur_ = Block{};
  }

  Function fn_;
  Block cur_;
  std::vector<Block> blocks_;
  int tmp_ = 0;
  int blk_ = 0;
};

// Initializes the scalar at *ptr: one decision byte per candidate constant,
// read up front; the first set low bit selects its constant, otherwise the
// value comes from raw buffer bytes.
void emit_scalar_init(DriverBuilder& b, const std::string& ptr, const TypeDesc& type,
                      uint64_t width, const std::vector<uint64_t>& candidates) {
  if (candidates.empty()) {
    std::string raw = b.fresh();
    b.emit(b.call("__read_scalar", {Operand::lit(width)}, raw));
    b.store(type, Operand::val(raw), Operand::val(ptr));
    return;
  }
  std::vector<std::string> decisions;
  for (size_t i = 0; i < candidates.size(); ++i) {
    std::string d = b.fresh();
    b.emit(b.call("__decide", {}, d));
    decisions.push_back(d);
  }
  std::string join = b.fresh_label();
  std::string raw_label = b.fresh_label();
  for (size_t i = 0; i < candidates.size(); ++i) {
    std::string use = b.fresh_label();
    std::string next = i + 1 < candidates.size() ? b.fresh_label() : raw_label;
    std::string c = b.fresh();
    Instruction cmp;
    cmp.op = Opcode::Cmp;
    cmp.cond = CmpCond::Ne;
    cmp.result = c;
    cmp.args = {Operand::val(decisions[i]), Operand::lit(0)};
    b.emit(std::move(cmp));
    b.branch(Operand::val(c), use, next);
    b.start(use);
    b.store(type, Operand::lit(candidates[i]), Operand::val(ptr));
    b.jump(join);
    b.start(next);
  }
  // raw_label block is current now
  std::string raw = b.fresh();
  b.emit(b.call("__read_scalar", {Operand::lit(width)}, raw));
  b.store(type, Operand::val(raw), Operand::val(ptr));
  b.jump(join);
  b.start(join);
}

void emit_aggregate_init(DriverBuilder& b, const Program& p, const std::string& base_ptr,
                         const TypeDesc& type, const ArgPlan& plan);

// Initializes the member at *ptr according to its plan node.
void emit_member_init(DriverBuilder& b, const Program& p, const std::string& ptr,
                      const TypeDesc& member_type, const ArgPlan& plan) {
  switch (plan.kind) {
    case ArgPlan::Kind::ScalarFromBuffer:
      emit_scalar_init(b, ptr, member_type, plan.size, plan.candidates);
      break;
    case ArgPlan::Kind::FreshAllocation: {
      std::string a = b.fresh();
      b.emit(b.call("__alloc_unassigned", {Operand::lit(plan.size)}, a));
      b.store(member_type, Operand::val(a), Operand::val(ptr));
      break;
    }
    case ArgPlan::Kind::FuncRefTrap: {
      std::string t = b.fresh();
      b.emit(b.call("__trap_fnref", {}, t));
      b.store(member_type, Operand::val(t), Operand::val(ptr));
      break;
    }
    case ArgPlan::Kind::RecursiveAggregate:
      emit_aggregate_init(b, p, ptr, member_type, plan);
      break;
  }
}

void emit_aggregate_init(DriverBuilder& b, const Program& p, const std::string& base_ptr,
                         const TypeDesc& type, const ArgPlan& plan) {
  const TypeDesc* t = resolve_type(type, p.types);
  if (!t) return;
  for (size_t i = 0; i < plan.children.size(); ++i) {
    const TypeDesc& member = t->is_record() ? t->sub[i] : t->sub.front();
    std::string ptr = b.gep(type, Operand::val(base_ptr), i);
    emit_member_init(b, p, ptr, member, plan.children[i]);
  }
}

// Materializes one argument value per its plan; returns the SSA value name.
std::string emit_argument(DriverBuilder& b, const Program& p, const TypeDesc& type,
                          const ArgPlan& plan) {
  switch (plan.kind) {
    case ArgPlan::Kind::ScalarFromBuffer: {
      TypeDesc slot_type = resolve_type(type, p.types) && resolve_type(type, p.types)->is_scalar()
                               ? *resolve_type(type, p.types)
                               : TypeDesc::scalar(64);
      std::string slot = b.alloc(slot_type);
      emit_scalar_init(b, slot, slot_type, plan.size, plan.candidates);
      return b.load(slot_type, Operand::val(slot));
    }
    case ArgPlan::Kind::FreshAllocation: {
      std::string a = b.fresh();
      b.emit(b.call("__alloc_unassigned", {Operand::lit(plan.size)}, a));
      return a;
    }
    case ArgPlan::Kind::FuncRefTrap: {
      std::string t = b.fresh();
      b.emit(b.call("__trap_fnref", {}, t));
      return t;
    }
    case ArgPlan::Kind::RecursiveAggregate: {
      std::string base = b.alloc(type);
      emit_aggregate_init(b, p, base, type, plan);
      return base;
    }
  }
  return {};
}

void declare_intrinsics(Program& p) {
  auto ensure = [&](const char* name, std::vector<TypeDesc> params, TypeDesc ret) {
    if (!p.find_extern(name)) p.externs.push_back({name, std::move(params), std::move(ret), false});
  };
  ensure("__read_scalar", {TypeDesc::scalar(64)}, TypeDesc::scalar(64));
  ensure("__decide", {}, TypeDesc::scalar(64));
  ensure("__alloc_unassigned", {TypeDesc::scalar(64)}, TypeDesc::opaque_ptr());
  ensure("__trap_fnref", {}, TypeDesc::opaque_ptr());
  ensure("__epilogue", {}, TypeDesc::void_type());
}

SynthResult synthesize(const Program& p, const std::vector<std::string>& entries,
                       const SynthOptions& opts) {
  for (const auto& e : entries) {
    if (p.find_func(e)) continue;
    if (p.find_extern(e)) throw SynthError("entry " + e + " is external");
    throw SynthError("entry " + e + " not found");
  }

  DriverSpec spec;
  spec.entries = entries;
  spec.driver_name = "__driver_";
  for (size_t i = 0; i < entries.size(); ++i) {
    if (i) spec.driver_name += "__";
    spec.driver_name += entries[i];
  }

  DriverBuilder b(spec.driver_name);
  for (const auto& entry : entries) {
    const Function& f = *p.find_func(entry);
    std::vector<ArgPlan> plans = plan_arguments(f, p, opts);
    if (opts.harvest) {
      ConstantTable table = harvest_comparison_constants(f, p);
      for (size_t i = 0; i < plans.size(); ++i) {
        if (plans[i].kind != ArgPlan::Kind::ScalarFromBuffer) continue;
        auto it = table.per_param.find(f.params[i].name);
        if (it == table.per_param.end()) continue;
        for (const auto& c : it->second) plans[i].candidates.push_back(c.value);
      }
      for (const auto& c : table.all) {
        if (std::find(spec.constants.begin(), spec.constants.end(), c) == spec.constants.end())
          spec.constants.push_back(c);
      }
    }
    std::vector<Operand> call_args;
    for (size_t i = 0; i < plans.size(); ++i)
      call_args.push_back(Operand::val(emit_argument(b, p, f.params[i].type, plans[i])));
    Instruction call = b.call(entry, std::move(call_args));
    if (!f.ret.is_void()) call.result = b.fresh();
    b.emit(std::move(call));
    spec.plans.push_back(std::move(plans));
  }
  b.ret(Operand::lit(0));

  SynthResult result;
  result.program = p;
  declare_intrinsics(result.program);
  Function driver = b.take();
  insert_leak_guard(driver);
  result.program.funcs.push_back(std::move(driver));
  result.spec = std::move(spec);
  return result;
}

}  // namespace

SynthResult synthesize_driver(const Program& p, const std::string& entry,
                              const SynthOptions& opts) {
  return synthesize(p, {entry}, opts);
}

SynthResult synthesize_composite_driver(const Program& p,
                                        const std::vector<std::string>& entries,
                                        const SynthOptions& opts) {
  if (entries.size() < 2) throw SynthError("composite requires >= 2 entries");
  return synthesize(p, entries, opts);
}

void insert_leak_guard(Function& driver) {
  for (auto& b : driver.blocks) {
    if (b.insts.empty()) continue;
    Instruction& term = b.insts.back();
    if (term.op != Opcode::Ret && term.op != Opcode::Trap) continue;
    if (b.insts.size() >= 2) {
      const Instruction& prev = b.insts[b.insts.size() - 2];
      if (prev.op == Opcode::Call && prev.callee == "__epilogue") continue;
    }
    Instruction epi;
    epi.op = Opcode::Call;
    epi.callee = "__epilogue";
    b.insts.insert(b.insts.end() - 1, std::move(epi));
  }
}

std::vector<std::string> reachable_functions(const Program& p, const std::string& root) {
  std::vector<std::string> order;
  std::set<std::string> seen;
  std::vector<std::string> work{root};
  while (!work.empty()) {
    std::string name = work.back();
    work.pop_back();
    if (!seen.insert(name).second) continue;
    const Function* f = p.find_func(name);
    if (!f) continue;
    order.push_back(name);
    for (const auto& b : f->blocks) {
      for (const auto& inst : b.insts) {
        if (inst.op == Opcode::Call && !inst.indirect_call) work.push_back(inst.callee);
      }
    }
  }
  std::sort(order.begin(), order.end());
  return order;
}

namespace {

bool same_operand(const Operand& a, const Operand& b) { return a == b; }

std::vector<Instruction> instrument_block(const std::vector<Instruction>& in) {
  std::vector<Instruction> out;
  auto back_is = [&](Opcode op, const Operand& a0, const Operand* a1, const TypeDesc* type) {
    if (out.empty()) return false;
    const Instruction& prev = out.back();
    if (prev.op != op) return false;
    if (!same_operand(prev.args[0], a0)) return false;
    if (a1 && !same_operand(prev.args[1], *a1)) return false;
    if (type && !(prev.type == *type)) return false;
    return true;
  };
  auto make_hook = [](Opcode op, TypeDesc type, Operand ptr) {
    Instruction h;
    h.op = op;
    h.has_type = true;
    h.type = std::move(type);
    h.args = {std::move(ptr)};
    return h;
  };
  auto make_range = [](Opcode op, Operand ptr, Operand len) {
    Instruction h;
    h.op = op;
    h.args = {std::move(ptr), std::move(len)};
    return h;
  };

  for (size_t i = 0; i < in.size(); ++i) {
    const Instruction& inst = in[i];
    switch (inst.op) {
      case Opcode::Load:
        if (!back_is(Opcode::LoadHook, inst.args[0], nullptr, &inst.type))
          out.push_back(make_hook(Opcode::LoadHook, inst.type, inst.args[0]));
        out.push_back(inst);
        break;
      case Opcode::Store: {
        out.push_back(inst);
        bool next_is_hook = i + 1 < in.size() && in[i + 1].op == Opcode::StoreHook &&
                            same_operand(in[i + 1].args[0], inst.args[1]) &&
                            in[i + 1].type == inst.type;
        if (next_is_hook) {
          out.push_back(in[++i]);
        } else {
          out.push_back(make_hook(Opcode::StoreHook, inst.type, inst.args[1]));
        }
        break;
      }
      case Opcode::Memcpy: {
        if (!back_is(Opcode::RangeLoad, inst.args[1], &inst.args[2], nullptr))
          out.push_back(make_range(Opcode::RangeLoad, inst.args[1], inst.args[2]));
        out.push_back(inst);
        bool next_is_hook = i + 1 < in.size() && in[i + 1].op == Opcode::RangeStore &&
                            same_operand(in[i + 1].args[0], inst.args[0]) &&
                            same_operand(in[i + 1].args[1], inst.args[2]);
        if (next_is_hook)
          out.push_back(in[++i]);
        else
          out.push_back(make_range(Opcode::RangeStore, inst.args[0], inst.args[2]));
        break;
      }
      case Opcode::Memset: {
        out.push_back(inst);
        bool next_is_hook = i + 1 < in.size() && in[i + 1].op == Opcode::RangeStore &&
                            same_operand(in[i + 1].args[0], inst.args[0]) &&
                            same_operand(in[i + 1].args[1], inst.args[2]);
        if (next_is_hook)
          out.push_back(in[++i]);
        else
          out.push_back(make_range(Opcode::RangeStore, inst.args[0], inst.args[2]));
        break;
      }
      default:
        out.push_back(inst);
        break;
    }
  }
  return out;
}

}  // namespace

Program instrument_lazy_store(const Program& p, const std::string& root) {
  Program out = p;
  for (const auto& name : reachable_functions(p, root)) {
    Function* f = out.find_func(name);
    if (!f) continue;
    for (auto& b : f->blocks) b.insts = instrument_block(b.insts);
  }
  return out;
}

HookCounts count_hooks(const Program& p, const std::vector<std::string>& funcs) {
  HookCounts c;
  for (const auto& name : funcs) {
    const Function* f = p.find_func(name);
    if (!f) continue;
    for (const auto& b : f->blocks) {
      for (const auto& inst : b.insts) {
        switch (inst.op) {
          case Opcode::Load: ++c.loads; break;
          case Opcode::Store: ++c.stores; break;
          case Opcode::LoadHook: ++c.load_hooks; break;
          case Opcode::StoreHook: ++c.store_hooks; break;
          case Opcode::Memcpy: ++c.memcpys; break;
          case Opcode::Memset: ++c.memsets; break;
          case Opcode::RangeLoad: ++c.range_loads; break;
          case Opcode::RangeStore: ++c.range_stores; break;
          default: break;
        }
      }
    }
  }
  return c;
}

std::string emit_pseudo_source(const DriverSpec& spec, const Program& p) {
  std::string out;
  out += "int " + spec.driver_name + "(const uint8_t *buf, size_t len) {\n";
  int v = 0;
  for (size_t e = 0; e < spec.entries.size(); ++e) {
    const std::string& entry = spec.entries[e];
    const Function* f = p.find_func(entry);
    std::vector<std::string> names;
    for (size_t i = 0; i < spec.plans[e].size(); ++i) {
      const ArgPlan& plan = spec.plans[e][i];
      std::string name = "v" + std::to_string(v++);
      names.push_back(name);
      std::string type_str = f ? type_to_string(f->params[i].type) : "?";
      switch (plan.kind) {
        case ArgPlan::Kind::ScalarFromBuffer:
          out += "  " + type_str + " " + name + " = read_bytes(" +
                 std::to_string(plan.size) + ")";
          if (!plan.candidates.empty()) {
            out += "  /* or one of:";
            for (uint64_t c : plan.candidates) out += " " + std::to_string(c);
            out += " */";
          }
          out += ";\n";
          break;
        case ArgPlan::Kind::FreshAllocation:
          out += "  " + type_str + " " + name + " = alloc_unassigned(" +
                 std::to_string(plan.size) + ");\n";
          break;
        case ArgPlan::Kind::FuncRefTrap:
          out += "  " + type_str + " " + name + " = trap_function_reference();\n";
          break;
        case ArgPlan::Kind::RecursiveAggregate:
          out += "  " + type_str + " " + name + " = build_aggregate(/* " +
                 std::to_string(plan.children.size()) + " members, recursive */);\n";
          break;
      }
    }
    out += "  " + entry + "(";
    for (size_t i = 0; i < names.size(); ++i) {
      if (i) out += ", ";
      out += names[i];
    }
    out += ");\n";
  }
  out += "  free_remaining_allocations();\n";
  out += "  return 0;\n}\n";
  return out;
}

}  // namespace mirfuzz
