#include "mirfuzz/runtime.hpp"

#include <algorithm>
#include <unordered_map>

namespace mirfuzz {

const char* crash_kind_name(CrashKind k) {
  switch (k) {
    case CrashKind::None: return "None";
    case CrashKind::OutOfBounds: return "OutOfBounds";
    case CrashKind::UseAfterFree: return "UseAfterFree";
    case CrashKind::DoubleFree: return "DoubleFree";
    case CrashKind::Trap: return "Trap";
    case CrashKind::InvalidDriver: return "InvalidDriver";
    case CrashKind::StepLimit: return "StepLimit";
  }
  return "?";
}

uint64_t ShadowHeap::allocate(uint64_t size, AllocOrigin origin, bool assigned) {
  uint64_t handle = next_handle_++;
  Allocation a;
  a.handle = handle;
  a.bytes.assign(size, 0);
  a.assigned.assign(size, assigned);
  a.origin = origin;
  uint64_t base = a.base();
  allocs_.emplace(handle, std::move(a));
  return base;
}

Allocation* ShadowHeap::find(uint64_t addr) {
  auto it = allocs_.find(addr >> kHandleShift);
  return it == allocs_.end() ? nullptr : &it->second;
}

const Allocation* ShadowHeap::find(uint64_t addr) const {
  auto it = allocs_.find(addr >> kHandleShift);
  return it == allocs_.end() ? nullptr : &it->second;
}

std::vector<uint64_t> ShadowHeap::live_handles(AllocOrigin origin) const {
  std::vector<uint64_t> out;
  for (const auto& [h, a] : allocs_) {
    if (!a.freed && a.origin == origin) out.push_back(h);
  }
  return out;
}

uint64_t ShadowHeap::live_count(AllocOrigin origin) const {
  return live_handles(origin).size();
}

void ShadowHeap::free_all_live() {
  for (auto& [h, a] : allocs_) a.freed = true;
}

uint64_t FuzzInput::read_le(int width_bytes) {
  uint64_t v = 0;
  for (int i = 0; i < width_bytes; ++i) {
    if (cursor < data.size()) {
      v |= static_cast<uint64_t>(data[cursor]) << (8 * i);
      ++cursor;
    } else {
      exhausted = true;  // zero byte, nothing consumed
    }
  }
  return v;
}

uint64_t path_signature(std::span<const uint32_t> trace) {
  uint64_t h = 0xcbf29ce484222325ull;
  size_t n = std::min(trace.size(), kPathSignatureBlocks);
  for (size_t i = 0; i < n; ++i) {
    uint32_t b = trace[i];
    for (int k = 0; k < 4; ++k) {
      h ^= (b >> (8 * k)) & 0xFF;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

Interpreter::Interpreter(const Program& p) : prog_(p) {
  for (const auto& f : p.funcs) {
    FuncInfo info;
    info.fn = &f;
    info.block_base = total_blocks_;
    for (size_t i = 0; i < f.blocks.size(); ++i) info.label_to_block[f.blocks[i].label] = i;
    total_blocks_ += static_cast<uint32_t>(f.blocks.size());
    funcs_.emplace(f.name, std::move(info));
  }
}

uint32_t Interpreter::block_id(const std::string& func, size_t block_index) const {
  auto it = funcs_.find(func);
  if (it == funcs_.end()) return 0;
  return it->second.block_base + static_cast<uint32_t>(block_index);
}

namespace {

struct CrashError {
  CrashKind kind;
};

uint64_t truncate_to(uint64_t v, uint64_t size_bytes) {
  if (size_bytes >= 8) return v;
  return v & ((1ull << (8 * size_bytes)) - 1);
}

}  // namespace

class ExecState {
 public:
  ExecState(const Interpreter& interp, const Program& prog, std::span<const uint8_t> input,
            const RunOptions& opts)
      : interp_(interp), prog_(prog), opts_(opts) {
    input_.data = input;
  }

  ExecResult execute(const std::string& driver) {
    auto it = interp_.funcs_.find(driver);
    if (it == interp_.funcs_.end()) {
      result_.crash = CrashKind::InvalidDriver;
      return finish();
    }
    const Function& fn = *it->second.fn;
    std::vector<uint64_t> args;
    if (!fn.params.empty()) {
      // The only externally runnable shape is the driver interface
      // (buf: ptr, len: i64); everything else must be invoked from IR.
      if (fn.params.size() == 2 && fn.params[0].type.is_ptr() &&
          fn.params[1].type.is_scalar()) {
        uint64_t buf = heap_.allocate(input_.data.size(), AllocOrigin::Driver, true);
        Allocation* a = heap_.find(buf);
        std::copy(input_.data.begin(), input_.data.end(), a->bytes.begin());
        args = {buf, input_.data.size()};
      } else {
        result_.crash = CrashKind::InvalidDriver;
        return finish();
      }
    }
    root_fn_ = &fn;
    try {
      run_function(it->second, args, 0);
      result_.ok = true;
    } catch (const CrashError& e) {
      result_.crash = e.kind;
      result_.crash_block = current_block_;
    }
    return finish();
  }

 private:
  ExecResult finish() {
    result_.path_hash = path_signature(result_.trace);
    result_.consumed = input_.consumed();
    result_.exhausted = input_.exhausted;
    result_.live_program_after = heap_.live_count(AllocOrigin::Program);
    if (!epilogue_ran_) result_.live_leaks_pre_epilogue = result_.live_program_after;
    return std::move(result_);
  }

  using Env = std::unordered_map<std::string, uint64_t>;

  uint64_t eval(const Operand& o, const Env& env) {
    if (o.is_literal) return o.literal;
    auto it = env.find(o.value);
    return it == env.end() ? 0 : it->second;
  }

  void step() {
    if (++result_.steps > opts_.limits.max_steps) throw CrashError{CrashKind::StepLimit};
  }

  uint64_t sized(const TypeDesc& t) {
    auto s = type_size(t, prog_.types);
    if (!s) throw CrashError{CrashKind::InvalidDriver};
    return *s;
  }

  // Bounds- and lifetime-checks a [addr, addr+size) access.
  Allocation& access(uint64_t addr, uint64_t size) {
    Allocation* a = heap_.find(addr);
    if (!a) throw CrashError{CrashKind::OutOfBounds};
    if (a->freed) throw CrashError{CrashKind::UseAfterFree};
    uint64_t off = addr & kOffsetMask;
    if (off + size > a->size()) throw CrashError{CrashKind::OutOfBounds};
    return *a;
  }

  bool range_assigned(const Allocation& a, uint64_t off, uint64_t size) const {
    for (uint64_t i = 0; i < size; ++i) {
      if (!a.assigned[off + i]) return false;
    }
    return true;
  }

  void mark_assigned(Allocation& a, uint64_t off, uint64_t size) {
    for (uint64_t i = 0; i < size; ++i) a.assigned[off + i] = true;
  }

  uint64_t read_mem(const Allocation& a, uint64_t off, uint64_t size) const {
    uint64_t v = 0;
    for (uint64_t i = 0; i < std::min<uint64_t>(size, 8); ++i)
      v |= static_cast<uint64_t>(a.bytes[off + i]) << (8 * i);
    return v;
  }

  void write_mem(Allocation& a, uint64_t off, uint64_t size, uint64_t v) {
    for (uint64_t i = 0; i < std::min<uint64_t>(size, 8); ++i)
      a.bytes[off + i] = static_cast<uint8_t>(v >> (8 * i));
  }

  void record_lazy(size_t cursor, int width, uint64_t value) {
    if (opts_.record_lazy) result_.lazy_events.push_back({cursor, width, value});
  }

  // Alg.-3 LoadInstHook semantics: if the accessed range is not fully
  // assigned, materialize a value of the dereferenced type (scalars from the
  // input buffer, pointers as fresh unassigned allocations, aggregates
  // member-recursively), then mark the range assigned.
  void materialize(uint64_t addr, const TypeDesc& type) {
    const TypeDesc* t = resolve_type(type, prog_.types);
    if (!t) throw CrashError{CrashKind::InvalidDriver};
    uint64_t size = sized(*t);
    Allocation& a = access(addr, size);
    uint64_t off = addr & kOffsetMask;
    if (range_assigned(a, off, size)) return;
    switch (t->kind) {
      case TypeDesc::Kind::Scalar: {
        size_t cursor = input_.cursor;
        uint64_t v = input_.read_le(static_cast<int>(size));
        write_mem(a, off, size, v);
        record_lazy(cursor, static_cast<int>(size), v);
        break;
      }
      case TypeDesc::Kind::Ptr: {
        uint64_t fresh = fresh_allocation(t->pointee());
        write_mem(a, off, 8, fresh);
        break;
      }
      case TypeDesc::Kind::FuncRef:
        write_mem(a, off, 8, kTrapFuncRef);
        break;
      case TypeDesc::Kind::Record: {
        auto offsets = record_field_offsets(*t, prog_.types);
        if (!offsets) throw CrashError{CrashKind::InvalidDriver};
        for (size_t i = 0; i < t->sub.size(); ++i)
          materialize(addr + (*offsets)[i], t->sub[i]);
        break;
      }
      case TypeDesc::Kind::Array: {
        uint64_t esz = sized(t->sub.front());
        for (uint64_t i = 0; i < t->count; ++i)
          materialize(addr + i * esz, t->sub.front());
        break;
      }
      default:
        break;
    }
    // Re-find: recursion may have allocated and invalidated nothing in the
    // ledger map for this handle, but padding bytes still need marking.
    mark_assigned(*heap_.find(addr), off, size);
  }

  uint64_t fresh_allocation(const TypeDesc& pointee) {
    auto psize = type_size(pointee, prog_.types);
    uint64_t size = std::max<uint64_t>(psize.value_or(0), opts_.alloc_size);
    return heap_.allocate(size, AllocOrigin::Driver, false);
  }

  void enter_block(const Interpreter::FuncInfo& fi, size_t block_index) {
    current_block_ = fi.block_base + static_cast<uint32_t>(block_index);
    result_.blocks.insert(current_block_);
    if (result_.trace.size() < kPathSignatureBlocks) result_.trace.push_back(current_block_);
  }

  uint64_t run_function(const Interpreter::FuncInfo& fi, const std::vector<uint64_t>& args,
                        int depth) {
    if (depth > opts_.limits.max_call_depth) throw CrashError{CrashKind::StepLimit};
    const Function& fn = *fi.fn;
    Env env;
    for (size_t i = 0; i < fn.params.size() && i < args.size(); ++i)
      env[fn.params[i].name] = args[i];

    size_t block = 0;
    while (true) {
      enter_block(fi, block);
      const Block& b = fn.blocks[block];
      for (const auto& inst : b.insts) {
        step();
        switch (inst.op) {
          case Opcode::Load: {
            uint64_t size = sized(inst.type);
            uint64_t addr = eval(inst.args[0], env);
            Allocation& a = access(addr, size);
            uint64_t off = addr & kOffsetMask;
            if (!range_assigned(a, off, size)) ++result_.unassigned_reads;
            const TypeDesc* t = resolve_type(inst.type, prog_.types);
            if (t && t->is_aggregate())
              env[inst.result] = addr;  // aggregates are addressed storage
            else
              env[inst.result] = read_mem(a, off, size);
            break;
          }
          case Opcode::Store: {
            uint64_t size = sized(inst.type);
            uint64_t addr = eval(inst.args[1], env);
            Allocation& dst = access(addr, size);
            uint64_t doff = addr & kOffsetMask;
            const TypeDesc* t = resolve_type(inst.type, prog_.types);
            if (t && t->is_aggregate()) {
              uint64_t src_addr = eval(inst.args[0], env);
              Allocation& src = access(src_addr, size);
              uint64_t soff = src_addr & kOffsetMask;
              if (!range_assigned(src, soff, size)) ++result_.unassigned_reads;
              Allocation& dst2 = access(addr, size);
              for (uint64_t i = 0; i < size; ++i)
                dst2.bytes[doff + i] = src.bytes[soff + i];
              mark_assigned(dst2, doff, size);
            } else {
              write_mem(dst, doff, size, truncate_to(eval(inst.args[0], env), size));
              mark_assigned(dst, doff, size);
            }
            break;
          }
          case Opcode::Gep: {
            const TypeDesc* base = resolve_type(inst.type, prog_.types);
            if (!base) throw CrashError{CrashKind::InvalidDriver};
            uint64_t addr = eval(inst.args[0], env);
            uint64_t idx = eval(inst.args[1], env);
            uint64_t offset = 0;
            if (base->is_record()) {
              auto offsets = record_field_offsets(*base, prog_.types);
              if (!offsets || idx >= offsets->size())
                throw CrashError{CrashKind::OutOfBounds};
              offset = (*offsets)[idx];
            } else {
              offset = idx * sized(base->sub.front());
            }
            env[inst.result] = addr + offset;
            break;
          }
          case Opcode::Call: {
            uint64_t v = do_call(inst, env, depth);
            if (!inst.result.empty()) env[inst.result] = v;
            break;
          }
          case Opcode::Cmp: {
            uint64_t a = eval(inst.args[0], env);
            uint64_t bv = eval(inst.args[1], env);
            bool r = false;
            switch (inst.cond) {
              case CmpCond::Eq: r = a == bv; break;
              case CmpCond::Ne: r = a != bv; break;
              case CmpCond::Lt: r = a < bv; break;
              case CmpCond::Le: r = a <= bv; break;
              case CmpCond::Gt: r = a > bv; break;
              case CmpCond::Ge: r = a >= bv; break;
            }
            env[inst.result] = r ? 1 : 0;
            break;
          }
          case Opcode::Br: {
            size_t target = fi.label_to_block.at(
                eval(inst.args[0], env) != 0 ? inst.labels[0] : inst.labels[1]);
            block = target;
            goto next_block;
          }
          case Opcode::Jmp:
            block = fi.label_to_block.at(inst.labels[0]);
            goto next_block;
          case Opcode::Ret:
            return inst.args.empty() ? 0 : eval(inst.args[0], env);
          case Opcode::Const: {
            const TypeDesc* t = resolve_type(inst.type, prog_.types);
            uint64_t v = inst.args[0].literal;
            if (t && t->is_scalar()) v = truncate_to(v, static_cast<uint64_t>(t->width_bits / 8));
            env[inst.result] = v;
            break;
          }
          case Opcode::Add:
            env[inst.result] = eval(inst.args[0], env) + eval(inst.args[1], env);
            break;
          case Opcode::Sub:
            env[inst.result] = eval(inst.args[0], env) - eval(inst.args[1], env);
            break;
          case Opcode::Mul:
            env[inst.result] = eval(inst.args[0], env) * eval(inst.args[1], env);
            break;
          case Opcode::Alloc: {
            uint64_t size = sized(inst.type);
            AllocOrigin origin =
                fi.fn == root_fn_ ? AllocOrigin::Driver : AllocOrigin::Program;
            env[inst.result] = heap_.allocate(size, origin, false);
            break;
          }
          case Opcode::Free: {
            uint64_t addr = eval(inst.args[0], env);
            if ((addr & kOffsetMask) != 0) throw CrashError{CrashKind::OutOfBounds};
            Allocation* a = heap_.find(addr);
            if (!a) throw CrashError{CrashKind::OutOfBounds};
            if (a->freed) throw CrashError{CrashKind::DoubleFree};
            a->freed = true;
            break;
          }
          case Opcode::Memcpy: {
            uint64_t n = eval(inst.args[2], env);
            uint64_t dst_addr = eval(inst.args[0], env);
            uint64_t src_addr = eval(inst.args[1], env);
            Allocation& src = access(src_addr, n);
            uint64_t soff = src_addr & kOffsetMask;
            if (!range_assigned(src, soff, n)) ++result_.unassigned_reads;
            Allocation& dst = access(dst_addr, n);
            uint64_t doff = dst_addr & kOffsetMask;
            // src may alias dst; copy via a temporary.
            std::vector<uint8_t> tmp(src.bytes.begin() + soff, src.bytes.begin() + soff + n);
            std::copy(tmp.begin(), tmp.end(), dst.bytes.begin() + doff);
            mark_assigned(dst, doff, n);
            break;
          }
          case Opcode::Memset: {
            uint64_t n = eval(inst.args[2], env);
            uint64_t addr = eval(inst.args[0], env);
            uint8_t v = static_cast<uint8_t>(eval(inst.args[1], env));
            Allocation& a = access(addr, n);
            uint64_t off = addr & kOffsetMask;
            std::fill(a.bytes.begin() + off, a.bytes.begin() + off + n, v);
            mark_assigned(a, off, n);
            break;
          }
          case Opcode::Trap:
            throw CrashError{CrashKind::Trap};
          case Opcode::LoadHook:
            materialize(eval(inst.args[0], env), inst.type);
            break;
          case Opcode::StoreHook: {
            uint64_t size = sized(inst.type);
            uint64_t addr = eval(inst.args[0], env);
            Allocation& a = access(addr, size);
            mark_assigned(a, addr & kOffsetMask, size);
            break;
          }
          case Opcode::RangeLoad: {
            uint64_t n = eval(inst.args[1], env);
            uint64_t addr = eval(inst.args[0], env);
            Allocation& a = access(addr, n);
            uint64_t off = addr & kOffsetMask;
            for (uint64_t i = 0; i < n; ++i) {
              if (a.assigned[off + i]) continue;
              size_t cursor = input_.cursor;
              uint64_t v = input_.read_le(1);
              a.bytes[off + i] = static_cast<uint8_t>(v);
              a.assigned[off + i] = true;
              record_lazy(cursor, 1, v);
            }
            break;
          }
          case Opcode::RangeStore: {
            uint64_t n = eval(inst.args[1], env);
            uint64_t addr = eval(inst.args[0], env);
            Allocation& a = access(addr, n);
            mark_assigned(a, addr & kOffsetMask, n);
            break;
          }
        }
      }
      // A validated block always ends in a terminator; reaching here means
      // the block fell through, which validation rejects.
      throw CrashError{CrashKind::InvalidDriver};
    next_block:;
    }
  }

  uint64_t do_call(const Instruction& inst, Env& env, int depth) {
    if (inst.indirect_call) {
      // No mechanism issues callable function references; the trap value and
      // anything else a program conjures both invalidate the driver.
      throw CrashError{CrashKind::InvalidDriver};
    }
    std::vector<uint64_t> args;
    for (const auto& a : inst.args) args.push_back(eval(a, env));
    const std::string& name = inst.callee;
    if (name.rfind("__", 0) == 0) {
      if (name == "__read_scalar") {
        int width = static_cast<int>(std::min<uint64_t>(args.empty() ? 8 : args[0], 8));
        return input_.read_le(width);
      }
      if (name == "__decide") return input_.read_le(1) & 1;
      if (name == "__alloc_unassigned") {
        uint64_t size = args.empty() ? opts_.alloc_size : args[0];
        return heap_.allocate(size, AllocOrigin::Driver, false);
      }
      if (name == "__trap_fnref") return kTrapFuncRef;
      if (name == "__epilogue") {
        result_.live_leaks_pre_epilogue = heap_.live_count(AllocOrigin::Program);
        epilogue_ran_ = true;
        heap_.free_all_live();
        return 0;
      }
      // Unknown double-underscore externals fall through to the no-op rule.
    }
    auto it = interp_.funcs_.find(name);
    if (it != interp_.funcs_.end()) {
      uint32_t saved_block = current_block_;
      uint64_t v = run_function(it->second, args, depth + 1);
      current_block_ = saved_block;
      return v;
    }
    return 0;  // declared externals have no body; calls are inert
  }

  const Interpreter& interp_;
  const Program& prog_;
  const RunOptions& opts_;
  ShadowHeap heap_;
  FuzzInput input_;
  ExecResult result_;
  const Function* root_fn_ = nullptr;
  uint32_t current_block_ = 0;
  bool epilogue_ran_ = false;
};

ExecResult Interpreter::run(const std::string& driver, std::span<const uint8_t> input,
                            const RunOptions& opts) {
  ExecState state(*this, prog_, input, opts);
  return state.execute(driver);
}

}  // namespace mirfuzz
