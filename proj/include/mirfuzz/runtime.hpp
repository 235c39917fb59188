#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mirfuzz/ir.hpp"

namespace mirfuzz {

enum class CrashKind {
  None,
  OutOfBounds,
  UseAfterFree,
  DoubleFree,
  Trap,
  InvalidDriver,
  StepLimit,
};

const char* crash_kind_name(CrashKind k);

enum class AllocOrigin { Driver, Program };

// Addresses are opaque 64-bit handles issued by the runtime, never host
// pointers: handle in the high 32 bits, byte offset in the low 32.
constexpr uint64_t kHandleShift = 32;
constexpr uint64_t kOffsetMask = 0xFFFFFFFFull;
constexpr uint64_t kTrapFuncRef = ~0ull;

struct Allocation {
  uint64_t handle = 0;
  std::vector<uint8_t> bytes;
  std::vector<bool> assigned;  // per-byte
  bool freed = false;
  AllocOrigin origin = AllocOrigin::Program;
  uint64_t base() const { return handle << kHandleShift; }
  uint32_t size() const { return static_cast<uint32_t>(bytes.size()); }
};

// Allocation ledger plus per-byte assigned bitmaps.
class ShadowHeap {
 public:
  uint64_t allocate(uint64_t size, AllocOrigin origin, bool assigned);
  Allocation* find(uint64_t addr);              // nullptr if the handle is unknown
  const Allocation* find(uint64_t addr) const;

  // Live allocations with the given origin, by ascending handle.
  std::vector<uint64_t> live_handles(AllocOrigin origin) const;
  uint64_t live_count(AllocOrigin origin) const;
  void free_all_live();

  const std::map<uint64_t, Allocation>& ledger() const { return allocs_; }
  std::map<uint64_t, Allocation>& ledger() { return allocs_; }

 private:
  std::map<uint64_t, Allocation> allocs_;
  uint64_t next_handle_ = 1;
};

// Fuzzer-supplied byte buffer with a read cursor. Reads past the end return
// zeros, consume nothing, and set the exhausted flag.
struct FuzzInput {
  std::span<const uint8_t> data;
  size_t cursor = 0;
  bool exhausted = false;

  uint64_t read_le(int width_bytes);
  size_t consumed() const { return cursor; }
};

struct LazyScalarEvent {
  size_t cursor;  // input offset the value was read from
  int width;      // bytes
  uint64_t value;
};

struct ExecResult {
  bool ok = false;
  CrashKind crash = CrashKind::None;
  uint32_t crash_block = 0;
  std::set<uint32_t> blocks;
  std::vector<uint32_t> trace;  // first 4096 block ids
  uint64_t path_hash = 0;
  size_t consumed = 0;
  bool exhausted = false;
  uint64_t live_leaks_pre_epilogue = 0;   // program-origin, when the epilogue ran
  uint64_t live_program_after = 0;        // program-origin, post-epilogue
  uint64_t unassigned_reads = 0;          // loads observing unmaterialized bytes
  uint64_t steps = 0;
  std::vector<LazyScalarEvent> lazy_events;
};

struct StepLimits {
  uint64_t max_steps = 1'000'000;
  int max_call_depth = 256;
};

struct RunOptions {
  StepLimits limits;
  uint64_t alloc_size = 64;   // minimum size of lazily issued allocations
  bool collect_trace = false;
  bool record_lazy = false;
};

constexpr size_t kPathSignatureBlocks = 4096;

// Stable FNV-1a hash of the block-id sequence, truncated to the first 4096
// entries.
uint64_t path_signature(std::span<const uint32_t> trace);

// One interpreter instance per worker; shares only the immutable Program.
class Interpreter {
 public:
  explicit Interpreter(const Program& p);

  // Runs `driver` on `input` to completion, crash, or step limit. Faults are
  // reported inside the result; the host process never aborts.
  ExecResult run(const std::string& driver, std::span<const uint8_t> input,
                 const RunOptions& opts = {});

  uint32_t block_id(const std::string& func, size_t block_index) const;
  uint32_t total_blocks() const { return total_blocks_; }

 private:
  friend class ExecState;
  const Program& prog_;
  struct FuncInfo {
    const Function* fn;
    uint32_t block_base;
    std::map<std::string, size_t> label_to_block;
  };
  std::map<std::string, FuncInfo, std::less<>> funcs_;
  uint32_t total_blocks_ = 0;
};

}  // namespace mirfuzz
