#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mirfuzz/ir.hpp"

namespace mirfuzz {

// Per-parameter construction plan; the tree mirrors the parameter's type.
struct ArgPlan {
  enum class Kind { ScalarFromBuffer, FreshAllocation, RecursiveAggregate, FuncRefTrap };
  Kind kind = Kind::ScalarFromBuffer;
  TypeDesc type;
  uint64_t size = 0;  // scalar byte width, or allocation size for pointers
  std::vector<ArgPlan> children;
  std::vector<uint64_t> candidates;  // harvested constants for this node
};

struct HarvestedConst {
  uint64_t value = 0;
  int width = 8;  // byte width of the compared operand
  bool operator==(const HarvestedConst&) const = default;
};

struct ConstantTable {
  // parameter name -> candidates, first-occurrence order, deduplicated
  std::map<std::string, std::vector<HarvestedConst>> per_param;
  std::vector<HarvestedConst> all;
};

struct DriverSpec {
  std::vector<std::string> entries;  // one, or an ordered composite sequence
  std::string driver_name;
  std::vector<std::vector<ArgPlan>> plans;  // per entry, per parameter
  std::vector<HarvestedConst> constants;
};

struct SynthOptions {
  uint64_t alloc_size = 64;  // Alg.-3 SIZE: minimum pointer allocation
  bool harvest = true;
};

struct SynthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<ArgPlan> plan_arguments(const Function& f, const Program& p,
                                    const SynthOptions& opts = {});

// Scans cmp instructions in f and its direct in-module callees (depth 1).
// Where one operand is reachable from a parameter via load/gep chains and the
// other is a literal, the literal becomes a candidate for that parameter.
ConstantTable harvest_comparison_constants(const Function& f, const Program& p);

struct SynthResult {
  Program program;
  DriverSpec spec;
};

// Appends `__driver_<entry>(buf: ptr<i8>, len: i64) -> i32` plus the runtime
// intrinsic declarations it needs. Throws SynthError if the entry is missing
// or external.
SynthResult synthesize_driver(const Program& p, const std::string& entry,
                              const SynthOptions& opts = {});

// One driver invoking every entry in order, sharing the input cursor.
// Requires >= 2 entries.
SynthResult synthesize_composite_driver(const Program& p,
                                        const std::vector<std::string>& entries,
                                        const SynthOptions& opts = {});

// Inserts load/store hook markers into every function reachable from `root`
// (including root) and expands memcpy/memset with range hooks. Idempotent.
Program instrument_lazy_store(const Program& p, const std::string& root);

// Ensures the leak-guard epilogue call precedes every exit of the driver.
void insert_leak_guard(Function& driver);

// Readable pseudo-C rendering of a synthesized driver, for documentation.
std::string emit_pseudo_source(const DriverSpec& spec, const Program& p);

// Hook/instruction census used by tests and invariant checks.
struct HookCounts {
  uint64_t loads = 0, stores = 0, load_hooks = 0, store_hooks = 0;
  uint64_t memcpys = 0, memsets = 0, range_loads = 0, range_stores = 0;
};
HookCounts count_hooks(const Program& p, const std::vector<std::string>& funcs);

// Functions reachable from root through direct calls, root included.
std::vector<std::string> reachable_functions(const Program& p, const std::string& root);

}  // namespace mirfuzz
