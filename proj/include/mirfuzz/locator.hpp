#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mirfuzz/ir.hpp"

namespace mirfuzz {

// Weight of one statement toward its function's vulnerability priority.
struct StatementWeight {
  enum class Kind { Zero, Deref, MemFunc, ProjectCall };
  Kind kind = Kind::Zero;
  std::string callee;  // ProjectCall target
};

StatementWeight statement_weight(const Instruction& inst, const Program& p);

struct DirectWeights {
  uint64_t deref = 0;
  uint64_t memfunc = 0;
};

DirectWeights direct_weights(const Function& f, const Program& p);

// Function name -> non-negative priority. In-module functions carry their
// computed priority; externs appear with priority 0. Recursive call graphs
// are evaluated over the SCC condensation: every member of a component gets
// the sum of all members' direct weights plus the priorities of callees
// outside the component, one contribution per call site.
using PriorityMap = std::map<std::string, uint64_t>;

PriorityMap function_priorities(const Program& p);

// Call-site multigraph over in-module functions.
struct CallGraph {
  std::vector<std::string> nodes;                          // program order
  std::vector<std::vector<size_t>> edges;                  // one entry per call site
  std::map<std::string, size_t> index;
};

CallGraph build_call_graph(const Program& p);

// Top-N in-module functions by descending priority; ties break by ascending
// name. Externs are excluded.
std::vector<std::pair<std::string, uint64_t>> locate_entries(const Program& p,
                                                             size_t max_number);

}  // namespace mirfuzz
