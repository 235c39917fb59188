#include "mirfuzz/locator.hpp"

#include <algorithm>
#include <functional>

namespace mirfuzz {

StatementWeight statement_weight(const Instruction& inst, const Program& p) {
  switch (inst.op) {
    case Opcode::Load:
    case Opcode::Store:
      return {StatementWeight::Kind::Deref, {}};
    case Opcode::Memcpy:
    case Opcode::Memset:
      return {StatementWeight::Kind::MemFunc, {}};
    case Opcode::Call: {
      if (inst.indirect_call) return {};  // indirect targets are not resolved
      if (p.find_func(inst.callee))
        return {StatementWeight::Kind::ProjectCall, inst.callee};
      const ExternDecl* e = p.find_extern(inst.callee);
      if (e && e->memory) return {StatementWeight::Kind::MemFunc, {}};
      return {};
    }
    default:
      return {};
  }
}

DirectWeights direct_weights(const Function& f, const Program& p) {
  DirectWeights w;
  for (const auto& b : f.blocks) {
    for (const auto& inst : b.insts) {
      StatementWeight sw = statement_weight(inst, p);
      if (sw.kind == StatementWeight::Kind::Deref) ++w.deref;
      if (sw.kind == StatementWeight::Kind::MemFunc) ++w.memfunc;
    }
  }
  return w;
}

CallGraph build_call_graph(const Program& p) {
  CallGraph g;
  for (size_t i = 0; i < p.funcs.size(); ++i) {
    g.nodes.push_back(p.funcs[i].name);
    g.index[p.funcs[i].name] = i;
  }
  g.edges.resize(p.funcs.size());
  for (size_t i = 0; i < p.funcs.size(); ++i) {
    for (const auto& b : p.funcs[i].blocks) {
      for (const auto& inst : b.insts) {
        if (inst.op != Opcode::Call || inst.indirect_call) continue;
        auto it = g.index.find(inst.callee);
        if (it != g.index.end()) g.edges[i].push_back(it->second);
      }
    }
  }
  return g;
}

namespace {

// Iterative Tarjan; returns component id per node.
std::vector<size_t> strongly_connected_components(const CallGraph& g, size_t& num_comps) {
  size_t n = g.nodes.size();
  std::vector<size_t> comp(n, SIZE_MAX), index(n, SIZE_MAX), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<size_t> stack;
  size_t next_index = 0;
  num_comps = 0;

  struct WorkItem {
    size_t node;
    size_t edge;
  };
  for (size_t root = 0; root < n; ++root) {
    if (index[root] != SIZE_MAX) continue;
    std::vector<WorkItem> work{{root, 0}};
    while (!work.empty()) {
      auto& [v, ei] = work.back();
      if (ei == 0) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = true;
      }
      bool descended = false;
      while (ei < g.edges[v].size()) {
        size_t w = g.edges[v][ei++];
        if (index[w] == SIZE_MAX) {
          work.push_back({w, 0});
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        while (true) {
          size_t w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = num_comps;
          if (w == v) break;
        }
        ++num_comps;
      }
      size_t finished = v;
      work.pop_back();
      if (!work.empty()) {
        size_t parent = work.back().node;
        low[parent] = std::min(low[parent], low[finished]);
      }
    }
  }
  return comp;
}

}  // namespace

PriorityMap function_priorities(const Program& p) {
  CallGraph g = build_call_graph(p);
  size_t n = g.nodes.size();
  size_t num_comps = 0;
  std::vector<size_t> comp = strongly_connected_components(g, num_comps);

  std::vector<uint64_t> comp_direct(num_comps, 0);
  for (size_t i = 0; i < n; ++i) {
    DirectWeights w = direct_weights(p.funcs[i], p);
    comp_direct[comp[i]] += w.deref + w.memfunc;
  }

  // Outgoing condensation call sites: (member, callee) pairs crossing the
  // component boundary, one entry per call site.
  std::vector<std::vector<size_t>> comp_out(num_comps);
  for (size_t i = 0; i < n; ++i) {
    for (size_t callee : g.edges[i]) {
      if (comp[callee] != comp[i]) comp_out[comp[i]].push_back(callee);
    }
  }

  std::vector<uint64_t> comp_priority(num_comps, 0);
  std::vector<bool> done(num_comps, false);
  std::function<uint64_t(size_t)> eval = [&](size_t c) -> uint64_t {
    if (done[c]) return comp_priority[c];
    done[c] = true;  // the condensation is acyclic, so this memo is final
    uint64_t total = comp_direct[c];
    for (size_t callee : comp_out[c]) total += eval(comp[callee]);
    comp_priority[c] = total;
    return total;
  };

  PriorityMap result;
  for (size_t i = 0; i < n; ++i) result[g.nodes[i]] = eval(comp[i]);
  for (const auto& e : p.externs) result[e.name] = 0;
  return result;
}

std::vector<std::pair<std::string, uint64_t>> locate_entries(const Program& p,
                                                             size_t max_number) {
  PriorityMap priorities = function_priorities(p);
  std::vector<std::pair<std::string, uint64_t>> ranked;
  for (const auto& f : p.funcs) ranked.emplace_back(f.name, priorities.at(f.name));
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_number) ranked.resize(max_number);
  return ranked;
}

}  // namespace mirfuzz
