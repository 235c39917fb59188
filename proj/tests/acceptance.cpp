// Acceptance suite: nine independently checkable criteria, one verdict line
// each. Exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "mirfuzz/fuzz.hpp"
#include "mirfuzz/locator.hpp"
#include "mirfuzz/parse.hpp"
#include "mirfuzz/pipeline.hpp"
#include "mirfuzz/print.hpp"
#include "mirfuzz/runtime.hpp"
#include "mirfuzz/synth.hpp"

using namespace mirfuzz;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(int criterion, bool ok, const std::string& what) {
  std::printf("%s  criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Program load_toylib() {
  ParseResult r = parse_inputs({std::string(MIRFUZZ_TESTDATA) + "/toylib.mir"});
  if (!r.ok()) {
    std::fprintf(stderr, "toylib failed to parse\n");
    std::exit(2);
  }
  return *r.program;
}

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("mirfuzz_accept_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// Random acyclic program generator for criteria 1-2: up to 20 functions of up
// to 30 instructions; function i may only call functions with larger indices,
// so the call graph is a DAG by construction.

Program random_program(std::mt19937_64& rng) {
  Program p;
  p.externs.push_back({"ext_plain", {TypeDesc::scalar(64)}, TypeDesc::void_type(), false});
  p.externs.push_back({"ext_mem", {TypeDesc::opaque_ptr()}, TypeDesc::void_type(), true});
  size_t nfuncs = 1 + rng() % 20;
  for (size_t i = 0; i < nfuncs; ++i) {
    Function f;
    f.name = "f" + std::to_string(i);
    f.params = {{"p", TypeDesc::ptr(TypeDesc::scalar(8))}};
    f.ret = TypeDesc::void_type();
    Block b;
    b.label = "entry";
    size_t ninsts = rng() % 30;
    int tmp = 0;
    for (size_t k = 0; k < ninsts; ++k) {
      Instruction inst;
      switch (rng() % 8) {
        case 0:
          inst.op = Opcode::Load;
          inst.result = "t" + std::to_string(tmp++);
          inst.has_type = true;
          inst.type = TypeDesc::scalar(8);
          inst.args = {Operand::val("p")};
          break;
        case 1:
          inst.op = Opcode::Store;
          inst.has_type = true;
          inst.type = TypeDesc::scalar(8);
          inst.args = {Operand::lit(rng() % 256), Operand::val("p")};
          break;
        case 2:
          inst.op = Opcode::Memcpy;
          inst.args = {Operand::val("p"), Operand::val("p"), Operand::lit(1)};
          break;
        case 3:
          inst.op = Opcode::Memset;
          inst.args = {Operand::val("p"), Operand::lit(0), Operand::lit(1)};
          break;
        case 4:
          inst.op = Opcode::Call;
          inst.callee = "ext_plain";
          inst.args = {Operand::lit(rng() % 100)};
          break;
        case 5:
          inst.op = Opcode::Call;
          inst.callee = "ext_mem";
          inst.args = {Operand::val("p")};
          break;
        case 6:
          if (i + 1 < nfuncs) {
            inst.op = Opcode::Call;
            inst.callee = "f" + std::to_string(i + 1 + rng() % (nfuncs - i - 1));
            inst.args = {Operand::val("p")};
          } else {
            inst.op = Opcode::Add;
            inst.result = "t" + std::to_string(tmp++);
            inst.args = {Operand::lit(1), Operand::lit(2)};
          }
          break;
        default:
          inst.op = Opcode::Alloc;
          inst.result = "t" + std::to_string(tmp++);
          inst.has_type = true;
          inst.type = TypeDesc::scalar(64);
          break;
      }
      b.insts.push_back(std::move(inst));
    }
    Instruction ret;
    ret.op = Opcode::Ret;
    b.insts.push_back(std::move(ret));
    f.blocks.push_back(std::move(b));
    p.funcs.push_back(std::move(f));
  }
  return p;
}

// Literal recursive priority definition, memoized; valid on DAG call graphs.
uint64_t oracle_priority(const Program& p, const std::string& name,
                         std::map<std::string, uint64_t>& memo) {
  auto it = memo.find(name);
  if (it != memo.end()) return it->second;
  const Function* f = p.find_func(name);
  if (!f) return 0;  // extern
  uint64_t sum = 0;
  for (const auto& b : f->blocks) {
    for (const auto& inst : b.insts) {
      switch (inst.op) {
        case Opcode::Load:
        case Opcode::Store:
          sum += 1;
          break;
        case Opcode::Memcpy:
        case Opcode::Memset:
          sum += 1;
          break;
        case Opcode::Call: {
          if (inst.indirect_call) break;
          if (const ExternDecl* e = p.find_extern(inst.callee)) {
            if (e->memory) sum += 1;
          } else {
            sum += oracle_priority(p, inst.callee, memo);
          }
          break;
        }
        default:
          break;
      }
    }
  }
  memo[name] = sum;
  return sum;
}

// ---------------------------------------------------------------------------

void criterion_1() {
  auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(0xC1);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    Program p = random_program(rng);
    PriorityMap computed = function_priorities(p);
    std::map<std::string, uint64_t> memo;
    for (const auto& f : p.funcs) {
      if (computed.at(f.name) != oracle_priority(p, f.name, memo)) ++mismatches;
    }
  }
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  verdict(1, mismatches == 0 && secs < 10.0,
          "priority oracle equivalence on 1000 random acyclic programs (" +
              std::to_string(mismatches) + " mismatches, " + std::to_string(secs) + "s)");
}

void criterion_2() {
  std::mt19937_64 rng(0xC2);
  std::mt19937 shuffler(0xC2);
  bool ok = true;
  for (int i = 0; i < 200 && ok; ++i) {
    Program p = random_program(rng);
    PriorityMap prio = function_priorities(p);
    // Full descending sort with ascending-name tie-break.
    std::vector<std::pair<std::string, uint64_t>> all;
    for (const auto& f : p.funcs) all.emplace_back(f.name, prio.at(f.name));
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    for (size_t k : {size_t{1}, all.size() / 2, all.size(), all.size() + 5}) {
      auto got = locate_entries(p, k);
      std::vector<std::pair<std::string, uint64_t>> want(
          all.begin(), all.begin() + std::min(k, all.size()));
      if (got != want) ok = false;
    }
    // Declaration order must not matter.
    Program shuffled = p;
    std::shuffle(shuffled.funcs.begin(), shuffled.funcs.end(), shuffler);
    if (function_priorities(shuffled) != prio) ok = false;
    if (locate_entries(shuffled, 5) != locate_entries(p, 5)) ok = false;
  }
  verdict(2, ok, "locator determinism, ordering, and permutation invariance (200 programs)");
}

struct ToyDrivers {
  Program instrumented;
  std::vector<std::string> drivers;
  std::vector<HarvestedConst> dict;
};

// Top-3 toy-library drivers, instrumented, as the pipeline would build them.
ToyDrivers build_toy_drivers(bool harvest = true) {
  Program base = load_toylib();
  SynthOptions opts;
  opts.harvest = harvest;
  ToyDrivers out;
  Program work = base;
  for (const auto& [entry, _] : locate_entries(base, 3)) {
    SynthResult sr = synthesize_driver(work, entry, opts);
    work = std::move(sr.program);
    out.drivers.push_back(sr.spec.driver_name);
    for (const auto& c : sr.spec.constants) out.dict.push_back(c);
  }
  for (const auto& d : out.drivers) work = instrument_lazy_store(work, d);
  out.instrumented = std::move(work);
  return out;
}

void criteria_3_and_4() {
  ToyDrivers toy = build_toy_drivers();
  uint64_t lazy_mismatches = 0, unassigned = 0, leak_violations = 0;
  uint64_t execs_seen = 0, clean_execs = 0, lazy_events = 0;

  CampaignOptions opts;
  opts.budget_execs = 10000;
  opts.seed = 2;
  opts.dict = toy.dict;
  opts.run.record_lazy = true;
  opts.observer = [&](const std::string&, const Bytes& input, const ExecResult& r) {
    ++execs_seen;
    unassigned += r.unassigned_reads;
    for (const auto& e : r.lazy_events) {
      ++lazy_events;
      uint64_t expect = 0;
      for (int i = 0; i < e.width; ++i) {
        if (e.cursor + static_cast<size_t>(i) < input.size())
          expect |= static_cast<uint64_t>(input[e.cursor + i]) << (8 * i);
      }
      if (e.value != expect) ++lazy_mismatches;
    }
    if (r.ok) {
      ++clean_execs;
      if (r.live_program_after != 0) ++leak_violations;
    }
  };
  run_campaign(toy.instrumented, toy.drivers, opts);

  verdict(3,
          execs_seen == 10000 && unassigned == 0 && lazy_mismatches == 0 && lazy_events > 0,
          "lazy-store safety over 10000 executions (" + std::to_string(unassigned) +
              " unassigned reads, " + std::to_string(lazy_mismatches) +
              " little-endian mismatches across " + std::to_string(lazy_events) +
              " materializations)");
  verdict(4, clean_execs > 0 && leak_violations == 0,
          "leak-freedom after every non-crashing execution (" +
              std::to_string(clean_execs) + " clean runs, " +
              std::to_string(leak_violations) + " with surviving allocations)");
}

void criterion_5() {
  Program base = load_toylib();
  struct Expect {
    const char* entry;
    bool valid;
    CrashKind reason;
  };
  const Expect table[] = {
      {"parse_header", true, CrashKind::None}, {"scan", true, CrashKind::None},
      {"checksum", true, CrashKind::None},     {"fill", true, CrashKind::None},
      {"init", true, CrashKind::None},         {"process", true, CrashKind::None},
      {"always_trap", false, CrashKind::Trap}, {"on_event", false, CrashKind::InvalidDriver},
  };
  bool ok = true;
  std::string detail;
  for (const auto& e : table) {
    SynthResult sr = synthesize_driver(base, e.entry);
    Program inst = instrument_lazy_store(sr.program, sr.spec.driver_name);
    for (uint64_t seed = 1; seed <= 10; ++seed) {
      SmokeVerdict v = smoke_filter(inst, sr.spec.driver_name, 64, seed);
      if (v.valid != e.valid || (!e.valid && v.reason != e.reason)) {
        ok = false;
        detail += std::string(" ") + e.entry + "@seed" + std::to_string(seed);
      }
    }
  }
  verdict(5, ok,
          "smoke filter classifications stable across seeds 1-10" +
              (detail.empty() ? std::string{} : " (wrong:" + detail + ")"));
}

void criterion_6() {
  auto start = std::chrono::steady_clock::now();
  auto guarded_block_covered = [](bool harvest) {
    Program base = load_toylib();
    SynthOptions sopts;
    sopts.harvest = harvest;
    SynthResult sr = synthesize_driver(base, "parse_header", sopts);
    Program inst = instrument_lazy_store(sr.program, sr.spec.driver_name);
    Interpreter shape(inst);
    const Function& ph = *inst.find_func("parse_header");
    size_t bug_index = 0;
    for (size_t i = 0; i < ph.blocks.size(); ++i) {
      if (ph.blocks[i].label == "bug") bug_index = i;
    }
    uint32_t bug_block = shape.block_id("parse_header", bug_index);

    CampaignOptions opts;
    opts.budget_execs = 5000;
    opts.seed = 7;
    for (const auto& c : sr.spec.constants) opts.dict.push_back(c);
    CoverageReport r = run_campaign(inst, {sr.spec.driver_name}, opts);
    return r.drivers.at(sr.spec.driver_name).blocks.count(bug_block) > 0;
  };
  bool with = guarded_block_covered(true);
  bool without = guarded_block_covered(false);
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  verdict(6, with && !without && secs < 30.0,
          std::string("comparison-constant seeding reaches the 0xDEADBEEF guard ") +
              "(harvested: " + (with ? "covered" : "missed") +
              ", disabled: " + (without ? "covered" : "missed") + ", " +
              std::to_string(secs) + "s)");
}

void criterion_7() {
  auto start = std::chrono::steady_clock::now();
  fs::path dir = fresh_dir("c7");
  PipelineConfig cfg;
  cfg.inputs = {std::string(MIRFUZZ_TESTDATA) + "/toylib.mir"};
  cfg.seed = 1;
  cfg.budget_execs = 50000;
  cfg.workers = 1;
  cfg.out_dir = (dir / "out").string();
  PipelineOutcome out = run_pipeline(cfg);

  bool found = false, replayed = false;
  std::string crash_file, crash_driver;
  if (out.exit_code == 0) {
    for (const auto& [driver, stats] : out.report["drivers"].items()) {
      for (const auto& c : stats["crashes"]) {
        if (c["kind"] == "OutOfBounds") {
          found = true;
          crash_file = c["input"];
          crash_driver = driver;
        }
      }
    }
  }
  if (found) {
    // Replay through the exec subcommand of the real binary.
    fs::path module = dir / "out" / "drivers" / (crash_driver + ".mir");
    fs::path input = dir / "out" / "crashes" / crash_file;
    fs::path log = dir / "replay.json";
    std::string cmd = std::string(MIRFUZZ_BIN) + " exec " + module.string() +
                      " --driver " + crash_driver + " --input " + input.string() + " > " +
                      log.string() + " 2>&1";
    if (std::system(cmd.c_str()) == 0)
      replayed = slurp(log).find("\"crash_kind\": \"OutOfBounds\"") != std::string::npos;
  }
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  verdict(7, found && replayed && secs < 120.0,
          std::string("planted OutOfBounds found by the pipeline and replayed via exec (") +
              (found ? crash_driver + "/" + crash_file : "not found") + ", " +
              std::to_string(secs) + "s)");
}

CoverageReport random_report(std::mt19937_64& rng) {
  CoverageReport r;
  r.program_id = 7;
  const char* names[] = {"d0", "d1", "d2"};
  for (const char* n : names) {
    if (rng() % 2 == 0) continue;
    DriverStats& d = r.drivers[n];
    size_t nb = rng() % 6;
    for (size_t i = 0; i < nb; ++i) d.blocks.insert(static_cast<uint32_t>(rng() % 40));
    size_t np = rng() % 6;
    for (size_t i = 0; i < np; ++i) d.paths.insert(rng() % 1000);
    size_t nc = rng() % 3;
    for (size_t i = 0; i < nc; ++i) {
      CrashSignature sig{static_cast<CrashKind>(1 + rng() % 4),
                         static_cast<uint32_t>(rng() % 10)};
      // Crash inputs are a function of the signature, mirroring the real
      // campaign where one signature always stems from one replayable input.
      d.crashes[sig] = Bytes{static_cast<uint8_t>(static_cast<int>(sig.kind) * 16 +
                                                  sig.block)};
    }
    d.execs = rng() % 100;
    d.hangs = rng() % 5;
  }
  return r;
}

void criterion_8() {
  std::mt19937_64 rng(0xC8);
  bool ok = true;
  for (int i = 0; i < 500 && ok; ++i) {
    CoverageReport a = random_report(rng);
    CoverageReport b = random_report(rng);
    CoverageReport c = random_report(rng);
    auto dump = [](const CoverageReport& r) { return report_json(r).dump(); };
    if (dump(merge_reports(merge_reports(a, b), c)) !=
        dump(merge_reports(a, merge_reports(b, c))))
      ok = false;
    if (dump(merge_reports(a, b)) != dump(merge_reports(b, a))) ok = false;
    // Idempotence of the coverage components: execution tallies add, but the
    // observed blocks, paths, and crash signatures must not change.
    CoverageReport aa = merge_reports(a, a);
    for (const auto& [name, d] : a.drivers) {
      if (aa.drivers.at(name).blocks != d.blocks) ok = false;
      if (aa.drivers.at(name).paths != d.paths) ok = false;
      if (aa.drivers.at(name).crashes != d.crashes) ok = false;
    }
    if (aa.total_bugs() != a.total_bugs()) ok = false;
  }

  // Coverage growth within a live campaign trace is non-decreasing.
  ToyDrivers toy = build_toy_drivers();
  std::set<uint32_t> blocks;
  std::set<uint64_t> paths;
  size_t prev_blocks = 0, prev_paths = 0;
  bool monotone = true;
  CampaignOptions opts;
  opts.budget_execs = 3000;
  opts.seed = 4;
  opts.dict = toy.dict;
  opts.observer = [&](const std::string&, const Bytes&, const ExecResult& r) {
    blocks.insert(r.blocks.begin(), r.blocks.end());
    paths.insert(r.path_hash);
    if (blocks.size() < prev_blocks || paths.size() < prev_paths) monotone = false;
    prev_blocks = blocks.size();
    prev_paths = paths.size();
  };
  CoverageReport live = run_campaign(toy.instrumented, toy.drivers, opts);
  if (blocks != live.total_blocks() || paths != live.total_paths()) monotone = false;

  verdict(8, ok && monotone,
          "report merge algebra over 500 random reports; campaign coverage growth "
          "monotone");
}

void criterion_9() {
  bool round_trip = true;
  for (const char* name : {"minimal.mir", "toylib.mir", "list.mir", "externs.mir"}) {
    std::string text = slurp(std::string(MIRFUZZ_TESTDATA) + "/" + name);
    ParseResult p1 = parse_module(text);
    if (!p1.ok()) {
      round_trip = false;
      continue;
    }
    std::string r1 = render_module(*p1.program);
    ParseResult p2 = parse_module(r1);
    if (!p2.ok() || render_module(*p2.program) != r1 || !(*p1.program == *p2.program))
      round_trip = false;
  }

  auto run_once = [](const std::string& tag) {
    fs::path dir = fresh_dir(tag);
    PipelineConfig cfg;
    cfg.inputs = {std::string(MIRFUZZ_TESTDATA) + "/toylib.mir"};
    cfg.seed = 11;
    cfg.budget_execs = 2000;
    cfg.workers = 1;
    cfg.out_dir = (dir / "out").string();
    run_pipeline(cfg);
    return slurp(dir / "out" / "report.json");
  };
  std::string first = run_once("c9a");
  std::string second = run_once("c9b");
  bool identical = !first.empty() && first == second;

  verdict(9, round_trip && identical,
          "parse/render fixed point on the corpus; byte-identical reports across runs");
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criteria_3_and_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  if (failures == 0)
    std::printf("all 9 acceptance criteria passed\n");
  else
    std::printf("%d acceptance criteria FAILED\n", failures);
  return failures == 0 ? 0 : 1;
}
