#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mirfuzz/fuzz.hpp"
#include "mirfuzz/parse.hpp"
#include "mirfuzz/pipeline.hpp"
#include "mirfuzz/synth.hpp"

using namespace mirfuzz;

namespace {

Program parse_ok(const std::string& text) {
  ParseResult r = parse_module(text);
  REQUIRE(r.ok());
  return *r.program;
}

// A module whose driver traps when the i64 argument equals 42.
Program pick_module() {
  Program p = parse_ok(
      "func @pick(%n: i64) -> i64 {\n"
      "entry:\n"
      "  %c = cmp eq %n, 42\n"
      "  br %c, hit, miss\n"
      "hit:\n"
      "  trap\n"
      "miss:\n"
      "  ret 0\n"
      "}\n");
  SynthResult sr = synthesize_driver(p, "pick");
  return instrument_lazy_store(sr.program, "__driver_pick");
}

}  // namespace

TEST_CASE("mutation is deterministic under the rng seed") {
  Bytes input(32, 0x11);
  std::vector<Bytes> corpus = {Bytes{1, 2, 3}, Bytes(8, 0xFF)};
  std::vector<HarvestedConst> dict = {{0xDEADBEEFull, 4}};
  std::mt19937_64 a(7), b(7), c(8);
  bool diverged = false;
  for (int i = 0; i < 200; ++i) {
    Bytes ma = mutate(input, a, corpus, dict);
    Bytes mb = mutate(input, b, corpus, dict);
    CHECK(ma == mb);
    if (ma != mutate(input, c, corpus, dict)) diverged = true;
  }
  CHECK(diverged);
}

TEST_CASE("mutating the empty input still produces bytes") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    Bytes m = mutate({}, rng, {}, {});
    CHECK(!m.empty());
  }
}

TEST_CASE("mutants never exceed the size cap") {
  std::mt19937_64 rng(5);
  Bytes input(4090, 0xAB);
  std::vector<Bytes> corpus = {Bytes(4000, 1)};
  for (int i = 0; i < 500; ++i) {
    Bytes m = mutate(input, rng, corpus, {}, 4096);
    CHECK(m.size() <= 4096);
  }
}

TEST_CASE("dictionary overwrites land at width-aligned offsets") {
  // 0xDEADBEEF cannot arise from the single-byte operators on a zero buffer,
  // so every full pattern occurrence comes from the dictionary operator.
  std::vector<HarvestedConst> dict = {{0xDEADBEEFull, 4}};
  const Bytes pattern = {0xEF, 0xBE, 0xAD, 0xDE};
  std::mt19937_64 rng(11);
  Bytes zeros(64, 0);
  int hits = 0;
  for (int i = 0; i < 2000; ++i) {
    Bytes m = mutate(zeros, rng, {}, dict);
    for (size_t off = 0; off + 4 <= m.size(); ++off) {
      if (std::equal(pattern.begin(), pattern.end(), m.begin() + off)) {
        ++hits;
        CHECK(off % 4 == 0);
      }
    }
  }
  CHECK(hits > 10);
}

TEST_CASE("smoke filter accepts benign drivers and rejects broken ones") {
  Program p = parse_ok(
      "func @quiet(%p: ptr<i8>, %n: i64) -> i64 {\n"
      "entry:\n"
      "  %v = load i8, %p\n"
      "  ret %v\n"
      "}\n");
  SynthResult sr = synthesize_driver(p, "quiet");
  Program inst = instrument_lazy_store(sr.program, sr.spec.driver_name);
  SmokeVerdict ok = smoke_filter(inst, sr.spec.driver_name, 64, 1);
  CHECK(ok.valid);

  Program trapper = parse_ok("func @boom() -> void {\nentry:\n  trap\n}\n");
  SynthResult st = synthesize_driver(trapper, "boom");
  SmokeVerdict bad = smoke_filter(st.program, st.spec.driver_name, 8, 1);
  CHECK_FALSE(bad.valid);
  CHECK(bad.reason == CrashKind::Trap);

  Program indirect = parse_ok(
      "func @cbrun(%cb: fn(i64) -> i64) -> i64 {\n"
      "entry:\n"
      "  %r = call %cb(1)\n"
      "  ret %r\n"
      "}\n");
  SynthResult si = synthesize_driver(indirect, "cbrun");
  SmokeVerdict inv = smoke_filter(si.program, si.spec.driver_name, 8, 1);
  CHECK_FALSE(inv.valid);
  CHECK(inv.reason == CrashKind::InvalidDriver);

  // Step-limit exhaustion is a hang, not an invalidating crash.
  Program spin = parse_ok("func @spin() -> void {\nentry:\n  jmp entry\n}\n");
  SynthResult ss = synthesize_driver(spin, "spin");
  RunOptions fast;
  fast.limits.max_steps = 500;
  SmokeVerdict hang = smoke_filter(ss.program, ss.spec.driver_name, 4, 1, fast);
  CHECK(hang.valid);
}

TEST_CASE("report merging is a keyed set union") {
  CoverageReport a;
  a.program_id = 99;
  a.drivers["d"].blocks = {1, 2};
  a.drivers["d"].paths = {10};
  a.drivers["d"].execs = 5;
  a.drivers["d"].crashes[{CrashKind::Trap, 2}] = {0xAB};

  CoverageReport b;
  b.program_id = 99;
  b.drivers["d"].blocks = {2, 3};
  b.drivers["d"].paths = {10, 11};
  b.drivers["d"].execs = 7;
  b.drivers["d"].hangs = 1;
  b.drivers["e"].blocks = {9};
  b.drivers["e"].execs = 1;

  CoverageReport m = merge_reports(a, b);
  CHECK(m.drivers.at("d").blocks == std::set<uint32_t>{1, 2, 3});
  CHECK(m.drivers.at("d").paths == std::set<uint64_t>{10, 11});
  CHECK(m.drivers.at("d").execs == 12);
  CHECK(m.drivers.at("d").hangs == 1);
  CHECK(m.drivers.at("e").blocks == std::set<uint32_t>{9});
  CHECK(m.total_execs() == 13);
  CHECK(m.total_blocks().size() == 4);
  CHECK(m.total_bugs() == 1);

  // Commutative up to the serialized report.
  CoverageReport mm = merge_reports(b, a);
  CHECK(report_json(m) == report_json(mm));

  // Merging keeps the first-seen crash input per signature.
  CoverageReport c;
  c.program_id = 99;
  c.drivers["d"].crashes[{CrashKind::Trap, 2}] = {0xCD};
  CHECK(merge_reports(a, c).drivers.at("d").crashes.at({CrashKind::Trap, 2}) ==
        Bytes{0xAB});

  CoverageReport other;
  other.program_id = 100;
  CHECK_THROWS_AS((void)merge_reports(a, other), ReportMismatch);
}

TEST_CASE("program identity tracks the rendered module") {
  Program a = pick_module();
  Program b = pick_module();
  CHECK(program_identity(a) == program_identity(b));
  Program c = a;
  c.funcs[0].name = "renamed";
  CHECK(program_identity(a) != program_identity(c));
}

TEST_CASE("campaigns are deterministic for a fixed seed and budget") {
  Program p = pick_module();
  CampaignOptions opts;
  opts.budget_execs = 400;
  opts.seed = 123;
  CoverageReport r1 = run_campaign(p, {"__driver_pick"}, opts);
  CoverageReport r2 = run_campaign(p, {"__driver_pick"}, opts);
  CHECK(report_json(r1).dump() == report_json(r2).dump());
  CHECK(r1.total_execs() == 400);
  CHECK(r1.wall_secs == 0.0);  // execution budgets never record wall time

  opts.seed = 124;
  CoverageReport r3 = run_campaign(p, {"__driver_pick"}, opts);
  CHECK(report_json(r1).dump() != report_json(r3).dump());
}

TEST_CASE("the campaign finds the decision-guarded trap") {
  Program p = pick_module();
  CampaignOptions opts;
  opts.budget_execs = 2000;
  opts.seed = 5;
  uint64_t observed = 0;
  opts.observer = [&](const std::string&, const Bytes&, const ExecResult&) {
    ++observed;
  };
  CoverageReport r = run_campaign(p, {"__driver_pick"}, opts);
  CHECK(observed == 2000);
  REQUIRE(r.total_bugs() == 1);
  const auto& [sig, input] = *r.drivers.at("__driver_pick").crashes.begin();
  CHECK(sig.kind == CrashKind::Trap);
  // The stored input reproduces the crash.
  ExecResult replay = Interpreter(p).run("__driver_pick", input);
  CHECK(replay.crash == CrashKind::Trap);
  CHECK(replay.crash_block == sig.block);
}

TEST_CASE("the execution budget splits across drivers and workers") {
  Program p = pick_module();
  CampaignOptions opts;
  opts.budget_execs = 1001;
  opts.seed = 9;
  opts.workers = 3;
  CoverageReport r = run_campaign(p, {"__driver_pick"}, opts);
  CHECK(r.total_execs() == 1001);

  // Two drivers over one program: synthesize a second entry.
  Program q = parse_ok(
      "func @a(%n: i64) -> i64 {\nentry:\n  ret %n\n}\n"
      "func @b(%n: i64) -> i64 {\nentry:\n  ret %n\n}\n");
  Program q2 = synthesize_driver(q, "a").program;
  q2 = synthesize_driver(q2, "b").program;
  CampaignOptions two;
  two.budget_execs = 501;
  CoverageReport rr = run_campaign(q2, {"__driver_a", "__driver_b"}, two);
  CHECK(rr.total_execs() == 501);
  CHECK(rr.drivers.at("__driver_a").execs == 251);
  CHECK(rr.drivers.at("__driver_b").execs == 250);
}
