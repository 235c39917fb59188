#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "mirfuzz/parse.hpp"
#include "mirfuzz/print.hpp"
#include "mirfuzz/types.hpp"

using namespace mirfuzz;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Program parse_ok(const std::string& text) {
  ParseResult r = parse_module(text);
  for (const auto& d : r.diagnostics) {
    CAPTURE(d.line);
    CAPTURE(d.message);
  }
  REQUIRE(r.ok());
  return *r.program;
}

std::vector<Diagnostic> parse_bad(const std::string& text) {
  ParseResult r = parse_module(text);
  REQUIRE_FALSE(r.ok());
  return r.diagnostics;
}

bool has_message(const std::vector<Diagnostic>& ds, const std::string& needle) {
  for (const auto& d : ds) {
    if (d.message.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("type layout follows the documented rules") {
  TypeTable table;
  CHECK(type_size(TypeDesc::scalar(8), table) == 1);
  CHECK(type_size(TypeDesc::scalar(32), table) == 4);
  CHECK(type_size(TypeDesc::opaque_ptr(), table) == 8);
  CHECK(type_size(TypeDesc::ptr(TypeDesc::scalar(8)), table) == 8);
  CHECK(type_size(TypeDesc::array(TypeDesc::scalar(8), 10), table) == 10);
  CHECK(type_size(TypeDesc::array(TypeDesc::scalar(32), 3), table) == 12);
  // {i32, i64}: i64 aligns to 8 -> field offsets 0, 8; total 16.
  TypeDesc rec = TypeDesc::record({TypeDesc::scalar(32), TypeDesc::scalar(64)});
  CHECK(type_size(rec, table) == 16);
  auto offs = record_field_offsets(rec, table);
  REQUIRE(offs.has_value());
  CHECK(*offs == std::vector<uint64_t>{0, 8});
  // {i8, i16, i8}: offsets 0, 2, 4; size padded to alignment 2 -> 6.
  TypeDesc rec2 =
      TypeDesc::record({TypeDesc::scalar(8), TypeDesc::scalar(16), TypeDesc::scalar(8)});
  CHECK(record_field_offsets(rec2, table) == std::vector<uint64_t>{0, 2, 4});
  CHECK(type_size(rec2, table) == 6);
  // Unsized types.
  CHECK_FALSE(type_size(TypeDesc::void_type(), table).has_value());
  CHECK(type_size(TypeDesc::func_ref({}, TypeDesc::void_type()), table) == 8);
}

TEST_CASE("named records resolve through the type table") {
  Program p = parse_ok(
      "type %header = { i32, i32, i64 }\n"
      "func @f(%h: ptr<%header>) -> i64 {\n"
      "entry:\n"
      "  %q = gep %header, %h, 2\n"
      "  %v = load i64, %q\n"
      "  ret %v\n"
      "}\n");
  const TypeDesc* t = lookup_type(p.types, "header");
  REQUIRE(t != nullptr);
  CHECK(type_size(*t, p.types) == 16);
  CHECK(record_field_offsets(*t, p.types) == std::vector<uint64_t>{0, 4, 8});
  // Resolution of a Named reference gives the same layout.
  TypeDesc named = TypeDesc::named("header");
  CHECK(type_size(named, p.types) == 16);
}

TEST_CASE("parser handles literals, comments, and every opcode") {
  Program p = parse_ok(
      "; leading comment\n"
      "func @f(%p: ptr<i8>, %n: i64) -> i64 {\n"
      "entry:\n"
      "  %a = const i64 0xFF   ; hex\n"
      "  %b = const i64 -1\n"
      "  %c = add %a, %b\n"
      "  %d = sub %c, 2\n"
      "  %e = mul %d, 3\n"
      "  %buf = alloc [4 x i8]\n"
      "  store i8 %e, %buf\n"
      "  %v = load i8, %buf\n"
      "  memset %buf, 0, 4\n"
      "  memcpy %buf, %p, 2\n"
      "  free %buf\n"
      "  %cmp = cmp le %v, %n\n"
      "  br %cmp, yes, no\n"
      "yes:\n"
      "  jmp no\n"
      "no:\n"
      "  ret %v\n"
      "}\n");
  const Function& f = p.funcs[0];
  CHECK(f.blocks.size() == 3);
  CHECK(f.blocks[0].insts[0].args[0].literal == 0xFF);
  CHECK(f.blocks[0].insts[1].args[0].literal == ~0ull);  // -1 as two's complement
}

TEST_CASE("ret operand binds only on the same line") {
  Program p = parse_ok(
      "func @f() -> void {\n"
      "entry:\n"
      "  ret\n"
      "}\n"
      "func @g() -> i64 {\n"
      "entry:\n"
      "  ret 7\n"
      "}\n");
  CHECK(p.funcs[0].blocks[0].insts[0].args.empty());
  CHECK(p.funcs[1].blocks[0].insts[0].args[0].literal == 7);
}

TEST_CASE("syntax errors carry line information and abort early") {
  auto ds = parse_bad("func @f() -> i64 {\nentry:\n  %x = bogus 1\n  ret %x\n}\n");
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].line == 3);
  CHECK(has_message(ds, "bogus"));
}

TEST_CASE("semantic diagnostics accumulate") {
  auto ds = parse_bad(
      "func @f() -> i64 {\n"
      "entry:\n"
      "  %x = const i64 1\n"
      "  %x = const i64 2\n"
      "  jmp nowhere\n"
      "}\n");
  CHECK(has_message(ds, "duplicate"));
  CHECK(has_message(ds, "nowhere"));
}

TEST_CASE("validator rejects structural mistakes") {
  // Missing terminator.
  CHECK(has_message(parse_bad("func @f() -> i64 {\nentry:\n  %x = const i64 1\n}\n"),
                    "terminator"));
  // Unknown callee.
  CHECK(has_message(
      parse_bad("func @f() -> i64 {\nentry:\n  %r = call @ghost()\n  ret %r\n}\n"),
      "ghost"));
  // Unknown value.
  CHECK(has_message(parse_bad("func @f() -> i64 {\nentry:\n  ret %miss\n}\n"), "miss"));
  // gep on a scalar base.
  CHECK(has_message(parse_bad("func @f(%p: ptr<i8>) -> i64 {\nentry:\n"
                              "  %q = gep i8, %p, 1\n  %v = load i8, %q\n  ret %v\n}\n"),
                    "record or array"));
  // Record gep index out of range.
  CHECK(has_message(parse_bad("type %t = { i32, i32 }\n"
                              "func @f(%p: ptr<%t>) -> i64 {\nentry:\n"
                              "  %q = gep %t, %p, 5\n  %v = load i32, %q\n  ret %v\n}\n"),
                    "index"));
  // Dangling named type.
  CHECK(has_message(
      parse_bad("func @f(%p: ptr<%ghost>) -> void {\nentry:\n  ret\n}\n"), "ghost"));
  // Type cycle without pointer indirection.
  CHECK(has_message(parse_bad("type %a = { %a, i32 }\n"
                              "func @f() -> void {\nentry:\n  ret\n}\n"),
                    "cycle"));
}

TEST_CASE("recursive records are legal behind pointers") {
  parse_ok(
      "type %node = { i64, ptr<%node> }\n"
      "func @f(%n: ptr<%node>) -> void {\nentry:\n  ret\n}\n");
}

TEST_CASE("render/parse round trip is idempotent on the bundled corpus") {
  for (const char* name : {"minimal.mir", "toylib.mir", "list.mir", "externs.mir"}) {
    CAPTURE(name);
    Program p1 = parse_ok(slurp(std::string(MIRFUZZ_TESTDATA) + "/" + name));
    std::string r1 = render_module(p1);
    Program p2 = parse_ok(r1);
    std::string r2 = render_module(p2);
    CHECK(r1 == r2);
    CHECK(p1 == p2);
  }
}

TEST_CASE("rendering is deterministic") {
  std::string text = slurp(std::string(MIRFUZZ_TESTDATA) + "/toylib.mir");
  Program a = parse_ok(text);
  Program b = parse_ok(text);
  CHECK(render_module(a) == render_module(b));
}

TEST_CASE("instrumentation opcodes survive the round trip") {
  Program p = parse_ok(
      "func @f(%p: ptr<i8>, %n: i64) -> void {\n"
      "entry:\n"
      "  loadhook i8, %p\n"
      "  %v = load i8, %p\n"
      "  store i8 %v, %p\n"
      "  storehook i8, %p\n"
      "  rangeload %p, %n\n"
      "  rangestore %p, %n\n"
      "  ret\n"
      "}\n");
  Program q = parse_ok(render_module(p));
  CHECK(p == q);
}
