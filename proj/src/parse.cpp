#include "mirfuzz/parse.hpp"

#include <cctype>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <unordered_map>

namespace mirfuzz {

namespace {

enum class Tok { Ident, Local, Global, Int, Punct, Arrow, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  uint64_t num = 0;
  int line = 1;
  int col = 1;
};

struct ParseError {
  int line;
  int col;
  std::string message;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }

  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    skip_ws();
    tok_ = Token{};
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_.kind = Tok::End;
      return;
    }
    char c = src_[pos_];
    if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
      tok_.kind = Tok::Arrow;
      take();
      take();
      return;
    }
    if (c == '%' || c == '@') {
      take();
      tok_.kind = c == '%' ? Tok::Local : Tok::Global;
      tok_.text = lex_ident();
      if (tok_.text.empty())
        throw ParseError{tok_.line, tok_.col, "expected identifier after '" + std::string(1, c) + "'"};
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      tok_.kind = Tok::Ident;
      tok_.text = lex_ident();
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-') {
      tok_.kind = Tok::Int;
      bool neg = c == '-';
      if (neg) take();
      if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_])))
        throw ParseError{tok_.line, tok_.col, "malformed number"};
      uint64_t v = 0;
      if (pos_ + 1 < src_.size() && src_[pos_] == '0' &&
          (src_[pos_ + 1] == 'x' || src_[pos_ + 1] == 'X')) {
        take();
        take();
        bool any = false;
        while (pos_ < src_.size() && std::isxdigit(static_cast<unsigned char>(src_[pos_]))) {
          v = v * 16 + static_cast<uint64_t>(hexval(src_[pos_]));
          take();
          any = true;
        }
        if (!any) throw ParseError{tok_.line, tok_.col, "malformed hex number"};
      } else {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
          v = v * 10 + static_cast<uint64_t>(src_[pos_] - '0');
          take();
        }
      }
      tok_.num = neg ? ~v + 1 : v;
      return;
    }
    if (std::strchr("{}()[]<>,:=", c)) {
      tok_.kind = Tok::Punct;
      tok_.text = std::string(1, c);
      take();
      return;
    }
    throw ParseError{line_, col_, std::string("unexpected character '") + c + "'"};
  }

  static int hexval(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return c - 'A' + 10;
  }

  std::string lex_ident() {
    std::string s;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
        s += c;
        take();
      } else {
        break;
      }
    }
    return s;
  }

  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ';') {
        while (pos_ < src_.size() && src_[pos_] != '\n') take();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        take();
      } else {
        break;
      }
    }
  }

  void take() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  Token tok_;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) {}

  Program parse() {
    Program p;
    while (lex_.peek().kind != Tok::End) {
      const Token& t = lex_.peek();
      if (t.kind != Tok::Ident)
        throw ParseError{t.line, t.col, "expected declaration"};
      if (t.text == "type") {
        parse_type_decl(p);
      } else if (t.text == "extern") {
        parse_extern(p);
      } else if (t.text == "func") {
        parse_func(p);
      } else {
        throw ParseError{t.line, t.col, "unknown declaration '" + t.text + "'"};
      }
    }
    return p;
  }

 private:
  Token expect_punct(const char* p) {
    Token t = lex_.next();
    if (t.kind != Tok::Punct || t.text != p)
      throw ParseError{t.line, t.col, std::string("expected '") + p + "'"};
    return t;
  }

  Token expect_ident(const char* what) {
    Token t = lex_.next();
    if (t.kind != Tok::Ident) throw ParseError{t.line, t.col, std::string("expected ") + what};
    return t;
  }

  bool peek_punct(const char* p) const {
    return lex_.peek().kind == Tok::Punct && lex_.peek().text == p;
  }

  void expect_keyword(const char* kw) {
    Token t = lex_.next();
    if (t.kind != Tok::Ident || t.text != kw)
      throw ParseError{t.line, t.col, std::string("expected '") + kw + "'"};
  }

  void parse_type_decl(Program& p) {
    expect_keyword("type");
    Token name = lex_.next();
    if (name.kind != Tok::Local)
      throw ParseError{name.line, name.col, "expected %name in type declaration"};
    expect_punct("=");
    TypeDesc t = parse_type();
    if (t.kind != TypeDesc::Kind::Record)
      throw ParseError{name.line, name.col, "named type must be a record"};
    p.types.emplace_back(name.text, std::move(t));
  }

  void parse_extern(Program& p) {
    expect_keyword("extern");
    Token name = lex_.next();
    if (name.kind != Tok::Global)
      throw ParseError{name.line, name.col, "expected @name in extern declaration"};
    ExternDecl e;
    e.name = name.text;
    expect_punct("(");
    if (!peek_punct(")")) {
      e.params.push_back(parse_type());
      while (peek_punct(",")) {
        lex_.next();
        e.params.push_back(parse_type());
      }
    }
    expect_punct(")");
    expect_arrow();
    e.ret = parse_type();
    if (lex_.peek().kind == Tok::Ident && lex_.peek().text == "memory") {
      lex_.next();
      e.memory = true;
    }
    p.externs.push_back(std::move(e));
  }

  void expect_arrow() {
    Token t = lex_.next();
    if (t.kind != Tok::Arrow) throw ParseError{t.line, t.col, "expected '->'"};
  }

  TypeDesc parse_type() {
    Token t = lex_.next();
    if (t.kind == Tok::Local) return TypeDesc::named(t.text);
    if (t.kind == Tok::Punct && t.text == "{") {
      std::vector<TypeDesc> fields;
      fields.push_back(parse_type());
      while (peek_punct(",")) {
        lex_.next();
        fields.push_back(parse_type());
      }
      expect_punct("}");
      return TypeDesc::record(std::move(fields));
    }
    if (t.kind == Tok::Punct && t.text == "[") {
      Token n = lex_.next();
      if (n.kind != Tok::Int) throw ParseError{n.line, n.col, "expected array length"};
      expect_keyword("x");
      TypeDesc elem = parse_type();
      expect_punct("]");
      return TypeDesc::array(std::move(elem), n.num);
    }
    if (t.kind != Tok::Ident) throw ParseError{t.line, t.col, "expected type"};
    if (t.text == "void") return TypeDesc::void_type();
    if (t.text == "i8") return TypeDesc::scalar(8);
    if (t.text == "i16") return TypeDesc::scalar(16);
    if (t.text == "i32") return TypeDesc::scalar(32);
    if (t.text == "i64") return TypeDesc::scalar(64);
    if (t.text == "ptr") {
      if (peek_punct("<")) {
        lex_.next();
        TypeDesc pointee = parse_type();
        expect_punct(">");
        return TypeDesc::ptr(std::move(pointee));
      }
      return TypeDesc::opaque_ptr();
    }
    if (t.text == "fn") {
      expect_punct("(");
      std::vector<TypeDesc> params;
      if (!peek_punct(")")) {
        params.push_back(parse_type());
        while (peek_punct(",")) {
          lex_.next();
          params.push_back(parse_type());
        }
      }
      expect_punct(")");
      expect_arrow();
      TypeDesc ret = parse_type();
      return TypeDesc::func_ref(std::move(params), std::move(ret));
    }
    throw ParseError{t.line, t.col, "unknown type '" + t.text + "'"};
  }

  Operand parse_value() {
    Token t = lex_.next();
    if (t.kind == Tok::Local) return Operand::val(t.text);
    if (t.kind == Tok::Int) return Operand::lit(t.num);
    throw ParseError{t.line, t.col, "expected value"};
  }

  std::string parse_label() {
    Token t = lex_.next();
    if (t.kind != Tok::Ident) throw ParseError{t.line, t.col, "expected label"};
    return t.text;
  }

  void parse_func(Program& p) {
    expect_keyword("func");
    Token name = lex_.next();
    if (name.kind != Tok::Global)
      throw ParseError{name.line, name.col, "expected @name in func declaration"};
    Function f;
    f.name = name.text;
    expect_punct("(");
    if (!peek_punct(")")) {
      f.params.push_back(parse_param());
      while (peek_punct(",")) {
        lex_.next();
        f.params.push_back(parse_param());
      }
    }
    expect_punct(")");
    expect_arrow();
    f.ret = parse_type();
    expect_punct("{");
    while (!peek_punct("}")) {
      f.blocks.push_back(parse_block());
    }
    expect_punct("}");
    p.funcs.push_back(std::move(f));
  }

  Param parse_param() {
    Token n = lex_.next();
    if (n.kind != Tok::Local) throw ParseError{n.line, n.col, "expected %name parameter"};
    expect_punct(":");
    return Param{n.text, parse_type()};
  }

  Block parse_block() {
    Token label = expect_ident("block label");
    expect_punct(":");
    Block b;
    b.label = label.text;
    while (true) {
      const Token& t = lex_.peek();
      if (t.kind == Tok::Punct && t.text == "}") break;
      if (t.kind == Tok::End) throw ParseError{t.line, t.col, "unterminated function body"};
      // A block label is an identifier immediately followed by ':'.
      if (t.kind == Tok::Ident && !is_opcode(t.text)) break;
      Instruction inst = parse_instruction();
      bool term = inst.is_terminator();
      b.insts.push_back(std::move(inst));
      if (term) break;
    }
    return b;
  }

  static bool is_opcode(const std::string& s) {
    static const std::unordered_map<std::string, int> ops = {
        {"load", 0},     {"store", 0},    {"gep", 0},       {"call", 0},
        {"cmp", 0},      {"br", 0},       {"jmp", 0},       {"ret", 0},
        {"const", 0},    {"add", 0},      {"sub", 0},       {"mul", 0},
        {"alloc", 0},    {"free", 0},     {"memcpy", 0},    {"memset", 0},
        {"trap", 0},     {"loadhook", 0}, {"storehook", 0}, {"rangeload", 0},
        {"rangestore", 0}};
    return ops.count(s) > 0;
  }

  Instruction parse_instruction() {
    Instruction inst;
    if (lex_.peek().kind == Tok::Local) {
      Token r = lex_.next();
      inst.result = r.text;
      expect_punct("=");
    }
    Token opTok = expect_ident("opcode");
    inst.line = opTok.line;
    const std::string& op = opTok.text;

    auto need_result = [&](bool want) {
      if (want && inst.result.empty())
        throw ParseError{opTok.line, opTok.col, op + " requires a result"};
      if (!want && !inst.result.empty())
        throw ParseError{opTok.line, opTok.col, op + " does not produce a result"};
    };

    if (op == "load") {
      need_result(true);
      inst.op = Opcode::Load;
      inst.has_type = true;
      inst.type = parse_type();
      expect_punct(",");
      inst.args.push_back(parse_value());
    } else if (op == "store") {
      need_result(false);
      inst.op = Opcode::Store;
      inst.has_type = true;
      inst.type = parse_type();
      inst.args.push_back(parse_value());
      expect_punct(",");
      inst.args.push_back(parse_value());
    } else if (op == "gep") {
      need_result(true);
      inst.op = Opcode::Gep;
      inst.has_type = true;
      inst.type = parse_type();
      expect_punct(",");
      inst.args.push_back(parse_value());
      expect_punct(",");
      inst.args.push_back(parse_value());
    } else if (op == "call") {
      inst.op = Opcode::Call;
      Token target = lex_.next();
      if (target.kind == Tok::Global) {
        inst.callee = target.text;
      } else if (target.kind == Tok::Local) {
        inst.indirect_call = true;
        inst.args.push_back(Operand::val(target.text));
      } else {
        throw ParseError{target.line, target.col, "expected call target"};
      }
      expect_punct("(");
      if (!peek_punct(")")) {
        inst.args.push_back(parse_value());
        while (peek_punct(",")) {
          lex_.next();
          inst.args.push_back(parse_value());
        }
      }
      expect_punct(")");
    } else if (op == "cmp") {
      need_result(true);
      inst.op = Opcode::Cmp;
      Token c = expect_ident("comparison condition");
      if (c.text == "eq")
        inst.cond = CmpCond::Eq;
      else if (c.text == "ne")
        inst.cond = CmpCond::Ne;
      else if (c.text == "lt")
        inst.cond = CmpCond::Lt;
      else if (c.text == "le")
        inst.cond = CmpCond::Le;
      else if (c.text == "gt")
        inst.cond = CmpCond::Gt;
      else if (c.text == "ge")
        inst.cond = CmpCond::Ge;
      else
        throw ParseError{c.line, c.col, "unknown comparison '" + c.text + "'"};
      inst.args.push_back(parse_value());
      expect_punct(",");
      inst.args.push_back(parse_value());
    } else if (op == "br") {
      need_result(false);
      inst.op = Opcode::Br;
      inst.args.push_back(parse_value());
      expect_punct(",");
      inst.labels.push_back(parse_label());
      expect_punct(",");
      inst.labels.push_back(parse_label());
    } else if (op == "jmp") {
      need_result(false);
      inst.op = Opcode::Jmp;
      inst.labels.push_back(parse_label());
    } else if (op == "ret") {
      need_result(false);
      inst.op = Opcode::Ret;
      // Optional operand: only consumed when it appears on the same line.
      const Token& n = lex_.peek();
      if (n.line == opTok.line && (n.kind == Tok::Local || n.kind == Tok::Int))
        inst.args.push_back(parse_value());
    } else if (op == "const") {
      need_result(true);
      inst.op = Opcode::Const;
      inst.has_type = true;
      inst.type = parse_type();
      Token v = lex_.next();
      if (v.kind != Tok::Int) throw ParseError{v.line, v.col, "expected constant literal"};
      inst.args.push_back(Operand::lit(v.num));
    } else if (op == "add" || op == "sub" || op == "mul") {
      need_result(true);
      inst.op = op == "add" ? Opcode::Add : op == "sub" ? Opcode::Sub : Opcode::Mul;
      inst.args.push_back(parse_value());
      expect_punct(",");
      inst.args.push_back(parse_value());
    } else if (op == "alloc") {
      need_result(true);
      inst.op = Opcode::Alloc;
      inst.has_type = true;
      inst.type = parse_type();
    } else if (op == "free") {
      need_result(false);
      inst.op = Opcode::Free;
      inst.args.push_back(parse_value());
    } else if (op == "memcpy" || op == "memset") {
      need_result(false);
      inst.op = op == "memcpy" ? Opcode::Memcpy : Opcode::Memset;
      inst.args.push_back(parse_value());
      expect_punct(",");
      inst.args.push_back(parse_value());
      expect_punct(",");
      inst.args.push_back(parse_value());
    } else if (op == "trap") {
      need_result(false);
      inst.op = Opcode::Trap;
    } else if (op == "loadhook" || op == "storehook") {
      need_result(false);
      inst.op = op == "loadhook" ? Opcode::LoadHook : Opcode::StoreHook;
      inst.has_type = true;
      inst.type = parse_type();
      expect_punct(",");
      inst.args.push_back(parse_value());
    } else if (op == "rangeload" || op == "rangestore") {
      need_result(false);
      inst.op = op == "rangeload" ? Opcode::RangeLoad : Opcode::RangeStore;
      inst.args.push_back(parse_value());
      expect_punct(",");
      inst.args.push_back(parse_value());
    } else {
      throw ParseError{opTok.line, opTok.col, "unknown opcode '" + op + "'"};
    }
    return inst;
  }

  Lexer lex_;
};

}  // namespace

ParseResult parse_module(std::string_view text) {
  ParseResult result;
  Program p;
  try {
    p = Parser(text).parse();
  } catch (const ParseError& e) {
    result.diagnostics.push_back({e.line, e.col, e.message});
    return result;
  }
  result.diagnostics = validate(p);
  if (result.diagnostics.empty()) result.program = std::move(p);
  return result;
}

}  // namespace mirfuzz
