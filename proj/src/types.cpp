#include "mirfuzz/types.hpp"

#include <algorithm>

namespace mirfuzz {

TypeDesc TypeDesc::void_type() { return TypeDesc{}; }

TypeDesc TypeDesc::scalar(int bits) {
  TypeDesc t;
  t.kind = Kind::Scalar;
  t.width_bits = bits;
  return t;
}

TypeDesc TypeDesc::ptr(TypeDesc pointee) {
  TypeDesc t;
  t.kind = Kind::Ptr;
  t.sub.push_back(std::move(pointee));
  return t;
}

TypeDesc TypeDesc::opaque_ptr() {
  TypeDesc inner;
  inner.kind = Kind::Opaque;
  return ptr(std::move(inner));
}

TypeDesc TypeDesc::record(std::vector<TypeDesc> fields) {
  TypeDesc t;
  t.kind = Kind::Record;
  t.sub = std::move(fields);
  return t;
}

TypeDesc TypeDesc::array(TypeDesc elem, uint64_t n) {
  TypeDesc t;
  t.kind = Kind::Array;
  t.count = n;
  t.sub.push_back(std::move(elem));
  return t;
}

TypeDesc TypeDesc::func_ref(std::vector<TypeDesc> params, TypeDesc ret) {
  TypeDesc t;
  t.kind = Kind::FuncRef;
  t.sub = std::move(params);
  t.sub.push_back(std::move(ret));
  return t;
}

TypeDesc TypeDesc::named(std::string n) {
  TypeDesc t;
  t.kind = Kind::Named;
  t.name = std::move(n);
  return t;
}

const TypeDesc* lookup_type(const TypeTable& table, std::string_view name) {
  for (const auto& [n, t] : table) {
    if (n == name) return &t;
  }
  return nullptr;
}

const TypeDesc* resolve_type(const TypeDesc& t, const TypeTable& table) {
  if (t.kind != TypeDesc::Kind::Named) return &t;
  return lookup_type(table, t.name);
}

static uint64_t round_up(uint64_t v, uint64_t align) {
  if (align <= 1) return v;
  uint64_t rem = v % align;
  return rem == 0 ? v : v + (align - rem);
}

std::optional<uint64_t> type_size(const TypeDesc& t, const TypeTable& table) {
  switch (t.kind) {
    case TypeDesc::Kind::Void:
    case TypeDesc::Kind::Opaque:
      return std::nullopt;
    case TypeDesc::Kind::Scalar:
      return static_cast<uint64_t>(t.width_bits / 8);
    case TypeDesc::Kind::Ptr:
    case TypeDesc::Kind::FuncRef:
      return 8;
    case TypeDesc::Kind::Array: {
      auto elem = type_size(t.sub.front(), table);
      if (!elem) return std::nullopt;
      return t.count * *elem;
    }
    case TypeDesc::Kind::Record: {
      uint64_t offset = 0;
      uint64_t max_align = 1;
      for (const auto& field : t.sub) {
        auto fsize = type_size(field, table);
        auto falign = type_align(field, table);
        if (!fsize || !falign) return std::nullopt;
        offset = round_up(offset, *falign);
        offset += *fsize;
        max_align = std::max(max_align, *falign);
      }
      return round_up(offset, max_align);
    }
    case TypeDesc::Kind::Named: {
      const TypeDesc* resolved = lookup_type(table, t.name);
      if (!resolved) return std::nullopt;
      return type_size(*resolved, table);
    }
  }
  return std::nullopt;
}

std::optional<uint64_t> type_align(const TypeDesc& t, const TypeTable& table) {
  auto size = type_size(t, table);
  if (!size) return std::nullopt;
  return std::max<uint64_t>(1, std::min<uint64_t>(*size, 8));
}

std::optional<std::vector<uint64_t>> record_field_offsets(const TypeDesc& rec,
                                                          const TypeTable& table) {
  const TypeDesc* r = resolve_type(rec, table);
  if (!r || r->kind != TypeDesc::Kind::Record) return std::nullopt;
  std::vector<uint64_t> offsets;
  uint64_t offset = 0;
  for (const auto& field : r->sub) {
    auto fsize = type_size(field, table);
    auto falign = type_align(field, table);
    if (!fsize || !falign) return std::nullopt;
    offset = round_up(offset, *falign);
    offsets.push_back(offset);
    offset += *fsize;
  }
  return offsets;
}

std::string type_to_string(const TypeDesc& t) {
  switch (t.kind) {
    case TypeDesc::Kind::Void:
      return "void";
    case TypeDesc::Kind::Opaque:
      return "opaque";
    case TypeDesc::Kind::Scalar:
      return "i" + std::to_string(t.width_bits);
    case TypeDesc::Kind::Ptr:
      if (t.pointee().kind == TypeDesc::Kind::Opaque) return "ptr";
      return "ptr<" + type_to_string(t.pointee()) + ">";
    case TypeDesc::Kind::Array:
      return "[" + std::to_string(t.count) + " x " + type_to_string(t.sub.front()) + "]";
    case TypeDesc::Kind::Record: {
      std::string s = "{ ";
      for (size_t i = 0; i < t.sub.size(); ++i) {
        if (i) s += ", ";
        s += type_to_string(t.sub[i]);
      }
      return s + " }";
    }
    case TypeDesc::Kind::FuncRef: {
      std::string s = "fn(";
      for (size_t i = 0; i + 1 < t.sub.size(); ++i) {
        if (i) s += ", ";
        s += type_to_string(t.sub[i]);
      }
      return s + ") -> " + type_to_string(t.sub.back());
    }
    case TypeDesc::Kind::Named:
      return "%" + t.name;
  }
  return "?";
}

}  // namespace mirfuzz
