#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mirfuzz {

// Semantic type of a mini-IR value. Types form a finite tree; named record
// references resolve through the module's type table, which lets recursive
// structures exist behind pointer indirection.
struct TypeDesc {
  enum class Kind { Void, Scalar, Ptr, Record, Array, FuncRef, Opaque, Named };

  Kind kind = Kind::Void;
  int width_bits = 0;          // Scalar: 8, 16, 32 or 64
  uint64_t count = 0;          // Array element count
  std::string name;            // Named record reference
  // Ptr: [pointee]; Record: fields; Array: [elem]; FuncRef: params + return (last).
  std::vector<TypeDesc> sub;

  static TypeDesc void_type();
  static TypeDesc scalar(int bits);
  static TypeDesc ptr(TypeDesc pointee);
  static TypeDesc opaque_ptr();
  static TypeDesc record(std::vector<TypeDesc> fields);
  static TypeDesc array(TypeDesc elem, uint64_t n);
  static TypeDesc func_ref(std::vector<TypeDesc> params, TypeDesc ret);
  static TypeDesc named(std::string n);

  bool is_void() const { return kind == Kind::Void; }
  bool is_scalar() const { return kind == Kind::Scalar; }
  bool is_ptr() const { return kind == Kind::Ptr; }
  bool is_record() const { return kind == Kind::Record; }
  bool is_array() const { return kind == Kind::Array; }
  bool is_func_ref() const { return kind == Kind::FuncRef; }
  bool is_named() const { return kind == Kind::Named; }
  bool is_aggregate() const { return is_record() || is_array() || is_named(); }

  // Ptr accessors.
  const TypeDesc& pointee() const { return sub.front(); }

  bool operator==(const TypeDesc&) const = default;
};

// Named record declarations, in declaration order.
using TypeTable = std::vector<std::pair<std::string, TypeDesc>>;

const TypeDesc* lookup_type(const TypeTable& table, std::string_view name);

// Resolves one level of Named indirection. Returns nullptr on a dangling name.
const TypeDesc* resolve_type(const TypeDesc& t, const TypeTable& table);

// Layout: scalars are width/8, pointers and function references 8 bytes,
// arrays count * elem, records sum their fields with each field aligned to
// min(field size, 8) and the total padded to the max field alignment.
// Unsized types (void, opaque) yield nullopt.
std::optional<uint64_t> type_size(const TypeDesc& t, const TypeTable& table);
std::optional<uint64_t> type_align(const TypeDesc& t, const TypeTable& table);
std::optional<std::vector<uint64_t>> record_field_offsets(const TypeDesc& rec,
                                                          const TypeTable& table);

std::string type_to_string(const TypeDesc& t);

}  // namespace mirfuzz
