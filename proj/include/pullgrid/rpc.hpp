#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "pullgrid/errors.hpp"

namespace pullgrid::rpc {

/// XML-RPC value subset: int, double, string, boolean, array, struct.
/// No base64 or datetime — every message in this system fits the subset,
/// and binary payloads travel as base64 text inside ordinary strings.
class Value {
 public:
  using Array = std::vector<Value>;
  // std::map keeps keys in lexicographic order, which makes encodings
  // byte-deterministic.
  using Struct = std::map<std::string, Value>;

  Value() : v_(std::string()) {}
  Value(int32_t i) : v_(i) {}
  Value(double d) : v_(d) {}
  Value(bool b) : v_(b) {}
  Value(const char* s) : v_(std::string(s)) {}
  Value(std::string s) : v_(std::move(s)) {}
  Value(Array a) : v_(std::move(a)) {}
  Value(Struct m) : v_(std::move(m)) {}

  bool is_int() const { return std::holds_alternative<int32_t>(v_); }
  bool is_double() const { return std::holds_alternative<double>(v_); }
  bool is_string() const { return std::holds_alternative<std::string>(v_); }
  bool is_bool() const { return std::holds_alternative<bool>(v_); }
  bool is_array() const { return std::holds_alternative<Array>(v_); }
  bool is_struct() const { return std::holds_alternative<Struct>(v_); }

  int32_t as_int() const;
  double as_double() const;  // accepts int too
  const std::string& as_string() const;
  bool as_bool() const;
  const Array& as_array() const;
  const Struct& as_struct() const;
  Array& mutable_array();
  Struct& mutable_struct();

  /// Struct member access; throws Error(MissingField) when absent.
  const Value& at(const std::string& key) const;
  const Value* find(const std::string& key) const;

  bool operator==(const Value&) const = default;

  int depth() const;

 private:
  std::variant<int32_t, double, std::string, bool, Array, Struct> v_;
};

constexpr int kMaxValueDepth = 32;

struct Call {
  std::string method;
  std::vector<Value> params;

  bool operator==(const Call&) const = default;
};

struct Fault {
  int32_t code = 0;
  std::string message;

  bool operator==(const Fault&) const = default;
};

/// Either a value or a fault, never both.
class Reply {
 public:
  static Reply ok(Value v) { return Reply(std::move(v)); }
  static Reply fault(int32_t code, std::string message) {
    Reply r;
    r.v_ = Fault{code, std::move(message)};
    return r;
  }

  bool is_fault() const { return std::holds_alternative<Fault>(v_); }
  const Value& value() const { return std::get<Value>(v_); }
  const Fault& fault() const { return std::get<Fault>(v_); }

  bool operator==(const Reply&) const = default;

 private:
  Reply() = default;
  explicit Reply(Value v) : v_(std::move(v)) {}
  std::variant<Value, Fault> v_;
};

// Codec pairs. Encoding is deterministic: identical input yields identical
// bytes. Decoding raises typed errors only (MalformedDocument,
// UnsupportedType, DepthExceeded), never crashes.
std::string encode_call(const Call& call);
Call decode_call(std::string_view bytes);
std::string encode_reply(const Reply& reply);
Reply decode_reply(std::string_view bytes);

bool valid_method_name(std::string_view name);

}  // namespace pullgrid::rpc
