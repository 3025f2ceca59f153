#include "pullgrid/rpc.hpp"

#include <cerrno>
#include <cstdlib>

#include "pullgrid/util.hpp"
#include "pullgrid/xml.hpp"

namespace pullgrid::rpc {

namespace {

[[noreturn]] void type_error(const char* want) {
  throw Error(ErrorCode::MalformedDocument,
              std::string("value is not of type ") + want);
}

}  // namespace

int32_t Value::as_int() const {
  if (!is_int()) type_error("int");
  return std::get<int32_t>(v_);
}

double Value::as_double() const {
  if (is_int()) return std::get<int32_t>(v_);
  if (!is_double()) type_error("double");
  return std::get<double>(v_);
}

const std::string& Value::as_string() const {
  if (!is_string()) type_error("string");
  return std::get<std::string>(v_);
}

bool Value::as_bool() const {
  if (!is_bool()) type_error("boolean");
  return std::get<bool>(v_);
}

const Value::Array& Value::as_array() const {
  if (!is_array()) type_error("array");
  return std::get<Array>(v_);
}

const Value::Struct& Value::as_struct() const {
  if (!is_struct()) type_error("struct");
  return std::get<Struct>(v_);
}

Value::Array& Value::mutable_array() {
  if (!is_array()) type_error("array");
  return std::get<Array>(v_);
}

Value::Struct& Value::mutable_struct() {
  if (!is_struct()) type_error("struct");
  return std::get<Struct>(v_);
}

const Value& Value::at(const std::string& key) const {
  const Value* v = find(key);
  if (!v) throw Error(ErrorCode::MissingField, key);
  return *v;
}

const Value* Value::find(const std::string& key) const {
  if (!is_struct()) type_error("struct");
  const auto& m = std::get<Struct>(v_);
  auto it = m.find(key);
  return it == m.end() ? nullptr : &it->second;
}

int Value::depth() const {
  if (is_array()) {
    int d = 0;
    for (const auto& e : as_array()) d = std::max(d, e.depth());
    return d + 1;
  }
  if (is_struct()) {
    int d = 0;
    for (const auto& [k, e] : as_struct()) d = std::max(d, e.depth());
    return d + 1;
  }
  return 1;
}

bool valid_method_name(std::string_view name) {
  if (name.empty()) return false;
  char c0 = name[0];
  if (!((c0 >= 'A' && c0 <= 'Z') || (c0 >= 'a' && c0 <= 'z'))) return false;
  for (char c : name) {
    if (!((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
          (c >= '0' && c <= '9') || c == '_' || c == '.'))
      return false;
  }
  return true;
}

// ----------------------------------------------------------- encoding ----

namespace {

void check_depth(const Value& v) {
  if (v.depth() > kMaxValueDepth)
    throw Error(ErrorCode::DepthExceeded, "value nesting exceeds 32");
}

void encode_value(xml::Writer& w, const Value& v) {
  w.open("value");
  if (v.is_int()) {
    w.element("int", std::to_string(v.as_int()));
  } else if (v.is_double()) {
    w.element("double", format_double(v.as_double()));
  } else if (v.is_bool()) {
    w.element("boolean", v.as_bool() ? "1" : "0");
  } else if (v.is_string()) {
    w.element("string", v.as_string());
  } else if (v.is_array()) {
    w.open("array");
    w.open("data");
    for (const auto& e : v.as_array()) encode_value(w, e);
    w.close("data");
    w.close("array");
  } else {
    w.open("struct");
    for (const auto& [key, member] : v.as_struct()) {
      w.open("member");
      w.element("name", key);
      encode_value(w, member);
      w.close("member");
    }
    w.close("struct");
  }
  w.close("value");
}

Value decode_value(const xml::Node& value_node, int depth) {
  if (depth > kMaxValueDepth)
    throw Error(ErrorCode::DepthExceeded, "value nesting exceeds 32");
  if (value_node.tag != "value")
    throw Error(ErrorCode::MalformedDocument, "expected <value>");
  if (value_node.children.empty())
    return Value(value_node.text);  // untagged value means string
  if (value_node.children.size() != 1)
    throw Error(ErrorCode::MalformedDocument, "multiple children in <value>");

  const xml::Node& n = value_node.children[0];
  if (n.tag == "int" || n.tag == "i4") {
    errno = 0;
    char* end = nullptr;
    std::string text = trim(n.text);
    long long parsed = std::strtoll(text.c_str(), &end, 10);
    if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE ||
        parsed < INT32_MIN || parsed > INT32_MAX)
      throw Error(ErrorCode::MalformedDocument, "bad int '" + n.text + "'");
    return Value(static_cast<int32_t>(parsed));
  }
  if (n.tag == "double") {
    errno = 0;
    char* end = nullptr;
    std::string text = trim(n.text);
    double parsed = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size())
      throw Error(ErrorCode::MalformedDocument, "bad double '" + n.text + "'");
    return Value(parsed);
  }
  if (n.tag == "boolean") {
    std::string text = trim(n.text);
    if (text == "1") return Value(true);
    if (text == "0") return Value(false);
    throw Error(ErrorCode::MalformedDocument, "bad boolean '" + n.text + "'");
  }
  if (n.tag == "string") {
    if (!n.children.empty())
      throw Error(ErrorCode::MalformedDocument, "elements inside <string>");
    return Value(n.text);
  }
  if (n.tag == "array") {
    const xml::Node& data = n.require("data");
    Value::Array arr;
    for (const auto& c : data.children) arr.push_back(decode_value(c, depth + 1));
    return Value(std::move(arr));
  }
  if (n.tag == "struct") {
    Value::Struct m;
    for (const auto& member : n.children) {
      if (member.tag != "member")
        throw Error(ErrorCode::MalformedDocument, "expected <member>");
      const xml::Node& name = member.require("name");
      const xml::Node& val = member.require("value");
      auto [it, inserted] = m.emplace(name.text, decode_value(val, depth + 1));
      if (!inserted)
        throw Error(ErrorCode::MalformedDocument,
                    "duplicate struct key '" + name.text + "'");
    }
    return Value(std::move(m));
  }
  throw Error(ErrorCode::UnsupportedType, "<" + n.tag + ">");
}

std::vector<Value> decode_params(const xml::Node& parent) {
  std::vector<Value> out;
  const xml::Node* params = parent.child("params");
  if (!params) return out;
  for (const auto& p : params->children) {
    if (p.tag != "param")
      throw Error(ErrorCode::MalformedDocument, "expected <param>");
    out.push_back(decode_value(p.require("value"), 1));
  }
  return out;
}

}  // namespace

std::string encode_call(const Call& call) {
  if (!valid_method_name(call.method))
    throw Error(ErrorCode::MalformedDocument,
                "bad method name '" + call.method + "'");
  for (const auto& p : call.params) check_depth(p);
  xml::Writer w;
  w.raw("<?xml version=\"1.0\"?>");
  w.open("methodCall");
  w.element("methodName", call.method);
  w.open("params");
  for (const auto& p : call.params) {
    w.open("param");
    encode_value(w, p);
    w.close("param");
  }
  w.close("params");
  w.close("methodCall");
  return w.take();
}

// A depth-32 value costs up to 3 XML levels per nesting level (value/array/
// data or value/struct/member), plus the document envelope. The XML parser
// limit must clear that so every encodable value also decodes; the value-level
// depth guard stays the protocol limit.
constexpr int kXmlParseDepth = 3 * kMaxValueDepth + 8;

Call decode_call(std::string_view bytes) {
  xml::Node root = xml::parse(bytes, kXmlParseDepth);
  if (root.tag != "methodCall")
    throw Error(ErrorCode::MalformedDocument, "expected <methodCall>");
  Call call;
  call.method = root.require("methodName").text;
  call.method = trim(call.method);
  if (!valid_method_name(call.method))
    throw Error(ErrorCode::MalformedDocument,
                "bad method name '" + call.method + "'");
  call.params = decode_params(root);
  return call;
}

std::string encode_reply(const Reply& reply) {
  xml::Writer w;
  w.raw("<?xml version=\"1.0\"?>");
  w.open("methodResponse");
  if (reply.is_fault()) {
    w.open("fault");
    Value::Struct f;
    f.emplace("faultCode", Value(reply.fault().code));
    f.emplace("faultString", Value(reply.fault().message));
    encode_value(w, Value(std::move(f)));
    w.close("fault");
  } else {
    check_depth(reply.value());
    w.open("params");
    w.open("param");
    encode_value(w, reply.value());
    w.close("param");
    w.close("params");
  }
  w.close("methodResponse");
  return w.take();
}

Reply decode_reply(std::string_view bytes) {
  xml::Node root = xml::parse(bytes, kXmlParseDepth);
  if (root.tag != "methodResponse")
    throw Error(ErrorCode::MalformedDocument, "expected <methodResponse>");
  if (const xml::Node* fault = root.child("fault")) {
    Value v = decode_value(fault->require("value"), 1);
    const Value& code = v.at("faultCode");
    const Value& msg = v.at("faultString");
    return Reply::fault(code.as_int(), msg.as_string());
  }
  auto params = decode_params(root);
  if (params.size() != 1)
    throw Error(ErrorCode::MalformedDocument,
                "methodResponse must carry exactly one param");
  return Reply::ok(std::move(params[0]));
}

}  // namespace pullgrid::rpc
