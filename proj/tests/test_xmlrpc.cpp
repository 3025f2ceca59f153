#include <random>
#include <string>

#include "doctest.h"
#include "pullgrid/rpc.hpp"

using namespace pullgrid;
using namespace pullgrid::rpc;

namespace {

// Random value generator used by the round-trip properties. Depth-bounded so
// generated values always stay inside the codec's legal range.
Value random_value(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> kind(0, depth > 0 ? 5 : 3);
  switch (kind(rng)) {
    case 0:
      return Value(static_cast<int32_t>(rng() % 2000000 - 1000000));
    case 1: {
      std::uniform_real_distribution<double> d(-1e6, 1e6);
      return Value(d(rng));
    }
    case 2: {
      std::uniform_int_distribution<int> len(0, 12);
      std::uniform_int_distribution<int> ch(0, 63);
      std::string s;
      int n = len(rng);
      // Mix in the characters XML must escape to exercise the escaper.
      static const char alphabet[] =
          "abcdefghijklmnopqrstuvwxyz0123456789 <>&\"'._-/:engineering";
      for (int i = 0; i < n; ++i) s += alphabet[ch(rng) % (sizeof(alphabet) - 1)];
      return Value(std::move(s));
    }
    case 3:
      return Value(rng() % 2 == 0);
    case 4: {
      std::uniform_int_distribution<int> len(0, 4);
      Value::Array a;
      int n = len(rng);
      for (int i = 0; i < n; ++i) a.push_back(random_value(rng, depth - 1));
      return Value(std::move(a));
    }
    default: {
      std::uniform_int_distribution<int> len(0, 4);
      Value::Struct m;
      int n = len(rng);
      for (int i = 0; i < n; ++i)
        m["key" + std::to_string(rng() % 100)] = random_value(rng, depth - 1);
      return Value(std::move(m));
    }
  }
}

Call random_call(std::mt19937_64& rng) {
  Call c;
  c.method = "method" + std::to_string(rng() % 1000);
  std::uniform_int_distribution<int> n(0, 4);
  int k = n(rng);
  for (int i = 0; i < k; ++i) c.params.push_back(random_value(rng, 4));
  return c;
}

Reply random_reply(std::mt19937_64& rng) {
  if (rng() % 4 == 0)
    return Reply::fault(static_cast<int32_t>(rng() % 1000),
                        "fault" + std::to_string(rng() % 100));
  return Reply::ok(random_value(rng, 4));
}

// Nested array of the requested depth: depth(1) is a bare string.
Value nested(int levels) {
  Value v("leaf");
  for (int i = 1; i < levels; ++i) v = Value(Value::Array{std::move(v)});
  return v;
}

}  // namespace

TEST_CASE("value accessors and type predicates") {
  Value i(int32_t{42});
  CHECK(i.is_int());
  CHECK(i.as_int() == 42);
  CHECK(i.as_double() == 42.0);  // int widens to double on request
  CHECK_THROWS_AS(i.as_string(), Error);

  Value d(1.5);
  CHECK(d.is_double());
  CHECK(d.as_double() == 1.5);
  CHECK_THROWS_AS(d.as_int(), Error);

  Value s("hello");
  CHECK(s.is_string());
  CHECK(s.as_string() == "hello");

  Value b(true);
  CHECK(b.is_bool());
  CHECK(b.as_bool());

  Value def;
  CHECK(def.is_string());
  CHECK(def.as_string().empty());
}

TEST_CASE("struct member access") {
  Value::Struct m;
  m["site"] = Value("A");
  m["cpu"] = Value(1.5);
  Value v(m);
  CHECK(v.at("site").as_string() == "A");
  CHECK(v.find("cpu") != nullptr);
  CHECK(v.find("missing") == nullptr);
  CHECK_THROWS_WITH_AS(v.at("missing"), doctest::Contains("MissingField"),
                       Error);
}

TEST_CASE("depth computation") {
  CHECK(Value("x").depth() == 1);
  CHECK(nested(2).depth() == 2);
  CHECK(nested(32).depth() == 32);
  Value::Struct m;
  m["a"] = nested(3);
  CHECK(Value(m).depth() == 4);
}

TEST_CASE("requestJob call round-trips") {
  Value::Struct cap;
  cap["site"] = Value("A");
  cap["cpu_power"] = Value(1.5);
  Call c{"requestJob", {Value(cap)}};
  Call back = decode_call(encode_call(c));
  CHECK(back == c);
  CHECK(back.params.at(0).at("site").as_string() == "A");
  CHECK(back.params.at(0).at("cpu_power").as_double() == 1.5);
}

TEST_CASE("base64 element is outside the subset") {
  std::string doc =
      "<?xml version=\"1.0\"?><methodCall><methodName>m</methodName>"
      "<params><param><value><base64>QUJD</base64></value></param></params>"
      "</methodCall>";
  CHECK_THROWS_WITH_AS(decode_call(doc), doctest::Contains("UnsupportedType"),
                       Error);
}

TEST_CASE("datetime element is outside the subset") {
  std::string doc =
      "<?xml version=\"1.0\"?><methodCall><methodName>m</methodName>"
      "<params><param><value><dateTime.iso8601>20040901T10:00:00"
      "</dateTime.iso8601></value></param></params></methodCall>";
  CHECK_THROWS_WITH_AS(decode_call(doc), doctest::Contains("UnsupportedType"),
                       Error);
}

TEST_CASE("randomized call round-trip: 1000 calls") {
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 1000; ++i) {
    Call c = random_call(rng);
    CHECK(decode_call(encode_call(c)) == c);
  }
}

TEST_CASE("fault reply round-trips") {
  Reply r = Reply::fault(404, "no job");
  Reply back = decode_reply(encode_reply(r));
  CHECK(back == r);
  CHECK(back.is_fault());
  CHECK(back.fault().code == 404);
  CHECK(back.fault().message == "no job");
}

TEST_CASE("empty array reply round-trips") {
  Reply r = Reply::ok(Value(Value::Array{}));
  Reply back = decode_reply(encode_reply(r));
  CHECK(back == r);
  CHECK(back.value().as_array().empty());
}

TEST_CASE("randomized reply round-trip: 1000 replies") {
  std::mt19937_64 rng(5678);
  for (int i = 0; i < 1000; ++i) {
    Reply r = random_reply(rng);
    CHECK(decode_reply(encode_reply(r)) == r);
  }
}

TEST_CASE("encoding is byte-deterministic") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 50; ++i) {
    Call c = random_call(rng);
    CHECK(encode_call(c) == encode_call(c));
    Reply r = random_reply(rng);
    CHECK(encode_reply(r) == encode_reply(r));
  }
  // Struct keys serialize in lexicographic order regardless of insertion
  // order, so logically equal maps encode identically.
  Value::Struct m1;
  m1["zebra"] = Value(1);
  m1["alpha"] = Value(2);
  Value::Struct m2;
  m2["alpha"] = Value(2);
  m2["zebra"] = Value(1);
  CHECK(encode_call({"m", {Value(m1)}}) == encode_call({"m", {Value(m2)}}));
}

TEST_CASE("nesting depth limits") {
  CHECK(decode_call(encode_call({"m", {nested(32)}})).params.at(0).depth() ==
        32);
  CHECK_THROWS_WITH_AS(encode_call({"m", {nested(33)}}),
                       doctest::Contains("DepthExceeded"), Error);
  // Hand-build an over-deep document so the decoder's own guard fires.
  std::string deep = "<?xml version=\"1.0\"?><methodCall><methodName>m"
                     "</methodName><params><param>";
  for (int i = 0; i < 40; ++i) deep += "<value><array><data>";
  deep += "<value><string>x</string></value>";
  for (int i = 0; i < 40; ++i) deep += "</data></array></value>";
  deep += "</param></params></methodCall>";
  CHECK_THROWS_WITH_AS(decode_call(deep), doctest::Contains("DepthExceeded"),
                       Error);
}

TEST_CASE("method name validation") {
  CHECK(valid_method_name("requestJob"));
  CHECK(valid_method_name("a"));
  CHECK(valid_method_name("system.listMethods"));
  CHECK(valid_method_name("V2_api.call"));
  CHECK_FALSE(valid_method_name(""));
  CHECK_FALSE(valid_method_name("2fast"));
  CHECK_FALSE(valid_method_name(".dot"));
  CHECK_FALSE(valid_method_name("has space"));
  CHECK_FALSE(valid_method_name("has-dash"));
  CHECK_THROWS_WITH_AS(encode_call({"bad name", {}}),
                       doctest::Contains("MalformedDocument"), Error);
}

TEST_CASE("malformed documents raise MalformedDocument") {
  CHECK_THROWS_WITH_AS(decode_call(""), doctest::Contains("MalformedDocument"),
                       Error);
  CHECK_THROWS_WITH_AS(decode_call("<methodCall>"),
                       doctest::Contains("MalformedDocument"), Error);
  CHECK_THROWS_WITH_AS(decode_call("<wrong/>"),
                       doctest::Contains("MalformedDocument"), Error);
  CHECK_THROWS_WITH_AS(
      decode_call("<methodCall><methodName>m</methodName><params>"
                  "<param><value><int>notanum</int></value></param>"
                  "</params></methodCall>"),
      doctest::Contains("MalformedDocument"), Error);
  CHECK_THROWS_WITH_AS(decode_reply("<methodCall/>"),
                       doctest::Contains("MalformedDocument"), Error);
}

TEST_CASE("fuzz: decode never crashes, errors stay typed") {
  std::mt19937_64 rng(99);
  // Phase 1: pure random bytes.
  for (int i = 0; i < 400; ++i) {
    std::uniform_int_distribution<int> len(0, 200);
    std::string junk;
    int n = len(rng);
    for (int j = 0; j < n; ++j) junk += static_cast<char>(rng() % 256);
    try {
      decode_call(junk);
    } catch (const Error& e) {
      ErrorCode c = e.code();
      CHECK((c == ErrorCode::MalformedDocument ||
             c == ErrorCode::UnsupportedType || c == ErrorCode::DepthExceeded));
    }
    try {
      decode_reply(junk);
    } catch (const Error& e) {
      ErrorCode c = e.code();
      CHECK((c == ErrorCode::MalformedDocument ||
             c == ErrorCode::UnsupportedType || c == ErrorCode::DepthExceeded));
    }
  }
  // Phase 2: valid documents with random single-byte mutations, which reach
  // deeper parser states than pure noise does.
  for (int i = 0; i < 400; ++i) {
    std::string doc = encode_call(random_call(rng));
    std::uniform_int_distribution<size_t> pos(0, doc.size() - 1);
    for (int m = 0; m < 3; ++m) doc[pos(rng)] = static_cast<char>(rng() % 256);
    try {
      decode_call(doc);
    } catch (const Error& e) {
      ErrorCode c = e.code();
      CHECK((c == ErrorCode::MalformedDocument ||
             c == ErrorCode::UnsupportedType || c == ErrorCode::DepthExceeded));
    }
  }
}
