#include "pullgrid/xml.hpp"

#include <cctype>

#include "pullgrid/errors.hpp"

namespace pullgrid::xml {

namespace {

struct Parser {
  std::string_view doc;
  size_t pos = 0;
  int max_depth;

  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::MalformedDocument,
                why + " at offset " + std::to_string(pos));
  }

  bool eof() const { return pos >= doc.size(); }
  char peek() const { return doc[pos]; }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r' ||
                      peek() == '\n'))
      ++pos;
  }

  bool starts_with(std::string_view s) const {
    return doc.compare(pos, s.size(), s) == 0;
  }

  // Comments, the prolog and processing instructions carry no payload here.
  void skip_misc() {
    for (;;) {
      skip_ws();
      if (starts_with("<!--")) {
        size_t end = doc.find("-->", pos + 4);
        if (end == std::string_view::npos) fail("unterminated comment");
        pos = end + 3;
      } else if (starts_with("<?")) {
        size_t end = doc.find("?>", pos + 2);
        if (end == std::string_view::npos) fail("unterminated instruction");
        pos = end + 2;
      } else {
        return;
      }
    }
  }

  std::string read_name() {
    size_t start = pos;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) ||
                      peek() == '_' || peek() == '-' || peek() == '.' ||
                      peek() == ':'))
      ++pos;
    if (pos == start) fail("expected element name");
    return std::string(doc.substr(start, pos - start));
  }

  std::string decode_entities(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (size_t i = 0; i < raw.size();) {
      if (raw[i] != '&') {
        out.push_back(raw[i++]);
        continue;
      }
      size_t semi = raw.find(';', i);
      if (semi == std::string_view::npos) fail("unterminated entity");
      std::string_view ent = raw.substr(i + 1, semi - i - 1);
      if (ent == "amp") out.push_back('&');
      else if (ent == "lt") out.push_back('<');
      else if (ent == "gt") out.push_back('>');
      else if (ent == "quot") out.push_back('"');
      else if (ent == "apos") out.push_back('\'');
      else if (!ent.empty() && ent[0] == '#') {
        long code = 0;
        bool ok = ent.size() > 1;
        size_t k = 1;
        int base = 10;
        if (ent.size() > 2 && (ent[1] == 'x' || ent[1] == 'X')) {
          base = 16;
          k = 2;
          ok = ent.size() > 2;
        }
        for (; k < ent.size() && ok; ++k) {
          char c = ent[k];
          int d;
          if (c >= '0' && c <= '9') d = c - '0';
          else if (base == 16 && c >= 'a' && c <= 'f') d = c - 'a' + 10;
          else if (base == 16 && c >= 'A' && c <= 'F') d = c - 'A' + 10;
          else { ok = false; break; }
          code = code * base + d;
          if (code > 0x10ffff) { ok = false; break; }
        }
        if (!ok) fail("bad character reference");
        // Encode the code point as UTF-8.
        if (code < 0x80) {
          out.push_back(static_cast<char>(code));
        } else if (code < 0x800) {
          out.push_back(static_cast<char>(0xc0 | (code >> 6)));
          out.push_back(static_cast<char>(0x80 | (code & 0x3f)));
        } else if (code < 0x10000) {
          out.push_back(static_cast<char>(0xe0 | (code >> 12)));
          out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3f)));
          out.push_back(static_cast<char>(0x80 | (code & 0x3f)));
        } else {
          out.push_back(static_cast<char>(0xf0 | (code >> 18)));
          out.push_back(static_cast<char>(0x80 | ((code >> 12) & 0x3f)));
          out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3f)));
          out.push_back(static_cast<char>(0x80 | (code & 0x3f)));
        }
      } else {
        fail("unknown entity");
      }
      i = semi + 1;
    }
    return out;
  }

  Node parse_element(int depth) {
    if (depth > max_depth) throw Error(ErrorCode::DepthExceeded, "xml nesting");
    if (eof() || peek() != '<') fail("expected element");
    ++pos;
    Node node;
    node.tag = read_name();
    // Tolerate and discard attributes.
    while (!eof() && peek() != '>' && peek() != '/') ++pos;
    if (eof()) fail("unterminated start tag");
    if (peek() == '/') {
      ++pos;
      if (eof() || peek() != '>') fail("bad empty-element tag");
      ++pos;
      return node;
    }
    ++pos;  // '>'

    for (;;) {
      if (eof()) fail("unterminated element <" + node.tag + ">");
      if (peek() == '<') {
        if (starts_with("</")) {
          pos += 2;
          std::string closing = read_name();
          skip_ws();
          if (eof() || peek() != '>') fail("bad end tag");
          ++pos;
          if (closing != node.tag)
            fail("mismatched end tag </" + closing + ">");
          break;
        }
        if (starts_with("<!--")) {
          size_t end = doc.find("-->", pos + 4);
          if (end == std::string_view::npos) fail("unterminated comment");
          pos = end + 3;
          continue;
        }
        if (starts_with("<![CDATA[")) {
          size_t end = doc.find("]]>", pos + 9);
          if (end == std::string_view::npos) fail("unterminated CDATA");
          node.text.append(doc.substr(pos + 9, end - pos - 9));
          pos = end + 3;
          continue;
        }
        node.children.push_back(parse_element(depth + 1));
      } else {
        size_t start = pos;
        while (!eof() && peek() != '<') ++pos;
        node.text += decode_entities(doc.substr(start, pos - start));
      }
    }
    if (!node.children.empty()) {
      // Element content: surrounding whitespace is insignificant.
      bool only_ws = true;
      for (char c : node.text)
        if (c != ' ' && c != '\t' && c != '\r' && c != '\n') only_ws = false;
      if (only_ws) node.text.clear();
    }
    return node;
  }
};

}  // namespace

const Node* Node::child(std::string_view name) const {
  for (const auto& c : children)
    if (c.tag == name) return &c;
  return nullptr;
}

const Node& Node::require(std::string_view name) const {
  const Node* c = child(name);
  if (!c) throw Error(ErrorCode::MissingField, std::string(name));
  return *c;
}

std::vector<const Node*> Node::all(std::string_view name) const {
  std::vector<const Node*> out;
  for (const auto& c : children)
    if (c.tag == name) out.push_back(&c);
  return out;
}

Node parse(std::string_view doc, int max_depth) {
  Parser p{doc, 0, max_depth};
  p.skip_misc();
  if (p.eof()) p.fail("empty document");
  Node root = p.parse_element(0);
  p.skip_misc();
  if (!p.eof()) p.fail("trailing content after document element");
  return root;
}

std::string escape_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

void Writer::open(std::string_view tag) {
  out_ += '<';
  out_ += tag;
  out_ += '>';
}

void Writer::close(std::string_view tag) {
  out_ += "</";
  out_ += tag;
  out_ += '>';
}

void Writer::element(std::string_view tag, std::string_view text) {
  open(tag);
  out_ += escape_text(text);
  close(tag);
}

}  // namespace pullgrid::xml
