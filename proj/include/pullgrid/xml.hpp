#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace pullgrid::xml {

/// Minimal XML element tree: tags, child elements and character data. No
/// attributes or namespaces — none of the wire formats here use them.
struct Node {
  std::string tag;
  std::string text;  // concatenated character data, entities decoded
  std::vector<Node> children;

  const Node* child(std::string_view name) const;
  // Throws Error(MissingField, name) when absent.
  const Node& require(std::string_view name) const;
  std::vector<const Node*> all(std::string_view name) const;
};

/// Parses one document. Throws Error(MalformedDocument) on any syntax
/// problem and Error(DepthExceeded) past max_depth. The XML prolog,
/// comments and processing instructions are skipped; attributes inside
/// tags are tolerated and ignored.
Node parse(std::string_view doc, int max_depth = 64);

std::string escape_text(std::string_view s);

/// Compact writer producing byte-deterministic documents (no whitespace
/// between elements).
class Writer {
 public:
  void open(std::string_view tag);
  void close(std::string_view tag);
  void element(std::string_view tag, std::string_view text);
  void raw(std::string_view s) { out_ += s; }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

}  // namespace pullgrid::xml
