#include "pullgrid/repo_service.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "pullgrid/tables.hpp"
#include "pullgrid/util.hpp"

namespace pullgrid {

using nlohmann::json;
namespace tb = tables;

namespace {

constexpr char kMagic[] = "PKAR1\n";
constexpr size_t kMagicLen = 6;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const std::string& in, size_t& pos) {
  if (pos + 4 > in.size())
    throw Error(ErrorCode::MalformedDocument, "archive truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= uint32_t(uint8_t(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

std::string get_bytes(const std::string& in, size_t& pos, uint32_t len) {
  if (pos + len > in.size())
    throw Error(ErrorCode::MalformedDocument, "archive truncated");
  std::string v = in.substr(pos, len);
  pos += len;
  return v;
}

std::string package_key(const std::string& app, const std::string& version) {
  return app + "|" + version;
}

}  // namespace

std::string pack_archive(const std::map<std::string, std::string>& files) {
  std::string out(kMagic, kMagicLen);
  put_u32(out, uint32_t(files.size()));
  for (const auto& [path, data] : files) {
    put_u32(out, uint32_t(path.size()));
    out += path;
    put_u32(out, uint32_t(data.size()));
    out += data;
  }
  return out;
}

std::map<std::string, std::string> unpack_archive(const std::string& bytes) {
  if (bytes.size() < kMagicLen || bytes.compare(0, kMagicLen, kMagic) != 0)
    throw Error(ErrorCode::MalformedDocument, "not a package archive");
  size_t pos = kMagicLen;
  uint32_t count = get_u32(bytes, pos);
  std::map<std::string, std::string> files;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t plen = get_u32(bytes, pos);
    std::string path = get_bytes(bytes, pos, plen);
    uint32_t dlen = get_u32(bytes, pos);
    files[path] = get_bytes(bytes, pos, dlen);
  }
  if (pos != bytes.size())
    throw Error(ErrorCode::MalformedDocument, "trailing bytes in archive");
  return files;
}

std::string generate_bootstrap(const std::string& app,
                               const std::string& version) {
  std::string s;
  s += "#!/bin/sh\n";
  s += "# setup for " + app + " " + version + "\n";
  s += "PKG_DIR=\"$(cd \"$(dirname \"$0\")\" && pwd)\"\n";
  s += "chmod +x \"$PKG_DIR\"/bin/* 2>/dev/null || true\n";
  s += "PATH=\"$PKG_DIR/bin:$PATH\"\n";
  s += "export PATH\n";
  return s;
}

Package make_synthetic_package(
    const std::string& app, const std::string& version,
    const std::vector<std::pair<std::string, std::string>>& deps) {
  std::string entry;
  entry += "#!/bin/sh\n";
  entry += "# " + app + " " + version +
           ": writes a deterministic byte stream\n";
  entry += "# usage: run-" + app + " <seed> <size_bytes> <outfile>\n";
  entry += "seed=\"$1\"; size=\"$2\"; out=\"$3\"\n";
  entry += "tmp=\"$out.gen\"\n";
  entry += ": > \"$tmp\"\n";
  entry += "n=0\n";
  entry += "while [ \"$(wc -c < \"$tmp\")\" -lt \"$size\" ]; do\n";
  entry += "  printf '%s:%s:%d\\n' \"" + app + "\" \"$seed\" \"$n\" | md5sum | "
           "cut -d' ' -f1 >> \"$tmp\"\n";
  entry += "  n=$((n+1))\n";
  entry += "done\n";
  entry += "head -c \"$size\" \"$tmp\" > \"$out\"\n";
  entry += "rm -f \"$tmp\"\n";

  std::string filler;
  while (filler.size() < 512) filler += app + "-" + version + "\n";

  Package p;
  p.application = app;
  p.app_version = version;
  p.dependencies = deps;
  p.payload = pack_archive({{"bin/run-" + app, entry},
                            {"lib/" + app + ".dat", filler}});
  p.bootstrap = generate_bootstrap(app, version);
  p.checksum = crc32_bytes(p.payload);
  return p;
}

RepoService::RepoService(Store& store, TimeSource now)
    : store_(store), now_(std::move(now)) {}

void RepoService::publish(const Package& p) {
  if (p.application.empty() || p.app_version.empty())
    throw Error(ErrorCode::InvalidParameters, "package needs name and version");
  if (crc32_bytes(p.payload) != p.checksum)
    throw Error(ErrorCode::ChecksumMismatch,
                package_key(p.application, p.app_version));
  store_.transact([&](Txn& txn) {
    auto key = package_key(p.application, p.app_version);
    if (txn.get(tb::kPackages, key))
      throw Error(ErrorCode::DuplicateVersion, key);
    for (const auto& [da, dv] : p.dependencies) {
      // A dependency on the package itself is the only cycle publish-time
      // checks can see: everything else must already be published and the
      // published graph is acyclic by induction.
      if (da == p.application && dv == p.app_version)
        throw Error(ErrorCode::CyclicDependency, key);
      if (!txn.get(tb::kPackages, package_key(da, dv)))
        throw Error(ErrorCode::MissingDependency, package_key(da, dv));
    }
    json deps = json::array();
    for (const auto& [da, dv] : p.dependencies)
      deps.push_back(json::array({da, dv}));
    json row = {{"application", p.application},
                {"app_version", p.app_version},
                {"payload_b64", base64_encode(p.payload)},
                {"bootstrap", p.bootstrap},
                {"dependencies", deps},
                {"checksum", to_hex32(p.checksum)},
                {"published_at", now_()}};
    txn.put(tb::kPackages, key, row.dump());
  });
}

Package RepoService::fetch_package(const std::string& app,
                                   const std::string& version) {
  return store_.transact([&](Txn& txn) {
    auto raw = txn.get(tb::kPackages, package_key(app, version));
    if (!raw)
      throw Error(ErrorCode::UnknownPackage, package_key(app, version));
    json row = json::parse(*raw);
    Package p;
    p.application = row.at("application");
    p.app_version = row.at("app_version");
    p.payload = base64_decode(row.at("payload_b64").get<std::string>());
    p.bootstrap = row.at("bootstrap");
    for (const auto& d : row.at("dependencies"))
      p.dependencies.emplace_back(d.at(0), d.at(1));
    p.checksum = parse_hex32(row.at("checksum").get<std::string>());
    return p;
  });
}

std::vector<std::pair<std::string, std::string>>
RepoService::query_available() {
  return store_.transact([&](Txn& txn) {
    std::vector<std::pair<std::string, std::string>> out;
    txn.scan(tb::kPackages, "",
             [&](const std::string&, const std::string& value) {
               json row = json::parse(value);
               out.emplace_back(row.at("application"), row.at("app_version"));
               return true;
             });
    return out;
  });
}

std::vector<std::pair<std::string, std::string>> RepoService::resolve_deps(
    const std::string& app, const std::string& version) {
  using Key = std::pair<std::string, std::string>;
  // Load the closure's edges, then take nodes in Kahn order with a
  // lexicographic tie-break.
  std::map<Key, std::vector<Key>> deps_of;
  std::vector<Key> frontier{{app, version}};
  while (!frontier.empty()) {
    Key k = frontier.back();
    frontier.pop_back();
    if (deps_of.count(k)) continue;
    Package p = fetch_package(k.first, k.second);  // UnknownPackage propagates
    auto& deps = deps_of[k];
    for (const auto& d : p.dependencies) {
      deps.push_back(d);
      frontier.push_back(d);
    }
  }

  std::vector<Key> order;
  std::set<Key> emitted;
  while (order.size() < deps_of.size()) {
    Key next{};
    bool found = false;
    for (const auto& [k, deps] : deps_of) {
      if (emitted.count(k)) continue;
      bool ready = std::all_of(deps.begin(), deps.end(), [&](const Key& d) {
        return emitted.count(d) > 0;
      });
      if (ready && (!found || k < next)) {
        next = k;
        found = true;
      }
    }
    if (!found)
      throw Error(ErrorCode::CyclicDependency,
                  package_key(app, version));  // unreachable for published sets
    order.push_back(next);
    emitted.insert(next);
  }
  return order;
}

}  // namespace pullgrid
