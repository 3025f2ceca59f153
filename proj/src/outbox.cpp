#include "pullgrid/outbox.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pullgrid/errors.hpp"
#include "pullgrid/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pullgrid {

namespace {

json to_json(const OutboxEntry& e) {
  return json{{"id", e.id},
              {"kind", e.kind},
              {"local_path", e.local_path},
              {"destination", e.destination},
              {"lfn", e.lfn},
              {"job_id", e.job_id},
              {"size_bytes", e.size_bytes},
              {"checksum", to_hex32(e.checksum)},
              {"attempts", e.attempts},
              {"delivered", e.delivered},
              {"created_at", e.created_at}};
}

OutboxEntry from_json(const json& j) {
  OutboxEntry e;
  e.id = j.at("id");
  e.kind = j.at("kind");
  e.local_path = j.at("local_path");
  e.destination = j.at("destination");
  e.lfn = j.at("lfn");
  e.job_id = j.at("job_id");
  e.size_bytes = j.at("size_bytes");
  e.checksum = parse_hex32(j.at("checksum").get<std::string>());
  e.attempts = j.at("attempts");
  e.delivered = j.at("delivered");
  e.created_at = j.at("created_at");
  return e;
}

void write_atomic(const fs::path& p, const std::string& data) {
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "write " + tmp.string());
    out << data;
    if (!out.good()) throw Error(ErrorCode::IoFailure, "write " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Outbox::Outbox(const fs::path& dir) : dir_(dir) {
  fs::create_directories(dir_);
  // Continue the id sequence past anything already on disk, including
  // orphaned payloads whose sidecar was removed mid-crash.
  for (const auto& e : fs::directory_iterator(dir_)) {
    auto name = e.path().filename().string();
    auto dot = name.find('.');
    if (dot == std::string::npos) continue;
    std::string stem = name.substr(0, dot);
    if (stem.empty() ||
        !std::all_of(stem.begin(), stem.end(),
                     [](char c) { return c >= '0' && c <= '9'; }))
      continue;
    next_seq_ = std::max<uint64_t>(next_seq_, std::stoull(stem) + 1);
  }
  // Orphaned payload files (no sidecar) are uncommitted leftovers.
  for (const auto& e : fs::directory_iterator(dir_)) {
    auto p = e.path();
    if (p.extension() != ".payload") continue;
    fs::path sidecar = p;
    sidecar.replace_extension(".json");
    if (!fs::exists(sidecar)) fs::remove(p);
  }
}

std::filesystem::path Outbox::sidecar_path(const std::string& id) const {
  return dir_ / (id + ".json");
}

std::filesystem::path Outbox::payload_path(const std::string& id) const {
  return dir_ / (id + ".payload");
}

std::string Outbox::add(OutboxEntry e) {
  e.id = zero_pad(next_seq_++, 10);
  // Payload first, sidecar last: the sidecar's presence commits the entry.
  write_atomic(payload_path(e.id), e.payload);
  write_atomic(sidecar_path(e.id), to_json(e).dump());
  return e.id;
}

void Outbox::update(const OutboxEntry& e) {
  if (!fs::exists(sidecar_path(e.id)))
    throw Error(ErrorCode::IoFailure, "no outbox entry " + e.id);
  write_atomic(sidecar_path(e.id), to_json(e).dump());
}

void Outbox::remove(const std::string& id) {
  fs::remove(sidecar_path(id));
  fs::remove(payload_path(id));
}

std::vector<OutboxEntry> Outbox::entries() const {
  std::vector<OutboxEntry> out;
  for (const auto& e : fs::directory_iterator(dir_)) {
    if (e.path().extension() != ".json") continue;
    auto entry = from_json(json::parse(read_all(e.path())));
    entry.payload = read_all(payload_path(entry.id));
    out.push_back(std::move(entry));
  }
  std::sort(out.begin(), out.end(),
            [](const OutboxEntry& a, const OutboxEntry& b) {
              return a.id < b.id;
            });
  return out;
}

std::optional<OutboxEntry> Outbox::get(const std::string& id) const {
  if (!fs::exists(sidecar_path(id))) return std::nullopt;
  auto entry = from_json(json::parse(read_all(sidecar_path(id))));
  entry.payload = read_all(payload_path(id));
  return entry;
}

size_t Outbox::size() const {
  size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir_))
    if (e.path().extension() == ".json") ++n;
  return n;
}

}  // namespace pullgrid
