#include "pullgrid/store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cstring>
#include <filesystem>

#include "json.hpp"
#include "pullgrid/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pullgrid {

namespace {

constexpr uint32_t kRecordMagic = 0x50475243;  // "PGRC"
constexpr char kSnapshotMagic[] = "PGSNAP1\n";

std::string flat_key(const std::string& table, const std::string& key) {
  std::string k;
  k.reserve(table.size() + 1 + key.size());
  k += table;
  k += '\0';
  k += key;
  return k;
}

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const char* p) {
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

uint64_t get_u64(const char* p) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

std::string read_file(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw Error(ErrorCode::IoFailure, "cannot read " + path);
  std::string out;
  char buf[1 << 16];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) out.append(buf, n);
  std::fclose(f);
  return out;
}

}  // namespace

// ----------------------------------------------------------------- Txn ----

std::optional<std::string> Txn::get(const std::string& table,
                                    const std::string& key) {
  std::string fk = flat_key(table, key);
  auto w = writes_.find(fk);
  if (w != writes_.end()) return w->second;  // read-your-writes

  std::lock_guard lock(store_.mu_);
  ++store_.stats_.record_reads;
  auto it = store_.data_.find(fk);
  if (it == store_.data_.end()) {
    reads_.emplace(fk, 0);
    return std::nullopt;
  }
  reads_.emplace(fk, it->second.version);
  return it->second.value;
}

void Txn::put(const std::string& table, const std::string& key,
              std::string value) {
  writes_[flat_key(table, key)] = std::move(value);
}

void Txn::erase(const std::string& table, const std::string& key) {
  writes_[flat_key(table, key)] = std::nullopt;
}

void Txn::scan(const std::string& table, const std::string& prefix,
               const std::function<bool(const std::string&, const std::string&)>&
                   visit) {
  std::string lo = flat_key(table, prefix);
  std::vector<std::pair<std::string, std::string>> committed;
  {
    std::lock_guard lock(store_.mu_);
    auto tv = store_.table_versions_.find(table);
    table_reads_.emplace(table, tv == store_.table_versions_.end() ? 0 : tv->second);
    for (auto it = store_.data_.lower_bound(lo); it != store_.data_.end(); ++it) {
      if (it->first.compare(0, lo.size(), lo) != 0) break;
      ++store_.stats_.record_reads;
      committed.emplace_back(it->first, it->second.value);
    }
  }
  // Merge committed entries with this transaction's own writes.
  auto w = writes_.lower_bound(lo);
  auto c = committed.begin();
  auto in_range = [&](const std::string& k) {
    return k.compare(0, lo.size(), lo) == 0;
  };
  while (c != committed.end() || (w != writes_.end() && in_range(w->first))) {
    bool take_write;
    if (c == committed.end()) take_write = true;
    else if (w == writes_.end() || !in_range(w->first)) take_write = false;
    else take_write = w->first <= c->first;

    std::string fk;
    const std::string* value = nullptr;
    if (take_write) {
      if (c != committed.end() && c->first == w->first) ++c;  // overridden
      fk = w->first;
      if (w->second.has_value()) value = &*w->second;
      ++w;
      if (!value) continue;  // erased in this txn
    } else {
      fk = c->first;
      value = &c->second;
      ++c;
    }
    std::string key = fk.substr(table.size() + 1);
    if (!visit(key, *value)) return;
  }
}

// --------------------------------------------------------------- Store ----

Store::Store(const std::string& dir, StoreOptions options)
    : dir_(dir), options_(options) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir_);
  load();
  open_journal_for_append();
}

Store::~Store() {
  if (journal_fd_ >= 0) ::close(journal_fd_);
}

void Store::begin(Txn& txn) {
  std::lock_guard lock(mu_);
  txn.snapshot_version_ = version_counter_;
}

bool Store::commit(Txn& txn) {
  std::string payload = txn.writes_.empty() ? std::string() : serialize_ops(txn);

  std::lock_guard lock(mu_);
  // Backward validation: everything this transaction read must still be
  // current, so applying its writes now is equivalent to running it
  // serially at this instant.
  for (const auto& [fk, seen_version] : txn.reads_) {
    auto it = data_.find(fk);
    uint64_t current = it == data_.end() ? 0 : it->second.version;
    if (current != seen_version) return false;
  }
  for (const auto& [table, seen_version] : txn.table_reads_) {
    auto it = table_versions_.find(table);
    uint64_t current = it == table_versions_.end() ? 0 : it->second;
    if (current != seen_version) return false;
  }

  if (!txn.writes_.empty()) {
    append_record(payload);
    uint64_t v = ++version_counter_;
    for (const auto& [fk, value] : txn.writes_) {
      std::string table = fk.substr(0, fk.find('\0'));
      table_versions_[table] = v;
      if (value.has_value()) {
        auto& slot = data_[fk];
        slot.value = *value;
        slot.version = v;
      } else {
        data_.erase(fk);
      }
    }
    stats_.records = data_.size();
  }
  ++stats_.commits;
  return true;
}

void Store::note_conflict() {
  std::lock_guard lock(mu_);
  ++stats_.conflicts;
}

std::string Store::serialize_ops(const Txn& txn) const {
  json ops = json::array();
  for (const auto& [fk, value] : txn.writes_) {
    size_t sep = fk.find('\0');
    json op;
    op["t"] = fk.substr(0, sep);
    op["k"] = fk.substr(sep + 1);
    if (value.has_value()) {
      op["o"] = "p";
      op["v"] = *value;
    } else {
      op["o"] = "d";
    }
    ops.push_back(std::move(op));
  }
  return ops.dump();
}

void Store::apply_ops(const std::string& payload) {
  json ops = json::parse(payload);
  uint64_t v = ++version_counter_;
  for (const auto& op : ops) {
    std::string fk = flat_key(op.at("t"), op.at("k"));
    table_versions_[op.at("t")] = v;
    if (op.at("o") == "p") {
      auto& slot = data_[fk];
      slot.value = op.at("v");
      slot.version = v;
    } else {
      data_.erase(fk);
    }
  }
}

void Store::append_record(const std::string& payload) {
  std::string rec;
  rec.reserve(payload.size() + 20);
  put_u32(rec, kRecordMagic);
  put_u64(rec, ++journal_seq_);
  put_u32(rec, static_cast<uint32_t>(payload.size()));
  put_u32(rec, crc32_bytes(payload));
  rec += payload;

  const char* p = rec.data();
  size_t remaining = rec.size();
  while (remaining > 0) {
    ssize_t n = ::write(journal_fd_, p, remaining);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::IoFailure, "journal write failed");
    }
    p += n;
    remaining -= static_cast<size_t>(n);
  }
  if (options_.fsync_on_commit) {
    if (::fsync(journal_fd_) != 0)
      throw Error(ErrorCode::IoFailure, "journal fsync failed");
  }
}

void Store::load() {
  std::string snap_path = dir_ + "/snapshot";
  if (fs::exists(snap_path)) {
    std::string raw = read_file(snap_path);
    size_t magic_len = sizeof(kSnapshotMagic) - 1;
    if (raw.size() < magic_len + 16 ||
        raw.compare(0, magic_len, kSnapshotMagic) != 0)
      throw Error(ErrorCode::CorruptJournal, "snapshot header damaged");
    const char* p = raw.data() + magic_len;
    uint64_t seq = get_u64(p);
    uint32_t len = get_u32(p + 8);
    uint32_t crc = get_u32(p + 12);
    if (raw.size() != magic_len + 16 + len)
      throw Error(ErrorCode::CorruptJournal, "snapshot length mismatch");
    std::string payload = raw.substr(magic_len + 16);
    if (crc32_bytes(payload) != crc)
      throw Error(ErrorCode::CorruptJournal, "snapshot checksum mismatch");
    json entries = json::parse(payload, nullptr, false);
    if (entries.is_discarded())
      throw Error(ErrorCode::CorruptJournal, "snapshot payload unreadable");
    uint64_t v = ++version_counter_;
    for (const auto& e : entries) {
      std::string table = e.at(0);
      std::string fk = flat_key(table, e.at(1));
      auto& slot = data_[fk];
      slot.value = e.at(2);
      slot.version = v;
      table_versions_[table] = v;
    }
    snapshot_seq_ = seq;
    journal_seq_ = seq;
  }
  replay_journal();
  stats_.records = data_.size();
}

void Store::replay_journal() {
  std::string path = dir_ + "/journal";
  if (!fs::exists(path)) return;
  std::string raw = read_file(path);
  size_t pos = 0;
  size_t good_end = 0;
  uint64_t last_seq = journal_seq_;

  auto try_record = [&](size_t at, uint64_t* seq_out, size_t* end_out,
                        std::string* payload_out) -> bool {
    if (at + 20 > raw.size()) return false;
    if (get_u32(raw.data() + at) != kRecordMagic) return false;
    uint64_t seq = get_u64(raw.data() + at + 4);
    uint32_t len = get_u32(raw.data() + at + 12);
    uint32_t crc = get_u32(raw.data() + at + 16);
    if (at + 20 + len > raw.size()) return false;
    std::string payload = raw.substr(at + 20, len);
    if (crc32_bytes(payload) != crc) return false;
    *seq_out = seq;
    *end_out = at + 20 + len;
    *payload_out = std::move(payload);
    return true;
  };

  while (pos < raw.size()) {
    uint64_t seq;
    size_t end;
    std::string payload;
    if (try_record(pos, &seq, &end, &payload) && seq == last_seq + 1) {
      apply_ops(payload);
      last_seq = seq;
      pos = end;
      good_end = end;
      continue;
    }
    // Damaged bytes at `pos`. A torn tail is tolerated; committed records
    // beyond the damage are not.
    for (size_t probe = pos + 1; probe + 20 <= raw.size(); ++probe) {
      uint64_t s;
      size_t e;
      std::string pl;
      if (get_u32(raw.data() + probe) == kRecordMagic &&
          try_record(probe, &s, &e, &pl) && s > last_seq) {
        throw Error(ErrorCode::CorruptJournal,
                    "damaged record at offset " + std::to_string(pos));
      }
    }
    // Discard the tail.
    std::error_code ec;
    fs::resize_file(path, good_end, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot truncate journal tail");
    break;
  }
  journal_seq_ = last_seq;
}

void Store::open_journal_for_append() {
  std::string path = dir_ + "/journal";
  journal_fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (journal_fd_ < 0)
    throw Error(ErrorCode::IoFailure, "cannot open journal for append");
  // Make sure the journal file itself survives a crash of this process.
  int dfd = ::open(dir_.c_str(), O_RDONLY | O_DIRECTORY);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

CompactStats Store::compact() {
  std::lock_guard lock(mu_);
  CompactStats out;
  std::string jpath = dir_ + "/journal";
  std::error_code ec;
  out.journal_bytes_before = fs::exists(jpath) ? fs::file_size(jpath, ec) : 0;

  json entries = json::array();
  for (const auto& [fk, vv] : data_) {
    size_t sep = fk.find('\0');
    entries.push_back(json::array(
        {fk.substr(0, sep), fk.substr(sep + 1), vv.value}));
    ++out.records_snapshotted;
  }
  std::string payload = entries.dump();

  std::string body;
  body.reserve(payload.size() + 24);
  body += kSnapshotMagic;
  put_u64(body, journal_seq_);
  put_u32(body, static_cast<uint32_t>(payload.size()));
  put_u32(body, crc32_bytes(payload));
  body += payload;

  std::string tmp = dir_ + "/snapshot.tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw Error(ErrorCode::IoFailure, "cannot write snapshot");
  const char* p = body.data();
  size_t remaining = body.size();
  while (remaining > 0) {
    ssize_t n = ::write(fd, p, remaining);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw Error(ErrorCode::IoFailure, "snapshot write failed");
    }
    p += n;
    remaining -= static_cast<size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    throw Error(ErrorCode::IoFailure, "snapshot fsync failed");
  }
  ::close(fd);
  fs::rename(tmp, dir_ + "/snapshot", ec);
  if (ec) throw Error(ErrorCode::IoFailure, "snapshot rename failed");

  // Journal records up to journal_seq_ are now covered by the snapshot.
  if (journal_fd_ >= 0) ::close(journal_fd_);
  fs::resize_file(jpath, 0, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "journal truncate failed");
  snapshot_seq_ = journal_seq_;
  open_journal_for_append();

  out.journal_bytes_after = 0;
  return out;
}

StoreStats Store::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

uint32_t Store::content_hash() {
  std::lock_guard lock(mu_);
  uint32_t crc = 0;
  for (const auto& [fk, vv] : data_) {
    crc = crc32_update(crc, fk);
    crc = crc32_update(crc, std::string_view("\x1f", 1));
    crc = crc32_update(crc, vv.value);
    crc = crc32_update(crc, std::string_view("\x1e", 1));
  }
  return crc;
}

}  // namespace pullgrid
