#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pullgrid/errors.hpp"

namespace pullgrid {

struct StoreOptions {
  // When false, commits skip the fsync before returning. Durability tests
  // and the default configuration keep it on; bulk scenarios may turn it
  // off for speed.
  bool fsync_on_commit = true;
};

struct StoreStats {
  uint64_t commits = 0;
  uint64_t conflicts = 0;
  uint64_t record_reads = 0;
  uint64_t records = 0;
};

struct CompactStats {
  uint64_t records_snapshotted = 0;
  uint64_t journal_bytes_before = 0;
  uint64_t journal_bytes_after = 0;
};

class Store;

/// Transaction view: reads see the committed snapshot plus this
/// transaction's own writes. All writes become visible atomically at
/// commit, or not at all.
class Txn {
 public:
  std::optional<std::string> get(const std::string& table, const std::string& key);
  void put(const std::string& table, const std::string& key, std::string value);
  void erase(const std::string& table, const std::string& key);

  /// Visits live records of `table` with keys starting with `prefix`, in
  /// key order. Stop early by returning false from the visitor.
  void scan(const std::string& table, const std::string& prefix,
            const std::function<bool(const std::string& key,
                                     const std::string& value)>& visit);

 private:
  friend class Store;
  explicit Txn(Store& store) : store_(store) {}

  Store& store_;
  uint64_t snapshot_version_ = 0;
  // key -> version observed (UINT64_MAX for "absent at read time")
  std::map<std::string, uint64_t> reads_;
  std::map<std::string, uint64_t> table_reads_;  // table scans
  std::map<std::string, std::optional<std::string>> writes_;
};

/// The production database: all task, job, dataset and package records of
/// the central services live here. A single journal file carries every
/// committed transaction as a checksummed record; a snapshot file holds the
/// last compacted state. Crash recovery replays the journal and discards a
/// torn tail.
class Store {
 public:
  /// Opens (creating if needed) the store rooted at `dir`.
  /// Throws Error(CorruptJournal) when the journal is damaged anywhere but
  /// the tail, Error(IoFailure) on filesystem trouble.
  explicit Store(const std::string& dir, StoreOptions options = {});
  ~Store();

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  /// Runs `body` as a serializable transaction. The body may be re-executed
  /// on write conflicts; after too many consecutive conflicts the commit
  /// fails with Error(Conflict).
  template <typename Fn>
  auto transact(Fn&& body) {
    for (int tries = 0;; ++tries) {
      Txn txn(*this);
      begin(txn);
      if constexpr (std::is_void_v<decltype(body(txn))>) {
        body(txn);
        if (commit(txn)) return;
      } else {
        auto result = body(txn);
        if (commit(txn)) return result;
      }
      if (tries >= kMaxCommitRetries)
        throw Error(ErrorCode::Conflict, "transaction kept conflicting");
      note_conflict();
    }
  }

  CompactStats compact();

  StoreStats stats() const;

  /// Stable digest of the full committed content, for identity checks.
  uint32_t content_hash();

  const std::string& root_path() const { return dir_; }

 private:
  friend class Txn;
  static constexpr int kMaxCommitRetries = 1000;

  struct VersionedValue {
    std::string value;
    uint64_t version = 0;
    bool dead = false;
  };

  void begin(Txn& txn);
  bool commit(Txn& txn);
  void note_conflict();

  void load();
  void replay_journal();
  void append_record(const std::string& payload);
  std::string serialize_ops(const Txn& txn) const;
  void apply_ops(const std::string& payload);
  void open_journal_for_append();

  std::string dir_;
  StoreOptions options_;
  mutable std::mutex mu_;
  // flat key "table\0key" -> versioned value
  std::map<std::string, VersionedValue> data_;
  std::map<std::string, uint64_t> table_versions_;
  uint64_t version_counter_ = 0;
  uint64_t journal_seq_ = 0;
  uint64_t snapshot_seq_ = 0;
  int journal_fd_ = -1;
  StoreStats stats_;
};

}  // namespace pullgrid
