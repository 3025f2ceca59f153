#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pullgrid {

/// One cached transfer obligation. Dataset and log entries point at a
/// local file; metadata entries carry the spooled message in `payload`.
struct OutboxEntry {
  std::string id;  // assigned, zero-padded, defines retry order
  std::string kind;  // "dataset" | "log" | "metadata"
  std::string local_path;
  std::string destination;  // storage element or service name
  std::string lfn;          // dataset lfn / log remote path
  std::string job_id;
  int64_t size_bytes = 0;
  uint32_t checksum = 0;
  int attempts = 0;
  // Datasets: transfer confirmed, replica registration still owed. The
  // entry only disappears once the replica is in the catalog.
  bool delivered = false;
  double created_at = 0;
  std::string payload;
};

/// Store-and-forward cache, one payload file plus a JSON sidecar per
/// entry. The sidecar is the commit record: removal of the sidecar is the
/// only operation that "completes" an entry, so a crash at any point
/// leaves either a retryable entry or nothing.
class Outbox {
 public:
  explicit Outbox(const std::filesystem::path& dir);

  std::string add(OutboxEntry e);
  void update(const OutboxEntry& e);
  void remove(const std::string& id);

  std::vector<OutboxEntry> entries() const;  // oldest first
  std::optional<OutboxEntry> get(const std::string& id) const;
  size_t size() const;
  bool empty() const { return size() == 0; }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path sidecar_path(const std::string& id) const;
  std::filesystem::path payload_path(const std::string& id) const;

  std::filesystem::path dir_;
  uint64_t next_seq_ = 1;
};

}  // namespace pullgrid
