#pragma once

// Real-mode counterparts of the simulated site: a batch system that runs
// wrapper scripts as local processes under a slot limit, and a transfer
// backend that copies files into a storage-element directory tree.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <string>

#include "pullgrid/agent.hpp"

namespace pullgrid {

class LocalProcessBatch : public BatchSystem {
 public:
  LocalProcessBatch(const std::filesystem::path& work_dir, int slot_count,
                    TimeSource now = wall_clock());
  ~LocalProcessBatch() override;

  std::string submit(const JobDescriptor& job,
                     const std::string& wrapper_script) override;
  BatchSnapshot status() override;
  CollectedJob collect(const std::string& batch_id) override;
  void reap(const std::string& batch_id) override;

  /// Blocks until every submitted job has finished or the timeout expires.
  bool drain(double timeout_seconds);

 private:
  struct Entry {
    JobDescriptor job;
    std::filesystem::path dir;
    BatchJobView view;
    long pid = -1;
  };

  void pump();
  void spawn(Entry& e);

  std::filesystem::path work_dir_;
  int slot_count_;
  TimeSource now_;
  int seq_ = 0;
  int running_ = 0;
  std::deque<std::string> queue_;
  std::map<std::string, Entry> jobs_;
};

class FileTransferBackend : public TransferBackend {
 public:
  explicit FileTransferBackend(std::filesystem::path root);

  std::optional<uint32_t> transfer(const std::string& local_path,
                                   const std::string& storage_element,
                                   const std::string& remote_path) override;

  std::filesystem::path destination(const std::string& storage_element,
                                    const std::string& remote_path) const;

 private:
  std::filesystem::path root_;
};

}  // namespace pullgrid
