#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pullgrid/clients.hpp"
#include "pullgrid/install_area.hpp"
#include "pullgrid/outbox.hpp"

namespace pullgrid {

// ---------------------------------------------------------------- batch ---

struct BatchJobView {
  enum class State { Queued, Running, Completed };
  enum class Outcome { Success, AppFailure, SiteFailure };

  std::string batch_id;
  State state = State::Queued;
  Outcome outcome = Outcome::Success;  // meaningful once Completed
  double started_at = 0;
  double finished_at = 0;
};

struct BatchSnapshot {
  int queued = 0;
  int running = 0;
  int slot_count = 1;
  double cpu_power = 1.0;
  int64_t free_disk_mb = 0;
  std::vector<BatchJobView> jobs;
};

struct OutputFile {
  std::string local_path;
  std::string data_type;
  int step_index = 0;
  int64_t events = 0;
  int64_t size_bytes = 0;
  uint32_t checksum = 0;
};

struct CollectedJob {
  std::vector<OutputFile> outputs;
  std::string log_path;
  int64_t log_size = 0;
  uint32_t log_checksum = 0;
};

/// Local batch system as the agent sees it. Implemented by the site
/// simulator and by the real-mode process runner.
class BatchSystem {
 public:
  virtual ~BatchSystem() = default;
  /// Throws Error(BatchSubmissionFailed) / Error(NoInnerResources).
  virtual std::string submit(const JobDescriptor& job,
                             const std::string& wrapper_script) = 0;
  virtual BatchSnapshot status() = 0;
  virtual CollectedJob collect(const std::string& batch_id) = 0;
  virtual void reap(const std::string& batch_id) = 0;
};

/// Moves one local file to a storage element. Returns the checksum the
/// destination computed over the stored copy, or nullopt on failure; the
/// caller verifies it against the expected value.
class TransferBackend {
 public:
  virtual ~TransferBackend() = default;
  virtual std::optional<uint32_t> transfer(const std::string& local_path,
                                           const std::string& storage_element,
                                           const std::string& remote_path) = 0;
};

// ---------------------------------------------------------------- agent ---

struct AgentConfig {
  std::string site_id;
  std::string prod_endpoint;
  std::string mon_endpoint;
  std::string book_endpoint;
  std::string repo_endpoint;
  int fill_target = 4;
  double occupancy_threshold = 0.8;
  double poll_interval = 60;
  std::string outbox_path;
  std::string install_area_path;
  std::optional<int64_t> install_quota_mb;
  bool shared_area_writable = true;
  std::string storage_element = "se-central";
  int max_transfer_attempts_per_cycle = 8;
  // Synthetic workload knobs for the generated wrapper script.
  int64_t bytes_per_event = 2048;
  double runtime_seconds = 0;
  // Test knob: send every dataset registration and terminal report twice,
  // exercising at-least-once delivery downstream.
  bool duplicate_reports = false;
  // When false, application and site failures are reported terminal instead
  // of being handed back for another attempt. Submission and software
  // failures always reschedule: the job never started, so a retry elsewhere
  // is free.
  bool reschedule_execution_failures = true;
  // Portal front-end to a sub-grid: jobs are dispatched as sandboxes and a
  // nested agent on the worker node steers them, so this agent neither
  // installs software nor finalizes.
  bool portal_mode = false;
};

struct CycleAction {
  std::string kind;
  std::string detail;
};

struct CycleReport {
  double started_at = 0;
  std::vector<CycleAction> actions;

  int count(const std::string& kind) const;
  bool has(const std::string& kind) const { return count(kind) > 0; }
};

/// The per-site daemon body. One run_cycle call performs the fixed
/// sequence flush → finalize → flush → pull; every action lands in the
/// returned report and no exception escapes.
class Agent {
 public:
  Agent(AgentConfig cfg, RpcTransport& transport, BatchSystem& batch,
        TransferBackend& transfer, TimeSource now);
  ~Agent();

  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  CycleReport run_cycle();

  /// Forwards a worker-node message with its original timestamp. Returns
  /// true when delivered now, false when spooled to the outbox.
  bool relay(const StatusReport& msg);

  static double compute_occupancy(const BatchSnapshot& s);

  /// Installs everything the requirements name. Returns the report and
  /// the install-area root the wrapper should source bootstraps from.
  std::pair<InstallReport, std::filesystem::path> ensure_software(
      const JobRequirements& req, const std::string& job_id);

  static std::string lfn_for(const JobDescriptor& job, const OutputFile& f);
  static std::string log_lfn_for(const std::string& job_id);

  Outbox& outbox() { return outbox_; }
  const AgentConfig& config() const { return cfg_; }
  /// Jobs pulled but not yet terminal, as persisted for crash recovery.
  std::vector<std::string> tracked_jobs() const;

 private:
  struct TrackedJob {
    JobDescriptor job;
    std::string batch_id;
    std::string phase;  // assigned|submitted|running|transferring|reschedule_pending
    std::string area_root;
    std::string failure_reason;
  };

  void load_tracked();
  void save_tracked(const TrackedJob& t);
  void drop_tracked(const std::string& job_id);

  void flush_stage(CycleReport& rep);
  void flush_entry(const OutboxEntry& entry, CycleReport& rep);
  void finalize_stage(CycleReport& rep);
  void finalize_success(TrackedJob& t, const BatchJobView& view,
                        CycleReport& rep);
  void finalize_failure(TrackedJob& t, const BatchJobView& view,
                        CycleReport& rep);
  void settle_stage(CycleReport& rep);
  void pull_stage(CycleReport& rep);

  void note_pull_failure();
  void report(const StatusReport& msg);
  void try_report(const StatusReport& msg);
  std::string build_wrapper(const JobDescriptor& job,
                            const std::filesystem::path& area_root) const;
  void request_reschedule(TrackedJob& t, const std::string& reason,
                          CycleReport& rep);

  AgentConfig cfg_;
  RpcTransport& transport_;
  BatchSystem& batch_;
  TransferBackend& transfer_;
  TimeSource now_;

  Outbox outbox_;
  ProductionClient prod_;
  MonitoringClient mon_;
  BookkeepingClient book_;
  RepoClient repo_;
  std::unique_ptr<InstallArea> shared_area_;
  std::map<std::string, TrackedJob> tracked_;
  std::set<std::string> attempted_this_cycle_;
  int budget_ = 0;
  int lock_fd_ = -1;
  // Circuit breaker: a site that cannot start jobs (submission or software
  // failures) pauses its pulls with exponential backoff so it stops burning
  // the reschedule budget of jobs another site could run.
  int pull_failure_streak_ = 0;
  int pull_backoff_cycles_ = 0;
};

}  // namespace pullgrid
