#pragma once

// Deterministic discrete-event simulation of computing sites: batch queues
// with finite slots, relative CPU power, failure injection, WAN transfers
// that take size/bandwidth simulated time, and portal front-ends that
// broker jobs onto inner worker nodes. Given the same configuration and
// seed the event log is byte-identical across runs.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pullgrid/agent.hpp"
#include "pullgrid/model.hpp"

namespace pullgrid {

struct FailurePolicy {
  double submission_failure_prob = 0.0;
  double app_failure_prob = 0.0;
  double site_failure_prob = 0.0;
  double transfer_failure_prob = 0.0;
  // 0 means derive from the simulation seed and the site id.
  uint64_t rng_seed = 0;
};

struct InnerNode {
  std::string node_id;
  int slot_count = 1;
  double cpu_power = 1.0;
};

struct SimSiteConfig {
  std::string site_id;
  int slot_count = 1;
  double cpu_power = 1.0;
  int64_t disk_quota_mb = 1 << 20;
  double wan_bandwidth_bps = 100e6;
  FailurePolicy policy;
  // Non-empty marks the site as a portal front-end; slot capacity then
  // lives on the inner nodes and slot_count above is ignored.
  std::vector<InnerNode> inner;
};

/// A stored file: simulated content is never materialized, only its size
/// and checksum, which are a pure function of the seed string.
struct SimBlob {
  int64_t size_bytes = 0;
  uint32_t checksum = 0;
};

/// Fired when a simulated job starts running or completes on an execution
/// node. node_id equals site_id for plain sites and "<site>/<wn>" for a
/// portal's inner worker node.
struct SimJobEvent {
  std::string site_id;
  std::string node_id;
  std::string batch_id;
  JobDescriptor job;
  BatchJobView view;
  double nominal_runtime = 0;
  double scaled_runtime = 0;  // nominal divided by the node's cpu power
  bool inner = false;
};

class SiteSim {
 public:
  explicit SiteSim(uint64_t seed);

  void add_site(const SimSiteConfig& cfg);
  const SimSiteConfig& site_config(const std::string& site_id) const;
  std::vector<std::string> site_ids() const;

  double now() const { return now_; }

  /// Schedule an arbitrary callback (agent cycles, timed publishes). Events
  /// at equal timestamps fire in scheduling order.
  void at(double when, std::function<void()> fn);

  /// Advance simulated time, firing every event with time <= until, and
  /// return the log lines appended during this call.
  std::vector<std::string> advance(double until);

  /// True when no scheduled event remains at or before the given time.
  bool quiet_until(double until) const;

  const std::vector<std::string>& event_log() const { return log_; }
  void log(const std::string& site_id, const std::string& kind,
           const std::string& detail);

  // ------------------------------------------------------------ batch ----

  std::string batch_submit(const std::string& site_id, const JobDescriptor& job,
                           const std::string& script, double nominal_runtime);
  std::string portal_submit(const std::string& site_id,
                            const JobDescriptor& job, double nominal_runtime);
  BatchSnapshot batch_status(const std::string& site_id) const;
  CollectedJob batch_collect(const std::string& site_id,
                             const std::string& batch_id) const;
  void batch_reap(const std::string& site_id, const std::string& batch_id);

  std::function<void(const SimJobEvent&)> on_job_start;
  std::function<void(const SimJobEvent&)> on_job_complete;

  // -------------------------------------------------------- transfers ----

  /// Move a file from a node's scratch space to a storage element. Returns
  /// the checksum as computed at the destination, or nullopt when the
  /// attempt failed. node_id may be a site id or "<site>/<wn>".
  std::optional<uint32_t> wan_transfer(const std::string& node_id,
                                       const std::string& local_path,
                                       const std::string& se,
                                       const std::string& remote_path);

  const std::map<std::string, SimBlob>& se_contents(const std::string& se);
  const std::map<std::string, SimBlob>& node_scratch(
      const std::string& node_id);

  int64_t bytes_transferred() const { return bytes_transferred_; }
  int transfer_attempts() const { return transfer_attempts_; }
  int transfer_failures() const { return transfer_failures_; }

  void set_bytes_per_event(int64_t b) { bytes_per_event_ = b; }

 private:
  struct SimJob {
    std::string batch_id;
    JobDescriptor job;
    double nominal_runtime = 0;
    BatchJobView view;
  };

  struct ExecNode {
    std::string node_id;
    std::string site_id;
    int slot_count = 1;
    double cpu_power = 1.0;
    bool inner = false;
    std::deque<std::string> queue;
    int running = 0;
    std::map<std::string, SimJob> jobs;
    std::map<std::string, SimBlob> scratch;
  };

  struct Site {
    SimSiteConfig cfg;
    std::mt19937_64 rng;
    std::vector<std::string> nodes;
    int submit_seq = 0;
    // WAN link occupancy: each transfer extends this by size/bandwidth.
    double link_free = 0;
  };

  struct Event {
    double time;
    uint64_t seq;
    std::function<void()> fn;
    bool operator>(const Event& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };

  Site& site_at(const std::string& site_id);
  const Site& site_at(const std::string& site_id) const;
  ExecNode& node_at(const std::string& node_id);
  const ExecNode& node_at(const std::string& node_id) const;
  double draw(Site& s);
  std::string submit_to_node(ExecNode& node, Site& site,
                             const JobDescriptor& job, double nominal_runtime,
                             const char* id_prefix);
  void try_start(const std::string& node_id);
  void start_job(const std::string& node_id, const std::string& batch_id);
  void complete_job(const std::string& node_id, const std::string& batch_id);
  int64_t node_scratch_bytes(const ExecNode& n) const;

  uint64_t seed_;
  double now_ = 0;
  uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  std::map<std::string, Site> sites_;
  std::map<std::string, ExecNode> nodes_;
  std::map<std::string, std::map<std::string, SimBlob>> se_;
  std::vector<std::string> log_;
  int64_t bytes_per_event_ = 1000;
  int64_t bytes_transferred_ = 0;
  int transfer_attempts_ = 0;
  int transfer_failures_ = 0;
};

/// Deterministic checksum of synthetic content identified by a seed string;
/// the simulation's stand-in for hashing a real file of the given size.
uint32_t synth_checksum(const std::string& seed, int64_t size_bytes);

}  // namespace pullgrid
