#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pullgrid/errors.hpp"

namespace pullgrid {

// ---------------------------------------------------------------------------
// Production task hierarchy: a workflow describes the application pipeline,
// a run instantiates it for a fixed event count, and the run is split into
// jobs as the unit of scheduling.
// ---------------------------------------------------------------------------

struct StepDefinition {
  std::string application;
  std::string app_version;
  // Ordered key=value pairs; order is significant and preserved end to end.
  std::vector<std::pair<std::string, std::string>> options;
  std::set<std::string> input_types;
  std::set<std::string> output_types;

  bool operator==(const StepDefinition&) const = default;
};

struct WorkflowDefinition {
  std::string workflow_id;
  std::string name;
  int version = 1;  // monotone per name
  std::vector<StepDefinition> steps;
  double created_at = 0;

  bool operator==(const WorkflowDefinition&) const = default;
};

struct ProductionRun {
  std::string run_id;
  std::string workflow_id;
  int64_t total_events = 0;
  int64_t events_per_job = 0;
  std::map<std::string, std::string> extra_options;
  std::optional<std::string> destination_site;
  double created_at = 0;

  bool operator==(const ProductionRun&) const = default;
};

struct JobRequirements {
  std::optional<std::string> destination_site;
  double min_cpu_power = 0;
  int64_t min_disk_mb = 0;
  // Distinct (application, app_version) pairs of the resolved steps,
  // in first-occurrence order.
  std::vector<std::pair<std::string, std::string>> software;

  bool operator==(const JobRequirements&) const = default;
};

struct JobDescriptor {
  std::string job_id;
  std::string run_id;
  int sequence_index = 0;
  int64_t events = 0;
  std::vector<StepDefinition> resolved_steps;
  JobRequirements requirements;
  int64_t first_event_offset = 0;

  bool operator==(const JobDescriptor&) const = default;
};

// ---------------------------------------------------------------------------
// Job lifecycle
// ---------------------------------------------------------------------------

enum class JobState {
  Created,
  Waiting,
  Assigned,
  Installing,
  Submitted,
  Running,
  Transferring,
  Done,
  Failed,
};

constexpr int kJobStateCount = 9;

const char* job_state_name(JobState s);
std::optional<JobState> job_state_from_name(const std::string& name);

/// True iff (from, to) is a legal lifecycle transition. Total function.
bool validate_transition(JobState from, JobState to);

struct HistoryEntry {
  double timestamp = 0;
  JobState state = JobState::Created;
  std::string note;
};

struct JobRecord {
  std::string job_id;
  JobState state = JobState::Created;
  std::optional<std::string> site;
  std::optional<std::string> batch_id;
  int attempt = 1;
  double last_update = 0;
  std::vector<HistoryEntry> history;
};

// ---------------------------------------------------------------------------
// Resource capabilities and matching
// ---------------------------------------------------------------------------

struct ResourceCapability {
  std::string site_id;
  double cpu_power = 1.0;
  int64_t free_disk_mb = 0;
  double queue_occupancy = 0;  // in [0,1]
  std::set<std::pair<std::string, std::string>> installed_software;
};

/// Resource-capability check on the service side of a pull request.
/// Software availability is deliberately not a criterion: agents install
/// missing software on demand.
bool match_job(const JobRequirements& req, const ResourceCapability& cap);

// ---------------------------------------------------------------------------
// Bookkeeping records
// ---------------------------------------------------------------------------

enum class DatasetStatus { Pending, Approved, Rejected };

const char* dataset_status_name(DatasetStatus s);
std::optional<DatasetStatus> dataset_status_from_name(const std::string& name);

struct DatasetDescription {
  std::string lfn;  // globally unique logical file name
  std::string data_type;
  std::string job_id;
  std::string run_id;
  int64_t events = 0;
  int64_t size_bytes = 0;
  uint32_t checksum = 0;
  DatasetStatus status = DatasetStatus::Pending;

  bool operator==(const DatasetDescription&) const = default;

  // Wire and idempotency comparisons ignore the service-side status field.
  bool same_content(const DatasetDescription& o) const {
    return lfn == o.lfn && data_type == o.data_type && job_id == o.job_id &&
           run_id == o.run_id && events == o.events &&
           size_bytes == o.size_bytes && checksum == o.checksum;
  }
};

struct Replica {
  std::string lfn;
  std::string storage_element;
  std::string url;
  double registered_at = 0;
  uint32_t checksum = 0;

  bool operator==(const Replica&) const = default;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Applies run-level option overrides to the workflow steps. An override
/// replaces a step option on exact key match only; keys matching no step
/// option are ignored.
std::vector<StepDefinition> resolve_steps(const WorkflowDefinition& workflow,
                                          const ProductionRun& run);

/// Requirements derived from a run and its resolved steps.
JobRequirements derive_requirements(const ProductionRun& run,
                                    const std::vector<StepDefinition>& steps);

/// Splits a run into ceil(total/per_job) jobs. All but possibly the last
/// carry events_per_job events; offsets partition [0, total_events).
/// Throws Error(MismatchedWorkflow) if the run references another workflow.
std::vector<JobDescriptor> split_run(const ProductionRun& run,
                                     const WorkflowDefinition& workflow);

/// Pipeline type-check: every input type of step i+1 must be produced by
/// step i. Returns the 0-based index of the first violating step, or -1.
int pipeline_violation(const std::vector<StepDefinition>& steps);

std::string job_id_for(const std::string& run_id, int sequence_index);

}  // namespace pullgrid
