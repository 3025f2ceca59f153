#pragma once

#include <optional>
#include <string>

#include "pullgrid/json_codec.hpp"
#include "pullgrid/store.hpp"

// Keyspaces of the production database and shared row access used by the
// services. Job history keys are "<job_id>|<seq>" with a fixed-width
// sequence so scans come back in append order.

namespace pullgrid::tables {

inline const char kWorkflows[] = "workflows";
inline const char kWorkflowNames[] = "workflow_names";
inline const char kRuns[] = "runs";
inline const char kRunTokens[] = "run_tokens";
inline const char kJobs[] = "jobs";
inline const char kJobsWaiting[] = "jobs_waiting";
inline const char kJobHistory[] = "job_history";
inline const char kDatasetsPending[] = "datasets_pending";
inline const char kDatasetsCatalog[] = "datasets_catalog";
inline const char kReplicas[] = "replicas";
inline const char kPackages[] = "packages";
inline const char kCounters[] = "counters";

std::optional<StoredJob> load_job(Txn& txn, const std::string& job_id);
void save_job(Txn& txn, const StoredJob& job);

std::string history_key(const std::string& job_id, int seq);

/// Appends one history row and bumps the job's history length. Does not
/// change the job state; callers update `job` and save it themselves.
void append_history(Txn& txn, StoredJob& job, const HistoryRow& row,
                    bool is_transition);

uint64_t next_counter(Txn& txn, const std::string& name);

}  // namespace pullgrid::tables
