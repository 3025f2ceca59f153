#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pullgrid/json_codec.hpp"
#include "pullgrid/model.hpp"
#include "pullgrid/store.hpp"

namespace pullgrid {

/// Clock injected into the services so simulated and wall-clock time share
/// one code path.
using TimeSource = std::function<double()>;

TimeSource wall_clock();

struct ProductionConfig {
  int max_reschedules = 3;
};

struct RunCreated {
  std::string run_id;
  int64_t job_count = 0;
};

/// Central task queue. Holds workflow definitions and production runs,
/// splits runs into jobs, and hands jobs out one at a time to whichever
/// site asks for work it can match.
class ProductionService {
 public:
  ProductionService(Store& store, ProductionConfig cfg, TimeSource now);

  /// Stores a workflow. The id and version are assigned here: a name seen
  /// before gets version latest+1 and a fresh id. Returns the assigned id.
  std::string define_workflow(WorkflowDefinition w);

  WorkflowDefinition get_workflow(const std::string& workflow_id);
  std::vector<WorkflowDefinition> workflow_versions(const std::string& name);

  /// Creates a run and its jobs (all Waiting). `request_token`, when
  /// non-empty, makes the call idempotent: a token seen before returns the
  /// original result without creating anything.
  RunCreated create_run(const std::string& workflow_id, int64_t total_events,
                        int64_t events_per_job,
                        const std::vector<std::pair<std::string, std::string>>&
                            option_overrides,
                        const std::optional<std::string>& destination_site,
                        const std::string& request_token = "");

  /// Serves the oldest waiting job the capability can run, or nullopt when
  /// nothing matches. The served job moves to Assigned and leaves the
  /// waiting index, so no two callers can receive the same job.
  std::optional<JobDescriptor> request_job(const ResourceCapability& cap);

  /// Returns the job to Waiting for another attempt, or leaves it Failed
  /// when attempts are exhausted. Returns the resulting state.
  JobState reschedule_job(const std::string& job_id, const std::string& reason);

  std::map<JobState, int64_t> run_status(const std::string& run_id);

  ProductionRun get_run(const std::string& run_id);
  std::optional<StoredJob> get_job(const std::string& job_id);

  const ProductionConfig& config() const { return cfg_; }

 private:
  JobDescriptor describe_job(Txn& txn, const StoredJob& job);

  Store& store_;
  ProductionConfig cfg_;
  TimeSource now_;
};

}  // namespace pullgrid
