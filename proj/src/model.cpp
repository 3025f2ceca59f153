#include "pullgrid/model.hpp"

#include <algorithm>

#include "pullgrid/util.hpp"

namespace pullgrid {

const char* job_state_name(JobState s) {
  switch (s) {
    case JobState::Created: return "Created";
    case JobState::Waiting: return "Waiting";
    case JobState::Assigned: return "Assigned";
    case JobState::Installing: return "Installing";
    case JobState::Submitted: return "Submitted";
    case JobState::Running: return "Running";
    case JobState::Transferring: return "Transferring";
    case JobState::Done: return "Done";
    case JobState::Failed: return "Failed";
  }
  return "?";
}

std::optional<JobState> job_state_from_name(const std::string& name) {
  for (int i = 0; i < kJobStateCount; ++i) {
    JobState s = static_cast<JobState>(i);
    if (name == job_state_name(s)) return s;
  }
  return std::nullopt;
}

bool validate_transition(JobState from, JobState to) {
  switch (from) {
    case JobState::Created:
      return to == JobState::Waiting;
    case JobState::Waiting:
      return to == JobState::Assigned;
    case JobState::Assigned:
      return to == JobState::Installing || to == JobState::Failed;
    case JobState::Installing:
      return to == JobState::Submitted || to == JobState::Failed;
    case JobState::Submitted:
      return to == JobState::Running || to == JobState::Failed;
    case JobState::Running:
      return to == JobState::Transferring || to == JobState::Failed;
    case JobState::Transferring:
      return to == JobState::Done || to == JobState::Failed;
    case JobState::Done:
      return false;  // terminal
    case JobState::Failed:
      return to == JobState::Waiting;  // reschedule only
  }
  return false;
}

const char* dataset_status_name(DatasetStatus s) {
  switch (s) {
    case DatasetStatus::Pending: return "Pending";
    case DatasetStatus::Approved: return "Approved";
    case DatasetStatus::Rejected: return "Rejected";
  }
  return "?";
}

std::optional<DatasetStatus> dataset_status_from_name(const std::string& name) {
  if (name == "Pending") return DatasetStatus::Pending;
  if (name == "Approved") return DatasetStatus::Approved;
  if (name == "Rejected") return DatasetStatus::Rejected;
  return std::nullopt;
}

bool match_job(const JobRequirements& req, const ResourceCapability& cap) {
  if (req.destination_site && *req.destination_site != cap.site_id) return false;
  if (cap.cpu_power < req.min_cpu_power) return false;
  if (cap.free_disk_mb < req.min_disk_mb) return false;
  return true;
}

std::vector<StepDefinition> resolve_steps(const WorkflowDefinition& workflow,
                                          const ProductionRun& run) {
  std::vector<StepDefinition> steps = workflow.steps;
  for (auto& step : steps) {
    for (auto& [key, value] : step.options) {
      auto it = run.extra_options.find(key);
      if (it != run.extra_options.end()) value = it->second;
    }
  }
  return steps;
}

JobRequirements derive_requirements(const ProductionRun& run,
                                    const std::vector<StepDefinition>& steps) {
  JobRequirements req;
  req.destination_site = run.destination_site;
  // Reserved run options set the resource floor; absent keys leave it at 0.
  try {
    if (auto it = run.extra_options.find("min_cpu_power");
        it != run.extra_options.end())
      req.min_cpu_power = std::stod(it->second);
    if (auto it = run.extra_options.find("min_disk_mb");
        it != run.extra_options.end())
      req.min_disk_mb = std::stoll(it->second);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidParameters,
                "min_cpu_power/min_disk_mb options must be numeric");
  }
  for (const auto& step : steps) {
    auto pair = std::make_pair(step.application, step.app_version);
    if (std::find(req.software.begin(), req.software.end(), pair) ==
        req.software.end())
      req.software.push_back(pair);
  }
  return req;
}

std::vector<JobDescriptor> split_run(const ProductionRun& run,
                                     const WorkflowDefinition& workflow) {
  if (run.workflow_id != workflow.workflow_id)
    throw Error(ErrorCode::MismatchedWorkflow,
                "run " + run.run_id + " references " + run.workflow_id +
                    ", not " + workflow.workflow_id);
  if (run.events_per_job < 1 || run.total_events < 1)
    throw Error(ErrorCode::InvalidParameters,
                "need total_events >= 1 and events_per_job >= 1");

  auto steps = resolve_steps(workflow, run);
  auto requirements = derive_requirements(run, steps);

  int64_t count = (run.total_events + run.events_per_job - 1) / run.events_per_job;
  std::vector<JobDescriptor> jobs;
  jobs.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    JobDescriptor j;
    j.run_id = run.run_id;
    j.sequence_index = static_cast<int>(i);
    j.job_id = job_id_for(run.run_id, j.sequence_index);
    j.first_event_offset = i * run.events_per_job;
    j.events = std::min(run.events_per_job, run.total_events - j.first_event_offset);
    j.resolved_steps = steps;
    j.requirements = requirements;
    jobs.push_back(std::move(j));
  }
  return jobs;
}

int pipeline_violation(const std::vector<StepDefinition>& steps) {
  for (size_t i = 1; i < steps.size(); ++i) {
    const auto& provided = steps[i - 1].output_types;
    for (const auto& need : steps[i].input_types) {
      if (!provided.count(need)) return static_cast<int>(i);
    }
  }
  return -1;
}

std::string job_id_for(const std::string& run_id, int sequence_index) {
  return run_id + "-J" + zero_pad(static_cast<uint64_t>(sequence_index), 6);
}

}  // namespace pullgrid
