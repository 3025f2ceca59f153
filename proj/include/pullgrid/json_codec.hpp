#pragma once

#include "json.hpp"
#include "pullgrid/model.hpp"

// JSON forms of the domain types as stored in the production database.
// These are internal record encodings, not wire formats.

namespace pullgrid {

void to_json(nlohmann::json& j, const StepDefinition& s);
void from_json(const nlohmann::json& j, StepDefinition& s);

void to_json(nlohmann::json& j, const WorkflowDefinition& w);
void from_json(const nlohmann::json& j, WorkflowDefinition& w);

void to_json(nlohmann::json& j, const ProductionRun& r);
void from_json(const nlohmann::json& j, ProductionRun& r);

void to_json(nlohmann::json& j, const DatasetDescription& d);
void from_json(const nlohmann::json& j, DatasetDescription& d);

void to_json(nlohmann::json& j, const Replica& r);
void from_json(const nlohmann::json& j, Replica& r);

/// Persistent row for one job: scheduling descriptor fields plus the
/// lifecycle state. Resolved steps are not stored; they are recomputed
/// from the workflow and run when the job is served.
struct StoredJob {
  std::string job_id;
  std::string run_id;
  int sequence_index = 0;
  int64_t events = 0;
  int64_t first_event_offset = 0;
  JobState state = JobState::Created;
  std::string site;      // empty when unset
  std::string batch_id;  // empty when unset
  int attempt = 1;
  double last_update = 0;
  int history_len = 0;
};

void to_json(nlohmann::json& j, const StoredJob& job);
void from_json(const nlohmann::json& j, StoredJob& job);

/// One row of the job history stream: service-side transitions and
/// agent/worker status messages share this shape.
struct HistoryRow {
  std::string job_id;
  int attempt = 1;
  JobState state = JobState::Created;
  int step_index = -1;  // -1 when absent
  std::string note;
  std::string site_id;
  double timestamp = 0;
  std::string origin;  // "service" | "agent" | "wn"
  bool transition = false;  // row changed the job state
  bool illegal_transition = false;
  bool out_of_order = false;
};

void to_json(nlohmann::json& j, const HistoryRow& r);
void from_json(const nlohmann::json& j, HistoryRow& r);

}  // namespace pullgrid
