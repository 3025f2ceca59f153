#pragma once

#include <string>
#include <string_view>

#include "pullgrid/model.hpp"
#include "pullgrid/rpc.hpp"

namespace pullgrid {

// Job and dataset wire documents. One element per field, steps as repeated
// <step> elements; type sets are serialized in sorted order so encoding is
// byte-deterministic.

std::string job_to_xml(const JobDescriptor& job);
JobDescriptor job_from_xml(std::string_view bytes);

// The dataset wire form never carries the status field; a parsed
// description always comes back Pending.
std::string dataset_to_xml(const DatasetDescription& d);
DatasetDescription dataset_from_xml(std::string_view bytes);

std::string workflow_to_xml(const WorkflowDefinition& w);
WorkflowDefinition workflow_from_xml(std::string_view bytes);

// RPC struct mappings for the values that cross service boundaries.
rpc::Value capability_to_rpc(const ResourceCapability& cap);
ResourceCapability capability_from_rpc(const rpc::Value& v);

struct StatusReport {
  std::string job_id;
  JobState reported_state = JobState::Created;
  std::optional<int> step_index;
  std::string note;
  std::string site_id;
  double timestamp = 0;
};

rpc::Value status_to_rpc(const StatusReport& m);
StatusReport status_from_rpc(const rpc::Value& v);

rpc::Value replica_to_rpc(const Replica& r);
Replica replica_from_rpc(const rpc::Value& v);

rpc::Value dataset_to_rpc(const DatasetDescription& d);
DatasetDescription dataset_from_rpc(const rpc::Value& v);

}  // namespace pullgrid
