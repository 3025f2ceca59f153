#include "pullgrid/json_codec.hpp"

using nlohmann::json;

namespace pullgrid {

void to_json(json& j, const StepDefinition& s) {
  json opts = json::array();
  for (const auto& [k, v] : s.options) opts.push_back(json::array({k, v}));
  j = json{{"application", s.application},
           {"app_version", s.app_version},
           {"options", std::move(opts)},
           {"input_types", s.input_types},
           {"output_types", s.output_types}};
}

void from_json(const json& j, StepDefinition& s) {
  s.application = j.at("application");
  s.app_version = j.at("app_version");
  s.options.clear();
  for (const auto& kv : j.at("options"))
    s.options.emplace_back(kv.at(0), kv.at(1));
  s.input_types = j.at("input_types").get<std::set<std::string>>();
  s.output_types = j.at("output_types").get<std::set<std::string>>();
}

void to_json(json& j, const WorkflowDefinition& w) {
  j = json{{"workflow_id", w.workflow_id},
           {"name", w.name},
           {"version", w.version},
           {"steps", w.steps},
           {"created_at", w.created_at}};
}

void from_json(const json& j, WorkflowDefinition& w) {
  w.workflow_id = j.at("workflow_id");
  w.name = j.at("name");
  w.version = j.at("version");
  w.steps = j.at("steps").get<std::vector<StepDefinition>>();
  w.created_at = j.at("created_at");
}

void to_json(json& j, const ProductionRun& r) {
  j = json{{"run_id", r.run_id},
           {"workflow_id", r.workflow_id},
           {"total_events", r.total_events},
           {"events_per_job", r.events_per_job},
           {"extra_options", r.extra_options},
           {"created_at", r.created_at}};
  if (r.destination_site) j["destination_site"] = *r.destination_site;
}

void from_json(const json& j, ProductionRun& r) {
  r.run_id = j.at("run_id");
  r.workflow_id = j.at("workflow_id");
  r.total_events = j.at("total_events");
  r.events_per_job = j.at("events_per_job");
  r.extra_options =
      j.at("extra_options").get<std::map<std::string, std::string>>();
  r.created_at = j.at("created_at");
  if (j.contains("destination_site"))
    r.destination_site = j.at("destination_site").get<std::string>();
  else
    r.destination_site.reset();
}

void to_json(json& j, const DatasetDescription& d) {
  j = json{{"lfn", d.lfn},
           {"data_type", d.data_type},
           {"job_id", d.job_id},
           {"run_id", d.run_id},
           {"events", d.events},
           {"size_bytes", d.size_bytes},
           {"checksum", d.checksum},
           {"status", dataset_status_name(d.status)}};
}

void from_json(const json& j, DatasetDescription& d) {
  d.lfn = j.at("lfn");
  d.data_type = j.at("data_type");
  d.job_id = j.at("job_id");
  d.run_id = j.at("run_id");
  d.events = j.at("events");
  d.size_bytes = j.at("size_bytes");
  d.checksum = j.at("checksum");
  d.status = *dataset_status_from_name(j.at("status"));
}

void to_json(json& j, const Replica& r) {
  j = json{{"lfn", r.lfn},
           {"storage_element", r.storage_element},
           {"url", r.url},
           {"registered_at", r.registered_at},
           {"checksum", r.checksum}};
}

void from_json(const json& j, Replica& r) {
  r.lfn = j.at("lfn");
  r.storage_element = j.at("storage_element");
  r.url = j.at("url");
  r.registered_at = j.at("registered_at");
  r.checksum = j.at("checksum");
}

void to_json(json& j, const StoredJob& job) {
  j = json{{"job_id", job.job_id},
           {"run_id", job.run_id},
           {"sequence_index", job.sequence_index},
           {"events", job.events},
           {"first_event_offset", job.first_event_offset},
           {"state", job_state_name(job.state)},
           {"site", job.site},
           {"batch_id", job.batch_id},
           {"attempt", job.attempt},
           {"last_update", job.last_update},
           {"history_len", job.history_len}};
}

void from_json(const json& j, StoredJob& job) {
  job.job_id = j.at("job_id");
  job.run_id = j.at("run_id");
  job.sequence_index = j.at("sequence_index");
  job.events = j.at("events");
  job.first_event_offset = j.at("first_event_offset");
  job.state = *job_state_from_name(j.at("state"));
  job.site = j.at("site");
  job.batch_id = j.at("batch_id");
  job.attempt = j.at("attempt");
  job.last_update = j.at("last_update");
  job.history_len = j.at("history_len");
}

void to_json(json& j, const HistoryRow& r) {
  j = json{{"job_id", r.job_id},
           {"attempt", r.attempt},
           {"state", job_state_name(r.state)},
           {"step_index", r.step_index},
           {"note", r.note},
           {"site_id", r.site_id},
           {"timestamp", r.timestamp},
           {"origin", r.origin},
           {"transition", r.transition},
           {"illegal_transition", r.illegal_transition},
           {"out_of_order", r.out_of_order}};
}

void from_json(const json& j, HistoryRow& r) {
  r.job_id = j.at("job_id");
  r.attempt = j.at("attempt");
  r.state = *job_state_from_name(j.at("state"));
  r.step_index = j.at("step_index");
  r.note = j.at("note");
  r.site_id = j.at("site_id");
  r.timestamp = j.at("timestamp");
  r.origin = j.at("origin");
  r.transition = j.at("transition");
  r.illegal_transition = j.at("illegal_transition");
  r.out_of_order = j.at("out_of_order");
}

}  // namespace pullgrid
