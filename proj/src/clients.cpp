#include "pullgrid/clients.hpp"

#include "pullgrid/util.hpp"

namespace pullgrid {

const rpc::Value& unwrap(const rpc::Reply& reply) {
  if (!reply.is_fault()) return reply.value();
  const auto& f = reply.fault();
  auto code = static_cast<ErrorCode>(f.code);
  // The fault message already carries the "Name: " prefix the Error
  // constructor adds; strip it so rethrowing does not double it.
  std::string prefix = std::string(error_name(code)) + ": ";
  std::string detail = f.message;
  if (detail.rfind(prefix, 0) == 0) detail = detail.substr(prefix.size());
  throw Error(code, detail);
}

std::string ProductionClient::define_workflow(const WorkflowDefinition& w) {
  auto reply = t_.roundtrip(
      endpoint_, rpc::Call{"defineWorkflow", {rpc::Value(workflow_to_xml(w))}});
  return unwrap(reply).as_string();
}

RunCreated ProductionClient::create_run(
    const std::string& workflow_id, int64_t total_events,
    int64_t events_per_job,
    const std::map<std::string, std::string>& extra_options,
    const std::string& destination_site, const std::string& request_token) {
  rpc::Value::Struct args;
  args.emplace("workflow_id", rpc::Value(workflow_id));
  args.emplace("total_events", rpc::Value(static_cast<double>(total_events)));
  args.emplace("events_per_job",
               rpc::Value(static_cast<double>(events_per_job)));
  rpc::Value::Struct opts;
  for (const auto& [k, v] : extra_options) opts.emplace(k, rpc::Value(v));
  args.emplace("extra_options", rpc::Value(std::move(opts)));
  args.emplace("destination_site", rpc::Value(destination_site));
  if (!request_token.empty())
    args.emplace("request_token", rpc::Value(request_token));

  auto reply = t_.roundtrip(
      endpoint_, rpc::Call{"createRun", {rpc::Value(std::move(args))}});
  const auto& v = unwrap(reply);
  return RunCreated{v.at("run_id").as_string(), v.at("job_count").as_int()};
}

std::optional<JobDescriptor> ProductionClient::request_job(
    const ResourceCapability& cap) {
  auto reply = t_.roundtrip(endpoint_,
                            rpc::Call{"requestJob", {capability_to_rpc(cap)}});
  const std::string& xml = unwrap(reply).as_string();
  if (xml.empty()) return std::nullopt;
  return job_from_xml(xml);
}

JobState ProductionClient::reschedule_job(const std::string& job_id,
                                          const std::string& reason) {
  auto reply = t_.roundtrip(
      endpoint_,
      rpc::Call{"rescheduleJob", {rpc::Value(job_id), rpc::Value(reason)}});
  auto state = job_state_from_name(unwrap(reply).as_string());
  if (!state)
    throw Error(ErrorCode::MalformedDocument, "bad state in reply");
  return *state;
}

std::map<JobState, int64_t> ProductionClient::run_status(
    const std::string& run_id) {
  auto reply =
      t_.roundtrip(endpoint_, rpc::Call{"runStatus", {rpc::Value(run_id)}});
  std::map<JobState, int64_t> counts;
  for (const auto& [name, count] : unwrap(reply).as_struct()) {
    auto state = job_state_from_name(name);
    if (!state)
      throw Error(ErrorCode::MalformedDocument, "bad state " + name);
    counts[*state] = count.as_int();
  }
  return counts;
}

bool MonitoringClient::report_status(const StatusReport& m,
                                     const std::string& origin) {
  auto reply = t_.roundtrip(
      endpoint_,
      rpc::Call{"reportStatus", {status_to_rpc(m), rpc::Value(origin)}});
  return unwrap(reply).as_bool();
}

std::vector<HistoryRow> MonitoringClient::job_history(
    const std::string& job_id) {
  auto reply =
      t_.roundtrip(endpoint_, rpc::Call{"jobHistory", {rpc::Value(job_id)}});
  std::vector<HistoryRow> rows;
  for (const auto& v : unwrap(reply).as_array()) {
    HistoryRow r;
    r.job_id = v.at("job_id").as_string();
    r.attempt = v.at("attempt").as_int();
    auto state = job_state_from_name(v.at("state").as_string());
    if (!state)
      throw Error(ErrorCode::MalformedDocument, "bad state in history");
    r.state = *state;
    r.step_index = v.at("step_index").as_int();
    r.note = v.at("note").as_string();
    r.site_id = v.at("site_id").as_string();
    r.timestamp = v.at("timestamp").as_double();
    r.origin = v.at("origin").as_string();
    r.transition = v.at("transition").as_bool();
    r.illegal_transition = v.at("illegal_transition").as_bool();
    r.out_of_order = v.at("out_of_order").as_bool();
    rows.push_back(std::move(r));
  }
  return rows;
}

std::map<std::string, SiteSummaryRow> MonitoringClient::site_summary() {
  auto reply = t_.roundtrip(endpoint_, rpc::Call{"siteSummary", {}});
  std::map<std::string, SiteSummaryRow> out;
  for (const auto& [site, v] : unwrap(reply).as_struct()) {
    SiteSummaryRow row;
    row.running = v.at("running").as_int();
    row.done = v.at("done").as_int();
    row.failed = v.at("failed").as_int();
    row.cpu_share = v.at("cpu_share").as_double();
    out.emplace(site, row);
  }
  return out;
}

void BookkeepingClient::register_dataset(const DatasetDescription& d) {
  auto reply = t_.roundtrip(
      endpoint_, rpc::Call{"registerDataset", {rpc::Value(dataset_to_xml(d))}});
  unwrap(reply);
}

namespace {

std::vector<std::pair<std::string, std::string>> results_from_rpc(
    const rpc::Value& v) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& r : v.as_array())
    out.emplace_back(r.at("lfn").as_string(), r.at("result").as_string());
  return out;
}

rpc::Value lfns_to_rpc(const std::vector<std::string>& lfns) {
  rpc::Value::Array arr;
  for (const auto& lfn : lfns) arr.push_back(rpc::Value(lfn));
  return rpc::Value(std::move(arr));
}

}  // namespace

std::vector<std::pair<std::string, std::string>> BookkeepingClient::approve(
    const std::vector<std::string>& lfns) {
  auto reply = t_.roundtrip(endpoint_,
                            rpc::Call{"approveDatasets", {lfns_to_rpc(lfns)}});
  return results_from_rpc(unwrap(reply));
}

std::vector<std::pair<std::string, std::string>> BookkeepingClient::reject(
    const std::vector<std::string>& lfns, const std::string& reason) {
  auto reply = t_.roundtrip(
      endpoint_,
      rpc::Call{"rejectDatasets", {lfns_to_rpc(lfns), rpc::Value(reason)}});
  return results_from_rpc(unwrap(reply));
}

void BookkeepingClient::add_replica(const Replica& r) {
  auto reply =
      t_.roundtrip(endpoint_, rpc::Call{"addReplica", {replica_to_rpc(r)}});
  unwrap(reply);
}

std::vector<QueryHit> BookkeepingClient::query(const DatasetQuery& q) {
  rpc::Value::Struct c;
  if (q.run_id) c.emplace("run_id", rpc::Value(*q.run_id));
  if (q.data_type) c.emplace("data_type", rpc::Value(*q.data_type));
  if (q.status)
    c.emplace("status",
              rpc::Value(std::string(dataset_status_name(*q.status))));
  if (q.min_events)
    c.emplace("min_events", rpc::Value(static_cast<int32_t>(*q.min_events)));
  auto reply = t_.roundtrip(
      endpoint_, rpc::Call{"queryDatasets", {rpc::Value(std::move(c))}});
  std::vector<QueryHit> hits;
  for (const auto& v : unwrap(reply).as_array()) {
    QueryHit hit;
    hit.dataset = dataset_from_rpc(v.at("dataset"));
    if (const rpc::Value* reason = v.find("reject_reason"))
      hit.reject_reason = reason->as_string();
    for (const auto& r : v.at("replicas").as_array())
      hit.replicas.push_back(replica_from_rpc(r));
    hits.push_back(std::move(hit));
  }
  return hits;
}

void RepoClient::publish(const Package& p) {
  rpc::Value::Struct s;
  s.emplace("application", rpc::Value(p.application));
  s.emplace("app_version", rpc::Value(p.app_version));
  s.emplace("payload_b64", rpc::Value(base64_encode(p.payload)));
  s.emplace("bootstrap", rpc::Value(p.bootstrap));
  rpc::Value::Array deps;
  for (const auto& [a, v] : p.dependencies) {
    rpc::Value::Struct d;
    d.emplace("application", rpc::Value(a));
    d.emplace("app_version", rpc::Value(v));
    deps.push_back(rpc::Value(std::move(d)));
  }
  s.emplace("dependencies", rpc::Value(std::move(deps)));
  s.emplace("checksum", rpc::Value(to_hex32(p.checksum)));
  auto reply = t_.roundtrip(
      endpoint_, rpc::Call{"publishPackage", {rpc::Value(std::move(s))}});
  unwrap(reply);
}

Package RepoClient::fetch_package(const std::string& app,
                                  const std::string& version) {
  auto reply = t_.roundtrip(
      endpoint_,
      rpc::Call{"fetchPackage", {rpc::Value(app), rpc::Value(version)}});
  const auto& v = unwrap(reply);
  Package p;
  p.application = v.at("application").as_string();
  p.app_version = v.at("app_version").as_string();
  p.payload = base64_decode(v.at("payload_b64").as_string());
  p.bootstrap = v.at("bootstrap").as_string();
  for (const auto& d : v.at("dependencies").as_array())
    p.dependencies.emplace_back(d.at("application").as_string(),
                                d.at("app_version").as_string());
  p.checksum = parse_hex32(v.at("checksum").as_string());
  return p;
}

std::vector<std::pair<std::string, std::string>> RepoClient::resolve_deps(
    const std::string& app, const std::string& version) {
  auto reply = t_.roundtrip(
      endpoint_,
      rpc::Call{"resolveDeps", {rpc::Value(app), rpc::Value(version)}});
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& v : unwrap(reply).as_array())
    out.emplace_back(v.at("application").as_string(),
                     v.at("app_version").as_string());
  return out;
}

std::vector<std::pair<std::string, std::string>> RepoClient::query_available() {
  auto reply = t_.roundtrip(endpoint_, rpc::Call{"queryAvailable", {}});
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& v : unwrap(reply).as_array())
    out.emplace_back(v.at("application").as_string(),
                     v.at("app_version").as_string());
  return out;
}

}  // namespace pullgrid
