#include "pullgrid/dispatch.hpp"

#include "pullgrid/bookkeeping_service.hpp"
#include "pullgrid/documents.hpp"
#include "pullgrid/monitoring_service.hpp"
#include "pullgrid/production_service.hpp"
#include "pullgrid/repo_service.hpp"
#include "pullgrid/util.hpp"

namespace pullgrid {

void ServiceDispatcher::method(const std::string& name, Handler h) {
  handlers_[name] = std::move(h);
}

rpc::Reply ServiceDispatcher::dispatch(const rpc::Call& call) const {
  auto it = handlers_.find(call.method);
  if (it == handlers_.end())
    return rpc::Reply::fault(
        static_cast<int32_t>(ErrorCode::MethodNotFound),
        std::string(error_name(ErrorCode::MethodNotFound)) + ": " +
            call.method);
  try {
    return rpc::Reply::ok(it->second(call.params));
  } catch (const Error& e) {
    return rpc::Reply::fault(static_cast<int32_t>(e.code()), e.what());
  } catch (const std::exception& e) {
    return rpc::Reply::fault(static_cast<int32_t>(ErrorCode::IoFailure),
                             std::string("internal: ") + e.what());
  }
}

std::string ServiceDispatcher::handle(std::string_view request_bytes) const {
  try {
    rpc::Call call = rpc::decode_call(request_bytes);
    return rpc::encode_reply(dispatch(call));
  } catch (const Error& e) {
    return rpc::encode_reply(
        rpc::Reply::fault(static_cast<int32_t>(e.code()), e.what()));
  } catch (const std::exception& e) {
    return rpc::encode_reply(rpc::Reply::fault(
        static_cast<int32_t>(ErrorCode::MalformedDocument),
        std::string("internal: ") + e.what()));
  }
}

std::vector<std::string> ServiceDispatcher::methods() const {
  std::vector<std::string> out;
  for (const auto& [name, h] : handlers_) out.push_back(name);
  return out;
}

namespace {

const std::vector<rpc::Value>& need_params(const std::vector<rpc::Value>& p,
                                           size_t n) {
  if (p.size() != n)
    throw Error(ErrorCode::InvalidParameters,
                "expected " + std::to_string(n) + " params, got " +
                    std::to_string(p.size()));
  return p;
}

rpc::Value state_counts_to_rpc(const std::map<JobState, int64_t>& counts) {
  rpc::Value::Struct s;
  for (const auto& [state, n] : counts)
    s.emplace(job_state_name(state), rpc::Value(static_cast<int32_t>(n)));
  return rpc::Value(std::move(s));
}

rpc::Value history_row_to_rpc(const HistoryRow& r) {
  rpc::Value::Struct s;
  s.emplace("job_id", rpc::Value(r.job_id));
  s.emplace("attempt", rpc::Value(r.attempt));
  s.emplace("state", rpc::Value(std::string(job_state_name(r.state))));
  s.emplace("step_index", rpc::Value(r.step_index));
  s.emplace("note", rpc::Value(r.note));
  s.emplace("site_id", rpc::Value(r.site_id));
  s.emplace("timestamp", rpc::Value(r.timestamp));
  s.emplace("origin", rpc::Value(r.origin));
  s.emplace("transition", rpc::Value(r.transition));
  s.emplace("illegal_transition", rpc::Value(r.illegal_transition));
  s.emplace("out_of_order", rpc::Value(r.out_of_order));
  return rpc::Value(std::move(s));
}

rpc::Value results_to_rpc(
    const std::vector<std::pair<std::string, std::string>>& results) {
  rpc::Value::Array arr;
  for (const auto& [lfn, result] : results) {
    rpc::Value::Struct s;
    s.emplace("lfn", rpc::Value(lfn));
    s.emplace("result", rpc::Value(result));
    arr.push_back(rpc::Value(std::move(s)));
  }
  return rpc::Value(std::move(arr));
}

rpc::Value package_to_rpc(const Package& p) {
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
  return rpc::Value(std::move(s));
}

Package package_from_rpc(const rpc::Value& v) {
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

rpc::Value pair_list_to_rpc(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  rpc::Value::Array arr;
  for (const auto& [a, v] : pairs) {
    rpc::Value::Struct s;
    s.emplace("application", rpc::Value(a));
    s.emplace("app_version", rpc::Value(v));
    arr.push_back(rpc::Value(std::move(s)));
  }
  return rpc::Value(std::move(arr));
}

}  // namespace

void register_production(ServiceDispatcher& d, ProductionService& svc) {
  d.method("defineWorkflow", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 1);
    return rpc::Value(svc.define_workflow(workflow_from_xml(p[0].as_string())));
  });
  d.method("createRun", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 1);
    const rpc::Value& a = p[0];
    std::vector<std::pair<std::string, std::string>> options;
    if (const rpc::Value* o = a.find("extra_options"))
      for (const auto& [k, v] : o->as_struct())
        options.emplace_back(k, v.as_string());
    std::optional<std::string> dest;
    if (const rpc::Value* ds = a.find("destination_site"))
      if (!ds->as_string().empty()) dest = ds->as_string();
    std::string token;
    if (const rpc::Value* t = a.find("request_token")) token = t->as_string();
    auto r = svc.create_run(a.at("workflow_id").as_string(),
                            static_cast<int64_t>(a.at("total_events").as_double()),
                            static_cast<int64_t>(a.at("events_per_job").as_double()),
                            options, dest, token);
    rpc::Value::Struct s;
    s.emplace("run_id", rpc::Value(r.run_id));
    s.emplace("job_count", rpc::Value(static_cast<int32_t>(r.job_count)));
    return rpc::Value(std::move(s));
  });
  d.method("requestJob", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 1);
    auto cap = capability_from_rpc(p[0]);
    auto job = svc.request_job(cap);
    return rpc::Value(job ? job_to_xml(*job) : std::string());
  });
  d.method("rescheduleJob", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 2);
    auto state =
        svc.reschedule_job(p[0].as_string(), p[1].as_string());
    return rpc::Value(std::string(job_state_name(state)));
  });
  d.method("runStatus", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 1);
    return state_counts_to_rpc(svc.run_status(p[0].as_string()));
  });
}

void register_monitoring(ServiceDispatcher& d, MonitoringService& svc) {
  d.method("reportStatus", [&svc](const std::vector<rpc::Value>& p) {
    if (p.empty() || p.size() > 2)
      throw Error(ErrorCode::InvalidParameters, "expected 1 or 2 params");
    std::string origin = p.size() == 2 ? p[1].as_string() : "agent";
    return rpc::Value(svc.report_status(status_from_rpc(p[0]), origin));
  });
  d.method("jobHistory", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 1);
    rpc::Value::Array arr;
    for (const auto& row : svc.job_history(p[0].as_string()))
      arr.push_back(history_row_to_rpc(row));
    return rpc::Value(std::move(arr));
  });
  d.method("siteSummary", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 0);
    rpc::Value::Struct out;
    for (const auto& [site, row] : svc.site_summary()) {
      rpc::Value::Struct s;
      s.emplace("running", rpc::Value(static_cast<int32_t>(row.running)));
      s.emplace("done", rpc::Value(static_cast<int32_t>(row.done)));
      s.emplace("failed", rpc::Value(static_cast<int32_t>(row.failed)));
      s.emplace("cpu_share", rpc::Value(row.cpu_share));
      out.emplace(site, rpc::Value(std::move(s)));
    }
    return rpc::Value(std::move(out));
  });
}

void register_bookkeeping(ServiceDispatcher& d, BookkeepingService& svc) {
  d.method("registerDataset", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 1);
    svc.register_dataset(p[0].as_string());
    return rpc::Value(true);
  });
  d.method("approveDatasets", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 1);
    std::vector<std::string> lfns;
    for (const auto& v : p[0].as_array()) lfns.push_back(v.as_string());
    return results_to_rpc(svc.approve(lfns));
  });
  d.method("rejectDatasets", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 2);
    std::vector<std::string> lfns;
    for (const auto& v : p[0].as_array()) lfns.push_back(v.as_string());
    return results_to_rpc(svc.reject(lfns, p[1].as_string()));
  });
  d.method("addReplica", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 1);
    svc.add_replica(replica_from_rpc(p[0]));
    return rpc::Value(true);
  });
  d.method("queryDatasets", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 1);
    DatasetQuery q;
    const rpc::Value& c = p[0];
    if (const rpc::Value* v = c.find("run_id")) q.run_id = v->as_string();
    if (const rpc::Value* v = c.find("data_type")) q.data_type = v->as_string();
    if (const rpc::Value* v = c.find("status")) {
      auto s = dataset_status_from_name(v->as_string());
      if (!s) throw Error(ErrorCode::InvalidParameters, "bad status filter");
      q.status = *s;
    }
    if (const rpc::Value* v = c.find("min_events")) q.min_events = v->as_int();
    rpc::Value::Array arr;
    for (const auto& hit : svc.query(q)) {
      rpc::Value::Struct s;
      s.emplace("dataset", dataset_to_rpc(hit.dataset));
      if (!hit.reject_reason.empty())
        s.emplace("reject_reason", rpc::Value(hit.reject_reason));
      rpc::Value::Array reps;
      for (const auto& r : hit.replicas) reps.push_back(replica_to_rpc(r));
      s.emplace("replicas", rpc::Value(std::move(reps)));
      arr.push_back(rpc::Value(std::move(s)));
    }
    return rpc::Value(std::move(arr));
  });
}

void register_repo(ServiceDispatcher& d, RepoService& svc) {
  d.method("publishPackage", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 1);
    svc.publish(package_from_rpc(p[0]));
    return rpc::Value(true);
  });
  d.method("fetchPackage", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 2);
    return package_to_rpc(
        svc.fetch_package(p[0].as_string(), p[1].as_string()));
  });
  d.method("queryAvailable", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 0);
    return pair_list_to_rpc(svc.query_available());
  });
  d.method("resolveDeps", [&svc](const std::vector<rpc::Value>& p) {
    need_params(p, 2);
    return pair_list_to_rpc(
        svc.resolve_deps(p[0].as_string(), p[1].as_string()));
  });
}

}  // namespace pullgrid
