#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pullgrid/bookkeeping_service.hpp"
#include "pullgrid/documents.hpp"
#include "pullgrid/model.hpp"
#include "pullgrid/monitoring_service.hpp"
#include "pullgrid/repo_service.hpp"
#include "pullgrid/transport.hpp"

namespace pullgrid {

// Typed client wrappers over the RPC surface. A fault reply is rethrown as
// the Error it encodes, so callers see the same exceptions whether the
// service is in-process or remote.

class ProductionClient {
 public:
  ProductionClient(RpcTransport& t, std::string endpoint)
      : t_(t), endpoint_(std::move(endpoint)) {}

  std::string define_workflow(const WorkflowDefinition& w);
  RunCreated create_run(const std::string& workflow_id, int64_t total_events,
                        int64_t events_per_job,
                        const std::map<std::string, std::string>& extra_options,
                        const std::string& destination_site,
                        const std::string& request_token = "");
  std::optional<JobDescriptor> request_job(const ResourceCapability& cap);
  JobState reschedule_job(const std::string& job_id, const std::string& reason);
  std::map<JobState, int64_t> run_status(const std::string& run_id);

 private:
  RpcTransport& t_;
  std::string endpoint_;
};

class MonitoringClient {
 public:
  MonitoringClient(RpcTransport& t, std::string endpoint)
      : t_(t), endpoint_(std::move(endpoint)) {}

  bool report_status(const StatusReport& m, const std::string& origin = "agent");
  std::vector<HistoryRow> job_history(const std::string& job_id);
  std::map<std::string, SiteSummaryRow> site_summary();

 private:
  RpcTransport& t_;
  std::string endpoint_;
};

class BookkeepingClient {
 public:
  BookkeepingClient(RpcTransport& t, std::string endpoint)
      : t_(t), endpoint_(std::move(endpoint)) {}

  void register_dataset(const DatasetDescription& d);
  std::vector<std::pair<std::string, std::string>> approve(
      const std::vector<std::string>& lfns);
  std::vector<std::pair<std::string, std::string>> reject(
      const std::vector<std::string>& lfns, const std::string& reason);
  void add_replica(const Replica& r);
  std::vector<QueryHit> query(const DatasetQuery& q);

 private:
  RpcTransport& t_;
  std::string endpoint_;
};

class RepoClient : public PackageProvider {
 public:
  RepoClient(RpcTransport& t, std::string endpoint)
      : t_(t), endpoint_(std::move(endpoint)) {}

  void publish(const Package& p);
  Package fetch_package(const std::string& app,
                        const std::string& version) override;
  std::vector<std::pair<std::string, std::string>> resolve_deps(
      const std::string& app, const std::string& version) override;
  std::vector<std::pair<std::string, std::string>> query_available();

 private:
  RpcTransport& t_;
  std::string endpoint_;
};

/// Unwraps a reply: returns the value or rethrows the fault as Error.
const rpc::Value& unwrap(const rpc::Reply& reply);

}  // namespace pullgrid
