#pragma once

// Runs a parsed scenario end to end: central services on a file-backed
// store, one agent per site driven on its poll interval, worker-node
// status traffic, nested lifecycles behind portals, and timed package
// publications, all on simulated time.

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "pullgrid/agent.hpp"
#include "pullgrid/bookkeeping_service.hpp"
#include "pullgrid/clients.hpp"
#include "pullgrid/dispatch.hpp"
#include "pullgrid/monitoring_service.hpp"
#include "pullgrid/production_service.hpp"
#include "pullgrid/repo_service.hpp"
#include "pullgrid/scenario.hpp"
#include "pullgrid/sitesim.hpp"
#include "pullgrid/store.hpp"
#include "pullgrid/transport.hpp"

namespace pullgrid {

struct ScenarioOutcome {
  int jobs = 0;
  int done = 0;
  int failed = 0;
  std::map<std::string, int> failed_by_cause;
  std::map<std::string, int> done_by_site;
  int datasets = 0;
  int replicas = 0;
  int64_t bytes_transferred = 0;
  double success_rate = 0;
  double finished_at = 0;
  // False when the duration limit cut the scenario short.
  bool completed = false;
  int relay_messages = 0;
  std::vector<std::string> run_ids;
};

class SimHarness {
 public:
  SimHarness(Scenario sc, std::string work_dir);
  ~SimHarness();

  SimHarness(const SimHarness&) = delete;
  SimHarness& operator=(const SimHarness&) = delete;

  /// Drives the scenario until every job is terminal and every outbox is
  /// empty, or until the duration limit.
  ScenarioOutcome run();

  /// Deterministic accounting report; ends with the success-rate line and
  /// the per-site completion table.
  static std::string report_text(const ScenarioOutcome& o);

  SiteSim& sim() { return *sim_; }
  Store& store() { return *store_; }
  InProcTransport& transport() { return transport_; }
  ProductionClient& production() { return *prod_client_; }
  MonitoringClient& monitoring() { return *mon_client_; }
  BookkeepingClient& bookkeeping() { return *book_client_; }
  RepoClient& repo() { return *repo_client_; }
  Agent& agent(const std::string& site_id);
  const std::vector<std::string>& run_ids() const { return run_ids_; }

 private:
  struct SiteRuntime;

  void publish_package(const ScenarioPackage& pkg);
  void schedule_cycle(SiteRuntime& sr, double when);
  void handle_job_start(const SimJobEvent& ev);
  void handle_job_complete(const SimJobEvent& ev);
  void nested_finalize(const SimJobEvent& ev, const ScenarioSite& cfg);
  void route_wn_report(const ScenarioSite& cfg, const StatusReport& msg);
  bool everything_settled();
  double runtime_for(const JobDescriptor& job) const;
  const ScenarioSite& scenario_site(const std::string& site_id) const;

  Scenario sc_;
  std::string work_dir_;

  std::unique_ptr<SiteSim> sim_;
  std::unique_ptr<Store> store_;
  std::unique_ptr<ProductionService> prod_;
  std::unique_ptr<MonitoringService> mon_;
  std::unique_ptr<BookkeepingService> book_;
  std::unique_ptr<RepoService> repo_;
  ServiceDispatcher prod_d_, mon_d_, book_d_, repo_d_;
  InProcTransport transport_;
  std::unique_ptr<ProductionClient> prod_client_;
  std::unique_ptr<MonitoringClient> mon_client_;
  std::unique_ptr<BookkeepingClient> book_client_;
  std::unique_ptr<RepoClient> repo_client_;

  std::vector<std::unique_ptr<SiteRuntime>> sites_;
  std::map<std::string, SiteRuntime*> site_index_;

  std::vector<std::string> run_ids_;
  std::map<std::string, double> run_runtime_;
  int total_jobs_ = 0;
  std::set<std::string> abandoned_;  // inner batches the nested agent gave up on
  int relay_messages_ = 0;
  bool done_ = false;
};

}  // namespace pullgrid
