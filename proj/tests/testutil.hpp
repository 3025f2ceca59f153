#pragma once

// Shared fixtures: throwaway directories, a one-call service stack on an
// in-process transport, and small document builders.

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "pullgrid/bookkeeping_service.hpp"
#include "pullgrid/clients.hpp"
#include "pullgrid/dispatch.hpp"
#include "pullgrid/model.hpp"
#include "pullgrid/monitoring_service.hpp"
#include "pullgrid/production_service.hpp"
#include "pullgrid/repo_service.hpp"
#include "pullgrid/store.hpp"
#include "pullgrid/transport.hpp"

namespace pullgrid::testutil {

namespace fs = std::filesystem;

/// Unique directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "pg") {
    std::string tmpl =
        (fs::temp_directory_path() / (tag + "-XXXXXX")).string();
    char* got = mkdtemp(tmpl.data());
    if (!got) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  fs::path operator/(const std::string& sub) const { return path_ / sub; }

 private:
  fs::path path_;
};

/// All four services on one store, dispatchers bound to an in-process
/// transport, typed clients on top. Time defaults to a controllable
/// virtual clock starting at 0.
struct Stack {
  explicit Stack(const std::string& dir, ProductionConfig pcfg = {},
                 BookkeepingConfig bcfg = {},
                 StoreOptions sopt = {.fsync_on_commit = false})
      : store(dir, sopt),
        prod(store, pcfg, [this] { return clock; }),
        mon(store, [this] { return clock; }),
        book(store, bcfg, [this] { return clock; }),
        repo(store, [this] { return clock; }) {
    register_production(prod_d, prod);
    register_monitoring(mon_d, mon);
    register_bookkeeping(book_d, book);
    register_repo(repo_d, repo);
    transport.bind("prod", &prod_d);
    transport.bind("mon", &mon_d);
    transport.bind("book", &book_d);
    transport.bind("repo", &repo_d);
  }

  double clock = 0;
  Store store;
  ProductionService prod;
  MonitoringService mon;
  BookkeepingService book;
  RepoService repo;
  ServiceDispatcher prod_d, mon_d, book_d, repo_d;
  InProcTransport transport;

  ProductionClient prod_client() { return {transport, "prod"}; }
  MonitoringClient mon_client() { return {transport, "mon"}; }
  BookkeepingClient book_client() { return {transport, "book"}; }
  RepoClient repo_client() { return {transport, "repo"}; }
};

inline StepDefinition step(const std::string& app, const std::string& ver,
                           std::vector<std::string> in,
                           std::vector<std::string> out) {
  StepDefinition s;
  s.application = app;
  s.app_version = ver;
  s.input_types.insert(in.begin(), in.end());
  s.output_types.insert(out.begin(), out.end());
  return s;
}

/// Two-step simulation+reconstruction pipeline, the shape most tests need.
inline WorkflowDefinition two_step_workflow(const std::string& name = "MC") {
  WorkflowDefinition w;
  w.name = name;
  w.steps = {step("Gauss", "v1", {}, {"SIM"}),
             step("Brunel", "v2", {"SIM"}, {"DST"})};
  return w;
}

inline WorkflowDefinition one_step_workflow(const std::string& name = "GEN") {
  WorkflowDefinition w;
  w.name = name;
  w.steps = {step("Gauss", "v1", {}, {"SIM"})};
  return w;
}

inline ResourceCapability capability(const std::string& site,
                                     double cpu = 1.0,
                                     int64_t disk_mb = 1 << 20) {
  ResourceCapability cap;
  cap.site_id = site;
  cap.cpu_power = cpu;
  cap.free_disk_mb = disk_mb;
  return cap;
}

inline DatasetDescription dataset(const std::string& lfn,
                                  const std::string& type = "SIM",
                                  uint32_t checksum = 0xabadcafe) {
  DatasetDescription d;
  d.lfn = lfn;
  d.data_type = type;
  d.job_id = "R000001-J000000";
  d.run_id = "R000001";
  d.events = 100;
  d.size_bytes = 4096;
  d.checksum = checksum;
  return d;
}

}  // namespace pullgrid::testutil
