// Operator command line: production preparation, status inspection,
// dataset checking, package publication, and the scenario runner.
//
// Exit codes: 0 success, 1 service or validation error, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pullgrid/clients.hpp"
#include "pullgrid/documents.hpp"
#include "pullgrid/errors.hpp"
#include "pullgrid/harness.hpp"
#include "pullgrid/repo_service.hpp"
#include "pullgrid/scenario.hpp"
#include "pullgrid/transport.hpp"
#include "pullgrid/util.hpp"

namespace fs = std::filesystem;
using namespace pullgrid;

namespace {

struct Endpoints {
  std::string prod = "127.0.0.1:8799/rpc/prod";
  std::string mon = "127.0.0.1:8799/rpc/mon";
  std::string book = "127.0.0.1:8799/rpc/book";
  std::string repo = "127.0.0.1:8799/rpc/swrepo";
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void print_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> width;
  for (const auto& row : rows)
    for (size_t i = 0; i < row.size(); ++i) {
      if (width.size() <= i) width.resize(i + 1, 0);
      width[i] = std::max(width[i], row[i].size());
    }
  for (const auto& row : rows) {
    std::string line;
    for (size_t i = 0; i < row.size(); ++i) {
      line += row[i];
      if (i + 1 < row.size())
        line += std::string(width[i] - row[i].size() + 2, ' ');
    }
    std::cout << line << "\n";
  }
}

int cmd_workflow_add(const Endpoints& ep, const std::string& file,
                     bool porcelain) {
  HttpTransport t;
  ProductionClient prod(t, ep.prod);
  auto wf = workflow_from_xml(read_file(file));
  std::string id = prod.define_workflow(wf);
  if (porcelain)
    std::cout << "workflow_id=" << id << "\n";
  else
    std::cout << "registered workflow " << id << " (" << wf.name << ")\n";
  return 0;
}

int cmd_run_create(const Endpoints& ep, const std::string& workflow,
                   int64_t events, int64_t per_job, const std::string& dest,
                   const std::vector<std::string>& opts,
                   const std::string& token, bool porcelain) {
  std::map<std::string, std::string> options;
  for (const auto& o : opts) {
    auto eq = o.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::InvalidParameters,
                  "--opt needs key=value, got " + o);
    options[o.substr(0, eq)] = o.substr(eq + 1);
  }
  HttpTransport t;
  ProductionClient prod(t, ep.prod);
  auto created = prod.create_run(workflow, events, per_job, options, dest,
                                 token);
  if (porcelain)
    std::cout << "run_id=" << created.run_id
              << "\njob_count=" << created.job_count << "\n";
  else
    std::cout << "created run " << created.run_id << " with "
              << created.job_count << " jobs\n";
  return 0;
}

int cmd_status(const Endpoints& ep, const std::string& run_id,
               bool porcelain) {
  HttpTransport t;
  if (!run_id.empty()) {
    ProductionClient prod(t, ep.prod);
    auto counts = prod.run_status(run_id);
    if (porcelain) {
      for (const auto& [state, n] : counts)
        std::cout << "state." << job_state_name(state) << "=" << n << "\n";
    } else {
      std::vector<std::vector<std::string>> rows{{"STATE", "JOBS"}};
      for (const auto& [state, n] : counts)
        rows.push_back({job_state_name(state), std::to_string(n)});
      print_table(rows);
    }
    return 0;
  }
  MonitoringClient mon(t, ep.mon);
  auto summary = mon.site_summary();
  if (porcelain) {
    for (const auto& [site, row] : summary)
      std::cout << "site." << site << "=" << row.running << "/" << row.done
                << "/" << row.failed << "\n";
    return 0;
  }
  std::vector<std::vector<std::string>> rows{
      {"SITE", "RUNNING", "DONE", "FAILED", "CPU_SHARE"}};
  for (const auto& [site, row] : summary)
    rows.push_back({site, std::to_string(row.running),
                    std::to_string(row.done), std::to_string(row.failed),
                    format_double(row.cpu_share)});
  print_table(rows);
  return 0;
}

int cmd_dataset_query(const Endpoints& ep, const std::string& run,
                      const std::string& type, const std::string& status,
                      int64_t min_events, bool porcelain) {
  DatasetQuery q;
  if (!run.empty()) q.run_id = run;
  if (!type.empty()) q.data_type = type;
  if (!status.empty()) {
    auto st = dataset_status_from_name(status);
    if (!st)
      throw Error(ErrorCode::InvalidParameters,
                  "unknown dataset status " + status);
    q.status = st;
  }
  if (min_events >= 0) q.min_events = min_events;

  HttpTransport t;
  BookkeepingClient book(t, ep.book);
  auto hits = book.query(q);
  if (porcelain) {
    for (const auto& h : hits)
      std::cout << "dataset=" << h.dataset.lfn << " status="
                << dataset_status_name(h.dataset.status)
                << " replicas=" << h.replicas.size() << "\n";
    return 0;
  }
  std::vector<std::vector<std::string>> rows{
      {"LFN", "TYPE", "EVENTS", "STATUS", "REPLICAS"}};
  for (const auto& h : hits)
    rows.push_back({h.dataset.lfn, h.dataset.data_type,
                    std::to_string(h.dataset.events),
                    dataset_status_name(h.dataset.status),
                    std::to_string(h.replicas.size())});
  print_table(rows);
  std::cout << hits.size() << " dataset(s)\n";
  return 0;
}

int cmd_dataset_approve(const Endpoints& ep, std::vector<std::string> lfns,
                        const std::string& run, bool porcelain) {
  HttpTransport t;
  BookkeepingClient book(t, ep.book);
  if (!run.empty()) {
    DatasetQuery q;
    q.run_id = run;
    q.status = DatasetStatus::Pending;
    for (const auto& h : book.query(q)) lfns.push_back(h.dataset.lfn);
  }
  if (lfns.empty()) {
    std::cout << "nothing to approve\n";
    return 0;
  }
  auto results = book.approve(lfns);
  int ok = 0;
  for (const auto& [lfn, result] : results) {
    if (result == "ok") ++ok;
    if (porcelain)
      std::cout << "approve." << lfn << "=" << result << "\n";
    else if (result != "ok")
      std::cout << lfn << ": " << result << "\n";
  }
  if (!porcelain)
    std::cout << "approved " << ok << " of " << results.size() << "\n";
  return 0;
}

int cmd_package_publish(const Endpoints& ep, const std::string& app,
                        const std::string& version,
                        const std::vector<std::string>& deps,
                        bool porcelain) {
  std::vector<std::pair<std::string, std::string>> dep_pairs;
  for (const auto& d : deps) {
    auto colon = d.find(':');
    if (colon == std::string::npos)
      throw Error(ErrorCode::InvalidParameters,
                  "--dep needs app:version, got " + d);
    dep_pairs.emplace_back(d.substr(0, colon), d.substr(colon + 1));
  }
  HttpTransport t;
  RepoClient repo(t, ep.repo);
  repo.publish(make_synthetic_package(app, version, dep_pairs));
  if (porcelain)
    std::cout << "published=" << app << ":" << version << "\n";
  else
    std::cout << "published " << app << " " << version << "\n";
  return 0;
}

int cmd_simulate(const std::string& file, std::string work_dir,
                 bool porcelain) {
  Scenario sc = load_scenario_file(file);
  if (work_dir.empty()) {
    work_dir = (fs::temp_directory_path() /
                ("pullgrid-sim-" + std::to_string(::getpid())))
                   .string();
  }
  SimHarness harness(sc, work_dir);
  auto outcome = harness.run();
  if (porcelain) {
    std::cout << "jobs=" << outcome.jobs << "\ndone=" << outcome.done
              << "\nfailed=" << outcome.failed
              << "\nsuccess_rate=" << format_double(outcome.success_rate)
              << "\ndatasets=" << outcome.datasets
              << "\nreplicas=" << outcome.replicas
              << "\nbytes=" << outcome.bytes_transferred
              << "\ncompleted=" << (outcome.completed ? "true" : "false")
              << "\n";
  } else {
    std::cout << SimHarness::report_text(outcome);
  }
  return outcome.completed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pull-scheduled production system operator tool"};
  app.require_subcommand(1);

  Endpoints ep;
  bool porcelain = false;
  app.add_option("--prod", ep.prod, "production endpoint host:port/path")
      ->envname("PULLGRID_PROD");
  app.add_option("--mon", ep.mon, "monitoring endpoint")
      ->envname("PULLGRID_MON");
  app.add_option("--book", ep.book, "bookkeeping endpoint")
      ->envname("PULLGRID_BOOK");
  app.add_option("--repo", ep.repo, "software repository endpoint")
      ->envname("PULLGRID_REPO");
  app.add_flag("--porcelain", porcelain, "machine-readable key=value output");

  auto* wf_add = app.add_subcommand("workflow-add", "register a workflow");
  std::string wf_file;
  wf_add->add_option("file", wf_file, "workflow XML file")->required();

  auto* run_create = app.add_subcommand("run-create", "create a production run");
  std::string rc_workflow, rc_dest, rc_token;
  int64_t rc_events = 0, rc_per_job = 0;
  std::vector<std::string> rc_opts;
  run_create->add_option("--workflow", rc_workflow, "workflow id")->required();
  run_create->add_option("--events", rc_events, "total events")->required();
  run_create->add_option("--per-job", rc_per_job, "events per job")->required();
  run_create->add_option("--dest", rc_dest, "pin to destination site");
  run_create->add_option("--opt", rc_opts, "extra option key=value");
  run_create->add_option("--token", rc_token, "idempotency token");

  auto* status = app.add_subcommand("status", "run states or site summary");
  std::string st_run;
  status->add_option("run_id", st_run, "run to inspect (omit for sites)");

  app.add_subcommand("sites", "site summary table");

  auto* dq = app.add_subcommand("dataset-query", "query the dataset catalog");
  std::string dq_run, dq_type, dq_status;
  int64_t dq_min_events = -1;
  dq->add_option("--run", dq_run, "filter by run id");
  dq->add_option("--type", dq_type, "filter by data type");
  dq->add_option("--status", dq_status, "Pending|Approved|Rejected");
  dq->add_option("--min-events", dq_min_events, "minimum event count");

  auto* da = app.add_subcommand("dataset-approve", "approve pending datasets");
  std::vector<std::string> da_lfns;
  std::string da_run;
  da->add_option("lfns", da_lfns, "logical file names");
  da->add_option("--run", da_run, "approve all pending datasets of a run");

  auto* pp = app.add_subcommand("package-publish",
                                "publish a synthetic software package");
  std::string pp_app, pp_version;
  std::vector<std::string> pp_deps;
  pp->add_option("--app", pp_app, "application name")->required();
  pp->add_option("--version", pp_version, "application version")->required();
  pp->add_option("--dep", pp_deps, "dependency app:version");

  auto* sim = app.add_subcommand("simulate", "run a scenario to completion");
  std::string sim_file, sim_work;
  sim->add_option("file", sim_file, "scenario file")->required();
  sim->add_option("--work", sim_work, "working directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (wf_add->parsed()) return cmd_workflow_add(ep, wf_file, porcelain);
    if (run_create->parsed())
      return cmd_run_create(ep, rc_workflow, rc_events, rc_per_job, rc_dest,
                            rc_opts, rc_token, porcelain);
    if (status->parsed()) return cmd_status(ep, st_run, porcelain);
    if (app.get_subcommand("sites")->parsed())
      return cmd_status(ep, "", porcelain);
    if (dq->parsed())
      return cmd_dataset_query(ep, dq_run, dq_type, dq_status, dq_min_events,
                               porcelain);
    if (da->parsed()) return cmd_dataset_approve(ep, da_lfns, da_run, porcelain);
    if (pp->parsed())
      return cmd_package_publish(ep, pp_app, pp_version, pp_deps, porcelain);
    if (sim->parsed()) return cmd_simulate(sim_file, sim_work, porcelain);
    std::cerr << "error: no command\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
