#include "pullgrid/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "pullgrid/install_area.hpp"
#include "pullgrid/util.hpp"

namespace pullgrid {

namespace fs = std::filesystem;

namespace {

std::string sanitize(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c == '/' || c == '\\') c = '_';
  return out;
}

std::string fmt3(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string fmt_pct(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f%%", v * 100.0);
  return buf;
}

class SimBatchAdapter : public BatchSystem {
 public:
  SimBatchAdapter(SiteSim& sim, std::string site, bool portal,
                  std::function<double(const JobDescriptor&)> runtime_of)
      : sim_(sim),
        site_(std::move(site)),
        portal_(portal),
        runtime_of_(std::move(runtime_of)) {}

  std::string submit(const JobDescriptor& job,
                     const std::string& wrapper) override {
    double runtime = runtime_of_(job);
    return portal_ ? sim_.portal_submit(site_, job, runtime)
                   : sim_.batch_submit(site_, job, wrapper, runtime);
  }
  BatchSnapshot status() override { return sim_.batch_status(site_); }
  CollectedJob collect(const std::string& batch_id) override {
    return sim_.batch_collect(site_, batch_id);
  }
  void reap(const std::string& batch_id) override {
    sim_.batch_reap(site_, batch_id);
  }

 private:
  SiteSim& sim_;
  std::string site_;
  bool portal_;
  std::function<double(const JobDescriptor&)> runtime_of_;
};

class SimTransferAdapter : public TransferBackend {
 public:
  SimTransferAdapter(SiteSim& sim, std::string node)
      : sim_(sim), node_(std::move(node)) {}

  std::optional<uint32_t> transfer(const std::string& local_path,
                                   const std::string& se,
                                   const std::string& remote_path) override {
    return sim_.wan_transfer(node_, local_path, se, remote_path);
  }

 private:
  SiteSim& sim_;
  std::string node_;
};

}  // namespace

struct SimHarness::SiteRuntime {
  ScenarioSite cfg;
  std::unique_ptr<SimBatchAdapter> batch;
  std::unique_ptr<SimTransferAdapter> xfer;
  std::unique_ptr<Agent> agent;
  bool idle = false;
};

SimHarness::SimHarness(Scenario sc, std::string work_dir)
    : sc_(std::move(sc)), work_dir_(std::move(work_dir)) {
  fs::create_directories(work_dir_);

  sim_ = std::make_unique<SiteSim>(sc_.seed);
  sim_->set_bytes_per_event(sc_.bytes_per_event);
  for (const auto& site : sc_.sites) sim_->add_site(site.sim);
  sim_->on_job_start = [this](const SimJobEvent& ev) { handle_job_start(ev); };
  sim_->on_job_complete = [this](const SimJobEvent& ev) {
    handle_job_complete(ev);
  };

  // Simulated scenarios trade commit durability for speed; the store's
  // crash-consistency has its own dedicated tests.
  StoreOptions sopt;
  sopt.fsync_on_commit = false;
  store_ = std::make_unique<Store>((fs::path(work_dir_) / "store").string(),
                                   sopt);

  TimeSource now = [this] { return sim_->now(); };
  prod_ = std::make_unique<ProductionService>(
      *store_, ProductionConfig{sc_.max_reschedules}, now);
  mon_ = std::make_unique<MonitoringService>(*store_, now);
  book_ = std::make_unique<BookkeepingService>(
      *store_, BookkeepingConfig{sc_.auto_approve}, now);
  repo_ = std::make_unique<RepoService>(*store_, now);

  register_production(prod_d_, *prod_);
  register_monitoring(mon_d_, *mon_);
  register_bookkeeping(book_d_, *book_);
  register_repo(repo_d_, *repo_);
  transport_.bind("prod", &prod_d_);
  transport_.bind("mon", &mon_d_);
  transport_.bind("book", &book_d_);
  transport_.bind("swrepo", &repo_d_);

  prod_client_ = std::make_unique<ProductionClient>(transport_, "prod");
  mon_client_ = std::make_unique<MonitoringClient>(transport_, "mon");
  book_client_ = std::make_unique<BookkeepingClient>(transport_, "book");
  repo_client_ = std::make_unique<RepoClient>(transport_, "swrepo");

  for (const auto& scs : sc_.sites) {
    auto sr = std::make_unique<SiteRuntime>();
    sr->cfg = scs;
    bool portal = !scs.sim.inner.empty();
    sr->batch = std::make_unique<SimBatchAdapter>(
        *sim_, scs.sim.site_id, portal,
        [this](const JobDescriptor& j) { return runtime_for(j); });
    sr->xfer = std::make_unique<SimTransferAdapter>(*sim_, scs.sim.site_id);

    AgentConfig acfg;
    acfg.site_id = scs.sim.site_id;
    acfg.prod_endpoint = "prod";
    acfg.mon_endpoint = "mon";
    acfg.book_endpoint = "book";
    acfg.repo_endpoint = "swrepo";
    acfg.fill_target = sc_.fill_target;
    acfg.occupancy_threshold = sc_.occupancy_threshold;
    acfg.poll_interval = sc_.poll_interval;
    acfg.outbox_path =
        (fs::path(work_dir_) / "agents" / scs.sim.site_id).string();
    acfg.install_area_path =
        portal ? ""
               : (fs::path(work_dir_) / "areas" / scs.sim.site_id).string();
    acfg.storage_element = sc_.storage_element;
    acfg.duplicate_reports = sc_.resend_registrations;
    acfg.reschedule_execution_failures = sc_.reschedule_failures;
    acfg.portal_mode = portal;

    sr->agent = std::make_unique<Agent>(acfg, transport_, *sr->batch,
                                        *sr->xfer,
                                        [this] { return sim_->now(); });
    site_index_[scs.sim.site_id] = sr.get();
    sites_.push_back(std::move(sr));
  }
}

SimHarness::~SimHarness() = default;

Agent& SimHarness::agent(const std::string& site_id) {
  return *site_index_.at(site_id)->agent;
}

const ScenarioSite& SimHarness::scenario_site(
    const std::string& site_id) const {
  return site_index_.at(site_id)->cfg;
}

double SimHarness::runtime_for(const JobDescriptor& job) const {
  auto it = run_runtime_.find(job.run_id);
  return it != run_runtime_.end() ? it->second : sc_.default_runtime;
}

void SimHarness::publish_package(const ScenarioPackage& pkg) {
  try {
    repo_client_->publish(
        make_synthetic_package(pkg.application, pkg.app_version, pkg.deps));
    sim_->log("central", "publish",
              "package=" + pkg.application + "-" + pkg.app_version);
  } catch (const Error& e) {
    sim_->log("central", "publish_failed",
              "package=" + pkg.application + "-" + pkg.app_version + " " +
                  e.what());
  }
}

ScenarioOutcome SimHarness::run() {
  for (const auto& pkg : sc_.packages) {
    if (pkg.publish_at <= 0)
      publish_package(pkg);
    else
      sim_->at(pkg.publish_at, [this, pkg] { publish_package(pkg); });
  }

  std::map<std::string, std::string> wf_ids;
  for (const auto& wf : sc_.workflows) {
    WorkflowDefinition def;
    def.name = wf.name;
    for (const auto& st : wf.steps) {
      StepDefinition sd;
      sd.application = st.application;
      sd.app_version = st.app_version;
      if (!st.input_type.empty()) sd.input_types.insert(st.input_type);
      if (!st.output_type.empty()) sd.output_types.insert(st.output_type);
      def.steps.push_back(std::move(sd));
    }
    wf_ids[wf.name] = prod_client_->define_workflow(def);
  }

  std::map<std::string, int64_t> run_jobs;
  int run_no = 0;
  for (const auto& r : sc_.runs) {
    auto it = wf_ids.find(r.workflow);
    if (it == wf_ids.end())
      throw Error(ErrorCode::UnknownWorkflow,
                  "scenario run references workflow " + r.workflow);
    std::map<std::string, std::string> opts(r.options.begin(),
                                            r.options.end());
    auto created = prod_client_->create_run(
        it->second, r.total_events, r.events_per_job, opts,
        r.destination_site, "scenario-run-" + std::to_string(run_no++));
    run_ids_.push_back(created.run_id);
    run_jobs[created.run_id] = created.job_count;
    run_runtime_[created.run_id] =
        r.runtime < 0 ? sc_.default_runtime : r.runtime;
    total_jobs_ += static_cast<int>(created.job_count);
  }

  for (auto& sr : sites_) schedule_cycle(*sr, 0);

  while (!done_ && sim_->now() < sc_.duration_limit) {
    if (sim_->quiet_until(sc_.duration_limit)) break;
    sim_->advance(std::min(sim_->now() + sc_.poll_interval,
                           sc_.duration_limit));
  }

  ScenarioOutcome o;
  o.jobs = total_jobs_;
  o.completed = done_;
  o.finished_at = sim_->now();
  o.relay_messages = relay_messages_;
  o.bytes_transferred = sim_->bytes_transferred();
  o.run_ids = run_ids_;

  for (const auto& rid : run_ids_) {
    auto counts = prod_client_->run_status(rid);
    o.done += static_cast<int>(counts[JobState::Done]);
    o.failed += static_cast<int>(counts[JobState::Failed]);

    for (int64_t i = 0; i < run_jobs[rid]; ++i) {
      auto rows = mon_client_->job_history(
          job_id_for(rid, static_cast<int>(i)));
      const HistoryRow* last = nullptr;
      for (const auto& row : rows)
        if (row.transition) last = &row;
      if (!last) continue;
      if (last->state == JobState::Done)
        o.done_by_site[last->site_id] += 1;
      else if (last->state == JobState::Failed)
        o.failed_by_cause[last->note] += 1;
    }
  }
  o.success_rate = o.jobs > 0 ? static_cast<double>(o.done) / o.jobs : 0;

  auto hits = book_client_->query({});
  o.datasets = static_cast<int>(hits.size());
  for (const auto& h : hits) o.replicas += static_cast<int>(h.replicas.size());
  return o;
}

void SimHarness::schedule_cycle(SiteRuntime& sr, double when) {
  sim_->at(when, [this, &sr] {
    auto rep = sr.agent->run_cycle();
    for (const auto& act : rep.actions)
      sim_->log(sr.cfg.sim.site_id, "agent_" + act.kind, act.detail);

    sr.idle = sr.agent->outbox().empty() &&
              sr.agent->tracked_jobs().empty() && !rep.has("pull_job");
    bool all_idle =
        std::all_of(sites_.begin(), sites_.end(),
                    [](const auto& s) { return s->idle; });
    if (all_idle && everything_settled()) {
      done_ = true;
      return;
    }
    if (sim_->now() + sr.agent->config().poll_interval <= sc_.duration_limit)
      schedule_cycle(sr, sim_->now() + sr.agent->config().poll_interval);
  });
}

bool SimHarness::everything_settled() {
  try {
    int64_t terminal = 0;
    for (const auto& rid : run_ids_) {
      auto counts = prod_client_->run_status(rid);
      terminal += counts[JobState::Done] + counts[JobState::Failed];
    }
    return terminal == total_jobs_;
  } catch (const Error&) {
    return false;
  }
}

void SimHarness::route_wn_report(const ScenarioSite& cfg,
                                 const StatusReport& msg) {
  if (cfg.wn_outbound) {
    try {
      mon_client_->report_status(msg, "wn");
    } catch (const Error&) {
      // Lost worker-node message; the agent's own reports recover the
      // transition later.
    }
  } else {
    relay_messages_ += 1;
    site_index_.at(cfg.sim.site_id)->agent->relay(msg);
  }
}

void SimHarness::handle_job_start(const SimJobEvent& ev) {
  std::string key = ev.node_id + "|" + ev.batch_id;
  if (abandoned_.count(key)) return;
  const ScenarioSite& cfg = scenario_site(ev.site_id);

  if (ev.inner && !ev.job.requirements.software.empty()) {
    // The sandboxed agent installs into a job-local area on the worker
    // node; the portal host keeps no shared area.
    try {
      fs::path area = fs::path(work_dir_) / "wn" / sanitize(ev.node_id) /
                      ev.job.job_id;
      InstallArea ia(area, std::nullopt, [this] { return sim_->now(); });
      for (const auto& [app, ver] : ev.job.requirements.software)
        ia.install(app, ver, *repo_client_);
    } catch (const Error& e) {
      sim_->log(ev.site_id, "wn_software_failed",
                "job=" + ev.job.job_id + " " + e.what());
      StatusReport failed;
      failed.job_id = ev.job.job_id;
      failed.reported_state = JobState::Failed;
      failed.note = "software_unavailable";
      failed.site_id = ev.site_id;
      failed.timestamp = sim_->now();
      route_wn_report(cfg, failed);
      try {
        prod_client_->reschedule_job(ev.job.job_id, "software_unavailable");
      } catch (const Error&) {
      }
      abandoned_.insert(key);
      return;
    }
  }

  int steps = static_cast<int>(ev.job.resolved_steps.size());
  StatusReport running;
  running.job_id = ev.job.job_id;
  running.reported_state = JobState::Running;
  running.step_index = 0;
  running.note = steps > 0
                     ? "step 0 " + ev.job.resolved_steps[0].application
                     : "started";
  running.site_id = ev.site_id;
  running.timestamp = ev.view.started_at;
  route_wn_report(cfg, running);

  for (int k = 1; k < steps; ++k) {
    double when = ev.view.started_at + ev.scaled_runtime * k / steps;
    StatusReport prog;
    prog.job_id = ev.job.job_id;
    prog.reported_state = JobState::Running;
    prog.step_index = k;
    prog.note = "step " + std::to_string(k) + " " +
                ev.job.resolved_steps[static_cast<size_t>(k)].application;
    prog.site_id = ev.site_id;
    prog.timestamp = when;
    std::string site_id = ev.site_id;
    sim_->at(when, [this, site_id, prog] {
      route_wn_report(scenario_site(site_id), prog);
    });
  }
}

void SimHarness::handle_job_complete(const SimJobEvent& ev) {
  std::string key = ev.node_id + "|" + ev.batch_id;
  if (abandoned_.count(key)) {
    abandoned_.erase(key);
    sim_->batch_reap(ev.site_id, ev.batch_id);
    return;
  }
  if (!ev.inner) return;  // the site agent finalizes on its next cycle
  nested_finalize(ev, scenario_site(ev.site_id));
}

void SimHarness::nested_finalize(const SimJobEvent& ev,
                                 const ScenarioSite& cfg) {
  const std::string& job_id = ev.job.job_id;
  double ts = sim_->now();

  auto reschedule = [&](const std::string& reason) {
    try {
      prod_client_->reschedule_job(job_id, reason);
    } catch (const Error&) {
    }
  };
  auto report = [&](JobState state, const std::string& note) {
    StatusReport m;
    m.job_id = job_id;
    m.reported_state = state;
    m.note = note;
    m.site_id = ev.site_id;
    m.timestamp = ts;
    route_wn_report(cfg, m);
  };

  if (ev.view.outcome != BatchJobView::Outcome::Success) {
    std::string cause = ev.view.outcome == BatchJobView::Outcome::AppFailure
                            ? "application_error"
                            : "site_error";
    report(JobState::Failed, cause);
    if (sc_.reschedule_failures) reschedule(cause);
    sim_->batch_reap(ev.site_id, ev.batch_id);
    return;
  }

  CollectedJob col = sim_->batch_collect(ev.site_id, ev.batch_id);
  report(JobState::Transferring,
         "outputs=" + std::to_string(col.outputs.size()));

  auto transfer_verified = [&](const std::string& local, uint32_t checksum,
                               const std::string& lfn) {
    for (int attempt = 0; attempt < 5; ++attempt) {
      auto cs = sim_->wan_transfer(ev.node_id, local, sc_.storage_element,
                                   lfn);
      if (cs && *cs == checksum) return true;
    }
    return false;
  };

  bool all_ok = true;
  for (const auto& out : col.outputs) {
    std::string lfn = Agent::lfn_for(ev.job, out);
    if (!transfer_verified(out.local_path, out.checksum, lfn)) {
      all_ok = false;
      continue;
    }
    DatasetDescription d;
    d.lfn = lfn;
    d.data_type = out.data_type;
    d.job_id = job_id;
    d.run_id = ev.job.run_id;
    d.events = out.events;
    d.size_bytes = out.size_bytes;
    d.checksum = out.checksum;
    try {
      book_client_->register_dataset(d);
      if (sc_.resend_registrations) book_client_->register_dataset(d);
    } catch (const Error&) {
      // Idempotent re-register conflicts are fine; replica addition is
      // the decisive call.
    }
    try {
      Replica r;
      r.lfn = lfn;
      r.storage_element = sc_.storage_element;
      r.url = "se://" + sc_.storage_element + lfn;
      r.registered_at = ts;
      r.checksum = out.checksum;
      book_client_->add_replica(r);
      sim_->log(ev.site_id, "wn_replica", "lfn=" + lfn);
    } catch (const Error&) {
      all_ok = false;
    }
  }

  if (!col.log_path.empty())
    transfer_verified(col.log_path, col.log_checksum,
                      Agent::log_lfn_for(job_id));

  if (all_ok) {
    report(JobState::Done, "all replicas registered");
  } else {
    report(JobState::Failed, "site_error");
    reschedule("site_error");
  }
  sim_->batch_reap(ev.site_id, ev.batch_id);
}

std::string SimHarness::report_text(const ScenarioOutcome& o) {
  std::string t;
  t += "simulation report\n";
  t += "=================\n";
  t += "jobs total      " + std::to_string(o.jobs) + "\n";
  t += "jobs done       " + std::to_string(o.done) + "\n";
  t += "jobs failed     " + std::to_string(o.failed) + "\n";
  for (const auto& [cause, n] : o.failed_by_cause)
    t += "  " + cause + "  " + std::to_string(n) + "\n";
  t += "success rate    " + fmt_pct(o.success_rate) + "\n";
  t += "datasets        " + std::to_string(o.datasets) + "\n";
  t += "replicas        " + std::to_string(o.replicas) + "\n";
  t += "bytes moved     " + std::to_string(o.bytes_transferred) + "\n";
  t += "sim time        " + fmt3(o.finished_at) + "\n";
  t += "relayed msgs    " + std::to_string(o.relay_messages) + "\n";
  if (!o.done_by_site.empty()) {
    t += "done by site:\n";
    for (const auto& [site, n] : o.done_by_site)
      t += "  " + site + "  " + std::to_string(n) + "\n";
  }
  if (!o.completed) t += "INCOMPLETE: duration limit reached\n";
  return t;
}

}  // namespace pullgrid
