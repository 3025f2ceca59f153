#include "pullgrid/agent.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pullgrid/documents.hpp"
#include "pullgrid/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pullgrid {

namespace {

json status_to_json(const StatusReport& m) {
  json j = {{"job_id", m.job_id},
            {"state", job_state_name(m.reported_state)},
            {"note", m.note},
            {"site_id", m.site_id},
            {"timestamp", m.timestamp}};
  if (m.step_index) j["step_index"] = *m.step_index;
  return j;
}

StatusReport status_from_json(const json& j) {
  StatusReport m;
  m.job_id = j.at("job_id");
  auto state = job_state_from_name(j.at("state"));
  if (!state)
    throw Error(ErrorCode::MalformedDocument, "bad state in spooled message");
  m.reported_state = *state;
  m.note = j.at("note");
  m.site_id = j.at("site_id");
  m.timestamp = j.at("timestamp");
  if (j.contains("step_index")) m.step_index = j.at("step_index").get<int>();
  return m;
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& p, const std::string& data) {
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "write " + tmp.string());
    out << data;
    if (!out.good()) throw Error(ErrorCode::IoFailure, "write " + tmp.string());
  }
  fs::rename(tmp, p);
}

}  // namespace

int CycleReport::count(const std::string& kind) const {
  int n = 0;
  for (const auto& a : actions)
    if (a.kind == kind) ++n;
  return n;
}

Agent::Agent(AgentConfig cfg, RpcTransport& transport, BatchSystem& batch,
             TransferBackend& transfer, TimeSource now)
    : cfg_(std::move(cfg)),
      transport_(transport),
      batch_(batch),
      transfer_(transfer),
      now_(std::move(now)),
      outbox_(fs::path(cfg_.outbox_path) / "entries"),
      prod_(transport_, cfg_.prod_endpoint),
      mon_(transport_, cfg_.mon_endpoint),
      book_(transport_, cfg_.book_endpoint),
      repo_(transport_, cfg_.repo_endpoint) {
  if (cfg_.fill_target < 1)
    throw Error(ErrorCode::InvalidParameters, "fill_target must be >= 1");
  if (cfg_.occupancy_threshold < 0 || cfg_.occupancy_threshold > 1)
    throw Error(ErrorCode::InvalidParameters,
                "occupancy_threshold outside [0,1]");
  if (cfg_.max_transfer_attempts_per_cycle < 1)
    throw Error(ErrorCode::InvalidParameters,
                "max_transfer_attempts_per_cycle must be >= 1");

  fs::create_directories(cfg_.outbox_path);
  fs::create_directories(fs::path(cfg_.outbox_path) / "jobs");

  fs::path lock = fs::path(cfg_.outbox_path) / ".agent_lock";
  lock_fd_ = ::open(lock.c_str(), O_CREAT | O_RDWR, 0644);
  if (lock_fd_ < 0) throw Error(ErrorCode::IoFailure, "open " + lock.string());
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw Error(ErrorCode::AreaLocked, cfg_.outbox_path);
  }

  if (cfg_.shared_area_writable && !cfg_.install_area_path.empty())
    shared_area_ = std::make_unique<InstallArea>(
        cfg_.install_area_path, cfg_.install_quota_mb, now_);

  load_tracked();
}

Agent::~Agent() {
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
}

// ------------------------------------------------------ tracked jobs ----

void Agent::load_tracked() {
  tracked_.clear();
  for (const auto& e :
       fs::directory_iterator(fs::path(cfg_.outbox_path) / "jobs")) {
    if (e.path().extension() != ".json") continue;
    json j = json::parse(read_all(e.path()));
    TrackedJob t;
    t.job = job_from_xml(j.at("job_xml").get<std::string>());
    t.batch_id = j.at("batch_id");
    t.phase = j.at("phase");
    t.area_root = j.value("area_root", "");
    t.failure_reason = j.value("failure_reason", "");
    tracked_[t.job.job_id] = std::move(t);
  }
}

void Agent::save_tracked(const TrackedJob& t) {
  json j = {{"job_xml", job_to_xml(t.job)},
            {"batch_id", t.batch_id},
            {"phase", t.phase},
            {"area_root", t.area_root},
            {"failure_reason", t.failure_reason}};
  write_atomic(fs::path(cfg_.outbox_path) / "jobs" / (t.job.job_id + ".json"),
               j.dump());
  tracked_[t.job.job_id] = t;
}

void Agent::drop_tracked(const std::string& job_id) {
  fs::remove(fs::path(cfg_.outbox_path) / "jobs" / (job_id + ".json"));
  tracked_.erase(job_id);
}

std::vector<std::string> Agent::tracked_jobs() const {
  std::vector<std::string> out;
  for (const auto& [id, t] : tracked_) out.push_back(id);
  return out;
}

// ---------------------------------------------------------- reporting ----

void Agent::report(const StatusReport& msg) {
  mon_.report_status(msg, "agent");
  if (cfg_.duplicate_reports) mon_.report_status(msg, "agent");
}

void Agent::try_report(const StatusReport& msg) {
  try {
    report(msg);
  } catch (const Error&) {
    // Telemetry only; the cycle continues.
  }
}

bool Agent::relay(const StatusReport& msg) {
  try {
    mon_.report_status(msg, "wn");
    return true;
  } catch (const Error&) {
    OutboxEntry e;
    e.kind = "metadata";
    e.destination = "monsvc";
    e.job_id = msg.job_id;
    e.created_at = now_();
    e.payload = status_to_json(msg).dump();
    outbox_.add(std::move(e));
    return false;
  }
}

// ------------------------------------------------------------- naming ----

std::string Agent::lfn_for(const JobDescriptor& job, const OutputFile& f) {
  return "/" + job.run_id + "/" + job.job_id + "/step" +
         std::to_string(f.step_index) + "." + f.data_type;
}

std::string Agent::log_lfn_for(const std::string& job_id) {
  return "/logs/" + job_id + ".log";
}

// ----------------------------------------------------------- software ----

std::pair<InstallReport, fs::path> Agent::ensure_software(
    const JobRequirements& req, const std::string& job_id) {
  InstallReport report;
  if (req.software.empty())
    return {report, shared_area_ ? shared_area_->root() : fs::path()};

  if (shared_area_) {
    for (const auto& [app, ver] : req.software) {
      auto r = shared_area_->install(app, ver, repo_);
      report.items.insert(report.items.end(), r.items.begin(), r.items.end());
    }
    return {report, shared_area_->root()};
  }

  // Shared area read-only: install into a job-local area instead.
  fs::path root = fs::path(cfg_.outbox_path) / "job-areas" / job_id;
  InstallArea area(root, cfg_.install_quota_mb, now_);
  for (const auto& [app, ver] : req.software) {
    auto r = area.install(app, ver, repo_);
    report.items.insert(report.items.end(), r.items.begin(), r.items.end());
  }
  return {report, root};
}

// ------------------------------------------------------------ wrapper ----

std::string Agent::build_wrapper(const JobDescriptor& job,
                                 const fs::path& area_root) const {
  std::string s;
  s += "#!/bin/sh\n";
  s += "# wrapper for " + job.job_id + "\n";
  s += "set -e\n";
  s += "JOB_ID=\"" + job.job_id + "\"\n";
  s += "mkdir -p outputs\n";
  for (const auto& [app, ver] : job.requirements.software)
    s += ". \"" + (area_root / (app + "-" + ver) / "bootstrap.sh").string() +
         "\"\n";
  if (cfg_.runtime_seconds > 0)
    s += "sleep " + std::to_string(cfg_.runtime_seconds) + "\n";
  for (size_t k = 0; k < job.resolved_steps.size(); ++k) {
    const auto& step = job.resolved_steps[k];
    for (const auto& type : step.output_types) {
      std::string out = "outputs/step" + std::to_string(k) + "." + type;
      int64_t bytes = job.events * cfg_.bytes_per_event;
      s += "run-" + step.application + " \"" + job.job_id + ":" +
           std::to_string(k) + ":" + type + "\" " + std::to_string(bytes) +
           " \"" + out + "\"\n";
      s += "echo \"" + out + "|" + type + "|" + std::to_string(k) + "|" +
           std::to_string(job.events) + "\" >> outputs/manifest.txt\n";
    }
  }
  return s;
}

// ---------------------------------------------------------- occupancy ----

double Agent::compute_occupancy(const BatchSnapshot& s) {
  if (s.slot_count <= 0) return 1.0;
  double occ = double(s.queued + s.running) / double(s.slot_count);
  return std::clamp(occ, 0.0, 1.0);
}

// ---------------------------------------------------------------- run ----

CycleReport Agent::run_cycle() {
  CycleReport rep;
  rep.started_at = now_();
  attempted_this_cycle_.clear();
  budget_ = cfg_.max_transfer_attempts_per_cycle;

  try {
    flush_stage(rep);
  } catch (const std::exception& e) {
    rep.actions.push_back({"error", std::string("flush: ") + e.what()});
  }
  try {
    finalize_stage(rep);
  } catch (const std::exception& e) {
    rep.actions.push_back({"error", std::string("finalize: ") + e.what()});
  }
  try {
    flush_stage(rep);
  } catch (const std::exception& e) {
    rep.actions.push_back({"error", std::string("flush: ") + e.what()});
  }
  try {
    settle_stage(rep);
  } catch (const std::exception& e) {
    rep.actions.push_back({"error", std::string("settle: ") + e.what()});
  }
  try {
    pull_stage(rep);
  } catch (const std::exception& e) {
    rep.actions.push_back({"error", std::string("pull: ") + e.what()});
  }
  return rep;
}

// -------------------------------------------------------------- flush ----

void Agent::flush_stage(CycleReport& rep) {
  for (const auto& entry : outbox_.entries()) {
    if (budget_ <= 0) break;
    if (attempted_this_cycle_.count(entry.id)) continue;
    attempted_this_cycle_.insert(entry.id);
    budget_ -= 1;
    flush_entry(entry, rep);
  }
}

void Agent::flush_entry(const OutboxEntry& entry, CycleReport& rep) {
  OutboxEntry e = entry;
  e.attempts += 1;

  if (e.kind == "metadata") {
    try {
      mon_.report_status(status_from_json(json::parse(e.payload)), "wn");
      outbox_.remove(e.id);
      rep.actions.push_back({"flush_ok", e.kind + " " + e.id});
    } catch (const Error& err) {
      if (err.code() == ErrorCode::ServiceUnreachable) {
        outbox_.update(e);
        rep.actions.push_back({"flush_fail", e.kind + " " + e.id});
      } else {
        // The service understood and refused; retrying cannot help.
        outbox_.remove(e.id);
        rep.actions.push_back({"flush_dropped", e.id + " " + err.what()});
      }
    }
    return;
  }

  if (e.kind == "log") {
    auto cs = transfer_.transfer(e.local_path, e.destination, e.lfn);
    if (cs && *cs == e.checksum) {
      // Local log files are kept; only the outbox obligation goes away.
      outbox_.remove(e.id);
      rep.actions.push_back({"flush_ok", e.kind + " " + e.lfn});
    } else {
      outbox_.update(e);
      rep.actions.push_back({"flush_fail", e.kind + " " + e.lfn});
    }
    return;
  }

  // Dataset: transfer with checksum verification, then make sure the
  // description is registered, then add the replica. Only the replica
  // registration completes the entry.
  if (!e.delivered) {
    auto cs = transfer_.transfer(e.local_path, e.destination, e.lfn);
    if (!cs || *cs != e.checksum) {
      outbox_.update(e);
      rep.actions.push_back({"flush_fail", e.kind + " " + e.lfn});
      return;
    }
    e.delivered = true;
    outbox_.update(e);
  }

  try {
    book_.register_dataset(dataset_from_xml(e.payload));  // idempotent
    Replica r;
    r.lfn = e.lfn;
    r.storage_element = e.destination;
    r.url = "se://" + e.destination + e.lfn;
    r.checksum = e.checksum;
    book_.add_replica(r);
    outbox_.remove(e.id);
    rep.actions.push_back({"flush_replica", e.lfn});
  } catch (const Error& err) {
    if (err.code() == ErrorCode::ServiceUnreachable) {
      outbox_.update(e);
      rep.actions.push_back({"flush_fail", e.kind + " " + e.lfn});
    } else {
      // Rejected or conflicting dataset: a retry cannot change the answer.
      outbox_.remove(e.id);
      rep.actions.push_back({"flush_dropped", e.lfn + " " + err.what()});
    }
  }
}

// ----------------------------------------------------------- finalize ----

void Agent::finalize_stage(CycleReport& rep) {
  BatchSnapshot snap;
  try {
    snap = batch_.status();
  } catch (const std::exception& e) {
    rep.actions.push_back({"error", std::string("batch status: ") + e.what()});
    return;
  }

  for (const auto& view : snap.jobs) {
    std::string job_id;
    for (const auto& [id, t] : tracked_)
      if (t.batch_id == view.batch_id) job_id = id;
    if (job_id.empty()) continue;
    TrackedJob& t = tracked_[job_id];

    // The Running transition must be on record before Transferring or
    // Failed; the worker node usually reported it already, in which case
    // the identical timestamp makes this a dedup no-op.
    if (t.phase == "submitted" && view.state != BatchJobView::State::Queued) {
      StatusReport running;
      running.job_id = job_id;
      running.reported_state = JobState::Running;
      running.note = "execution started";
      running.site_id = cfg_.site_id;
      running.timestamp = view.started_at;
      try_report(running);
      t.phase = "running";
      save_tracked(t);
    }

    if (view.state != BatchJobView::State::Completed) continue;
    try {
      if (view.outcome == BatchJobView::Outcome::Success)
        finalize_success(t, view, rep);
      else
        finalize_failure(t, view, rep);
    } catch (const std::exception& e) {
      rep.actions.push_back(
          {"error", "finalize " + job_id + ": " + e.what()});
    }
  }
}

void Agent::finalize_success(TrackedJob& t, const BatchJobView& view,
                             CycleReport& rep) {
  CollectedJob collected = batch_.collect(view.batch_id);
  double ts = now_();

  StatusReport transferring;
  transferring.job_id = t.job.job_id;
  transferring.reported_state = JobState::Transferring;
  transferring.note =
      "outputs=" + std::to_string(collected.outputs.size());
  transferring.site_id = cfg_.site_id;
  transferring.timestamp = ts;
  try_report(transferring);

  for (const auto& out : collected.outputs) {
    DatasetDescription d;
    d.lfn = lfn_for(t.job, out);
    d.data_type = out.data_type;
    d.job_id = t.job.job_id;
    d.run_id = t.job.run_id;
    d.events = out.events;
    d.size_bytes = out.size_bytes;
    d.checksum = out.checksum;
    try {
      book_.register_dataset(d);
      if (cfg_.duplicate_reports) book_.register_dataset(d);
    } catch (const Error&) {
      // The flush path re-registers before adding the replica.
    }

    OutboxEntry e;
    e.kind = "dataset";
    e.local_path = out.local_path;
    e.destination = cfg_.storage_element;
    e.lfn = d.lfn;
    e.job_id = t.job.job_id;
    e.size_bytes = out.size_bytes;
    e.checksum = out.checksum;
    e.created_at = ts;
    e.payload = dataset_to_xml(d);
    outbox_.add(std::move(e));
  }

  if (!collected.log_path.empty()) {
    OutboxEntry e;
    e.kind = "log";
    e.local_path = collected.log_path;
    e.destination = cfg_.storage_element;
    e.lfn = log_lfn_for(t.job.job_id);
    e.job_id = t.job.job_id;
    e.size_bytes = collected.log_size;
    e.checksum = collected.log_checksum;
    e.created_at = ts;
    outbox_.add(std::move(e));
  }

  batch_.reap(view.batch_id);

  if (collected.outputs.empty()) {
    StatusReport done;
    done.job_id = t.job.job_id;
    done.reported_state = JobState::Done;
    done.note = "no outputs produced";
    done.site_id = cfg_.site_id;
    done.timestamp = ts;
    try_report(done);
    rep.actions.push_back({"job_done_empty", t.job.job_id});
    drop_tracked(t.job.job_id);
    return;
  }

  t.phase = "transferring";
  save_tracked(t);
  rep.actions.push_back(
      {"finalize_transferring",
       t.job.job_id + " outputs=" + std::to_string(collected.outputs.size())});
}

void Agent::finalize_failure(TrackedJob& t, const BatchJobView& view,
                             CycleReport& rep) {
  CollectedJob collected = batch_.collect(view.batch_id);
  double ts = now_();
  std::string reason = view.outcome == BatchJobView::Outcome::AppFailure
                           ? "application_error"
                           : "site_error";

  StatusReport failed;
  failed.job_id = t.job.job_id;
  failed.reported_state = JobState::Failed;
  failed.note = reason;
  failed.site_id = cfg_.site_id;
  failed.timestamp = ts;
  try_report(failed);

  if (!collected.log_path.empty()) {
    OutboxEntry e;
    e.kind = "log";
    e.local_path = collected.log_path;
    e.destination = cfg_.storage_element;
    e.lfn = log_lfn_for(t.job.job_id);
    e.job_id = t.job.job_id;
    e.size_bytes = collected.log_size;
    e.checksum = collected.log_checksum;
    e.created_at = ts;
    outbox_.add(std::move(e));
  }

  batch_.reap(view.batch_id);
  rep.actions.push_back({"finalize_failed", t.job.job_id + " " + reason});

  if (!cfg_.reschedule_execution_failures) {
    rep.actions.push_back({"job_terminal", t.job.job_id + " " + reason});
    drop_tracked(t.job.job_id);
    return;
  }
  t.failure_reason = reason;
  request_reschedule(t, reason, rep);
}

void Agent::request_reschedule(TrackedJob& t, const std::string& reason,
                               CycleReport& rep) {
  try {
    JobState result = prod_.reschedule_job(t.job.job_id, reason);
    if (cfg_.duplicate_reports && result == JobState::Failed)
      prod_.reschedule_job(t.job.job_id, reason);
    rep.actions.push_back(
        {"reschedule",
         t.job.job_id + " result=" + job_state_name(result)});
    if (result == JobState::Failed)
      rep.actions.push_back({"job_terminal", t.job.job_id + " " + reason});
    drop_tracked(t.job.job_id);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ServiceUnreachable) {
      // Keep the obligation; retried next cycle from settle_stage.
      t.phase = "reschedule_pending";
      save_tracked(t);
      rep.actions.push_back({"reschedule_deferred", t.job.job_id});
    } else {
      rep.actions.push_back(
          {"error", "reschedule " + t.job.job_id + ": " + e.what()});
      drop_tracked(t.job.job_id);
    }
  }
}

// ------------------------------------------------------------- settle ----

void Agent::settle_stage(CycleReport& rep) {
  std::set<std::string> jobs_with_datasets;
  for (const auto& e : outbox_.entries())
    if (e.kind == "dataset") jobs_with_datasets.insert(e.job_id);

  std::vector<std::string> ids;
  for (const auto& [id, t] : tracked_) ids.push_back(id);

  for (const auto& id : ids) {
    TrackedJob& t = tracked_[id];
    if (t.phase == "transferring" && !jobs_with_datasets.count(id)) {
      StatusReport done;
      done.job_id = id;
      done.reported_state = JobState::Done;
      done.note = "all replicas registered";
      done.site_id = cfg_.site_id;
      done.timestamp = now_();
      try {
        report(done);
        rep.actions.push_back({"job_done", id});
        drop_tracked(id);
      } catch (const Error&) {
        rep.actions.push_back({"report_deferred", id});
      }
    } else if (t.phase == "reschedule_pending") {
      request_reschedule(t, t.failure_reason.empty() ? "site_error"
                                                     : t.failure_reason,
                         rep);
    }
  }
}

// --------------------------------------------------------------- pull ----

void Agent::note_pull_failure() {
  ++pull_failure_streak_;
  pull_backoff_cycles_ = std::min(1 << std::min(pull_failure_streak_ - 1, 4),
                                  16);
}

void Agent::pull_stage(CycleReport& rep) {
  if (pull_backoff_cycles_ > 0) {
    --pull_backoff_cycles_;
    rep.actions.push_back(
        {"pull_backoff",
         "cycles_left=" + std::to_string(pull_backoff_cycles_)});
    return;
  }

  while (true) {
    BatchSnapshot snap;
    try {
      snap = batch_.status();
    } catch (const std::exception& e) {
      rep.actions.push_back({"error", std::string("batch status: ") + e.what()});
      return;
    }

    double occ = compute_occupancy(snap);
    int local = snap.queued + snap.running;
    if (occ >= cfg_.occupancy_threshold) {
      rep.actions.push_back(
          {"pull_blocked", "occupancy=" + format_double(occ)});
      return;
    }
    if (local >= cfg_.fill_target) {
      rep.actions.push_back(
          {"pull_blocked", "local_jobs=" + std::to_string(local)});
      return;
    }

    ResourceCapability cap;
    cap.site_id = cfg_.site_id;
    cap.cpu_power = snap.cpu_power;
    cap.free_disk_mb = snap.free_disk_mb;
    cap.queue_occupancy = occ;
    if (shared_area_)
      for (const auto& r : shared_area_->list_installed())
        cap.installed_software.emplace(r.application, r.app_version);

    std::optional<JobDescriptor> job;
    try {
      job = prod_.request_job(cap);
    } catch (const Error& e) {
      rep.actions.push_back({"pulls_skipped", e.what()});
      return;
    }
    if (!job) {
      rep.actions.push_back({"pull_none", ""});
      return;
    }
    rep.actions.push_back({"pull_job", job->job_id});

    TrackedJob t;
    t.job = *job;
    t.phase = "assigned";
    save_tracked(t);

    StatusReport installing;
    installing.job_id = job->job_id;
    installing.reported_state = JobState::Installing;
    installing.note = cfg_.portal_mode ? "sandbox prep" : "software check";
    installing.site_id = cfg_.site_id;
    installing.timestamp = now_();
    try_report(installing);

    if (cfg_.portal_mode) {
      // The sandbox carries the job description; the worker-node agent
      // behind the portal installs software and runs the lifecycle, so
      // this agent's responsibility ends at dispatch.
      std::string batch_id;
      try {
        batch_id = batch_.submit(*job, job_to_xml(*job));
      } catch (const Error& e) {
        rep.actions.push_back({"submit_failed", job->job_id + " " + e.what()});
        StatusReport failed;
        failed.job_id = job->job_id;
        failed.reported_state = JobState::Failed;
        failed.note = "submission_failed";
        failed.site_id = cfg_.site_id;
        failed.timestamp = now_();
        try_report(failed);
        t.failure_reason = "submission_failed";
        request_reschedule(t, "submission_failed", rep);
        note_pull_failure();
        return;
      }
      pull_failure_streak_ = 0;
      drop_tracked(job->job_id);
      rep.actions.push_back({"submit", job->job_id + " " + batch_id});
      StatusReport submitted;
      submitted.job_id = job->job_id;
      submitted.reported_state = JobState::Submitted;
      submitted.note = "batch " + batch_id;
      submitted.site_id = cfg_.site_id;
      submitted.timestamp = now_();
      try_report(submitted);
      continue;
    }

    fs::path area_root;
    try {
      auto [inst_report, root] = ensure_software(job->requirements, job->job_id);
      area_root = root;
      for (const auto& item : inst_report.items)
        rep.actions.push_back(
            {item.action == "cached" ? "install_cached" : "install",
             item.application + "-" + item.app_version});
    } catch (const Error& e) {
      rep.actions.push_back({"software_failed", job->job_id + " " + e.what()});
      StatusReport failed;
      failed.job_id = job->job_id;
      failed.reported_state = JobState::Failed;
      failed.note = "software_unavailable";
      failed.site_id = cfg_.site_id;
      failed.timestamp = now_();
      try_report(failed);
      t.failure_reason = "software_unavailable";
      request_reschedule(t, "software_unavailable", rep);
      // A deterministic failure would repeat for every further pull this
      // cycle; stop here and let the backoff decide when to retry.
      note_pull_failure();
      return;
    }

    std::string batch_id;
    try {
      batch_id = batch_.submit(*job, build_wrapper(*job, area_root));
    } catch (const Error& e) {
      rep.actions.push_back({"submit_failed", job->job_id + " " + e.what()});
      StatusReport failed;
      failed.job_id = job->job_id;
      failed.reported_state = JobState::Failed;
      failed.note = "submission_failed";
      failed.site_id = cfg_.site_id;
      failed.timestamp = now_();
      try_report(failed);
      t.failure_reason = "submission_failed";
      request_reschedule(t, "submission_failed", rep);
      // Same circuit breaker as above: the local batch refused once, so
      // do not hammer it again until the backoff expires.
      note_pull_failure();
      return;
    }

    pull_failure_streak_ = 0;
    t.batch_id = batch_id;
    t.phase = "submitted";
    t.area_root = area_root.string();
    save_tracked(t);
    rep.actions.push_back({"submit", job->job_id + " " + batch_id});

    StatusReport submitted;
    submitted.job_id = job->job_id;
    submitted.reported_state = JobState::Submitted;
    submitted.note = "batch " + batch_id;
    submitted.site_id = cfg_.site_id;
    submitted.timestamp = now_();
    try_report(submitted);
  }
}

}  // namespace pullgrid
