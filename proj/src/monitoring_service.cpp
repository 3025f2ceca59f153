#include "pullgrid/monitoring_service.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "pullgrid/tables.hpp"

namespace pullgrid {

using nlohmann::json;
namespace tb = tables;

MonitoringService::MonitoringService(Store& store, TimeSource now)
    : store_(store), now_(std::move(now)) {}

bool MonitoringService::report_status(const StatusReport& m,
                                      const std::string& origin) {
  if (m.note.size() > 1024)
    throw Error(ErrorCode::InvalidParameters, "note exceeds 1024 chars");

  return store_.transact([&](Txn& txn) {
    auto job = tb::load_job(txn, m.job_id);
    if (!job) throw Error(ErrorCode::UnknownJob, m.job_id);

    // Messages join the stream of the job's current attempt.
    int attempt = job->attempt;
    bool duplicate = false;
    double max_ts = 0;
    txn.scan(tb::kJobHistory, m.job_id + "|",
             [&](const std::string&, const std::string& value) {
               auto row = json::parse(value).get<HistoryRow>();
               if (row.attempt != attempt) return true;
               max_ts = std::max(max_ts, row.timestamp);
               if (row.state == m.reported_state &&
                   row.timestamp == m.timestamp)
                 duplicate = true;
               return true;
             });
    if (duplicate) return false;

    // A report of the current state is a progress note (step heartbeats),
    // not a transition and not an error.
    bool same_state = m.reported_state == job->state;
    bool legal = !same_state && validate_transition(job->state, m.reported_state);
    HistoryRow row{m.job_id,
                   attempt,
                   m.reported_state,
                   m.step_index.value_or(-1),
                   m.note,
                   m.site_id,
                   m.timestamp,
                   origin,
                   false,
                   !legal && !same_state,
                   m.timestamp < max_ts};
    tb::append_history(txn, *job, row, legal);
    if (legal) {
      job->state = m.reported_state;
      job->last_update = now_();
    }
    tb::save_job(txn, *job);
    return true;
  });
}

std::vector<HistoryRow> MonitoringService::job_history(
    const std::string& job_id) {
  return store_.transact([&](Txn& txn) {
    if (!tb::load_job(txn, job_id))
      throw Error(ErrorCode::UnknownJob, job_id);
    std::vector<HistoryRow> rows;
    txn.scan(tb::kJobHistory, job_id + "|",
             [&](const std::string&, const std::string& value) {
               rows.push_back(json::parse(value).get<HistoryRow>());
               return true;
             });
    return rows;
  });
}

std::map<std::string, SiteSummaryRow> MonitoringService::site_summary() {
  return store_.transact([&](Txn& txn) {
    std::map<std::string, SiteSummaryRow> out;
    std::map<std::string, double> exec_time;
    double total_exec = 0;

    txn.scan(tb::kJobs, "", [&](const std::string&, const std::string& value) {
      auto job = json::parse(value).get<StoredJob>();
      if (job.site.empty()) return true;
      auto& row = out[job.site];
      switch (job.state) {
        case JobState::Running: row.running += 1; break;
        case JobState::Done: row.done += 1; break;
        case JobState::Failed: row.failed += 1; break;
        default: break;
      }
      if (job.state != JobState::Done) return true;

      // Execution time of the final attempt: last Running transition up to
      // the next state change after it.
      double run_ts = -1, end_ts = -1;
      txn.scan(tb::kJobHistory, job.job_id + "|",
               [&](const std::string&, const std::string& hv) {
                 auto h = json::parse(hv).get<HistoryRow>();
                 if (!h.transition || h.attempt != job.attempt) return true;
                 if (h.state == JobState::Running) {
                   run_ts = h.timestamp;
                   end_ts = -1;
                 } else if (run_ts >= 0 && end_ts < 0 &&
                            h.timestamp >= run_ts) {
                   end_ts = h.timestamp;
                 }
                 return true;
               });
      if (run_ts >= 0 && end_ts >= 0) {
        exec_time[job.site] += end_ts - run_ts;
        total_exec += end_ts - run_ts;
      }
      return true;
    });

    if (total_exec > 0)
      for (auto& [site, row] : out) row.cpu_share = exec_time[site] / total_exec;
    return out;
  });
}

}  // namespace pullgrid
