#include "pullgrid/production_service.hpp"

#include <chrono>

#include <nlohmann/json.hpp>

#include "pullgrid/tables.hpp"
#include "pullgrid/util.hpp"

namespace pullgrid {

using nlohmann::json;
namespace tb = tables;

TimeSource wall_clock() {
  return [] {
    auto now = std::chrono::system_clock::now().time_since_epoch();
    return std::chrono::duration<double>(now).count();
  };
}

ProductionService::ProductionService(Store& store, ProductionConfig cfg,
                                     TimeSource now)
    : store_(store), cfg_(cfg), now_(std::move(now)) {
  if (cfg_.max_reschedules < 1)
    throw Error(ErrorCode::InvalidParameters, "max_reschedules must be >= 1");
}

std::string ProductionService::define_workflow(WorkflowDefinition w) {
  if (w.name.empty())
    throw Error(ErrorCode::InvalidParameters, "workflow name is empty");
  if (w.steps.empty())
    throw Error(ErrorCode::InvalidParameters, "workflow has no steps");
  if (int bad = pipeline_violation(w.steps); bad >= 0)
    throw Error(ErrorCode::InvalidPipeline,
                "step " + std::to_string(bad) + " consumes a type its " +
                    "predecessor does not produce");

  double ts = now_();
  return store_.transact([&](Txn& txn) {
    if (!w.workflow_id.empty() && txn.get(tb::kWorkflows, w.workflow_id))
      throw Error(ErrorCode::DuplicateId, "workflow " + w.workflow_id);
    if (w.workflow_id.empty())
      w.workflow_id =
          "W" + zero_pad(tb::next_counter(txn, "workflow"), 6);

    json names = json::object({{"latest", 0}, {"ids", json::array()}});
    if (auto raw = txn.get(tb::kWorkflowNames, w.name))
      names = json::parse(*raw);
    w.version = names.at("latest").get<int>() + 1;
    w.created_at = ts;
    names["latest"] = w.version;
    names["ids"].push_back(w.workflow_id);

    txn.put(tb::kWorkflows, w.workflow_id, json(w).dump());
    txn.put(tb::kWorkflowNames, w.name, names.dump());
    return w.workflow_id;
  });
}

WorkflowDefinition ProductionService::get_workflow(
    const std::string& workflow_id) {
  return store_.transact([&](Txn& txn) {
    auto raw = txn.get(tb::kWorkflows, workflow_id);
    if (!raw) throw Error(ErrorCode::UnknownWorkflow, workflow_id);
    return json::parse(*raw).get<WorkflowDefinition>();
  });
}

std::vector<WorkflowDefinition> ProductionService::workflow_versions(
    const std::string& name) {
  return store_.transact([&](Txn& txn) {
    std::vector<WorkflowDefinition> out;
    auto raw = txn.get(tb::kWorkflowNames, name);
    if (!raw) return out;
    for (const auto& id : json::parse(*raw).at("ids")) {
      auto w = txn.get(tb::kWorkflows, id.get<std::string>());
      if (w) out.push_back(json::parse(*w).get<WorkflowDefinition>());
    }
    return out;
  });
}

RunCreated ProductionService::create_run(
    const std::string& workflow_id, int64_t total_events,
    int64_t events_per_job,
    const std::vector<std::pair<std::string, std::string>>& option_overrides,
    const std::optional<std::string>& destination_site,
    const std::string& request_token) {
  double ts = now_();
  return store_.transact([&](Txn& txn) {
    if (!request_token.empty()) {
      if (auto prior = txn.get(tb::kRunTokens, request_token)) {
        auto row = json::parse(*txn.get(tb::kRuns, *prior));
        return RunCreated{*prior, row.at("job_count").get<int64_t>()};
      }
    }
    auto wraw = txn.get(tb::kWorkflows, workflow_id);
    if (!wraw) throw Error(ErrorCode::UnknownWorkflow, workflow_id);
    auto workflow = json::parse(*wraw).get<WorkflowDefinition>();

    ProductionRun run;
    run.run_id = "R" + zero_pad(tb::next_counter(txn, "run"), 6);
    run.workflow_id = workflow_id;
    run.total_events = total_events;
    run.events_per_job = events_per_job;
    for (const auto& [k, v] : option_overrides) run.extra_options[k] = v;
    if (destination_site && !destination_site->empty())
      run.destination_site = destination_site;
    run.created_at = ts;

    auto jobs = split_run(run, workflow);  // throws InvalidParameters

    for (const auto& jd : jobs) {
      StoredJob job;
      job.job_id = jd.job_id;
      job.run_id = run.run_id;
      job.sequence_index = jd.sequence_index;
      job.events = jd.events;
      job.first_event_offset = jd.first_event_offset;
      job.state = JobState::Waiting;
      job.attempt = 1;
      job.last_update = ts;

      HistoryRow created{job.job_id, 1,          JobState::Created, -1,
                         "created",  "",         ts,                "service",
                         false,      false,      false};
      tb::append_history(txn, job, created, true);
      HistoryRow waiting = created;
      waiting.state = JobState::Waiting;
      waiting.note = "queued";
      tb::append_history(txn, job, waiting, true);

      tb::save_job(txn, job);
      txn.put(tb::kJobsWaiting, job.job_id, "");
    }

    json row = {{"run", run}, {"job_count", static_cast<int64_t>(jobs.size())}};
    txn.put(tb::kRuns, run.run_id, row.dump());
    if (!request_token.empty())
      txn.put(tb::kRunTokens, request_token, run.run_id);
    return RunCreated{run.run_id, static_cast<int64_t>(jobs.size())};
  });
}

JobDescriptor ProductionService::describe_job(Txn& txn, const StoredJob& job) {
  auto rraw = txn.get(tb::kRuns, job.run_id);
  if (!rraw) throw Error(ErrorCode::UnknownRun, job.run_id);
  auto run = json::parse(*rraw).at("run").get<ProductionRun>();
  auto wraw = txn.get(tb::kWorkflows, run.workflow_id);
  if (!wraw) throw Error(ErrorCode::UnknownWorkflow, run.workflow_id);
  auto workflow = json::parse(*wraw).get<WorkflowDefinition>();

  JobDescriptor jd;
  jd.job_id = job.job_id;
  jd.run_id = job.run_id;
  jd.sequence_index = job.sequence_index;
  jd.events = job.events;
  jd.first_event_offset = job.first_event_offset;
  jd.resolved_steps = resolve_steps(workflow, run);
  jd.requirements = derive_requirements(run, jd.resolved_steps);
  return jd;
}

std::optional<JobDescriptor> ProductionService::request_job(
    const ResourceCapability& cap) {
  if (cap.site_id.empty())
    throw Error(ErrorCode::InvalidParameters, "capability has no site_id");
  if (cap.queue_occupancy < 0 || cap.queue_occupancy > 1)
    throw Error(ErrorCode::InvalidParameters, "queue_occupancy outside [0,1]");

  double ts = now_();
  return store_.transact([&](Txn& txn) {
    std::optional<JobDescriptor> served;
    // Requirements are identical for every job of a run; cache per run so a
    // scan past non-matching jobs stays cheap.
    std::map<std::string, JobRequirements> req_cache;

    txn.scan(tb::kJobsWaiting, "", [&](const std::string& key,
                                       const std::string&) {
      auto job = tb::load_job(txn, key);
      if (!job) return true;  // stale index entry; skip

      auto it = req_cache.find(job->run_id);
      if (it == req_cache.end()) {
        auto rraw = txn.get(tb::kRuns, job->run_id);
        if (!rraw) return true;
        auto run = json::parse(*rraw).at("run").get<ProductionRun>();
        auto wraw = txn.get(tb::kWorkflows, run.workflow_id);
        if (!wraw) return true;
        auto workflow = json::parse(*wraw).get<WorkflowDefinition>();
        it = req_cache
                 .emplace(job->run_id,
                          derive_requirements(
                              run, resolve_steps(workflow, run)))
                 .first;
      }
      if (!match_job(it->second, cap)) return true;

      job->state = JobState::Assigned;
      job->site = cap.site_id;
      job->batch_id.clear();
      job->last_update = ts;
      HistoryRow row{job->job_id, job->attempt, JobState::Assigned, -1,
                     "assigned",  cap.site_id,  ts,                 "service",
                     false,       false,        false};
      tb::append_history(txn, *job, row, true);
      tb::save_job(txn, *job);
      txn.erase(tb::kJobsWaiting, key);

      served = describe_job(txn, *job);
      return false;
    });
    return served;
  });
}

JobState ProductionService::reschedule_job(const std::string& job_id,
                                           const std::string& reason) {
  double ts = now_();
  return store_.transact([&](Txn& txn) {
    auto job = tb::load_job(txn, job_id);
    if (!job) throw Error(ErrorCode::UnknownJob, job_id);

    switch (job->state) {
      case JobState::Failed:
        break;
      case JobState::Assigned:
      case JobState::Installing:
      case JobState::Submitted: {
        // Declared agent-side failure before the job ever ran; record the
        // failure transition the agent could not deliver itself.
        HistoryRow fail{job->job_id, job->attempt, JobState::Failed, -1,
                        reason,      job->site,    ts,               "service",
                        false,       false,        false};
        tb::append_history(txn, *job, fail, true);
        job->state = JobState::Failed;
        break;
      }
      default:
        throw Error(ErrorCode::IllegalState,
                    job_id + " is " + job_state_name(job->state));
    }

    if (job->attempt < cfg_.max_reschedules) {
      job->state = JobState::Waiting;
      job->attempt += 1;
      job->site.clear();
      job->batch_id.clear();
      job->last_update = ts;
      HistoryRow row{job->job_id, job->attempt, JobState::Waiting, -1,
                     "rescheduled: " + reason,  "", ts, "service",
                     false,       false,        false};
      tb::append_history(txn, *job, row, true);
      tb::save_job(txn, *job);
      txn.put(tb::kJobsWaiting, job->job_id, "");
    } else {
      job->last_update = ts;
      HistoryRow row{job->job_id, job->attempt, JobState::Failed, -1,
                     "attempts exhausted: " + reason, job->site, ts, "service",
                     false,       false,        false};
      tb::append_history(txn, *job, row, false);
      tb::save_job(txn, *job);
    }
    return job->state;
  });
}

std::map<JobState, int64_t> ProductionService::run_status(
    const std::string& run_id) {
  return store_.transact([&](Txn& txn) {
    if (!txn.get(tb::kRuns, run_id))
      throw Error(ErrorCode::UnknownRun, run_id);
    std::map<JobState, int64_t> counts;
    txn.scan(tb::kJobs, run_id + "-J",
             [&](const std::string&, const std::string& value) {
               counts[json::parse(value).get<StoredJob>().state] += 1;
               return true;
             });
    return counts;
  });
}

ProductionRun ProductionService::get_run(const std::string& run_id) {
  return store_.transact([&](Txn& txn) {
    auto raw = txn.get(tb::kRuns, run_id);
    if (!raw) throw Error(ErrorCode::UnknownRun, run_id);
    return json::parse(*raw).at("run").get<ProductionRun>();
  });
}

std::optional<StoredJob> ProductionService::get_job(const std::string& job_id) {
  return store_.transact(
      [&](Txn& txn) { return tb::load_job(txn, job_id); });
}

}  // namespace pullgrid
