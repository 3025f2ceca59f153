#include <algorithm>
#include <atomic>
#include <random>
#include <set>
#include <thread>

#include "doctest.h"
#include "pullgrid/documents.hpp"
#include "testutil.hpp"

using namespace pullgrid;
using namespace pullgrid::testutil;

namespace {

StatusReport report(const std::string& job_id, JobState state,
                    const std::string& site, double t,
                    const std::string& note = "") {
  StatusReport m;
  m.job_id = job_id;
  m.reported_state = state;
  m.note = note;
  m.site_id = site;
  m.timestamp = t;
  return m;
}

/// Walks a just-assigned job through the legal chain to Done.
/// Running is entered at t_run and left at t_end.
void drive_to_done(Stack& st, const std::string& job_id,
                   const std::string& site, double t_run, double t_end) {
  st.mon.report_status(report(job_id, JobState::Installing, site, t_run - 2));
  st.mon.report_status(report(job_id, JobState::Submitted, site, t_run - 1));
  st.mon.report_status(report(job_id, JobState::Running, site, t_run));
  st.mon.report_status(report(job_id, JobState::Transferring, site, t_end));
  st.mon.report_status(report(job_id, JobState::Done, site, t_end + 1));
}

}  // namespace

// ---------------------------------------------------------------------------
// Production service
// ---------------------------------------------------------------------------

TEST_CASE("workflow store and fetch identity") {
  TempDir td;
  Stack st(td.str());
  WorkflowDefinition w = two_step_workflow("DC04");
  std::string id = st.prod.define_workflow(w);
  CHECK(id.rfind("W", 0) == 0);
  WorkflowDefinition got = st.prod.get_workflow(id);
  CHECK(got.workflow_id == id);
  CHECK(got.version == 1);
  CHECK(got.name == "DC04");
  CHECK(got.steps == w.steps);
}

TEST_CASE("pipeline validation rejects starving step") {
  TempDir td;
  Stack st(td.str());
  WorkflowDefinition w;
  w.name = "bad";
  // Step 1 (index 1) wants RAW but step 0 only emits SIM.
  w.steps = {step("Gauss", "v1", {}, {"SIM"}),
             step("Brunel", "v2", {"RAW"}, {"DST"})};
  CHECK_THROWS_WITH_AS(st.prod.define_workflow(w),
                       doctest::Contains("InvalidPipeline"), Error);
  try {
    st.prod.define_workflow(w);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("redefining a name bumps version, both retrievable") {
  TempDir td;
  Stack st(td.str());
  std::string id1 = st.prod.define_workflow(two_step_workflow("MC"));
  std::string id2 = st.prod.define_workflow(two_step_workflow("MC"));
  CHECK(id1 != id2);
  CHECK(st.prod.get_workflow(id1).version == 1);
  CHECK(st.prod.get_workflow(id2).version == 2);
  auto versions = st.prod.workflow_versions("MC");
  REQUIRE(versions.size() == 2);
  CHECK(versions[0].version == 1);
  CHECK(versions[1].version == 2);
}

TEST_CASE("create_run splits exactly") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(one_step_workflow());
  RunCreated rc = st.prod.create_run(wf, 100, 25, {}, std::nullopt);
  CHECK(rc.job_count == 4);
  auto status = st.prod.run_status(rc.run_id);
  CHECK(status[JobState::Waiting] == 4);
  CHECK(status.size() == 1);
  // Jobs exist, all attempt 1, ids follow the run.
  auto j0 = st.prod.get_job(rc.run_id + "-J000000");
  REQUIRE(j0.has_value());
  CHECK(j0->state == JobState::Waiting);
  CHECK(j0->attempt == 1);
  CHECK(j0->events == 25);
}

TEST_CASE("create_run at data-challenge scale: 36600 jobs of 500 events") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(two_step_workflow("DC04"));
  RunCreated rc =
      st.prod.create_run(wf, int64_t{36600} * 500, 500, {}, std::nullopt);
  CHECK(rc.job_count == 36600);
  auto status = st.prod.run_status(rc.run_id);
  CHECK(status[JobState::Waiting] == 36600);
}

TEST_CASE("create_run errors") {
  TempDir td;
  Stack st(td.str());
  CHECK_THROWS_WITH_AS(st.prod.create_run("W999999", 100, 25, {}, std::nullopt),
                       doctest::Contains("UnknownWorkflow"), Error);
  std::string wf = st.prod.define_workflow(one_step_workflow());
  CHECK_THROWS_WITH_AS(st.prod.create_run(wf, 0, 25, {}, std::nullopt),
                       doctest::Contains("InvalidParameters"), Error);
  CHECK_THROWS_WITH_AS(st.prod.create_run(wf, 100, 0, {}, std::nullopt),
                       doctest::Contains("InvalidParameters"), Error);
}

TEST_CASE("create_run request token is idempotent") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(one_step_workflow());
  RunCreated first =
      st.prod.create_run(wf, 100, 25, {}, std::nullopt, "token-1");
  RunCreated again =
      st.prod.create_run(wf, 100, 25, {}, std::nullopt, "token-1");
  CHECK(again.run_id == first.run_id);
  CHECK(again.job_count == first.job_count);
  // A fresh token makes a fresh run.
  RunCreated other =
      st.prod.create_run(wf, 100, 25, {}, std::nullopt, "token-2");
  CHECK(other.run_id != first.run_id);
}

TEST_CASE("request_job on empty table returns none") {
  TempDir td;
  Stack st(td.str());
  CHECK_FALSE(st.prod.request_job(capability("A")).has_value());
}

TEST_CASE("destination matching serves only the unconstrained job") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(one_step_workflow());
  // The destination-pinned run is created first, so its job is lower in
  // FIFO order; it still must not go to site A.
  RunCreated pinned = st.prod.create_run(wf, 25, 25, {}, "B");
  RunCreated open = st.prod.create_run(wf, 25, 25, {}, std::nullopt);
  auto got = st.prod.request_job(capability("A"));
  REQUIRE(got.has_value());
  CHECK(got->run_id == open.run_id);
  CHECK_FALSE(st.prod.request_job(capability("A")).has_value());
  auto for_b = st.prod.request_job(capability("B"));
  REQUIRE(for_b.has_value());
  CHECK(for_b->run_id == pinned.run_id);
}

TEST_CASE("cpu and disk floors gate serving at the boundary") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(one_step_workflow());
  st.prod.create_run(wf, 25, 25,
                     {{"min_cpu_power", "2.0"}, {"min_disk_mb", "5000"}},
                     std::nullopt);
  ResourceCapability weak = capability("A", 1.9, 5000);
  CHECK_FALSE(st.prod.request_job(weak).has_value());
  ResourceCapability small = capability("A", 2.0, 4999);
  CHECK_FALSE(st.prod.request_job(small).has_value());
  // Equality on both floors matches.
  ResourceCapability fit = capability("A", 2.0, 5000);
  CHECK(st.prod.request_job(fit).has_value());
}

TEST_CASE("FIFO serving order across runs") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(one_step_workflow());
  RunCreated r1 = st.prod.create_run(wf, 50, 25, {}, std::nullopt);
  RunCreated r2 = st.prod.create_run(wf, 25, 25, {}, std::nullopt);
  auto a = st.prod.request_job(capability("S"));
  auto b = st.prod.request_job(capability("S"));
  auto c = st.prod.request_job(capability("S"));
  REQUIRE((a && b && c));
  CHECK(a->job_id == r1.run_id + "-J000000");
  CHECK(b->job_id == r1.run_id + "-J000001");
  CHECK(c->job_id == r2.run_id + "-J000000");
}

TEST_CASE("64 concurrent requests for 10 jobs: no duplicates") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(one_step_workflow());
  st.prod.create_run(wf, 250, 25, {}, std::nullopt);  // 10 jobs

  std::vector<std::optional<JobDescriptor>> got(64);
  std::vector<std::thread> threads;
  for (int i = 0; i < 64; ++i)
    threads.emplace_back([&st, &got, i] {
      got[i] = st.prod.request_job(capability("S" + std::to_string(i)));
    });
  for (auto& t : threads) t.join();

  std::set<std::string> served;
  int none = 0;
  for (const auto& jd : got) {
    if (jd)
      served.insert(jd->job_id);
    else
      ++none;
  }
  CHECK(served.size() == 10);
  CHECK(none == 54);
}

TEST_CASE("served job carries resolved steps and requirements") {
  TempDir td;
  Stack st(td.str());
  WorkflowDefinition w = two_step_workflow("MC");
  w.steps[0].options = {{"nevents", "0"}};
  std::string wf = st.prod.define_workflow(w);
  st.prod.create_run(wf, 50, 25, {{"nevents", "25"}}, std::nullopt);
  auto jd = st.prod.request_job(capability("A"));
  REQUIRE(jd.has_value());
  REQUIRE(jd->resolved_steps.size() == 2);
  CHECK(jd->resolved_steps[0].options ==
        std::vector<std::pair<std::string, std::string>>{{"nevents", "25"}});
  CHECK(jd->requirements.software ==
        std::vector<std::pair<std::string, std::string>>{{"Gauss", "v1"},
                                                         {"Brunel", "v2"}});
  CHECK(jd->events == 25);
}

TEST_CASE("reschedule returns job to Waiting with attempt+1") {
  TempDir td;
  Stack st(td.str());  // max_reschedules 3
  std::string wf = st.prod.define_workflow(one_step_workflow());
  RunCreated rc = st.prod.create_run(wf, 25, 25, {}, std::nullopt);
  std::string jid = rc.run_id + "-J000000";

  REQUIRE(st.prod.request_job(capability("A")).has_value());
  JobState s = st.prod.reschedule_job(jid, "submission refused");
  CHECK(s == JobState::Waiting);
  auto job = st.prod.get_job(jid);
  REQUIRE(job.has_value());
  CHECK(job->attempt == 2);
  // The reason lands in history.
  auto rows = st.mon.job_history(jid);
  bool reason_seen = false;
  for (const auto& r : rows)
    if (r.note.find("submission refused") != std::string::npos)
      reason_seen = true;
  CHECK(reason_seen);
}

TEST_CASE("reschedule exhausts at max_reschedules") {
  TempDir td;
  Stack st(td.str(), ProductionConfig{.max_reschedules = 3});
  std::string wf = st.prod.define_workflow(one_step_workflow());
  RunCreated rc = st.prod.create_run(wf, 25, 25, {}, std::nullopt);
  std::string jid = rc.run_id + "-J000000";

  // attempt 1 -> 2 -> 3 by two reschedules; each preceded by a serve.
  for (int round = 0; round < 2; ++round) {
    REQUIRE(st.prod.request_job(capability("A")).has_value());
    CHECK(st.prod.reschedule_job(jid, "fail " + std::to_string(round)) ==
          JobState::Waiting);
  }
  CHECK(st.prod.get_job(jid)->attempt == 3);
  REQUIRE(st.prod.request_job(capability("A")).has_value());
  // attempt == max_reschedules: no further attempts are granted.
  CHECK(st.prod.reschedule_job(jid, "fail again") == JobState::Failed);
  auto job = st.prod.get_job(jid);
  CHECK(job->state == JobState::Failed);
  CHECK(job->attempt == 3);
  auto rows = st.mon.job_history(jid);
  bool exhausted = false;
  for (const auto& r : rows)
    if (r.note.find("attempts exhausted") != std::string::npos)
      exhausted = true;
  CHECK(exhausted);
}

TEST_CASE("reschedule errors") {
  TempDir td;
  Stack st(td.str());
  CHECK_THROWS_WITH_AS(st.prod.reschedule_job("R000001-J000000", "x"),
                       doctest::Contains("UnknownJob"), Error);
  std::string wf = st.prod.define_workflow(one_step_workflow());
  RunCreated rc = st.prod.create_run(wf, 25, 25, {}, std::nullopt);
  // Waiting, never served: nothing to reschedule.
  CHECK_THROWS_WITH_AS(st.prod.reschedule_job(rc.run_id + "-J000000", "x"),
                       doctest::Contains("IllegalState"), Error);
}

TEST_CASE("rescheduled job served elsewhere keeps both sites in history") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(one_step_workflow());
  RunCreated rc = st.prod.create_run(wf, 25, 25, {}, std::nullopt);
  std::string jid = rc.run_id + "-J000000";

  auto first = st.prod.request_job(capability("SiteA"));
  REQUIRE(first.has_value());
  st.prod.reschedule_job(jid, "site A refused");
  auto second = st.prod.request_job(capability("SiteB"));
  REQUIRE(second.has_value());
  CHECK(second->job_id == jid);
  CHECK(st.prod.get_job(jid)->site == "SiteB");

  std::set<std::string> sites;
  for (const auto& r : st.mon.job_history(jid))
    if (!r.site_id.empty()) sites.insert(r.site_id);
  CHECK(sites == std::set<std::string>{"SiteA", "SiteB"});
}

TEST_CASE("run_status counts follow serving and always conserve") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(one_step_workflow());
  RunCreated rc = st.prod.create_run(wf, 100, 25, {}, std::nullopt);
  auto sum = [&] {
    int64_t n = 0;
    for (auto& [s, c] : st.prod.run_status(rc.run_id)) n += c;
    return n;
  };
  CHECK(sum() == 4);
  REQUIRE(st.prod.request_job(capability("A")).has_value());
  auto status = st.prod.run_status(rc.run_id);
  CHECK(status[JobState::Waiting] == 3);
  CHECK(status[JobState::Assigned] == 1);
  CHECK(sum() == 4);
  CHECK_THROWS_WITH_AS(st.prod.run_status("R424242"),
                       doctest::Contains("UnknownRun"), Error);
}

// ---------------------------------------------------------------------------
// Monitoring service
// ---------------------------------------------------------------------------

TEST_CASE("fresh job history is Created then Waiting") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(one_step_workflow());
  RunCreated rc = st.prod.create_run(wf, 25, 25, {}, std::nullopt);
  auto rows = st.mon.job_history(rc.run_id + "-J000000");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].state == JobState::Created);
  CHECK(rows[1].state == JobState::Waiting);
  CHECK(rows[0].origin == "service");
  CHECK(rows[0].transition);
  CHECK_THROWS_WITH_AS(st.mon.job_history("R9-J9"),
                       doctest::Contains("UnknownJob"), Error);
}

TEST_CASE("legal report advances state") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(one_step_workflow());
  RunCreated rc = st.prod.create_run(wf, 25, 25, {}, std::nullopt);
  std::string jid = rc.run_id + "-J000000";
  REQUIRE(st.prod.request_job(capability("A")).has_value());

  CHECK(st.mon.report_status(report(jid, JobState::Installing, "A", 10)));
  CHECK(st.mon.report_status(report(jid, JobState::Submitted, "A", 11)));
  CHECK(st.mon.report_status(report(jid, JobState::Running, "A", 12)));
  CHECK(st.prod.get_job(jid)->state == JobState::Running);
  auto rows = st.mon.job_history(jid);
  CHECK(rows.back().state == JobState::Running);
  CHECK(rows.back().transition);
  CHECK_FALSE(rows.back().illegal_transition);
}

TEST_CASE("illegal report is stored flagged, state unchanged") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(one_step_workflow());
  RunCreated rc = st.prod.create_run(wf, 25, 25, {}, std::nullopt);
  std::string jid = rc.run_id + "-J000000";
  REQUIRE(st.prod.request_job(capability("A")).has_value());

  size_t before = st.mon.job_history(jid).size();
  CHECK(st.mon.report_status(report(jid, JobState::Done, "A", 10)));
  CHECK(st.prod.get_job(jid)->state == JobState::Assigned);
  auto rows = st.mon.job_history(jid);
  CHECK(rows.size() == before + 1);
  CHECK(rows.back().illegal_transition);
  CHECK_FALSE(rows.back().transition);
  CHECK(rows.back().state == JobState::Done);
}

TEST_CASE("duplicate report is dropped") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(one_step_workflow());
  RunCreated rc = st.prod.create_run(wf, 25, 25, {}, std::nullopt);
  std::string jid = rc.run_id + "-J000000";
  REQUIRE(st.prod.request_job(capability("A")).has_value());

  StatusReport m = report(jid, JobState::Installing, "A", 10, "starting");
  CHECK(st.mon.report_status(m));
  size_t after_first = st.mon.job_history(jid).size();
  CHECK_FALSE(st.mon.report_status(m));  // exact duplicate
  CHECK(st.mon.job_history(jid).size() == after_first);
  CHECK(st.prod.get_job(jid)->state == JobState::Installing);
}

TEST_CASE("replaying a message stream is idempotent") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(one_step_workflow());
  RunCreated rc = st.prod.create_run(wf, 25, 25, {}, std::nullopt);
  std::string jid = rc.run_id + "-J000000";
  REQUIRE(st.prod.request_job(capability("A")).has_value());

  std::vector<StatusReport> stream = {
      report(jid, JobState::Installing, "A", 10),
      report(jid, JobState::Submitted, "A", 11),
      report(jid, JobState::Running, "A", 12),
      report(jid, JobState::Transferring, "A", 90),
      report(jid, JobState::Done, "A", 95),
  };
  for (const auto& m : stream) st.mon.report_status(m);
  auto rows_once = st.mon.job_history(jid);
  JobState state_once = st.prod.get_job(jid)->state;
  for (const auto& m : stream) CHECK_FALSE(st.mon.report_status(m));
  CHECK(st.mon.job_history(jid).size() == rows_once.size());
  CHECK(st.prod.get_job(jid)->state == state_once);
  CHECK(state_once == JobState::Done);
}

TEST_CASE("late timestamp is flagged out_of_order") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(one_step_workflow());
  RunCreated rc = st.prod.create_run(wf, 25, 25, {}, std::nullopt);
  std::string jid = rc.run_id + "-J000000";
  REQUIRE(st.prod.request_job(capability("A")).has_value());

  CHECK(st.mon.report_status(report(jid, JobState::Installing, "A", 50)));
  CHECK(st.mon.report_status(report(jid, JobState::Submitted, "A", 20)));
  auto rows = st.mon.job_history(jid);
  CHECK(rows.back().out_of_order);
  // Flagged but still applied when the transition itself is legal.
  CHECK(rows.back().transition);
}

TEST_CASE("site summary on empty and single-site stores") {
  TempDir td;
  Stack st(td.str());
  CHECK(st.mon.site_summary().empty());

  std::string wf = st.prod.define_workflow(one_step_workflow());
  RunCreated rc = st.prod.create_run(wf, 75, 25, {}, std::nullopt);
  for (int i = 0; i < 3; ++i) {
    auto jd = st.prod.request_job(capability("ONLY"));
    REQUIRE(jd.has_value());
    drive_to_done(st, jd->job_id, "ONLY", 100 + i * 10, 200 + i * 10);
  }
  auto summary = st.mon.site_summary();
  REQUIRE(summary.count("ONLY") == 1);
  CHECK(summary["ONLY"].done == 3);
  CHECK(summary["ONLY"].running == 0);
  CHECK(summary["ONLY"].failed == 0);
  CHECK(summary["ONLY"].cpu_share == doctest::Approx(1.0));
}

TEST_CASE("site summary splits cpu share between equal sites") {
  TempDir td;
  Stack st(td.str());
  std::string wf = st.prod.define_workflow(one_step_workflow());
  st.prod.create_run(wf, 100 * 25, 25, {}, std::nullopt);
  // 100 equal-length jobs, alternately pulled by two equal sites.
  for (int i = 0; i < 100; ++i) {
    std::string site = (i % 2 == 0) ? "L" : "R";
    auto jd = st.prod.request_job(capability(site));
    REQUIRE(jd.has_value());
    drive_to_done(st, jd->job_id, site, 1000.0 * i, 1000.0 * i + 300);
  }
  auto summary = st.mon.site_summary();
  CHECK(summary["L"].done == 50);
  CHECK(summary["R"].done == 50);
  CHECK(summary["L"].cpu_share == doctest::Approx(0.5).epsilon(0.05));
  CHECK(summary["R"].cpu_share == doctest::Approx(0.5).epsilon(0.05));
  double total = summary["L"].cpu_share + summary["R"].cpu_share;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

// ---------------------------------------------------------------------------
// Bookkeeping service
// ---------------------------------------------------------------------------

TEST_CASE("registration lands in the pending cache") {
  TempDir td;
  Stack st(td.str());
  st.book.register_dataset(dataset_to_xml(dataset("/lhcb/a.sim")));
  CHECK(st.book.pending_count() == 1);
  CHECK(st.book.catalog_count() == 0);
  DatasetQuery q;
  q.status = DatasetStatus::Pending;
  auto hits = st.book.query(q);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].dataset.lfn == "/lhcb/a.sim");
  CHECK(hits[0].dataset.status == DatasetStatus::Pending);
}

TEST_CASE("duplicate registration is idempotent") {
  TempDir td;
  Stack st(td.str());
  DatasetDescription d = dataset("/lhcb/a.sim");
  st.book.register_dataset(d);
  st.book.register_dataset(d);
  CHECK(st.book.pending_count() == 1);
}

TEST_CASE("same lfn different content conflicts") {
  TempDir td;
  Stack st(td.str());
  st.book.register_dataset(dataset("/lhcb/a.sim", "SIM", 0x1111));
  CHECK_THROWS_WITH_AS(
      st.book.register_dataset(dataset("/lhcb/a.sim", "SIM", 0x2222)),
      doctest::Contains("LfnConflict"), Error);
  // Conflict holds against catalog entries too, after approval.
  st.book.approve({"/lhcb/a.sim"});
  CHECK_THROWS_WITH_AS(
      st.book.register_dataset(dataset("/lhcb/a.sim", "SIM", 0x2222)),
      doctest::Contains("LfnConflict"), Error);
}

TEST_CASE("approve moves pending entries to the catalog") {
  TempDir td;
  Stack st(td.str());
  for (const char* lfn : {"/d/1", "/d/2", "/d/3"})
    st.book.register_dataset(dataset(lfn));
  auto results = st.book.approve({"/d/1", "/d/2", "/d/3"});
  REQUIRE(results.size() == 3);
  for (const auto& [lfn, r] : results) CHECK(r == "ok");
  CHECK(st.book.pending_count() == 0);
  CHECK(st.book.catalog_count() == 3);

  auto again = st.book.approve({"/d/1"});
  REQUIRE(again.size() == 1);
  CHECK(again[0].second == "NotPending");
  auto missing = st.book.approve({"/d/none"});
  CHECK(missing[0].second == "UnknownLfn");
}

TEST_CASE("rejected datasets stay queryable with the reason") {
  TempDir td;
  Stack st(td.str());
  st.book.register_dataset(dataset("/d/bad"));
  auto results = st.book.reject({"/d/bad"}, "truncated output");
  CHECK(results[0].second == "ok");
  CHECK(st.book.pending_count() == 0);
  DatasetQuery q;
  q.status = DatasetStatus::Rejected;
  auto hits = st.book.query(q);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].dataset.lfn == "/d/bad");
  CHECK(hits[0].reject_reason == "truncated output");
}

TEST_CASE("auto-approve sends registrations straight to the catalog") {
  TempDir td;
  Stack st(td.str(), ProductionConfig{}, BookkeepingConfig{.auto_approve = true});
  st.book.register_dataset(dataset("/d/auto"));
  CHECK(st.book.pending_count() == 0);
  CHECK(st.book.catalog_count() == 1);
  DatasetQuery q;
  auto hits = st.book.query(q);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].dataset.status == DatasetStatus::Approved);
}

TEST_CASE("replica rules: checksum, rejection, idempotency, two sites") {
  TempDir td;
  Stack st(td.str());
  DatasetDescription d = dataset("/d/x", "DST", 0xfeedface);
  st.book.register_dataset(d);
  st.book.approve({"/d/x"});

  Replica r;
  r.lfn = "/d/x";
  r.storage_element = "se-central";
  r.url = "file:///srv/se/d/x";
  r.registered_at = 100;
  r.checksum = 0xfeedface;
  st.book.add_replica(r);

  Replica wrong = r;
  wrong.storage_element = "se-other";
  wrong.checksum = 0x0badf00d;
  CHECK_THROWS_WITH_AS(st.book.add_replica(wrong),
                       doctest::Contains("ChecksumMismatch"), Error);
  Replica unknown = r;
  unknown.lfn = "/d/none";
  CHECK_THROWS_WITH_AS(st.book.add_replica(unknown),
                       doctest::Contains("UnknownLfn"), Error);

  // Second storage element is a new replica; repeating either is not.
  Replica second = r;
  second.storage_element = "se-site";
  second.url = "file:///srv/site/d/x";
  st.book.add_replica(second);
  st.book.add_replica(r);
  DatasetQuery q;
  auto hits = st.book.query(q);
  REQUIRE(hits.size() == 1);
  REQUIRE(hits[0].replicas.size() == 2);
  std::set<std::string> ses;
  for (const auto& rep : hits[0].replicas) ses.insert(rep.storage_element);
  CHECK(ses == std::set<std::string>{"se-central", "se-site"});

  st.book.register_dataset(dataset("/d/rej"));
  st.book.reject({"/d/rej"}, "bad");
  Replica for_rejected = r;
  for_rejected.lfn = "/d/rej";
  for_rejected.checksum = dataset("/d/rej").checksum;
  CHECK_THROWS_WITH_AS(st.book.add_replica(for_rejected),
                       doctest::Contains("RejectedDataset"), Error);
}

TEST_CASE("replicas are allowed on pending datasets") {
  // Transfer can finish before the manager approves; the replica must not
  // be lost, only rejected datasets refuse replicas.
  TempDir td;
  Stack st(td.str());
  DatasetDescription d = dataset("/d/p");
  st.book.register_dataset(d);
  Replica r;
  r.lfn = "/d/p";
  r.storage_element = "se-central";
  r.url = "file:///srv/se/d/p";
  r.checksum = d.checksum;
  st.book.add_replica(r);
  DatasetQuery q;
  q.status = DatasetStatus::Pending;
  auto hits = st.book.query(q);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].replicas.size() == 1);
}

TEST_CASE("query is a conjunctive filter ordered by lfn") {
  TempDir td;
  Stack st(td.str());
  CHECK(st.book.query({}).empty());

  DatasetDescription a = dataset("/d/c-late", "SIM");
  a.run_id = "R000001";
  a.events = 500;
  DatasetDescription b = dataset("/d/a-early", "DST");
  b.run_id = "R000001";
  b.events = 100;
  DatasetDescription c = dataset("/d/b-mid", "DST");
  c.run_id = "R000002";
  c.events = 500;
  for (const auto& d : {a, b, c}) st.book.register_dataset(d);
  st.book.approve({"/d/c-late", "/d/a-early"});

  auto all = st.book.query({});
  REQUIRE(all.size() == 3);
  CHECK(all[0].dataset.lfn == "/d/a-early");
  CHECK(all[1].dataset.lfn == "/d/b-mid");
  CHECK(all[2].dataset.lfn == "/d/c-late");

  DatasetQuery q;
  q.run_id = "R000001";
  CHECK(st.book.query(q).size() == 2);
  q.data_type = "DST";
  REQUIRE(st.book.query(q).size() == 1);
  CHECK(st.book.query(q)[0].dataset.lfn == "/d/a-early");
  q.min_events = 200;
  CHECK(st.book.query(q).empty());

  DatasetQuery pend;
  pend.status = DatasetStatus::Pending;
  REQUIRE(st.book.query(pend).size() == 1);
  CHECK(st.book.query(pend)[0].dataset.lfn == "/d/b-mid");
}

TEST_CASE("approval conservation over a random action mix") {
  TempDir td;
  Stack st(td.str());
  std::mt19937_64 rng(55);
  int registered = 0;
  std::vector<std::string> lfns;
  for (int i = 0; i < 200; ++i) {
    int action = static_cast<int>(rng() % 3);
    if (action == 0 || lfns.size() < 3) {
      std::string lfn = "/d/f" + std::to_string(i);
      st.book.register_dataset(dataset(lfn));
      lfns.push_back(lfn);
      ++registered;
      if (rng() % 4 == 0) st.book.register_dataset(dataset(lfn));  // dup
    } else {
      const std::string& lfn = lfns[rng() % lfns.size()];
      if (action == 1)
        st.book.approve({lfn});
      else
        st.book.reject({lfn}, "r");
    }
  }
  DatasetQuery q;
  q.status = DatasetStatus::Pending;
  int64_t pending = static_cast<int64_t>(st.book.query(q).size());
  q.status = DatasetStatus::Approved;
  int64_t approved = static_cast<int64_t>(st.book.query(q).size());
  q.status = DatasetStatus::Rejected;
  int64_t rejected = static_cast<int64_t>(st.book.query(q).size());
  CHECK(pending + approved + rejected == registered);
  CHECK(st.book.pending_count() == pending);
  CHECK(st.book.catalog_count() == approved + rejected);
}

TEST_CASE("catalog carries the full production at 250000 datasets") {
  TempDir td;
  Stack st(td.str());
  constexpr int kTotal = 250000;
  std::vector<std::string> lfns;
  lfns.reserve(kTotal);
  for (int i = 0; i < kTotal; ++i) {
    DatasetDescription d;
    d.lfn = "/lhcb/production/run" + std::to_string(i / 500) + "/f" +
            std::to_string(i) + ".dst";
    d.data_type = "DST";
    d.job_id = "R000001-J" + std::to_string(i);
    d.run_id = "R000001";
    d.events = 500;
    d.size_bytes = 1 << 20;
    d.checksum = static_cast<uint32_t>(i * 2654435761u);
    st.book.register_dataset(d);
    lfns.push_back(std::move(d.lfn));
  }
  CHECK(st.book.pending_count() == kTotal);
  auto results = st.book.approve(lfns);
  int64_t ok = 0;
  for (const auto& [lfn, r] : results)
    if (r == "ok") ++ok;
  CHECK(ok == kTotal);
  CHECK(st.book.catalog_count() == kTotal);
  CHECK(st.book.pending_count() == 0);
}
