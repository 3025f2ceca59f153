#include <random>
#include <set>

#include "doctest.h"
#include "pullgrid/model.hpp"
#include "testutil.hpp"

using namespace pullgrid;
namespace tu = pullgrid::testutil;

namespace {

const JobState kAllStates[] = {
    JobState::Created,    JobState::Waiting,   JobState::Assigned,
    JobState::Installing, JobState::Submitted, JobState::Running,
    JobState::Transferring, JobState::Done,    JobState::Failed,
};

// The legal set spelled out rule by rule: the forward chain, the failure
// edges from every active state, and the reschedule edge.
std::set<std::pair<JobState, JobState>> legal_pairs() {
  std::set<std::pair<JobState, JobState>> legal;
  legal.insert({JobState::Created, JobState::Waiting});
  legal.insert({JobState::Waiting, JobState::Assigned});
  legal.insert({JobState::Assigned, JobState::Installing});
  legal.insert({JobState::Installing, JobState::Submitted});
  legal.insert({JobState::Submitted, JobState::Running});
  legal.insert({JobState::Running, JobState::Transferring});
  legal.insert({JobState::Transferring, JobState::Done});
  for (JobState s : {JobState::Assigned, JobState::Installing,
                     JobState::Submitted, JobState::Running,
                     JobState::Transferring})
    legal.insert({s, JobState::Failed});
  legal.insert({JobState::Failed, JobState::Waiting});
  return legal;
}

ProductionRun run_for(const WorkflowDefinition& w, int64_t total,
                      int64_t per_job) {
  ProductionRun r;
  r.run_id = "R000001";
  r.workflow_id = w.workflow_id;
  r.total_events = total;
  r.events_per_job = per_job;
  return r;
}

}  // namespace

TEST_CASE("state names round-trip") {
  for (JobState s : kAllStates) {
    auto back = job_state_from_name(job_state_name(s));
    REQUIRE(back.has_value());
    CHECK(*back == s);
  }
  CHECK(!job_state_from_name("Bogus").has_value());
  CHECK(!job_state_from_name("").has_value());
}

TEST_CASE("transition defining cases") {
  CHECK(validate_transition(JobState::Waiting, JobState::Assigned));
  CHECK(!validate_transition(JobState::Done, JobState::Waiting));
  CHECK(validate_transition(JobState::Failed, JobState::Waiting));
  CHECK(!validate_transition(JobState::Done, JobState::Failed));
  CHECK(!validate_transition(JobState::Waiting, JobState::Waiting));
}

TEST_CASE("exhaustive transition table matches the hand-enumerated set") {
  auto legal = legal_pairs();
  CHECK(legal.size() == 13);
  int legal_seen = 0;
  for (JobState from : kAllStates)
    for (JobState to : kAllStates) {
      bool expect = legal.count({from, to}) > 0;
      CHECK_MESSAGE(validate_transition(from, to) == expect,
                    job_state_name(from) << " -> " << job_state_name(to));
      if (validate_transition(from, to)) ++legal_seen;
    }
  CHECK(legal_seen == 13);
}

TEST_CASE("split_run exact division") {
  auto w = tu::two_step_workflow();
  w.workflow_id = "W000001";
  auto jobs = split_run(run_for(w, 100, 25), w);
  REQUIRE(jobs.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(jobs[i].events == 25);
    CHECK(jobs[i].first_event_offset == i * 25);
    CHECK(jobs[i].sequence_index == i);
    CHECK(jobs[i].run_id == "R000001");
    CHECK(jobs[i].job_id == job_id_for("R000001", i));
    CHECK(jobs[i].resolved_steps.size() == 2);
  }
}

TEST_CASE("split_run remainder job") {
  auto w = tu::one_step_workflow();
  w.workflow_id = "W000001";
  auto jobs = split_run(run_for(w, 10, 3), w);
  REQUIRE(jobs.size() == 4);
  CHECK(jobs[0].events == 3);
  CHECK(jobs[1].events == 3);
  CHECK(jobs[2].events == 3);
  CHECK(jobs[3].events == 1);
  CHECK(jobs[3].first_event_offset == 9);
}

TEST_CASE("split_run single-job degenerate") {
  auto w = tu::one_step_workflow();
  w.workflow_id = "W000001";
  auto jobs = split_run(run_for(w, 1, 500), w);
  REQUIRE(jobs.size() == 1);
  CHECK(jobs[0].events == 1);
  CHECK(jobs[0].first_event_offset == 0);
}

TEST_CASE("split_run rejects a run for another workflow") {
  auto w = tu::one_step_workflow();
  w.workflow_id = "W000001";
  auto r = run_for(w, 10, 5);
  r.workflow_id = "W000999";
  CHECK_THROWS_WITH_AS(split_run(r, w), doctest::Contains("MismatchedWorkflow"),
                       Error);
}

TEST_CASE("split conservation and partition over random runs") {
  std::mt19937_64 rng(7);
  auto w = tu::two_step_workflow();
  w.workflow_id = "W000001";
  for (int rep = 0; rep < 200; ++rep) {
    int64_t total = 1 + static_cast<int64_t>(rng() % 100000);
    int64_t per = 1 + static_cast<int64_t>(rng() % 700);
    auto jobs = split_run(run_for(w, total, per), w);
    CHECK(jobs.size() ==
          static_cast<size_t>((total + per - 1) / per));
    int64_t sum = 0;
    int64_t expected_offset = 0;
    for (const auto& j : jobs) {
      CHECK(j.first_event_offset == expected_offset);
      CHECK(j.events >= 1);
      CHECK(j.events <= per);
      sum += j.events;
      expected_offset += j.events;
    }
    CHECK(sum == total);
  }
}

TEST_CASE("resolve_steps applies overrides on exact key match only") {
  auto w = tu::two_step_workflow();
  w.workflow_id = "W000001";
  w.steps[0].options = {{"nevents", "100"}, {"generator", "minbias"}};
  w.steps[1].options = {{"reco", "full"}};
  auto r = run_for(w, 10, 5);
  r.extra_options = {{"generator", "bb"}, {"unknown_key", "x"}};

  auto steps = resolve_steps(w, r);
  REQUIRE(steps.size() == 2);
  // Order preserved, only the matching key replaced.
  CHECK(steps[0].options ==
        std::vector<std::pair<std::string, std::string>>{
            {"nevents", "100"}, {"generator", "bb"}});
  CHECK(steps[1].options ==
        std::vector<std::pair<std::string, std::string>>{{"reco", "full"}});
}

TEST_CASE("derive_requirements collects software and option floors") {
  auto w = tu::two_step_workflow();
  w.workflow_id = "W000001";
  auto r = run_for(w, 10, 5);
  r.destination_site = "CERN";
  r.extra_options = {{"min_cpu_power", "1.5"}, {"min_disk_mb", "800"}};
  auto req = derive_requirements(r, resolve_steps(w, r));
  CHECK(req.destination_site == std::optional<std::string>("CERN"));
  CHECK(req.min_cpu_power == 1.5);
  CHECK(req.min_disk_mb == 800);
  CHECK(req.software ==
        std::vector<std::pair<std::string, std::string>>{{"Gauss", "v1"},
                                                         {"Brunel", "v2"}});
}

TEST_CASE("match_job examples") {
  JobRequirements none;
  CHECK(match_job(none, tu::capability("anything", 0.01, 0)));

  JobRequirements dest;
  dest.destination_site = "siteA";
  CHECK(!match_job(dest, tu::capability("siteB")));
  CHECK(match_job(dest, tu::capability("siteA")));

  JobRequirements floors;
  floors.min_cpu_power = 1.0;
  floors.min_disk_mb = 500;
  CHECK(!match_job(floors, tu::capability("s", 0.9, 10000)));
  CHECK(!match_job(floors, tu::capability("s", 2.0, 499)));
  CHECK(match_job(floors, tu::capability("s", 1.0, 500)));
}

TEST_CASE("software is not a match criterion") {
  JobRequirements req;
  req.software = {{"Gauss", "v1"}};
  auto cap = tu::capability("s");
  cap.installed_software.clear();
  CHECK(match_job(req, cap));
}

TEST_CASE("match monotonicity in cpu and disk") {
  std::mt19937_64 rng(11);
  auto unif = [&](double lo, double hi) {
    return lo + (hi - lo) * ((rng() >> 11) * 0x1p-53);
  };
  for (int rep = 0; rep < 500; ++rep) {
    JobRequirements req;
    req.min_cpu_power = unif(0, 4);
    req.min_disk_mb = static_cast<int64_t>(unif(0, 10000));
    if (rng() % 2) req.destination_site = "A";
    auto cap = tu::capability(rng() % 2 ? "A" : "B", unif(0, 4),
                              static_cast<int64_t>(unif(0, 10000)));
    bool before = match_job(req, cap);
    cap.cpu_power += unif(0, 2);
    cap.free_disk_mb += static_cast<int64_t>(unif(0, 5000));
    // More capable never un-matches.
    if (before) CHECK(match_job(req, cap));
  }
}

TEST_CASE("pipeline check finds the first violating step") {
  auto ok = tu::two_step_workflow();
  CHECK(pipeline_violation(ok.steps) == -1);

  auto bad = tu::two_step_workflow();
  bad.steps[1].input_types = {"RAW"};
  CHECK(pipeline_violation(bad.steps) == 1);

  std::vector<StepDefinition> three = {
      tu::step("Gauss", "v1", {}, {"SIM"}),
      tu::step("Boole", "v1", {"SIM"}, {"DIGI"}),
      tu::step("Brunel", "v1", {"SIM"}, {"DST"}),  // SIM not made by Boole
  };
  CHECK(pipeline_violation(three) == 2);

  std::vector<StepDefinition> single = {tu::step("Gauss", "v1", {}, {"SIM"})};
  CHECK(pipeline_violation(single) == -1);
}

TEST_CASE("job ids sort by sequence") {
  CHECK(job_id_for("R000002", 0) == "R000002-J000000");
  CHECK(job_id_for("R000002", 41) < job_id_for("R000002", 123));
}
