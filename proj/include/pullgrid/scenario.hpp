#pragma once

// Line-oriented scenario descriptions for the simulation harness: global
// knobs, sites and portals with failure policies, workflows, runs, and
// timed package publications.
//
//   seed 42
//   poll_interval 30
//   site S1 slots=4 cpu=2 app_fail=0.02 site_fail=0.06
//   portal P1 inner=wn1:2:1.0,wn2:4:2.0 wn_outbound=false
//   package Gauss v21
//   package Brunel v23 deps=Gauss:v21 at=500
//   workflow MC step=Gauss:v21:NONE:SIM step=Brunel:v23:SIM:DST
//   run MC events=10000 per_job=500 runtime=600 opt:min_cpu_power=0.5
//
// '#' starts a comment; blank lines are ignored.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pullgrid/sitesim.hpp"

namespace pullgrid {

struct ScenarioSite {
  SimSiteConfig sim;
  // When false, worker-node status messages cannot reach the monitoring
  // service directly and go through the agent relay.
  bool wn_outbound = true;
};

struct ScenarioStep {
  std::string application;
  std::string app_version;
  std::string input_type;   // empty: no input
  std::string output_type;  // empty: no output
};

struct ScenarioWorkflow {
  std::string name;
  std::vector<ScenarioStep> steps;
};

struct ScenarioRun {
  std::string workflow;
  int64_t total_events = 0;
  int64_t events_per_job = 0;
  std::string destination_site;
  double runtime = -1;  // negative: use the global default_runtime
  std::vector<std::pair<std::string, std::string>> options;
};

struct ScenarioPackage {
  std::string application;
  std::string app_version;
  std::vector<std::pair<std::string, std::string>> deps;
  double publish_at = 0;
};

struct Scenario {
  uint64_t seed = 1;
  bool auto_approve = true;
  int max_reschedules = 3;
  double poll_interval = 30;
  int fill_target = 4;
  double occupancy_threshold = 0.9;
  int64_t bytes_per_event = 1000;
  double default_runtime = 600;
  double duration_limit = 1e6;
  bool resend_registrations = false;
  // When false, execution failures are terminal: the raw success rate of
  // the failure policy shows through undiluted.
  bool reschedule_failures = true;
  std::string storage_element = "se-central";

  std::vector<ScenarioSite> sites;
  std::vector<ScenarioWorkflow> workflows;
  std::vector<ScenarioRun> runs;
  std::vector<ScenarioPackage> packages;
};

/// Throws Error(MalformedDocument, "line N: ...") on any syntax problem.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario_file(const std::string& path);

}  // namespace pullgrid
