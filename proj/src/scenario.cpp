#include "pullgrid/scenario.hpp"

#include <fstream>
#include <sstream>

#include "pullgrid/errors.hpp"
#include "pullgrid/util.hpp"

namespace pullgrid {

namespace {

[[noreturn]] void fail(int line_no, const std::string& msg) {
  throw Error(ErrorCode::MalformedDocument,
              "line " + std::to_string(line_no) + ": " + msg);
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') break;
    out.push_back(tok);
  }
  return out;
}

double num(const std::string& v, int line_no) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) fail(line_no, "trailing junk in number '" + v + "'");
    return d;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(line_no, "expected a number, got '" + v + "'");
  }
}

int64_t integer(const std::string& v, int line_no) {
  try {
    size_t pos = 0;
    int64_t n = std::stoll(v, &pos);
    if (pos != v.size()) fail(line_no, "trailing junk in integer '" + v + "'");
    return n;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(line_no, "expected an integer, got '" + v + "'");
  }
}

bool boolean(const std::string& v, int line_no) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(line_no, "expected true/false, got '" + v + "'");
}

// Splits "key=value"; returns false when there is no '='.
bool key_value(const std::string& tok, std::string& key, std::string& value) {
  auto eq = tok.find('=');
  if (eq == std::string::npos) return false;
  key = tok.substr(0, eq);
  value = tok.substr(eq + 1);
  return true;
}

void apply_site_attr(ScenarioSite& site, const std::string& key,
                     const std::string& value, int line_no) {
  auto& cfg = site.sim;
  if (key == "slots")
    cfg.slot_count = static_cast<int>(integer(value, line_no));
  else if (key == "cpu")
    cfg.cpu_power = num(value, line_no);
  else if (key == "disk_mb")
    cfg.disk_quota_mb = integer(value, line_no);
  else if (key == "bw")
    cfg.wan_bandwidth_bps = num(value, line_no);
  else if (key == "submit_fail")
    cfg.policy.submission_failure_prob = num(value, line_no);
  else if (key == "app_fail")
    cfg.policy.app_failure_prob = num(value, line_no);
  else if (key == "site_fail")
    cfg.policy.site_failure_prob = num(value, line_no);
  else if (key == "transfer_fail")
    cfg.policy.transfer_failure_prob = num(value, line_no);
  else if (key == "seed")
    cfg.policy.rng_seed = static_cast<uint64_t>(integer(value, line_no));
  else if (key == "wn_outbound")
    site.wn_outbound = boolean(value, line_no);
  else if (key == "inner") {
    for (const auto& part : split(value, ',')) {
      auto fields = split(part, ':');
      if (fields.size() != 3)
        fail(line_no, "inner node must be id:slots:cpu, got '" + part + "'");
      InnerNode wn;
      wn.node_id = fields[0];
      wn.slot_count = static_cast<int>(integer(fields[1], line_no));
      wn.cpu_power = num(fields[2], line_no);
      cfg.inner.push_back(wn);
    }
  } else {
    fail(line_no, "unknown site attribute '" + key + "'");
  }
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  Scenario sc;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    const std::string& head = toks[0];

    if (head == "seed" || head == "max_reschedules" || head == "fill_target" ||
        head == "bytes_per_event") {
      if (toks.size() != 2) fail(line_no, head + " takes one value");
      int64_t v = integer(toks[1], line_no);
      if (head == "seed") sc.seed = static_cast<uint64_t>(v);
      else if (head == "max_reschedules") sc.max_reschedules = static_cast<int>(v);
      else if (head == "fill_target") sc.fill_target = static_cast<int>(v);
      else sc.bytes_per_event = v;
      continue;
    }
    if (head == "poll_interval" || head == "occupancy_threshold" ||
        head == "default_runtime" || head == "duration_limit") {
      if (toks.size() != 2) fail(line_no, head + " takes one value");
      double v = num(toks[1], line_no);
      if (head == "poll_interval") sc.poll_interval = v;
      else if (head == "occupancy_threshold") sc.occupancy_threshold = v;
      else if (head == "default_runtime") sc.default_runtime = v;
      else sc.duration_limit = v;
      continue;
    }
    if (head == "auto_approve" || head == "resend_registrations" ||
        head == "reschedule_failures") {
      if (toks.size() != 2) fail(line_no, head + " takes one value");
      bool v = boolean(toks[1], line_no);
      if (head == "auto_approve") sc.auto_approve = v;
      else if (head == "resend_registrations") sc.resend_registrations = v;
      else sc.reschedule_failures = v;
      continue;
    }
    if (head == "storage_element") {
      if (toks.size() != 2) fail(line_no, "storage_element takes one value");
      sc.storage_element = toks[1];
      continue;
    }

    if (head == "site" || head == "portal") {
      if (toks.size() < 2) fail(line_no, head + " needs a name");
      ScenarioSite site;
      site.sim.site_id = toks[1];
      for (size_t i = 2; i < toks.size(); ++i) {
        std::string k, v;
        if (!key_value(toks[i], k, v))
          fail(line_no, "expected key=value, got '" + toks[i] + "'");
        apply_site_attr(site, k, v, line_no);
      }
      if (head == "portal" && site.sim.inner.empty())
        fail(line_no, "portal " + site.sim.site_id + " has no inner nodes");
      if (head == "site" && !site.sim.inner.empty())
        fail(line_no, "plain site " + site.sim.site_id + " cannot have inner=");
      sc.sites.push_back(std::move(site));
      continue;
    }

    if (head == "workflow") {
      if (toks.size() < 3) fail(line_no, "workflow needs a name and steps");
      ScenarioWorkflow wf;
      wf.name = toks[1];
      for (size_t i = 2; i < toks.size(); ++i) {
        std::string k, v;
        if (!key_value(toks[i], k, v) || k != "step")
          fail(line_no, "expected step=app:ver:in:out, got '" + toks[i] + "'");
        auto fields = split(v, ':');
        if (fields.size() != 4)
          fail(line_no, "step must be app:ver:in:out, got '" + v + "'");
        ScenarioStep st;
        st.application = fields[0];
        st.app_version = fields[1];
        if (fields[2] != "NONE") st.input_type = fields[2];
        if (fields[3] != "NONE") st.output_type = fields[3];
        wf.steps.push_back(std::move(st));
      }
      sc.workflows.push_back(std::move(wf));
      continue;
    }

    if (head == "run") {
      if (toks.size() < 2) fail(line_no, "run needs a workflow name");
      ScenarioRun run;
      run.workflow = toks[1];
      for (size_t i = 2; i < toks.size(); ++i) {
        std::string k, v;
        if (!key_value(toks[i], k, v))
          fail(line_no, "expected key=value, got '" + toks[i] + "'");
        if (k == "events") run.total_events = integer(v, line_no);
        else if (k == "per_job") run.events_per_job = integer(v, line_no);
        else if (k == "dest") run.destination_site = v;
        else if (k == "runtime") run.runtime = num(v, line_no);
        else if (k.rfind("opt:", 0) == 0)
          run.options.emplace_back(k.substr(4), v);
        else
          fail(line_no, "unknown run attribute '" + k + "'");
      }
      if (run.total_events < 1 || run.events_per_job < 1)
        fail(line_no, "run needs events= and per_job= of at least 1");
      sc.runs.push_back(std::move(run));
      continue;
    }

    if (head == "package") {
      if (toks.size() < 3) fail(line_no, "package needs app and version");
      ScenarioPackage pkg;
      pkg.application = toks[1];
      pkg.app_version = toks[2];
      for (size_t i = 3; i < toks.size(); ++i) {
        std::string k, v;
        if (!key_value(toks[i], k, v))
          fail(line_no, "expected key=value, got '" + toks[i] + "'");
        if (k == "at") {
          pkg.publish_at = num(v, line_no);
        } else if (k == "deps") {
          for (const auto& part : split(v, ',')) {
            auto fields = split(part, ':');
            if (fields.size() != 2)
              fail(line_no, "dep must be app:ver, got '" + part + "'");
            pkg.deps.emplace_back(fields[0], fields[1]);
          }
        } else {
          fail(line_no, "unknown package attribute '" + k + "'");
        }
      }
      sc.packages.push_back(std::move(pkg));
      continue;
    }

    fail(line_no, "unknown directive '" + head + "'");
  }

  if (sc.sites.empty()) fail(line_no, "scenario defines no sites");
  if (sc.workflows.empty()) fail(line_no, "scenario defines no workflows");
  if (sc.runs.empty()) fail(line_no, "scenario defines no runs");
  return sc;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoFailure, "cannot read scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace pullgrid
