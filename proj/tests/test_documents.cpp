#include <random>
#include <string>

#include "doctest.h"
#include "pullgrid/documents.hpp"

using namespace pullgrid;

namespace {

JobDescriptor minimal_job() {
  JobDescriptor j;
  j.job_id = "J000001";
  j.run_id = "R0001";
  j.sequence_index = 1;
  j.events = 500;
  j.first_event_offset = 500;
  StepDefinition s;
  s.application = "Gauss";
  s.app_version = "v15";
  s.options = {{"nevents", "500"}};
  s.output_types = {"SIM"};
  j.resolved_steps = {s};
  j.requirements.min_cpu_power = 1.0;
  j.requirements.min_disk_mb = 1024;
  j.requirements.software = {{"Gauss", "v15"}};
  return j;
}

std::string rand_token(std::mt19937_64& rng, int max_len) {
  static const char alphabet[] =
      "abcdefghijklmnopqrstuvwxyzABCDE0123456789._-/ <>&'\"";
  std::uniform_int_distribution<int> len(0, max_len);
  std::uniform_int_distribution<int> ch(0, sizeof(alphabet) - 2);
  std::string s;
  int n = len(rng);
  for (int i = 0; i < n; ++i) s += alphabet[ch(rng)];
  return s;
}

JobDescriptor random_job(std::mt19937_64& rng) {
  JobDescriptor j;
  j.job_id = "J" + std::to_string(rng() % 100000);
  j.run_id = "R" + std::to_string(rng() % 1000);
  j.sequence_index = static_cast<int>(rng() % 500);
  j.events = static_cast<int64_t>(rng() % 100000);
  j.first_event_offset = static_cast<int64_t>(rng() % 1000000);
  int nsteps = 1 + static_cast<int>(rng() % 3);
  for (int s = 0; s < nsteps; ++s) {
    StepDefinition st;
    st.application = "app" + std::to_string(rng() % 10);
    st.app_version = "v" + std::to_string(rng() % 30);
    int nopt = static_cast<int>(rng() % 5);
    for (int o = 0; o < nopt; ++o)
      st.options.emplace_back("opt" + std::to_string(rng() % 20),
                              rand_token(rng, 10));
    int nin = static_cast<int>(rng() % 3);
    for (int t = 0; t < nin; ++t)
      st.input_types.insert("T" + std::to_string(rng() % 6));
    st.output_types.insert("T" + std::to_string(rng() % 6));
    j.resolved_steps.push_back(std::move(st));
  }
  if (rng() % 2) j.requirements.destination_site = "site" + std::to_string(rng() % 9);
  j.requirements.min_cpu_power = (rng() % 100) / 10.0;
  j.requirements.min_disk_mb = static_cast<int64_t>(rng() % 100000);
  for (const auto& st : j.resolved_steps) {
    std::pair<std::string, std::string> sw{st.application, st.app_version};
    auto& v = j.requirements.software;
    if (std::find(v.begin(), v.end(), sw) == v.end()) v.push_back(sw);
  }
  return j;
}

DatasetDescription random_dataset(std::mt19937_64& rng) {
  DatasetDescription d;
  d.lfn = "/lhcb/run" + std::to_string(rng() % 1000) + "/file" +
          std::to_string(rng() % 100000) + ".dst";
  d.data_type = rng() % 2 ? "SIM" : "DST";
  d.job_id = "J" + std::to_string(rng() % 100000);
  d.run_id = "R" + std::to_string(rng() % 1000);
  d.events = static_cast<int64_t>(rng() % 100000);
  d.size_bytes = static_cast<int64_t>(rng() % (1 << 30));
  d.checksum = static_cast<uint32_t>(rng());
  return d;
}

}  // namespace

TEST_CASE("minimal one-step job round-trips") {
  JobDescriptor j = minimal_job();
  JobDescriptor back = job_from_xml(job_to_xml(j));
  CHECK(back == j);
}

TEST_CASE("three-step job with ten options preserves option order") {
  JobDescriptor j = minimal_job();
  j.resolved_steps.clear();
  j.requirements.software.clear();
  const char* apps[] = {"Gauss", "Brunel", "DaVinci"};
  for (int s = 0; s < 3; ++s) {
    StepDefinition st;
    st.application = apps[s];
    st.app_version = "v" + std::to_string(10 + s);
    // Deliberately non-alphabetical keys: order must survive as written,
    // not be normalized away.
    st.options = {{"zeta", "1"},   {"alpha", "2"}, {"nevents", "500"},
                  {"mid", "x"},    {"beta", "3"},  {"omega", "4"},
                  {"gamma", "5"},  {"delta", "6"}, {"upsilon", "7"},
                  {"kappa", "8"}};
    if (s > 0) st.input_types = {"T" + std::to_string(s)};
    st.output_types = {"T" + std::to_string(s + 1)};
    j.resolved_steps.push_back(st);
    j.requirements.software.emplace_back(st.application, st.app_version);
  }
  JobDescriptor back = job_from_xml(job_to_xml(j));
  REQUIRE(back.resolved_steps.size() == 3);
  for (int s = 0; s < 3; ++s) {
    const auto& opts = back.resolved_steps[s].options;
    REQUIRE(opts.size() == 10);
    CHECK(opts[0].first == "zeta");
    CHECK(opts[1].first == "alpha");
    CHECK(opts[9].first == "kappa");
  }
  CHECK(back == j);
}

TEST_CASE("job document missing requirements element") {
  std::string doc = job_to_xml(minimal_job());
  auto b = doc.find("<requirements>");
  auto e = doc.find("</requirements>");
  REQUIRE(b != std::string::npos);
  REQUIRE(e != std::string::npos);
  doc.erase(b, e + 15 - b);
  CHECK_THROWS_WITH_AS(job_from_xml(doc), doctest::Contains("MissingField"),
                       Error);
  CHECK_THROWS_WITH_AS(job_from_xml(doc), doctest::Contains("requirements"),
                       Error);
}

TEST_CASE("job document malformed") {
  CHECK_THROWS_WITH_AS(job_from_xml("not xml at all"),
                       doctest::Contains("MalformedDocument"), Error);
}

TEST_CASE("randomized job round-trip: 500 jobs") {
  std::mt19937_64 rng(31415);
  for (int i = 0; i < 500; ++i) {
    JobDescriptor j = random_job(rng);
    CHECK(job_from_xml(job_to_xml(j)) == j);
  }
}

TEST_CASE("dataset with zero size round-trips") {
  DatasetDescription d;
  d.lfn = "/lhcb/empty.dst";
  d.data_type = "DST";
  d.job_id = "J1";
  d.run_id = "R1";
  d.events = 0;
  d.size_bytes = 0;
  d.checksum = 0;
  DatasetDescription back = dataset_from_xml(dataset_to_xml(d));
  CHECK(back == d);
  CHECK(back.size_bytes == 0);
}

TEST_CASE("dataset wire form never carries status") {
  DatasetDescription d;
  d.lfn = "/lhcb/a.sim";
  d.data_type = "SIM";
  d.job_id = "J2";
  d.run_id = "R2";
  d.events = 100;
  d.size_bytes = 2048;
  d.checksum = 0xabadcafe;
  d.status = DatasetStatus::Approved;
  std::string doc = dataset_to_xml(d);
  CHECK(doc.find("status") == std::string::npos);
  CHECK(doc.find("Approved") == std::string::npos);
  DatasetDescription back = dataset_from_xml(doc);
  CHECK(back.status == DatasetStatus::Pending);
  CHECK(back.same_content(d));
}

TEST_CASE("randomized dataset round-trip: 500 descriptions") {
  std::mt19937_64 rng(27182);
  for (int i = 0; i < 500; ++i) {
    DatasetDescription d = random_dataset(rng);
    DatasetDescription back = dataset_from_xml(dataset_to_xml(d));
    CHECK(back == d);  // status defaults Pending on both sides here
  }
}

TEST_CASE("workflow round-trips") {
  WorkflowDefinition w;
  w.workflow_id = "WF01";
  w.name = "DC04";
  w.version = 3;
  w.created_at = 1234.5;
  StepDefinition sim;
  sim.application = "Gauss";
  sim.app_version = "v15";
  sim.options = {{"nevents", "500"}, {"generator", "Pythia"}};
  sim.output_types = {"SIM"};
  StepDefinition rec;
  rec.application = "Brunel";
  rec.app_version = "v23";
  rec.input_types = {"SIM"};
  rec.output_types = {"DST"};
  w.steps = {sim, rec};
  CHECK(workflow_from_xml(workflow_to_xml(w)) == w);
}

TEST_CASE("capability rpc mapping") {
  ResourceCapability cap;
  cap.site_id = "CERN";
  cap.cpu_power = 2.5;
  cap.free_disk_mb = 80000;
  cap.queue_occupancy = 0.25;
  cap.installed_software = {{"Gauss", "v15"}, {"Brunel", "v23"}};
  ResourceCapability back = capability_from_rpc(capability_to_rpc(cap));
  CHECK(back.site_id == cap.site_id);
  CHECK(back.cpu_power == cap.cpu_power);
  CHECK(back.free_disk_mb == cap.free_disk_mb);
  CHECK(back.queue_occupancy == cap.queue_occupancy);
  CHECK(back.installed_software == cap.installed_software);
}

TEST_CASE("status report rpc mapping") {
  StatusReport m;
  m.job_id = "J000007";
  m.reported_state = JobState::Running;
  m.step_index = 1;
  m.note = "step started";
  m.site_id = "RAL";
  m.timestamp = 98.5;
  StatusReport back = status_from_rpc(status_to_rpc(m));
  CHECK(back.job_id == m.job_id);
  CHECK(back.reported_state == m.reported_state);
  CHECK(back.step_index == m.step_index);
  CHECK(back.note == m.note);
  CHECK(back.site_id == m.site_id);
  CHECK(back.timestamp == m.timestamp);

  m.step_index.reset();  // step is optional on the wire too
  back = status_from_rpc(status_to_rpc(m));
  CHECK_FALSE(back.step_index.has_value());
}

TEST_CASE("replica rpc mapping") {
  Replica r;
  r.lfn = "/lhcb/run1/f.dst";
  r.storage_element = "se-central";
  r.url = "file:///srv/se/lhcb/run1/f.dst";
  r.registered_at = 777.25;
  r.checksum = 0xdeadbeef;
  CHECK(replica_from_rpc(replica_to_rpc(r)) == r);
}

TEST_CASE("dataset rpc mapping round-trips status") {
  // Unlike the XML registration document, the RPC struct is the query-result
  // carrier, so it keeps the service-side status.
  std::mt19937_64 rng(161803);
  for (int i = 0; i < 100; ++i) {
    DatasetDescription d = random_dataset(rng);
    d.status = static_cast<DatasetStatus>(rng() % 3);
    DatasetDescription back = dataset_from_rpc(dataset_to_rpc(d));
    CHECK(back == d);
  }
}
