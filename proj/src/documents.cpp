#include "pullgrid/documents.hpp"

#include <cerrno>
#include <cstdlib>

#include "pullgrid/util.hpp"
#include "pullgrid/xml.hpp"

namespace pullgrid {

namespace {

int64_t parse_i64(const xml::Node& n) {
  errno = 0;
  char* end = nullptr;
  std::string text = trim(n.text);
  long long v = std::strtoll(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE)
    throw Error(ErrorCode::MalformedDocument,
                "bad integer in <" + n.tag + ">: '" + n.text + "'");
  return v;
}

uint32_t parse_checksum(const xml::Node& n) {
  uint32_t v = 0;
  if (!from_hex32(trim(n.text), v))
    throw Error(ErrorCode::MalformedDocument,
                "bad checksum '" + n.text + "'");
  return v;
}

void write_step(xml::Writer& w, const StepDefinition& s) {
  w.open("step");
  w.element("application", s.application);
  w.element("app_version", s.app_version);
  w.open("options");
  for (const auto& [key, value] : s.options) {
    w.open("option");
    w.element("key", key);
    w.element("value", value);
    w.close("option");
  }
  w.close("options");
  w.open("input_types");
  for (const auto& t : s.input_types) w.element("type", t);
  w.close("input_types");
  w.open("output_types");
  for (const auto& t : s.output_types) w.element("type", t);
  w.close("output_types");
  w.close("step");
}

StepDefinition read_step(const xml::Node& n) {
  StepDefinition s;
  s.application = n.require("application").text;
  s.app_version = n.require("app_version").text;
  for (const xml::Node* opt : n.require("options").all("option")) {
    s.options.emplace_back(opt->require("key").text, opt->require("value").text);
  }
  for (const xml::Node* t : n.require("input_types").all("type"))
    s.input_types.insert(t->text);
  for (const xml::Node* t : n.require("output_types").all("type"))
    s.output_types.insert(t->text);
  return s;
}

}  // namespace

std::string job_to_xml(const JobDescriptor& job) {
  xml::Writer w;
  w.open("job");
  w.element("job_id", job.job_id);
  w.element("run_id", job.run_id);
  w.element("sequence_index", std::to_string(job.sequence_index));
  w.element("events", std::to_string(job.events));
  w.element("first_event_offset", std::to_string(job.first_event_offset));
  w.open("steps");
  for (const auto& s : job.resolved_steps) write_step(w, s);
  w.close("steps");
  w.open("requirements");
  if (job.requirements.destination_site)
    w.element("destination_site", *job.requirements.destination_site);
  w.element("min_cpu_power", format_double(job.requirements.min_cpu_power));
  w.element("min_disk_mb", std::to_string(job.requirements.min_disk_mb));
  w.open("software");
  for (const auto& [app, ver] : job.requirements.software) {
    w.open("package");
    w.element("application", app);
    w.element("app_version", ver);
    w.close("package");
  }
  w.close("software");
  w.close("requirements");
  w.close("job");
  return w.take();
}

JobDescriptor job_from_xml(std::string_view bytes) {
  xml::Node root = xml::parse(bytes);
  if (root.tag != "job")
    throw Error(ErrorCode::MalformedDocument, "expected <job>");
  JobDescriptor j;
  j.job_id = root.require("job_id").text;
  j.run_id = root.require("run_id").text;
  j.sequence_index = static_cast<int>(parse_i64(root.require("sequence_index")));
  j.events = parse_i64(root.require("events"));
  j.first_event_offset = parse_i64(root.require("first_event_offset"));
  for (const xml::Node* s : root.require("steps").all("step"))
    j.resolved_steps.push_back(read_step(*s));

  const xml::Node& req = root.require("requirements");
  if (const xml::Node* dest = req.child("destination_site"))
    j.requirements.destination_site = dest->text;
  {
    const xml::Node& cpu = req.require("min_cpu_power");
    errno = 0;
    char* end = nullptr;
    std::string text = trim(cpu.text);
    j.requirements.min_cpu_power = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size())
      throw Error(ErrorCode::MalformedDocument, "bad min_cpu_power");
  }
  j.requirements.min_disk_mb = parse_i64(req.require("min_disk_mb"));
  for (const xml::Node* p : req.require("software").all("package")) {
    j.requirements.software.emplace_back(p->require("application").text,
                                         p->require("app_version").text);
  }
  return j;
}

std::string dataset_to_xml(const DatasetDescription& d) {
  xml::Writer w;
  w.open("dataset");
  w.element("lfn", d.lfn);
  w.element("data_type", d.data_type);
  w.element("job_id", d.job_id);
  w.element("run_id", d.run_id);
  w.element("events", std::to_string(d.events));
  w.element("size_bytes", std::to_string(d.size_bytes));
  w.element("checksum", to_hex32(d.checksum));
  w.close("dataset");
  return w.take();
}

DatasetDescription dataset_from_xml(std::string_view bytes) {
  xml::Node root = xml::parse(bytes);
  if (root.tag != "dataset")
    throw Error(ErrorCode::MalformedDocument, "expected <dataset>");
  DatasetDescription d;
  d.lfn = root.require("lfn").text;
  d.data_type = root.require("data_type").text;
  d.job_id = root.require("job_id").text;
  d.run_id = root.require("run_id").text;
  d.events = parse_i64(root.require("events"));
  d.size_bytes = parse_i64(root.require("size_bytes"));
  d.checksum = parse_checksum(root.require("checksum"));
  d.status = DatasetStatus::Pending;  // status never travels on the wire
  return d;
}

std::string workflow_to_xml(const WorkflowDefinition& w) {
  xml::Writer x;
  x.open("workflow");
  x.element("workflow_id", w.workflow_id);
  x.element("name", w.name);
  x.element("version", std::to_string(w.version));
  x.element("created_at", format_double(w.created_at));
  x.open("steps");
  for (const auto& s : w.steps) write_step(x, s);
  x.close("steps");
  x.close("workflow");
  return x.take();
}

WorkflowDefinition workflow_from_xml(std::string_view bytes) {
  xml::Node root = xml::parse(bytes);
  if (root.tag != "workflow")
    throw Error(ErrorCode::MalformedDocument, "expected <workflow>");
  WorkflowDefinition w;
  w.workflow_id = root.require("workflow_id").text;
  w.name = root.require("name").text;
  w.version = static_cast<int>(parse_i64(root.require("version")));
  {
    std::string text = trim(root.require("created_at").text);
    char* end = nullptr;
    w.created_at = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size())
      throw Error(ErrorCode::MalformedDocument, "bad created_at");
  }
  for (const xml::Node* s : root.require("steps").all("step"))
    w.steps.push_back(read_step(*s));
  return w;
}

// ------------------------------------------------------ RPC mappings ----

rpc::Value capability_to_rpc(const ResourceCapability& cap) {
  rpc::Value::Struct m;
  m.emplace("site_id", rpc::Value(cap.site_id));
  m.emplace("cpu_power", rpc::Value(cap.cpu_power));
  m.emplace("free_disk_mb", rpc::Value(static_cast<double>(cap.free_disk_mb)));
  m.emplace("queue_occupancy", rpc::Value(cap.queue_occupancy));
  rpc::Value::Array sw;
  for (const auto& [app, ver] : cap.installed_software) {
    rpc::Value::Struct p;
    p.emplace("application", rpc::Value(app));
    p.emplace("app_version", rpc::Value(ver));
    sw.push_back(rpc::Value(std::move(p)));
  }
  m.emplace("installed_software", rpc::Value(std::move(sw)));
  return rpc::Value(std::move(m));
}

ResourceCapability capability_from_rpc(const rpc::Value& v) {
  ResourceCapability cap;
  cap.site_id = v.at("site_id").as_string();
  cap.cpu_power = v.at("cpu_power").as_double();
  cap.free_disk_mb = static_cast<int64_t>(v.at("free_disk_mb").as_double());
  cap.queue_occupancy = v.at("queue_occupancy").as_double();
  if (cap.queue_occupancy < 0 || cap.queue_occupancy > 1)
    throw Error(ErrorCode::InvalidParameters, "queue_occupancy outside [0,1]");
  for (const auto& p : v.at("installed_software").as_array()) {
    cap.installed_software.emplace(p.at("application").as_string(),
                                   p.at("app_version").as_string());
  }
  return cap;
}

rpc::Value status_to_rpc(const StatusReport& m) {
  rpc::Value::Struct s;
  s.emplace("job_id", rpc::Value(m.job_id));
  s.emplace("state", rpc::Value(std::string(job_state_name(m.reported_state))));
  if (m.step_index) s.emplace("step_index", rpc::Value(*m.step_index));
  s.emplace("note", rpc::Value(m.note));
  s.emplace("site_id", rpc::Value(m.site_id));
  s.emplace("timestamp", rpc::Value(m.timestamp));
  return rpc::Value(std::move(s));
}

StatusReport status_from_rpc(const rpc::Value& v) {
  StatusReport m;
  m.job_id = v.at("job_id").as_string();
  auto state = job_state_from_name(v.at("state").as_string());
  if (!state)
    throw Error(ErrorCode::InvalidParameters,
                "unknown state '" + v.at("state").as_string() + "'");
  m.reported_state = *state;
  if (const rpc::Value* step = v.find("step_index")) m.step_index = step->as_int();
  m.note = v.at("note").as_string();
  if (m.note.size() > 1024)
    throw Error(ErrorCode::InvalidParameters, "note exceeds 1024 chars");
  m.site_id = v.at("site_id").as_string();
  m.timestamp = v.at("timestamp").as_double();
  return m;
}

rpc::Value replica_to_rpc(const Replica& r) {
  rpc::Value::Struct m;
  m.emplace("lfn", rpc::Value(r.lfn));
  m.emplace("storage_element", rpc::Value(r.storage_element));
  m.emplace("url", rpc::Value(r.url));
  m.emplace("registered_at", rpc::Value(r.registered_at));
  m.emplace("checksum", rpc::Value(to_hex32(r.checksum)));
  return rpc::Value(std::move(m));
}

Replica replica_from_rpc(const rpc::Value& v) {
  Replica r;
  r.lfn = v.at("lfn").as_string();
  r.storage_element = v.at("storage_element").as_string();
  r.url = v.at("url").as_string();
  if (const rpc::Value* t = v.find("registered_at"))
    r.registered_at = t->as_double();
  if (!from_hex32(v.at("checksum").as_string(), r.checksum))
    throw Error(ErrorCode::InvalidParameters, "bad checksum");
  return r;
}

rpc::Value dataset_to_rpc(const DatasetDescription& d) {
  rpc::Value::Struct m;
  m.emplace("lfn", rpc::Value(d.lfn));
  m.emplace("data_type", rpc::Value(d.data_type));
  m.emplace("job_id", rpc::Value(d.job_id));
  m.emplace("run_id", rpc::Value(d.run_id));
  m.emplace("events", rpc::Value(static_cast<int32_t>(d.events)));
  m.emplace("size_bytes", rpc::Value(static_cast<double>(d.size_bytes)));
  m.emplace("checksum", rpc::Value(to_hex32(d.checksum)));
  m.emplace("status", rpc::Value(std::string(dataset_status_name(d.status))));
  return rpc::Value(std::move(m));
}

DatasetDescription dataset_from_rpc(const rpc::Value& v) {
  DatasetDescription d;
  d.lfn = v.at("lfn").as_string();
  d.data_type = v.at("data_type").as_string();
  d.job_id = v.at("job_id").as_string();
  d.run_id = v.at("run_id").as_string();
  d.events = v.at("events").as_int();
  d.size_bytes = static_cast<int64_t>(v.at("size_bytes").as_double());
  if (!from_hex32(v.at("checksum").as_string(), d.checksum))
    throw Error(ErrorCode::InvalidParameters, "bad checksum");
  if (const rpc::Value* s = v.find("status")) {
    auto status = dataset_status_from_name(s->as_string());
    if (!status) throw Error(ErrorCode::InvalidParameters, "bad status");
    d.status = *status;
  }
  return d;
}

}  // namespace pullgrid
