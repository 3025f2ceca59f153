#include "pullgrid/sitesim.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>

#include "pullgrid/errors.hpp"
#include "pullgrid/util.hpp"

namespace pullgrid {

namespace {

std::string fmt_time(double t) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", t);
  return buf;
}

const char* outcome_word(BatchJobView::Outcome o) {
  switch (o) {
    case BatchJobView::Outcome::Success: return "success";
    case BatchJobView::Outcome::AppFailure: return "app_failure";
    case BatchJobView::Outcome::SiteFailure: return "site_failure";
  }
  return "?";
}

}  // namespace

uint32_t synth_checksum(const std::string& seed, int64_t size_bytes) {
  // Content is identified, never materialized: the checksum is a pure
  // function of (seed, size) so source and destination always agree.
  uint64_t h = fnv1a64(seed);
  unsigned char buf[16];
  for (int i = 0; i < 8; ++i) buf[i] = (h >> (8 * i)) & 0xff;
  uint64_t s = static_cast<uint64_t>(size_bytes);
  for (int i = 0; i < 8; ++i) buf[8 + i] = (s >> (8 * i)) & 0xff;
  return crc32_bytes(
      std::string_view(reinterpret_cast<const char*>(buf), sizeof buf));
}

SiteSim::SiteSim(uint64_t seed) : seed_(seed) {}

void SiteSim::add_site(const SimSiteConfig& cfg) {
  if (cfg.site_id.empty())
    throw Error(ErrorCode::InvalidParameters, "site id must not be empty");
  if (sites_.count(cfg.site_id))
    throw Error(ErrorCode::DuplicateId, "site " + cfg.site_id);
  if (cfg.inner.empty() && cfg.slot_count < 1)
    throw Error(ErrorCode::InvalidParameters,
                "site " + cfg.site_id + " needs at least one slot");

  Site s;
  s.cfg = cfg;
  uint64_t seed = cfg.policy.rng_seed
                      ? cfg.policy.rng_seed
                      : seed_ ^ fnv1a64(cfg.site_id);
  s.rng.seed(seed);

  if (cfg.inner.empty()) {
    ExecNode n;
    n.node_id = cfg.site_id;
    n.site_id = cfg.site_id;
    n.slot_count = cfg.slot_count;
    n.cpu_power = cfg.cpu_power;
    s.nodes.push_back(n.node_id);
    nodes_.emplace(n.node_id, std::move(n));
  } else {
    for (const auto& wn : cfg.inner) {
      if (wn.node_id.empty() || wn.slot_count < 1)
        throw Error(ErrorCode::InvalidParameters,
                    "inner node of " + cfg.site_id + " is malformed");
      ExecNode n;
      n.node_id = cfg.site_id + "/" + wn.node_id;
      n.site_id = cfg.site_id;
      n.slot_count = wn.slot_count;
      n.cpu_power = wn.cpu_power;
      n.inner = true;
      if (nodes_.count(n.node_id))
        throw Error(ErrorCode::DuplicateId, "inner node " + n.node_id);
      s.nodes.push_back(n.node_id);
      nodes_.emplace(n.node_id, std::move(n));
    }
    std::sort(s.nodes.begin(), s.nodes.end());
  }
  sites_.emplace(cfg.site_id, std::move(s));
}

const SimSiteConfig& SiteSim::site_config(const std::string& site_id) const {
  return site_at(site_id).cfg;
}

std::vector<std::string> SiteSim::site_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, s] : sites_) out.push_back(id);
  return out;
}

SiteSim::Site& SiteSim::site_at(const std::string& site_id) {
  auto it = sites_.find(site_id);
  if (it == sites_.end())
    throw Error(ErrorCode::UnknownSite, site_id);
  return it->second;
}

const SiteSim::Site& SiteSim::site_at(const std::string& site_id) const {
  auto it = sites_.find(site_id);
  if (it == sites_.end())
    throw Error(ErrorCode::UnknownSite, site_id);
  return it->second;
}

SiteSim::ExecNode& SiteSim::node_at(const std::string& node_id) {
  auto it = nodes_.find(node_id);
  if (it == nodes_.end())
    throw Error(ErrorCode::UnknownSite, "node " + node_id);
  return it->second;
}

const SiteSim::ExecNode& SiteSim::node_at(const std::string& node_id) const {
  auto it = nodes_.find(node_id);
  if (it == nodes_.end())
    throw Error(ErrorCode::UnknownSite, "node " + node_id);
  return it->second;
}

double SiteSim::draw(Site& s) {
  // Explicit 53-bit mapping; uniform_real_distribution is not portable
  // across standard library implementations.
  return (s.rng() >> 11) * (1.0 / 9007199254740992.0);
}

void SiteSim::log(const std::string& site_id, const std::string& kind,
                  const std::string& detail) {
  std::string line = "t=" + fmt_time(now_) + " site=" + site_id +
                     " kind=" + kind;
  if (!detail.empty()) line += " detail=" + detail;
  log_.push_back(std::move(line));
}

void SiteSim::at(double when, std::function<void()> fn) {
  queue_.push({std::max(when, now_), next_seq_++, std::move(fn)});
}

std::vector<std::string> SiteSim::advance(double until) {
  size_t mark = log_.size();
  while (!queue_.empty() && queue_.top().time <= until) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = std::max(now_, ev.time);
    ev.fn();
  }
  now_ = std::max(now_, until);
  return {log_.begin() + static_cast<std::ptrdiff_t>(mark), log_.end()};
}

bool SiteSim::quiet_until(double until) const {
  return queue_.empty() || queue_.top().time > until;
}

// ------------------------------------------------------------- batch ----

std::string SiteSim::submit_to_node(ExecNode& node, Site& site,
                                    const JobDescriptor& job,
                                    double nominal_runtime,
                                    const char* id_prefix) {
  SimJob sj;
  sj.batch_id = id_prefix + zero_pad(++site.submit_seq, 6);
  sj.job = job;
  sj.nominal_runtime = nominal_runtime;
  sj.view.batch_id = sj.batch_id;
  sj.view.state = BatchJobView::State::Queued;
  std::string batch_id = sj.batch_id;
  node.jobs.emplace(batch_id, std::move(sj));
  node.queue.push_back(batch_id);
  try_start(node.node_id);
  return batch_id;
}

std::string SiteSim::batch_submit(const std::string& site_id,
                                  const JobDescriptor& job,
                                  const std::string& script,
                                  double nominal_runtime) {
  (void)script;  // content is irrelevant here; outputs are synthesized
  Site& site = site_at(site_id);
  if (!site.cfg.inner.empty())
    throw Error(ErrorCode::InvalidParameters,
                site_id + " is a portal; dispatch through portal_submit");
  if (draw(site) < site.cfg.policy.submission_failure_prob) {
    log(site_id, "submit_fail", "job=" + job.job_id);
    throw Error(ErrorCode::BatchSubmissionFailed, "site " + site_id);
  }
  std::string id =
      submit_to_node(node_at(site_id), site, job, nominal_runtime, "B");
  log(site_id, "submit", "job=" + job.job_id + " batch=" + id);
  return id;
}

std::string SiteSim::portal_submit(const std::string& site_id,
                                   const JobDescriptor& job,
                                   double nominal_runtime) {
  Site& site = site_at(site_id);
  if (site.cfg.inner.empty())
    throw Error(ErrorCode::NoInnerResources, "portal " + site_id);
  if (draw(site) < site.cfg.policy.submission_failure_prob) {
    log(site_id, "submit_fail", "job=" + job.job_id);
    throw Error(ErrorCode::BatchSubmissionFailed, "portal " + site_id);
  }

  // Least-loaded inner node; lexicographic node id breaks ties, which the
  // sorted node list provides via strict improvement.
  const std::string* best = nullptr;
  double best_load = 0;
  for (const auto& nid : site.nodes) {
    const ExecNode& n = node_at(nid);
    double load = static_cast<double>(n.queue.size() + n.running) /
                  static_cast<double>(n.slot_count);
    if (!best || load < best_load) {
      best = &nid;
      best_load = load;
    }
  }
  ExecNode& chosen = node_at(*best);
  std::string id = submit_to_node(chosen, site, job, nominal_runtime, "G");
  log(site_id, "portal_dispatch",
      "job=" + job.job_id + " wn=" + chosen.node_id + " batch=" + id);
  return id;
}

void SiteSim::try_start(const std::string& node_id) {
  ExecNode& node = node_at(node_id);
  while (node.running < node.slot_count && !node.queue.empty()) {
    std::string batch_id = node.queue.front();
    node.queue.pop_front();
    // The slot is reserved now; the start fires as an event so callbacks
    // never run inside the submitting call.
    node.running += 1;
    at(now_, [this, node_id, batch_id] { start_job(node_id, batch_id); });
  }
}

void SiteSim::start_job(const std::string& node_id,
                        const std::string& batch_id) {
  ExecNode& node = node_at(node_id);
  auto it = node.jobs.find(batch_id);
  if (it == node.jobs.end()) return;
  SimJob& sj = it->second;
  Site& site = site_at(node.site_id);

  sj.view.state = BatchJobView::State::Running;
  sj.view.started_at = now_;

  // Outcome is drawn once, when the job starts.
  double u = draw(site);
  const FailurePolicy& p = site.cfg.policy;
  if (u < p.app_failure_prob)
    sj.view.outcome = BatchJobView::Outcome::AppFailure;
  else if (u < p.app_failure_prob + p.site_failure_prob)
    sj.view.outcome = BatchJobView::Outcome::SiteFailure;
  else
    sj.view.outcome = BatchJobView::Outcome::Success;

  double cpu = node.cpu_power > 0 ? node.cpu_power : 1.0;
  double runtime = sj.nominal_runtime / cpu;
  log(node.site_id, "job_start",
      "batch=" + batch_id + " job=" + sj.job.job_id + " node=" + node_id);

  if (on_job_start) {
    SimJobEvent ev{node.site_id, node_id, batch_id, sj.job,
                   sj.view,       sj.nominal_runtime, runtime, node.inner};
    on_job_start(ev);
  }
  at(now_ + runtime,
     [this, node_id, batch_id] { complete_job(node_id, batch_id); });
}

void SiteSim::complete_job(const std::string& node_id,
                           const std::string& batch_id) {
  ExecNode& node = node_at(node_id);
  auto it = node.jobs.find(batch_id);
  if (it == node.jobs.end()) return;
  SimJob& sj = it->second;

  sj.view.state = BatchJobView::State::Completed;
  sj.view.finished_at = now_;

  const JobDescriptor& job = sj.job;
  if (sj.view.outcome == BatchJobView::Outcome::Success) {
    for (size_t k = 0; k < job.resolved_steps.size(); ++k)
      for (const auto& type : job.resolved_steps[k].output_types) {
        std::string path =
            "scratch/" + job.job_id + "/step" + std::to_string(k) + "." + type;
        SimBlob blob;
        blob.size_bytes = job.events * bytes_per_event_;
        blob.checksum = synth_checksum(
            job.job_id + ":" + std::to_string(k) + ":" + type,
            blob.size_bytes);
        node.scratch[path] = blob;
      }
  }
  SimBlob logblob;
  logblob.size_bytes = 1024 + static_cast<int64_t>(fnv1a64(job.job_id) % 4096);
  logblob.checksum = synth_checksum(job.job_id + ":log", logblob.size_bytes);
  node.scratch["scratch/" + job.job_id + "/job.log"] = logblob;

  log(node.site_id, "job_complete",
      "batch=" + batch_id + " job=" + job.job_id +
          " outcome=" + outcome_word(sj.view.outcome));

  node.running -= 1;
  if (on_job_complete) {
    double cpu = node.cpu_power > 0 ? node.cpu_power : 1.0;
    SimJobEvent ev{node.site_id,       node_id,
                   batch_id,           sj.job,
                   sj.view,            sj.nominal_runtime,
                   sj.nominal_runtime / cpu, node.inner};
    on_job_complete(ev);
  }
  try_start(node_id);
}

BatchSnapshot SiteSim::batch_status(const std::string& site_id) const {
  const Site& site = site_at(site_id);
  BatchSnapshot snap;
  snap.queued = 0;
  snap.running = 0;
  snap.slot_count = 0;
  double best_cpu = 0;
  int64_t used = 0;
  for (const auto& nid : site.nodes) {
    const ExecNode& n = node_at(nid);
    snap.queued += static_cast<int>(n.queue.size());
    snap.running += n.running;
    snap.slot_count += n.slot_count;
    best_cpu = std::max(best_cpu, n.cpu_power);
    used += node_scratch_bytes(n);
    for (const auto& [id, sj] : n.jobs) snap.jobs.push_back(sj.view);
  }
  snap.cpu_power = site.cfg.inner.empty() ? site.cfg.cpu_power : best_cpu;
  int64_t used_mb = (used + (1 << 20) - 1) / (1 << 20);
  snap.free_disk_mb = std::max<int64_t>(0, site.cfg.disk_quota_mb - used_mb);
  return snap;
}

CollectedJob SiteSim::batch_collect(const std::string& site_id,
                                    const std::string& batch_id) const {
  const Site& site = site_at(site_id);
  for (const auto& nid : site.nodes) {
    const ExecNode& n = node_at(nid);
    auto it = n.jobs.find(batch_id);
    if (it == n.jobs.end()) continue;
    const SimJob& sj = it->second;
    if (sj.view.state != BatchJobView::State::Completed)
      throw Error(ErrorCode::IllegalState,
                  "batch " + batch_id + " has not completed");
    CollectedJob out;
    const std::string log_path = "scratch/" + sj.job.job_id + "/job.log";
    auto lb = n.scratch.find(log_path);
    if (lb != n.scratch.end()) {
      out.log_path = log_path;
      out.log_size = lb->second.size_bytes;
      out.log_checksum = lb->second.checksum;
    }
    if (sj.view.outcome == BatchJobView::Outcome::Success)
      for (size_t k = 0; k < sj.job.resolved_steps.size(); ++k)
        for (const auto& type : sj.job.resolved_steps[k].output_types) {
          std::string path = "scratch/" + sj.job.job_id + "/step" +
                             std::to_string(k) + "." + type;
          auto b = n.scratch.find(path);
          if (b == n.scratch.end()) continue;
          OutputFile f;
          f.local_path = path;
          f.data_type = type;
          f.step_index = static_cast<int>(k);
          f.events = sj.job.events;
          f.size_bytes = b->second.size_bytes;
          f.checksum = b->second.checksum;
          out.outputs.push_back(f);
        }
    return out;
  }
  throw Error(ErrorCode::InvalidParameters,
              "unknown batch id " + batch_id + " at " + site_id);
}

void SiteSim::batch_reap(const std::string& site_id,
                         const std::string& batch_id) {
  Site& site = site_at(site_id);
  for (const auto& nid : site.nodes) {
    ExecNode& n = node_at(nid);
    auto it = n.jobs.find(batch_id);
    if (it == n.jobs.end()) continue;
    // Scratch files outlive the batch record: transfers drain the outbox in
    // later cycles, so only the bookkeeping entry goes away here.
    n.jobs.erase(it);
    return;
  }
  throw Error(ErrorCode::InvalidParameters,
              "unknown batch id " + batch_id + " at " + site_id);
}

// --------------------------------------------------------- transfers ----

std::optional<uint32_t> SiteSim::wan_transfer(const std::string& node_id,
                                              const std::string& local_path,
                                              const std::string& se,
                                              const std::string& remote_path) {
  ExecNode& node = node_at(node_id);
  Site& site = site_at(node.site_id);
  auto it = node.scratch.find(local_path);
  if (it == node.scratch.end())
    throw Error(ErrorCode::IoFailure,
                "no such file " + local_path + " on " + node_id);
  const SimBlob blob = it->second;

  transfer_attempts_ += 1;
  if (draw(site) < site.cfg.policy.transfer_failure_prob) {
    transfer_failures_ += 1;
    log(node.site_id, "transfer_fail",
        "se=" + se + " path=" + remote_path +
            " bytes=" + std::to_string(blob.size_bytes));
    return std::nullopt;
  }

  double bw = site.cfg.wan_bandwidth_bps > 0 ? site.cfg.wan_bandwidth_bps
                                             : 100e6;
  double dur = static_cast<double>(blob.size_bytes) / bw;
  site.link_free = std::max(site.link_free, now_) + dur;
  se_[se][remote_path] = blob;
  bytes_transferred_ += blob.size_bytes;
  log(node.site_id, "transfer",
      "se=" + se + " path=" + remote_path +
          " bytes=" + std::to_string(blob.size_bytes) +
          " dur=" + fmt_time(dur) + " done=" + fmt_time(site.link_free));
  return blob.checksum;
}

const std::map<std::string, SimBlob>& SiteSim::se_contents(
    const std::string& se) {
  return se_[se];
}

const std::map<std::string, SimBlob>& SiteSim::node_scratch(
    const std::string& node_id) {
  return node_at(node_id).scratch;
}

int64_t SiteSim::node_scratch_bytes(const ExecNode& n) const {
  int64_t total = 0;
  for (const auto& [p, b] : n.scratch) total += b.size_bytes;
  return total;
}

}  // namespace pullgrid
