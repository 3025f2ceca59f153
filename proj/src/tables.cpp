#include "pullgrid/tables.hpp"

#include <nlohmann/json.hpp>

#include "pullgrid/util.hpp"

namespace pullgrid::tables {

std::optional<StoredJob> load_job(Txn& txn, const std::string& job_id) {
  auto raw = txn.get(kJobs, job_id);
  if (!raw) return std::nullopt;
  return nlohmann::json::parse(*raw).get<StoredJob>();
}

void save_job(Txn& txn, const StoredJob& job) {
  txn.put(kJobs, job.job_id, nlohmann::json(job).dump());
}

std::string history_key(const std::string& job_id, int seq) {
  return job_id + "|" + zero_pad(seq, 6);
}

void append_history(Txn& txn, StoredJob& job, const HistoryRow& row,
                    bool is_transition) {
  HistoryRow r = row;
  r.transition = is_transition;
  txn.put(kJobHistory, history_key(job.job_id, job.history_len),
          nlohmann::json(r).dump());
  job.history_len += 1;
}

uint64_t next_counter(Txn& txn, const std::string& name) {
  uint64_t next = 1;
  if (auto cur = txn.get(kCounters, name)) next = std::stoull(*cur) + 1;
  txn.put(kCounters, name, std::to_string(next));
  return next;
}

}  // namespace pullgrid::tables
