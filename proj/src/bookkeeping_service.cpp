#include "pullgrid/bookkeeping_service.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "pullgrid/documents.hpp"
#include "pullgrid/tables.hpp"

namespace pullgrid {

using nlohmann::json;
namespace tb = tables;

namespace {

json catalog_row(const DatasetDescription& d, const std::string& reason) {
  json j = d;
  if (!reason.empty()) j["reject_reason"] = reason;
  return j;
}

std::pair<DatasetDescription, std::string> parse_catalog_row(
    const std::string& raw) {
  json j = json::parse(raw);
  std::string reason = j.value("reject_reason", "");
  return {j.get<DatasetDescription>(), reason};
}

std::string replica_key(const std::string& lfn, const std::string& se) {
  return lfn + "|" + se;
}

}  // namespace

BookkeepingService::BookkeepingService(Store& store, BookkeepingConfig cfg,
                                       TimeSource now)
    : store_(store), cfg_(cfg), now_(std::move(now)) {}

void BookkeepingService::register_dataset(const std::string& xml) {
  register_dataset(dataset_from_xml(xml));
}

void BookkeepingService::register_dataset(const DatasetDescription& d) {
  if (d.lfn.empty())
    throw Error(ErrorCode::InvalidParameters, "dataset has no lfn");
  store_.transact([&](Txn& txn) {
    auto check = [&](const std::string& raw) {
      auto [existing, reason] = parse_catalog_row(raw);
      (void)reason;
      if (!existing.same_content(d))
        throw Error(ErrorCode::LfnConflict, d.lfn);
    };
    if (auto raw = txn.get(tb::kDatasetsPending, d.lfn)) {
      check(*raw);
      return;  // identical re-registration
    }
    if (auto raw = txn.get(tb::kDatasetsCatalog, d.lfn)) {
      check(*raw);
      return;
    }
    DatasetDescription stored = d;
    if (cfg_.auto_approve) {
      stored.status = DatasetStatus::Approved;
      txn.put(tb::kDatasetsCatalog, d.lfn, catalog_row(stored, "").dump());
    } else {
      stored.status = DatasetStatus::Pending;
      txn.put(tb::kDatasetsPending, d.lfn, catalog_row(stored, "").dump());
    }
  });
}

std::vector<std::pair<std::string, std::string>> BookkeepingService::approve(
    const std::vector<std::string>& lfns) {
  return store_.transact([&](Txn& txn) {
    std::vector<std::pair<std::string, std::string>> results;
    for (const auto& lfn : lfns) {
      auto raw = txn.get(tb::kDatasetsPending, lfn);
      if (!raw) {
        results.emplace_back(
            lfn, txn.get(tb::kDatasetsCatalog, lfn)
                     ? error_name(ErrorCode::NotPending)
                     : error_name(ErrorCode::UnknownLfn));
        continue;
      }
      auto [d, reason] = parse_catalog_row(*raw);
      (void)reason;
      d.status = DatasetStatus::Approved;
      txn.erase(tb::kDatasetsPending, lfn);
      txn.put(tb::kDatasetsCatalog, lfn, catalog_row(d, "").dump());
      results.emplace_back(lfn, "ok");
    }
    return results;
  });
}

std::vector<std::pair<std::string, std::string>> BookkeepingService::reject(
    const std::vector<std::string>& lfns, const std::string& reason) {
  return store_.transact([&](Txn& txn) {
    std::vector<std::pair<std::string, std::string>> results;
    for (const auto& lfn : lfns) {
      auto raw = txn.get(tb::kDatasetsPending, lfn);
      if (!raw) {
        results.emplace_back(
            lfn, txn.get(tb::kDatasetsCatalog, lfn)
                     ? error_name(ErrorCode::NotPending)
                     : error_name(ErrorCode::UnknownLfn));
        continue;
      }
      auto [d, old_reason] = parse_catalog_row(*raw);
      (void)old_reason;
      d.status = DatasetStatus::Rejected;
      txn.erase(tb::kDatasetsPending, lfn);
      txn.put(tb::kDatasetsCatalog, lfn, catalog_row(d, reason).dump());
      results.emplace_back(lfn, "ok");
    }
    return results;
  });
}

void BookkeepingService::add_replica(const Replica& r) {
  double ts = now_();
  store_.transact([&](Txn& txn) {
    std::optional<std::string> raw = txn.get(tb::kDatasetsCatalog, r.lfn);
    if (!raw) raw = txn.get(tb::kDatasetsPending, r.lfn);
    if (!raw) throw Error(ErrorCode::UnknownLfn, r.lfn);
    auto [d, reason] = parse_catalog_row(*raw);
    (void)reason;
    if (d.status == DatasetStatus::Rejected)
      throw Error(ErrorCode::RejectedDataset, r.lfn);
    if (d.checksum != r.checksum)
      throw Error(ErrorCode::ChecksumMismatch,
                  r.lfn + " at " + r.storage_element);
    auto key = replica_key(r.lfn, r.storage_element);
    if (txn.get(tb::kReplicas, key)) return;  // idempotent
    Replica stored = r;
    if (stored.registered_at == 0) stored.registered_at = ts;
    txn.put(tb::kReplicas, key, json(stored).dump());
  });
}

std::vector<QueryHit> BookkeepingService::query(const DatasetQuery& q) {
  return store_.transact([&](Txn& txn) {
    std::vector<QueryHit> hits;
    auto consider = [&](const std::string& raw) {
      auto [d, reason] = parse_catalog_row(raw);
      if (q.run_id && d.run_id != *q.run_id) return;
      if (q.data_type && d.data_type != *q.data_type) return;
      if (q.status && d.status != *q.status) return;
      if (q.min_events && d.events < *q.min_events) return;
      QueryHit hit;
      hit.dataset = d;
      hit.reject_reason = reason;
      hits.push_back(std::move(hit));
    };
    txn.scan(tb::kDatasetsPending, "",
             [&](const std::string&, const std::string& v) {
               consider(v);
               return true;
             });
    txn.scan(tb::kDatasetsCatalog, "",
             [&](const std::string&, const std::string& v) {
               consider(v);
               return true;
             });
    std::sort(hits.begin(), hits.end(), [](const QueryHit& a, const QueryHit& b) {
      return a.dataset.lfn < b.dataset.lfn;
    });
    for (auto& hit : hits) {
      txn.scan(tb::kReplicas, hit.dataset.lfn + "|",
               [&](const std::string&, const std::string& v) {
                 hit.replicas.push_back(json::parse(v).get<Replica>());
                 return true;
               });
    }
    return hits;
  });
}

int64_t BookkeepingService::pending_count() {
  return store_.transact([&](Txn& txn) {
    int64_t n = 0;
    txn.scan(tb::kDatasetsPending, "",
             [&](const std::string&, const std::string&) {
               ++n;
               return true;
             });
    return n;
  });
}

int64_t BookkeepingService::catalog_count() {
  return store_.transact([&](Txn& txn) {
    int64_t n = 0;
    txn.scan(tb::kDatasetsCatalog, "",
             [&](const std::string&, const std::string&) {
               ++n;
               return true;
             });
    return n;
  });
}

}  // namespace pullgrid
