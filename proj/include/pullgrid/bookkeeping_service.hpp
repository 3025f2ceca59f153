#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pullgrid/model.hpp"
#include "pullgrid/production_service.hpp"
#include "pullgrid/store.hpp"

namespace pullgrid {

struct BookkeepingConfig {
  // Unattended simulations skip the manager check; registrations land in
  // the catalog as Approved directly.
  bool auto_approve = false;
};

struct DatasetQuery {
  std::optional<std::string> run_id;
  std::optional<std::string> data_type;
  std::optional<DatasetStatus> status;
  std::optional<int64_t> min_events;
};

struct QueryHit {
  DatasetDescription dataset;
  std::string reject_reason;  // empty unless Rejected
  std::vector<Replica> replicas;
};

/// Dataset bookkeeping: a pending cache awaiting the production manager's
/// check, the approved/rejected catalog, and the replica registry.
class BookkeepingService {
 public:
  BookkeepingService(Store& store, BookkeepingConfig cfg, TimeSource now);

  /// Registers a dataset description from its XML form. Idempotent on
  /// identical content; a different description under a known lfn is
  /// refused.
  void register_dataset(const std::string& xml);
  void register_dataset(const DatasetDescription& d);

  /// Per-lfn results: "ok" or the error name.
  std::vector<std::pair<std::string, std::string>> approve(
      const std::vector<std::string>& lfns);
  std::vector<std::pair<std::string, std::string>> reject(
      const std::vector<std::string>& lfns, const std::string& reason);

  void add_replica(const Replica& r);

  /// Conjunctive filter over pending and catalog entries, ordered by lfn.
  std::vector<QueryHit> query(const DatasetQuery& q);

  int64_t pending_count();
  int64_t catalog_count();

 private:
  Store& store_;
  BookkeepingConfig cfg_;
  TimeSource now_;
};

}  // namespace pullgrid
