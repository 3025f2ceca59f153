#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pullgrid/documents.hpp"
#include "pullgrid/json_codec.hpp"
#include "pullgrid/production_service.hpp"
#include "pullgrid/store.hpp"

namespace pullgrid {

struct SiteSummaryRow {
  int64_t running = 0;
  int64_t done = 0;
  int64_t failed = 0;
  double cpu_share = 0;  // site's fraction of execution time over Done jobs
};

/// Accepts status messages from agents and worker nodes and answers
/// history and per-site summary queries. Messages are never rejected for
/// being surprising: an illegal transition or out-of-order timestamp is
/// stored flagged so the operator sees what the site actually said.
class MonitoringService {
 public:
  MonitoringService(Store& store, TimeSource now);

  /// Stores the message and applies the state change when legal. Returns
  /// false for an exact duplicate (same job, attempt, state, timestamp),
  /// which is dropped without effect.
  bool report_status(const StatusReport& m, const std::string& origin = "agent");

  std::vector<HistoryRow> job_history(const std::string& job_id);

  std::map<std::string, SiteSummaryRow> site_summary();

 private:
  Store& store_;
  TimeSource now_;
};

}  // namespace pullgrid
