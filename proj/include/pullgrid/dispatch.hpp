#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pullgrid/rpc.hpp"

namespace pullgrid {

class ProductionService;
class MonitoringService;
class BookkeepingService;
class RepoService;

/// Method table for one RPC endpoint. `handle` is the full server path:
/// decode request bytes, run the handler, encode the reply; every failure
/// becomes a fault document, never an exception.
class ServiceDispatcher {
 public:
  using Handler = std::function<rpc::Value(const std::vector<rpc::Value>&)>;

  void method(const std::string& name, Handler h);
  rpc::Reply dispatch(const rpc::Call& call) const;
  std::string handle(std::string_view request_bytes) const;
  std::vector<std::string> methods() const;

 private:
  std::map<std::string, Handler> handlers_;
};

void register_production(ServiceDispatcher& d, ProductionService& svc);
void register_monitoring(ServiceDispatcher& d, MonitoringService& svc);
void register_bookkeeping(ServiceDispatcher& d, BookkeepingService& svc);
void register_repo(ServiceDispatcher& d, RepoService& svc);

}  // namespace pullgrid
