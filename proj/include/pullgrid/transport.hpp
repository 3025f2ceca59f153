#pragma once

#include <map>
#include <memory>
#include <string>

#include "pullgrid/dispatch.hpp"
#include "pullgrid/rpc.hpp"

namespace pullgrid {

/// Carries one encoded call to an endpoint and returns the decoded reply.
/// Endpoint strings are transport-specific: a bound name for the
/// in-process transport, "host:port/path" for HTTP. A transport failure
/// (not a fault) raises Error(ServiceUnreachable).
class RpcTransport {
 public:
  virtual ~RpcTransport() = default;
  virtual rpc::Reply roundtrip(const std::string& endpoint,
                               const rpc::Call& call) = 0;
};

/// In-process transport for tests and simulations. Requests still pass
/// through the full codec, so wire behavior is exercised without sockets.
/// Endpoints can be marked unreachable to model a WAN outage.
class InProcTransport : public RpcTransport {
 public:
  void bind(const std::string& endpoint, const ServiceDispatcher* d);
  void set_reachable(const std::string& endpoint, bool reachable);

  rpc::Reply roundtrip(const std::string& endpoint,
                       const rpc::Call& call) override;

  int64_t roundtrips() const { return roundtrips_; }

 private:
  std::map<std::string, const ServiceDispatcher*> endpoints_;
  std::map<std::string, bool> reachable_;
  int64_t roundtrips_ = 0;
};

/// HTTP POST client. Endpoint form: "host:port/path".
class HttpTransport : public RpcTransport {
 public:
  explicit HttpTransport(double timeout_seconds = 10.0);
  rpc::Reply roundtrip(const std::string& endpoint,
                       const rpc::Call& call) override;

 private:
  double timeout_seconds_;
};

/// HTTP server hosting one dispatcher per path.
class HttpRpcServer {
 public:
  HttpRpcServer();
  ~HttpRpcServer();

  void add(const std::string& path, const ServiceDispatcher* d);

  /// Binds and serves on a background thread. port 0 picks a free port;
  /// the chosen port is available from port() after start returns.
  void start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace pullgrid
