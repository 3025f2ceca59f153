#include "pullgrid/transport.hpp"

#include <thread>

#include <httplib.h>

#include "pullgrid/errors.hpp"

namespace pullgrid {

void InProcTransport::bind(const std::string& endpoint,
                           const ServiceDispatcher* d) {
  endpoints_[endpoint] = d;
  reachable_[endpoint] = true;
}

void InProcTransport::set_reachable(const std::string& endpoint,
                                    bool reachable) {
  reachable_[endpoint] = reachable;
}

rpc::Reply InProcTransport::roundtrip(const std::string& endpoint,
                                      const rpc::Call& call) {
  auto it = endpoints_.find(endpoint);
  if (it == endpoints_.end() || !reachable_[endpoint])
    throw Error(ErrorCode::ServiceUnreachable, endpoint);
  ++roundtrips_;
  std::string request = rpc::encode_call(call);
  std::string response = it->second->handle(request);
  return rpc::decode_reply(response);
}

HttpTransport::HttpTransport(double timeout_seconds)
    : timeout_seconds_(timeout_seconds) {}

rpc::Reply HttpTransport::roundtrip(const std::string& endpoint,
                                    const rpc::Call& call) {
  auto slash = endpoint.find('/');
  if (slash == std::string::npos)
    throw Error(ErrorCode::ServiceUnreachable,
                "endpoint '" + endpoint + "' has no path");
  std::string hostport = endpoint.substr(0, slash);
  std::string path = endpoint.substr(slash);

  httplib::Client client(std::string("http://") + hostport);
  auto secs = static_cast<time_t>(timeout_seconds_);
  auto usecs = static_cast<long>((timeout_seconds_ - double(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  auto res = client.Post(path, rpc::encode_call(call), "text/xml");
  if (!res)
    throw Error(ErrorCode::ServiceUnreachable,
                endpoint + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error(ErrorCode::ServiceUnreachable,
                endpoint + ": HTTP " + std::to_string(res->status));
  return rpc::decode_reply(res->body);
}

struct HttpRpcServer::Impl {
  httplib::Server server;
  std::thread thread;
  std::map<std::string, const ServiceDispatcher*> paths;
};

HttpRpcServer::HttpRpcServer() : impl_(std::make_unique<Impl>()) {}

HttpRpcServer::~HttpRpcServer() { stop(); }

void HttpRpcServer::add(const std::string& path, const ServiceDispatcher* d) {
  impl_->paths[path] = d;
  impl_->server.Post(path, [d](const httplib::Request& req,
                               httplib::Response& res) {
    res.set_content(d->handle(req.body), "text/xml");
  });
}

void HttpRpcServer::start(const std::string& host, int port) {
  if (port == 0)
    port_ = impl_->server.bind_to_any_port(host);
  else {
    if (!impl_->server.bind_to_port(host, port))
      throw Error(ErrorCode::IoFailure,
                  "bind " + host + ":" + std::to_string(port));
    port_ = port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpRpcServer::stop() {
  if (impl_ && impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

}  // namespace pullgrid
