// Hosts the four central services over HTTP on one port:
//   /rpc/prod  /rpc/mon  /rpc/book  /rpc/swrepo

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "pullgrid/bookkeeping_service.hpp"
#include "pullgrid/dispatch.hpp"
#include "pullgrid/monitoring_service.hpp"
#include "pullgrid/production_service.hpp"
#include "pullgrid/repo_service.hpp"
#include "pullgrid/store.hpp"
#include "pullgrid/transport.hpp"

namespace {
std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"central production, monitoring, bookkeeping and software "
               "repository services"};
  std::string store_dir;
  std::string host = "127.0.0.1";
  int port = 8799;
  bool auto_approve = false;
  int max_reschedules = 3;
  bool no_fsync = false;
  app.add_option("--store", store_dir, "store directory")->required();
  app.add_option("--host", host, "listen address");
  app.add_option("--port", port, "listen port (0 picks a free one)");
  app.add_flag("--auto-approve", auto_approve,
               "newly registered datasets skip manual approval");
  app.add_option("--max-reschedules", max_reschedules,
                 "reschedule budget per job");
  app.add_flag("--no-fsync", no_fsync, "skip fsync on commit (testing only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    pullgrid::StoreOptions sopt;
    sopt.fsync_on_commit = !no_fsync;
    pullgrid::Store store(store_dir, sopt);
    auto now = pullgrid::wall_clock();
    pullgrid::ProductionService prod(store, {max_reschedules}, now);
    pullgrid::MonitoringService mon(store, now);
    pullgrid::BookkeepingService book(store, {auto_approve}, now);
    pullgrid::RepoService repo(store, now);

    pullgrid::ServiceDispatcher prod_d, mon_d, book_d, repo_d;
    pullgrid::register_production(prod_d, prod);
    pullgrid::register_monitoring(mon_d, mon);
    pullgrid::register_bookkeeping(book_d, book);
    pullgrid::register_repo(repo_d, repo);

    pullgrid::HttpRpcServer server;
    server.add("/rpc/prod", &prod_d);
    server.add("/rpc/mon", &mon_d);
    server.add("/rpc/book", &book_d);
    server.add("/rpc/swrepo", &repo_d);
    server.start(host, port);
    std::cout << "listening on " << host << ":" << server.port() << std::endl;

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop)
      std::this_thread::sleep_for(std::chrono::milliseconds(200));
    server.stop();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
