// Site agent daemon for real mode: pulls jobs over HTTP, runs them as
// local processes, and drives the outbox. Configuration is a key=value
// file; every key mirrors an AgentConfig field.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "pullgrid/agent.hpp"
#include "pullgrid/errors.hpp"
#include "pullgrid/localbatch.hpp"
#include "pullgrid/transport.hpp"
#include "pullgrid/util.hpp"

namespace {

std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }

struct AgentSetup {
  pullgrid::AgentConfig cfg;
  std::string batch_dir;
  std::string se_dir;
  int slots = 2;
};

AgentSetup load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw pullgrid::Error(pullgrid::ErrorCode::IoFailure,
                          "cannot read config " + path);
  AgentSetup s;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = pullgrid::trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw pullgrid::Error(pullgrid::ErrorCode::MalformedDocument,
                            "config line " + std::to_string(line_no) +
                                ": expected key=value");
    std::string key = pullgrid::trim(t.substr(0, eq));
    std::string value = pullgrid::trim(t.substr(eq + 1));
    auto& c = s.cfg;
    if (key == "site_id") c.site_id = value;
    else if (key == "prod_endpoint") c.prod_endpoint = value;
    else if (key == "mon_endpoint") c.mon_endpoint = value;
    else if (key == "book_endpoint") c.book_endpoint = value;
    else if (key == "repo_endpoint") c.repo_endpoint = value;
    else if (key == "fill_target") c.fill_target = std::stoi(value);
    else if (key == "occupancy_threshold") c.occupancy_threshold = std::stod(value);
    else if (key == "poll_interval") c.poll_interval = std::stod(value);
    else if (key == "outbox_path") c.outbox_path = value;
    else if (key == "install_area_path") c.install_area_path = value;
    else if (key == "install_quota_mb") c.install_quota_mb = std::stoll(value);
    else if (key == "storage_element") c.storage_element = value;
    else if (key == "max_transfer_attempts_per_cycle")
      c.max_transfer_attempts_per_cycle = std::stoi(value);
    else if (key == "bytes_per_event") c.bytes_per_event = std::stoll(value);
    else if (key == "runtime_seconds") c.runtime_seconds = std::stod(value);
    else if (key == "batch_dir") s.batch_dir = value;
    else if (key == "se_dir") s.se_dir = value;
    else if (key == "slots") s.slots = std::stoi(value);
    else
      throw pullgrid::Error(pullgrid::ErrorCode::MalformedDocument,
                            "config line " + std::to_string(line_no) +
                                ": unknown key " + key);
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"site agent"};
  std::string config_path;
  bool once = false;
  int cycles = 0;
  app.add_option("--config", config_path, "key=value configuration file")
      ->required();
  app.add_flag("--once", once, "run one cycle and exit");
  app.add_option("--cycles", cycles, "run N cycles and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    AgentSetup setup = load_config(config_path);
    if (setup.batch_dir.empty() || setup.se_dir.empty() ||
        setup.cfg.outbox_path.empty())
      throw pullgrid::Error(pullgrid::ErrorCode::InvalidParameters,
                            "config needs batch_dir, se_dir and outbox_path");

    pullgrid::HttpTransport transport;
    pullgrid::LocalProcessBatch batch(setup.batch_dir, setup.slots);
    pullgrid::FileTransferBackend xfer(setup.se_dir);
    pullgrid::Agent agent(setup.cfg, transport, batch, xfer,
                          pullgrid::wall_clock());

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    int ran = 0;
    while (!g_stop) {
      auto rep = agent.run_cycle();
      for (const auto& a : rep.actions)
        std::cout << "cycle " << ran << ": " << a.kind
                  << (a.detail.empty() ? "" : " " + a.detail) << "\n";
      std::cout.flush();
      ++ran;
      if (once || (cycles > 0 && ran >= cycles)) break;
      auto wake = std::chrono::steady_clock::now() +
                  std::chrono::duration<double>(setup.cfg.poll_interval);
      while (!g_stop && std::chrono::steady_clock::now() < wake)
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
