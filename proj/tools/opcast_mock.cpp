// Serves a fixture directory over HTTP until interrupted.

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include "opcast/error.hpp"
#include "opcast/mock_datastore.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mock data service for opcast fixtures"};
  std::string fixtures;
  int port = 8750;
  std::string host = "127.0.0.1";
  std::vector<std::string> failures;
  app.add_option("--fixtures", fixtures, "Fixture directory with manifest.json")->required();
  app.add_option("--port", port, "Port to listen on (0 picks a free one)");
  app.add_option("--host", host, "Address to bind");
  app.add_option("--fail", failures, "Inject a failure, DATASET:YYYY-MM-DD");
  CLI11_PARSE(app, argc, argv);

  try {
    opcast::MockDatastore server(fixtures, port, host);
    for (const auto& f : failures) {
      const auto colon = f.find(':');
      if (colon == std::string::npos) throw opcast::Error(opcast::Errc::BadFixture, f, "expected DATASET:DATE");
      server.inject_failure(f.substr(0, colon), opcast::parse_date(f.substr(colon + 1)));
    }
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << server.url() << std::endl;
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  } catch (const opcast::Error& e) {
    std::cerr << e.what() << '\n';
    return e.code() == opcast::Errc::PortInUse ? 3 : 2;
  }
  return 0;
}
