#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "opcast/datastore.hpp"

namespace httplib {
class Server;
}

namespace opcast {

/// Fixture directory layout:
///
///   manifest.json              {"datasets": {"<name>": {"dates": [...], "fail": [...]}}}
///   <name>/<YYYY-MM-DD>.opgrid one grid per available date
///
/// Dates listed under `fail` are advertised as available but every data
/// request for them fails.
class FixtureStore {
 public:
  /// Throws BadFixture on a malformed manifest or a missing grid file.
  explicit FixtureStore(std::filesystem::path root);

  bool has_dataset(const std::string& name) const { return datasets_.contains(name); }
  AvailabilityIndex availability(const std::string& name) const;
  bool is_failing(const std::string& name, Date date) const;
  /// nullopt when `date` is not available for `name`.
  std::optional<Grid> load(const std::string& name, Date date) const;
  std::filesystem::path file_for(const std::string& name, Date date) const;

 private:
  struct Dataset {
    AvailabilityIndex dates;
    std::set<Date> fail;
  };
  std::filesystem::path root_;
  std::map<std::string, Dataset> datasets_;
};

/// In-process HTTP stand-in for the remote data service:
///
///   GET /datasets/{name}/availability          -> {"dates": ["YYYY-MM-DD", ...]}
///   GET /datasets/{name}/data?date=&bbox=      -> OPGRID bytes, cropped server-side
///
/// Injected failures answer 503. Every request is logged.
class MockDatastore {
 public:
  /// Port 0 picks a free port. Throws PortInUse or BadFixture.
  explicit MockDatastore(std::filesystem::path fixture_dir, int port = 0, std::string host = "127.0.0.1");
  ~MockDatastore();
  MockDatastore(const MockDatastore&) = delete;
  MockDatastore& operator=(const MockDatastore&) = delete;

  int port() const { return port_; }
  std::string url() const;

  void inject_failure(const std::string& dataset, Date date);
  void clear_injected_failures();

  std::size_t request_count() const;
  std::vector<std::string> request_log() const;
  void clear_log();

  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();

 private:
  bool failing(const std::string& dataset, Date date) const;

  FixtureStore fixtures_;
  std::string host_;
  int port_ = 0;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  mutable std::mutex mutex_;
  std::set<std::pair<std::string, Date>> injected_;
  std::vector<std::string> log_;
};

inline std::unique_ptr<MockDatastore> serve_mock_datastore(const std::filesystem::path& fixture_dir, int port) {
  return std::make_unique<MockDatastore>(fixture_dir, port);
}

}  // namespace opcast
