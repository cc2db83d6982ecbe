#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "opcast/date.hpp"
#include "opcast/error.hpp"

namespace opcast {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitFetch = 3,
  kExitInference = 4,
  kExitOutput = 5,
};

struct RunOptions {
  std::filesystem::path conf;
  std::optional<Date> date;
  bool collect_data = false;
  bool prepare_static = false;
  bool save_input = false;
  bool geojson = false;
  bool netcdf = false;

  // Environment overrides (OPCAST_DATASTORE_URL, OPCAST_CACHE_DIR, OPCAST_OUTPUT_DIR).
  std::optional<std::string> datastore_url;
  std::optional<std::string> cache_dir;
  std::optional<std::string> output_dir;

  /// Fills the overrides from the process environment.
  void read_environment();
};

/// logfmt lines (`key=value ...`) on one stream.
class Logger {
 public:
  explicit Logger(std::ostream& out) : out_(out) {}
  void log(const std::string& level, const std::vector<std::pair<std::string, std::string>>& fields);
  void info(const std::vector<std::pair<std::string, std::string>>& fields) { log("info", fields); }
  void error(const std::vector<std::pair<std::string, std::string>>& fields) { log("error", fields); }

 private:
  std::ostream& out_;
};

struct RunResult {
  int exit_code = kExitOk;
  std::vector<std::filesystem::path> written;
  /// Set on failure.
  std::string stage;
  std::string variable;
  std::string message;
  std::optional<Errc> code;
};

/// One forecast run: optional static preparation, data collection (or the
/// saved snapshot), stacking, inference and the requested outputs.
RunResult run_pipeline(const RunOptions& opts, Logger& log);

/// Parses both configuration files, checks every transform chain against
/// the pilot's processing class and prints a table of the variables.
int validate_config(const std::filesystem::path& conf, std::ostream& out, Logger& log);

int run_cli(int argc, char** argv);

}  // namespace opcast
