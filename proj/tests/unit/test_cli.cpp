#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "opcast/io.hpp"
#include "opcast/mock_datastore.hpp"
#include "opcast/output.hpp"
#include "opcast/pipeline.hpp"
#include "test_support.hpp"

using namespace opcast;
using namespace opcast::testing;
namespace fs = std::filesystem;

namespace {

const Date kDate = day("2024-07-09");

// Copy of the demo pilot and library in a scratch tree so configs can be edited.
struct DemoTree {
  TempDir dir{"cli"};
  fs::path pilot = dir / "pilots/demo/setup.toml";
  fs::path out = dir / "out";
  fs::path cache = dir / "cache";

  DemoTree() {
    const fs::path src = source_dir();
    fs::create_directories(dir / "pilots/demo");
    fs::create_directories(dir / "data");
    for (const char* f : {"setup.toml", "model.opfw", "stats.json"}) {
      fs::copy_file(src / "pilots/demo" / f, dir / "pilots/demo" / f);
    }
    fs::copy_file(src / "datastore.toml", dir / "datastore.toml");
    fs::copy_file(src / "data/dem_demo.nc", dir / "data/dem_demo.nc");
  }

  void edit(const fs::path& file, const std::string& from, const std::string& to) {
    std::string text = read_file_text(file);
    const auto at = text.find(from);
    REQUIRE(at != std::string::npos);
    text.replace(at, from.size(), to);
    write_file_atomic(file, text);
  }

  RunOptions options(const MockDatastore& mock) const {
    RunOptions o;
    o.conf = pilot;
    o.date = kDate;
    o.datastore_url = mock.url();
    o.output_dir = out.string();
    o.cache_dir = cache.string();
    return o;
  }

  std::vector<fs::path> outputs() const {
    std::vector<fs::path> files;
    if (!fs::exists(out)) return files;
    for (const auto& e : fs::directory_iterator(out)) files.push_back(e.path().filename());
    std::sort(files.begin(), files.end());
    return files;
  }
};

fs::path fixtures() { return source_dir() / "fixtures/demo"; }

RunResult run(const RunOptions& o, std::string* log_text = nullptr) {
  std::ostringstream s;
  Logger log(s);
  RunResult r = run_pipeline(o, log);
  if (log_text) *log_text = s.str();
  return r;
}

}  // namespace

TEST_CASE("demo run writes both formats deterministically") {
  DemoTree t;
  MockDatastore mock(fixtures());
  auto o = t.options(mock);
  o.collect_data = o.prepare_static = o.geojson = o.netcdf = true;
  std::string log;
  const auto r = run(o, &log);
  INFO(log);
  REQUIRE(r.exit_code == kExitOk);
  CHECK(t.outputs() == std::vector<fs::path>{"fdi_demo_2024-07-09.geojson", "fdi_demo_2024-07-09.nc"});
  const auto geojson = read_file_bytes(t.out / "fdi_demo_2024-07-09.geojson");
  const auto netcdf = read_file_bytes(t.out / "fdi_demo_2024-07-09.nc");

  const auto map = decode_netcdf3_danger(netcdf);
  CHECK(map.p_fire.ny() == 16);
  CHECK(map.p_fire.nx() == 16);
  CHECK(format_provenance(map.provenance) == "ndvi:2024-07-09<-2024-07-08(latest-date)");
  CHECK(log.find("stage=fetch variable=ndvi outcome=fallback") != std::string::npos);

  const auto again = run(o);
  REQUIRE(again.exit_code == kExitOk);
  CHECK(read_file_bytes(t.out / "fdi_demo_2024-07-09.geojson") == geojson);
  CHECK(read_file_bytes(t.out / "fdi_demo_2024-07-09.nc") == netcdf);
}

TEST_CASE("injected fetch failure under policy none fails closed") {
  DemoTree t;
  MockDatastore mock(fixtures());
  mock.inject_failure("era5_t2m", kDate);
  auto o = t.options(mock);
  o.collect_data = o.save_input = o.geojson = o.netcdf = true;
  const auto r = run(o);
  CHECK(r.exit_code == kExitFetch);
  CHECK(r.stage == "fetch");
  CHECK(r.variable == "t2m");
  CHECK(r.code == Errc::FetchFailed);
  CHECK(r.written.empty());
  CHECK(t.outputs().empty());
}

TEST_CASE("prepare_static alone fills the cache and writes no forecast") {
  DemoTree t;
  MockDatastore mock(fixtures());
  auto o = t.options(mock);
  o.prepare_static = true;
  REQUIRE(run(o).exit_code == kExitOk);
  CHECK(t.outputs().empty());
  const StaticCache cache(t.cache / "demo");
  CHECK(cache.entries().size() == 2);
  CHECK(cache.lookup("dem", load_configs(t.pilot).pilot.bbox).has_value());
  CHECK(cache.lookup("slope", load_configs(t.pilot).pilot.bbox).has_value());
}

TEST_CASE("saved input reproduces the collected forecast") {
  DemoTree t;
  MockDatastore mock(fixtures());
  auto o = t.options(mock);
  o.collect_data = o.save_input = o.netcdf = true;
  REQUIRE(run(o).exit_code == kExitOk);
  const auto collected = read_file_bytes(t.out / "fdi_demo_2024-07-09.nc");
  CHECK(fs::exists(t.out / "input_demo_2024-07-09.nc"));

  fs::remove(t.out / "fdi_demo_2024-07-09.nc");
  mock.clear_log();
  auto from_snapshot = t.options(mock);
  from_snapshot.netcdf = true;
  REQUIRE(run(from_snapshot).exit_code == kExitOk);
  CHECK(mock.request_count() == 0);
  CHECK(read_file_bytes(t.out / "fdi_demo_2024-07-09.nc") == collected);
}

TEST_CASE("missing snapshot without collect_data is a fetch failure") {
  DemoTree t;
  MockDatastore mock(fixtures());
  auto o = t.options(mock);
  o.geojson = true;
  const auto r = run(o);
  CHECK(r.exit_code == kExitFetch);
  CHECK(r.code == Errc::FileNotFound);
}

TEST_CASE("configuration errors exit 2") {
  DemoTree t;
  MockDatastore mock(fixtures());

  SUBCASE("no output format") {
    auto o = t.options(mock);
    o.collect_data = true;
    CHECK(run(o).exit_code == kExitConfig);
  }
  SUBCASE("no date") {
    auto o = t.options(mock);
    o.geojson = true;
    o.date.reset();
    CHECK(run(o).exit_code == kExitConfig);
  }
  SUBCASE("unknown variable") {
    t.edit(t.pilot, "\"slope\"]", "\"slope\", \"smi\"]");
    auto o = t.options(mock);
    o.collect_data = o.geojson = true;
    const auto r = run(o);
    CHECK(r.exit_code == kExitConfig);
    CHECK(r.code == Errc::UnknownVariable);
    CHECK(t.outputs().empty());
  }
  SUBCASE("unknown transform") {
    t.edit(t.dir / "datastore.toml", "\"compute_slope\"", "\"compute_slop\"");
    auto o = t.options(mock);
    o.collect_data = o.geojson = true;
    CHECK(run(o).exit_code == kExitConfig);
  }
}

TEST_CASE("inference and output errors") {
  DemoTree t;
  MockDatastore mock(fixtures());

  SUBCASE("weights missing") {
    fs::remove(t.dir / "pilots/demo/model.opfw");
    auto o = t.options(mock);
    o.collect_data = o.geojson = true;
    const auto r = run(o);
    CHECK(r.exit_code == kExitInference);
    CHECK(r.stage == "model");
  }
  SUBCASE("day count disagrees with the weights") {
    t.edit(t.pilot, "days = 3", "days = 4");
    auto o = t.options(mock);
    o.collect_data = o.geojson = true;
    CHECK(run(o).exit_code == kExitInference);
  }
  SUBCASE("output directory is a file") {
    std::ofstream(t.out) << "x";
    auto o = t.options(mock);
    o.collect_data = o.geojson = o.netcdf = true;
    const auto r = run(o);
    CHECK(r.exit_code == kExitOutput);
    CHECK(r.stage == "output");
  }
}

TEST_CASE("unreachable datastore exits 3") {
  DemoTree t;
  RunOptions o;
  o.conf = t.pilot;
  o.date = kDate;
  o.datastore_url = "http://127.0.0.1:1";
  o.output_dir = t.out.string();
  o.cache_dir = t.cache.string();
  o.collect_data = o.geojson = true;
  const auto r = run(o);
  CHECK(r.exit_code == kExitFetch);
  CHECK(t.outputs().empty());
}

TEST_CASE("validate") {
  DemoTree t;
  std::ostringstream out, err;
  Logger log(err);

  SUBCASE("demo configs are clean") {
    CHECK(validate_config(t.pilot, out, log) == kExitOk);
    CHECK(out.str().find("ok: 8 variables validated") != std::string::npos);
    CHECK(out.str().find("fill_time_dimension {dates: dates} -> standardize") != std::string::npos);
    CHECK(err.str().empty());
  }
  SUBCASE("typo names the variable and position") {
    t.edit(t.dir / "datastore.toml", "\"daily_min\"", "\"daily_mni\"");
    CHECK(validate_config(t.pilot, out, log) == kExitConfig);
    CHECK(err.str().find("code=UnknownTransform") != std::string::npos);
    CHECK(err.str().find("rh") != std::string::npos);
    CHECK(err.str().find("variable `rh`, cascade position 2") != std::string::npos);
  }
  SUBCASE("unknown variable") {
    t.edit(t.pilot, "\"slope\"]", "\"slope\", \"smi\"]");
    CHECK(validate_config(t.pilot, out, log) == kExitConfig);
    CHECK(err.str().find("code=UnknownVariable") != std::string::npos);
  }
  SUBCASE("malformed kwargs") {
    t.edit(t.dir / "datastore.toml", "{variable: 'v10'}", "{variable: 'v10'");
    CHECK(validate_config(t.pilot, out, log) == kExitConfig);
    CHECK(err.str().find("code=KwargsSyntax") != std::string::npos);
  }
}

TEST_CASE("command line") {
  DemoTree t;
  auto call = [](std::vector<std::string> args) {
    args.insert(args.begin(), "opcast");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
  };
  CHECK(call({"--conf", t.pilot.string(), "--date", "2024-07-09"}) == kExitConfig);
  CHECK(call({"run", "--conf", t.pilot.string(), "--date", "2024-13-09", "--geojson"}) == kExitConfig);
  CHECK(call({"run", "--date", "2024-07-09", "--geojson"}) == kExitConfig);
  CHECK(call({"--conf", t.pilot.string(), "--bogus"}) == kExitUsage);
  CHECK(call({"validate", "--conf", t.pilot.string()}) == kExitOk);

  MockDatastore mock(fixtures());
  ::setenv("OPCAST_DATASTORE_URL", mock.url().c_str(), 1);
  ::setenv("OPCAST_OUTPUT_DIR", t.out.c_str(), 1);
  ::setenv("OPCAST_CACHE_DIR", t.cache.c_str(), 1);
  CHECK(call({"run", "--conf", t.pilot.string(), "--date", "2024-07-09", "--collect_data", "--geojson"}) == kExitOk);
  CHECK(t.outputs() == std::vector<fs::path>{"fdi_demo_2024-07-09.geojson"});
  ::unsetenv("OPCAST_DATASTORE_URL");
  ::unsetenv("OPCAST_OUTPUT_DIR");
  ::unsetenv("OPCAST_CACHE_DIR");
}

TEST_CASE("logfmt quoting") {
  std::ostringstream s;
  Logger log(s);
  log.info({{"stage", "fetch"}, {"message", "a \"b\" c"}, {"empty", ""}, {"path", "x=y"}});
  CHECK(s.str() == "level=info stage=fetch message=\"a \\\"b\\\" c\" empty=\"\" path=\"x=y\"\n");
}
