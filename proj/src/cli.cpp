#include <CLI11.hpp>
#include <iostream>

#include "opcast/pipeline.hpp"

namespace opcast {

namespace {

void add_run_options(CLI::App& app, RunOptions& opts, std::string& date) {
  app.add_option("--conf", opts.conf, "Pilot setup TOML");
  app.add_option("--date", date, "Forecast date, YYYY-MM-DD");
  app.add_flag("--collect_data", opts.collect_data, "Fetch and transform every pilot variable");
  app.add_flag("--prepare_static", opts.prepare_static, "Fetch, transform and cache static variables");
  app.add_flag("--save_input", opts.save_input, "Write the model input as NetCDF before inference");
  app.add_flag("--geojson", opts.geojson, "Write the danger map as GeoJSON");
  app.add_flag("--netcdf", opts.netcdf, "Write the danger map as NetCDF-3");
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Operational fire danger forecasting pipeline"};
  app.require_subcommand(0, 1);

  RunOptions top;
  std::string top_date;
  add_run_options(app, top, top_date);

  RunOptions run_opts;
  std::string run_date;
  CLI::App* run = app.add_subcommand("run", "Run one forecast");
  add_run_options(*run, run_opts, run_date);

  std::filesystem::path validate_conf;
  CLI::App* validate = app.add_subcommand("validate", "Check the configuration without running");
  validate->add_option("--conf", validate_conf, "Pilot setup TOML")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  Logger log(std::cerr);
  if (*validate) return validate_config(validate_conf, std::cout, log);

  RunOptions& opts = *run ? run_opts : top;
  const std::string& date = *run ? run_date : top_date;
  if (opts.conf.empty()) {
    std::cerr << "--conf is required\n" << app.help();
    return kExitConfig;
  }
  if (!date.empty()) {
    try {
      opts.date = parse_date(date);
    } catch (const Error& e) {
      log.error({{"stage", "config"}, {"code", std::string(to_string(e.code()))}, {"exit", "2"}, {"message", e.what()}});
      return kExitConfig;
    }
  }
  opts.read_environment();
  return run_pipeline(opts, log).exit_code;
}

}  // namespace opcast
