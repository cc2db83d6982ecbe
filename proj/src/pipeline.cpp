#include "opcast/pipeline.hpp"

#include <array>
#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "opcast/config.hpp"
#include "opcast/datastore.hpp"
#include "opcast/inference.hpp"
#include "opcast/io.hpp"
#include "opcast/output.hpp"
#include "opcast/transform.hpp"

namespace opcast {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;
using Fields = std::vector<std::pair<std::string, std::string>>;

std::string elapsed_ms(Clock::time_point since) {
  const auto ms = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - since).count() / 1000.0;
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << ms;
  return s.str();
}

bool is_config_error(Errc c) {
  switch (c) {
    case Errc::TomlSyntax:
    case Errc::BadConfig:
    case Errc::MissingGathering:
    case Errc::BadContingency:
    case Errc::UnknownVariable:
    case Errc::BadBBox:
    case Errc::MissingModelPath:
    case Errc::KwargsSyntax:
    case Errc::DuplicateKey:
    case Errc::UnresolvedReference:
    case Errc::DanglingGridRef:
    case Errc::UnknownTransform:
    case Errc::UnknownProcessingClass:
    case Errc::UnknownDatastoreClass:
    case Errc::BadThresholds:
      return true;
    default:
      return false;
  }
}

int exit_for_stage(const std::string& stage) {
  if (stage == "config") return kExitConfig;
  if (stage == "fetch" || stage == "prepare_static") return kExitFetch;
  if (stage == "output") return kExitOutput;
  return kExitInference;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : sep) + s;
  return out;
}

std::string cascade_text(const TransformSpec& spec) {
  if (spec.empty()) return "-";
  std::vector<std::string> steps;
  for (std::size_t k = 0; k < spec.functions.size(); ++k) {
    const std::string& args = k < spec.kwargs.size() ? spec.kwargs[k] : std::string{};
    steps.push_back(args.empty() ? spec.functions[k] : spec.functions[k] + " " + args);
  }
  return join(steps, " -> ");
}

// Carries the stage and variable a failure belongs to.
struct StageError {
  std::string stage;
  std::string variable;
  Error error;
};

class Run {
 public:
  Run(const RunOptions& opts, Logger& log) : opts_(opts), log_(log) {}

  RunResult execute();

 private:
  template <typename F>
  auto stage(const std::string& name, const std::string& variable, F&& fn) -> decltype(fn()) {
    try {
      return fn();
    } catch (const Error& e) {
      throw StageError{name, variable, e};
    } catch (const std::exception& e) {
      throw StageError{name, variable, Error(Errc::IoFailure, variable, e.what())};
    }
  }

  void load_config();
  void load_model();
  void prepare_statics();
  void collect();
  void stack();
  void load_snapshot();
  void infer_and_write();

  fs::path output_dir() const {
    return opts_.output_dir ? fs::path(*opts_.output_dir) : cfg_.pilot.resolve(cfg_.pilot.output_dir);
  }
  fs::path cache_root() const {
    const fs::path base = opts_.cache_dir ? fs::path(*opts_.cache_dir) : cfg_.pilot.resolve(cfg_.pilot.cache_dir);
    return base / cfg_.pilot.site_name;
  }
  DataStore& store();

  const RunOptions& opts_;
  Logger& log_;
  Date date_{};
  LoadedConfig cfg_;
  TransformRegistry registry_;
  PipelineEnv env_;
  std::vector<std::string> features_;
  std::vector<Date> dates_;
  std::optional<LoadedModel> model_;
  std::optional<DataStore> store_;
  std::vector<ProvenanceRecord> provenance_;
  std::optional<SampleTensor> sample_;
  RunResult result_;
};

DataStore& Run::store() {
  if (store_) return *store_;
  const PilotConfig& p = cfg_.pilot;
  std::optional<std::string> location = opts_.datastore_url ? opts_.datastore_url : p.datastore_url;
  if (!location) {
    throw Error(Errc::BadConfig, "datastore_url", "set [site] datastore_url or OPCAST_DATASTORE_URL");
  }
  if (p.datastore_class == "directory") location = p.resolve(*location).string();
  store_.emplace(make_datastore_client(p.datastore_class, *location), cfg_.library.base_dir);
  return *store_;
}

void Run::load_config() {
  stage("config", "", [&] {
    if (!opts_.date) throw Error(Errc::BadDate, "--date", "a forecast date is required");
    date_ = *opts_.date;
    const bool infer = opts_.geojson || opts_.netcdf;
    if (!infer && !opts_.prepare_static && !(opts_.collect_data && opts_.save_input)) {
      throw Error(Errc::BadConfig, "outputs", "pass --geojson and/or --netcdf (or a data-preparation flag)");
    }
    cfg_ = load_configs(opts_.conf);
    const PilotConfig& p = cfg_.pilot;
    registry_ = registry_for_class(p.processing_class);
    for (const auto& name : p.variables) check_cascade(name, cfg_.library.at(name).processing, registry_);
    features_ = p.model.features.empty() ? p.variables : p.model.features;
    env_.locals = p.locals;
    if (!p.model.stats_path.empty()) {
      env_.stats = std::make_shared<ScalingStats>(ScalingStats::load(p.resolve(p.model.stats_path)));
    }
    log_.info({{"stage", "config"}, {"pilot", p.site_name}, {"date", format_date(date_)},
               {"variables", join(p.variables, ",")}, {"features", join(features_, ",")}});
  });
}

void Run::load_model() {
  stage("model", "", [&] {
    const auto started = Clock::now();
    const PilotConfig& p = cfg_.pilot;
    model_ = load_weights(p.resolve(p.model.weights_path));
    ModelConfig& mc = model_->config;
    mc.thresholds = p.model.thresholds;
    mc.validate();
    if (p.model.days && *p.model.days != mc.days) {
      throw Error(Errc::ShapeMismatch, "days",
                  "pilot asks for " + std::to_string(*p.model.days) + " days, weights expect " +
                      std::to_string(mc.days));
    }
    if (static_cast<int>(features_.size()) != mc.nf) {
      throw Error(Errc::ShapeMismatch, "nf",
                  std::to_string(features_.size()) + " features configured, weights expect " + std::to_string(mc.nf));
    }
    log_.info({{"stage", "model"}, {"nf", std::to_string(mc.nf)}, {"days", std::to_string(mc.days)},
               {"hidden", std::to_string(mc.hidden)}, {"kernel", std::to_string(mc.kernel)},
               {"elapsed_ms", elapsed_ms(started)}});
  });
}

void Run::prepare_statics() {
  const auto started = Clock::now();
  auto prepared = stage("prepare_static", "", [&] {
    return prepare_static(cfg_.pilot, cfg_.library, store(), registry_, env_, cache_root(), date_);
  });
  for (const auto& r : prepared.records) {
    Fields f{{"stage", "prepare_static"}, {"variable", r.variable}, {"cache", r.cache_hit ? "hit" : "stored"}};
    if (r.fetch) f.emplace_back("served", format_date(r.fetch->served));
    log_.info(f);
  }
  log_.info({{"stage", "prepare_static"}, {"cache", cache_root().string()},
             {"entries", std::to_string(prepared.cache.entries().size())}, {"elapsed_ms", elapsed_ms(started)}});
}

void Run::collect() {
  const StaticCache cache(cache_root());
  for (const auto& name : cfg_.pilot.variables) {
    const VariableSpec& spec = cfg_.library.at(name);
    env_.variable = name;
    if (spec.is_static) {
      if (auto cached = cache.lookup(name, cfg_.pilot.bbox)) {
        env_.consumed.insert_or_assign(name, std::move(*cached));
        log_.info({{"stage", "fetch"}, {"variable", name}, {"outcome", "cache"}});
        continue;
      }
    }
    const auto started = Clock::now();
    FetchResult r = stage("fetch", name, [&] { return store().fetch_variable(spec, date_, cfg_.pilot.bbox); });
    log_.info({{"stage", "fetch"},
               {"variable", name},
               {"outcome", r.fallback == Contingency::none ? "ok" : "fallback"},
               {"source", spec.gathering.source == Source::file ? "file" : "remote"},
               {"requested", format_date(r.requested)},
               {"served", format_date(r.served)},
               {"fallback", std::string(to_string(r.fallback))},
               {"elapsed_ms", elapsed_ms(started)}});
    if (spec.gathering.source == Source::remote && !spec.is_static) {
      provenance_.push_back({name, r.requested, r.served, r.fallback});
    }

    const auto t_started = Clock::now();
    Grid processed = stage("transform", name, [&] {
      return apply_cascade(spec.processing, r.grid, env_, registry_).renamed(name);
    });
    log_.info({{"stage", "transform"},
               {"variable", name},
               {"functions", spec.processing.empty() ? "-" : join(spec.processing.functions, ",")},
               {"elapsed_ms", elapsed_ms(t_started)}});
    env_.consumed.insert_or_assign(name, std::move(processed));
  }
}

void Run::stack() {
  stage("stack", "", [&] {
    const Grid& target = env_.consumed.at(cfg_.pilot.variables.front());
    std::vector<Grid> grids;
    std::vector<float> fill;
    for (const auto& f : features_) {
      const Grid& g = env_.consumed.at(f);
      grids.push_back(g.same_lat_lon(target) ? g : regrid_nearest(g, target.lat(), target.lon()));
      fill.push_back(env_.stats ? env_.stats->at(f).fill : 0.0f);
    }
    sample_ = stack_sample(grids, dates_, fill);
    log_.info({{"stage", "stack"},
               {"shape", std::to_string(sample_->nf) + "x" + std::to_string(sample_->days) + "x" +
                             std::to_string(sample_->h) + "x" + std::to_string(sample_->w)}});
  });
  if (opts_.save_input) {
    const fs::path path = output_dir() / snapshot_file_name(cfg_.pilot.site_name, date_);
    stage("output", "", [&] { write_input_snapshot(*sample_, path, cfg_.pilot.site_name, provenance_); });
    result_.written.push_back(path);
    log_.info({{"stage", "save_input"}, {"file", path.string()}});
  }
}

void Run::load_snapshot() {
  const fs::path path = output_dir() / snapshot_file_name(cfg_.pilot.site_name, date_);
  sample_ = stage("fetch", "", [&] {
    if (!fs::exists(path)) {
      throw Error(Errc::FileNotFound, path.string(), "no saved input; run with --collect_data first");
    }
    return read_input_snapshot(path, &provenance_);
  });
  stage("stack", "", [&] {
    if (sample_->features != features_ || sample_->dates != dates_) {
      throw Error(Errc::ShapeMismatch, path.string(), "saved input does not match the configured features or dates");
    }
  });
  log_.info({{"stage", "fetch"}, {"outcome", "snapshot"}, {"file", path.string()}});
}

void Run::infer_and_write() {
  const auto started = Clock::now();
  DangerMap map = stage("inference", "", [&] {
    InferOptions io;
    io.mode = cfg_.pilot.model.mode;
    io.patch = cfg_.pilot.model.patch;
    return infer_region(*sample_, model_->config, model_->weights, io);
  });
  map.pilot = cfg_.pilot.site_name;
  map.forecast_date = date_;
  map.provenance = provenance_;
  log_.info({{"stage", "inference"},
             {"mode", cfg_.pilot.model.mode == InferenceMode::dense ? "dense" : "patch"},
             {"provenance", format_provenance(provenance_)},
             {"elapsed_ms", elapsed_ms(started)}});

  stage("output", "", [&] {
    std::vector<PendingFile> files;
    const fs::path dir = output_dir();
    if (opts_.geojson) {
      const std::string text = geojson_text(map);
      files.push_back({dir / geojson_file_name(map.pilot, date_), {text.begin(), text.end()}});
    }
    if (opts_.netcdf) files.push_back({dir / netcdf_file_name(map.pilot, date_), encode_netcdf3(map)});
    commit_files(files);
    for (const auto& f : files) {
      result_.written.push_back(f.path);
      log_.info({{"stage", "output"}, {"file", f.path.string()}, {"bytes", std::to_string(f.bytes.size())}});
    }
  });
}

RunResult Run::execute() {
  const auto started = Clock::now();
  try {
    load_config();
    const bool infer = opts_.geojson || opts_.netcdf;
    if (infer) load_model();
    const int days = model_ ? model_->config.days : cfg_.pilot.model.days.value_or(1);
    dates_ = trailing_days(date_, days);
    Value::List date_list;
    for (Date d : dates_) date_list.emplace_back(format_date(d));
    env_.context.insert_or_assign("dates", Value(date_list));
    env_.context.insert_or_assign("date", Value(format_date(date_)));

    if (opts_.prepare_static) prepare_statics();
    if (opts_.collect_data) {
      collect();
      if (infer || opts_.save_input) stack();
    } else if (infer) {
      load_snapshot();
    }
    if (infer) infer_and_write();
  } catch (const StageError& e) {
    result_.exit_code = is_config_error(e.error.code()) ? kExitConfig : exit_for_stage(e.stage);
    result_.stage = e.stage;
    result_.variable = e.variable;
    result_.message = e.error.what();
    result_.code = e.error.code();
    Fields f{{"stage", e.stage}};
    if (!e.variable.empty()) f.emplace_back("variable", e.variable);
    f.emplace_back("code", std::string(to_string(e.error.code())));
    if (e.error.cause()) f.emplace_back("cause", std::string(to_string(*e.error.cause())));
    f.emplace_back("exit", std::to_string(result_.exit_code));
    f.emplace_back("message", e.error.what());
    log_.error(f);
    return result_;
  }
  log_.info({{"stage", "done"}, {"files", std::to_string(result_.written.size())}, {"elapsed_ms", elapsed_ms(started)}});
  return result_;
}

}  // namespace

void RunOptions::read_environment() {
  if (const char* v = std::getenv("OPCAST_DATASTORE_URL"); v && *v) datastore_url = v;
  if (const char* v = std::getenv("OPCAST_CACHE_DIR"); v && *v) cache_dir = v;
  if (const char* v = std::getenv("OPCAST_OUTPUT_DIR"); v && *v) output_dir = v;
}

void Logger::log(const std::string& level, const Fields& fields) {
  std::string line = "level=" + level;
  for (const auto& [k, v] : fields) {
    line += ' ' + k + '=';
    const bool quote = v.empty() || v.find_first_of(" =\"\t\n") != std::string::npos;
    if (!quote) {
      line += v;
      continue;
    }
    line += '"';
    for (char c : v) {
      if (c == '"' || c == '\\') line += '\\';
      if (c == '\n') {
        line += "\\n";
        continue;
      }
      line += c;
    }
    line += '"';
  }
  out_ << line << '\n' << std::flush;
}

RunResult run_pipeline(const RunOptions& opts, Logger& log) { return Run(opts, log).execute(); }

int validate_config(const fs::path& conf, std::ostream& out, Logger& log) {
  try {
    const LoadedConfig cfg = load_configs(conf);
    const PilotConfig& p = cfg.pilot;
    const TransformRegistry registry = registry_for_class(p.processing_class);
    if (p.datastore_class != "http" && p.datastore_class != "directory") {
      throw Error(Errc::UnknownDatastoreClass, p.datastore_class, "expected 'http' or 'directory'");
    }
    for (const auto& name : p.variables) {
      const TransformSpec& spec = cfg.library.at(name).processing;
      check_cascade(name, spec, registry);
      for (const auto& k : spec.kwargs) parse_kwargs_string(k);
    }
    validate_thresholds(p.model.thresholds);
    if (!fs::exists(p.resolve(p.model.weights_path))) {
      throw Error(Errc::FileNotFound, p.resolve(p.model.weights_path).string(), "model weights");
    }
    if (!p.model.stats_path.empty() && !fs::exists(p.resolve(p.model.stats_path))) {
      throw Error(Errc::FileNotFound, p.resolve(p.model.stats_path).string(), "scaling statistics");
    }

    out << "pilot      " << p.site_name << '\n';
    out << "bbox       lat " << p.bbox.lat_min << ".." << p.bbox.lat_max << ", lon " << p.bbox.lon_min << ".."
        << p.bbox.lon_max << '\n';
    out << "datastore  " << p.datastore_class << " / processing " << p.processing_class << '\n';
    out << "features   " << join(p.model.features.empty() ? p.variables : p.model.features, ", ") << "\n\n";

    std::vector<std::array<std::string, 6>> rows{{"variable", "static", "source", "dataset/path", "contingency",
                                                  "transforms"}};
    for (const auto& name : p.variables) {
      const VariableSpec& v = cfg.library.at(name);
      const bool file = v.gathering.source == Source::file;
      rows.push_back({name, v.is_static ? "yes" : "no", file ? "file" : "remote",
                      file ? v.gathering.path.value_or("") : v.gathering.dataset, std::string(to_string(v.contingency)),
                      cascade_text(v.processing)});
    }
    std::array<std::size_t, 6> width{};
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    for (std::size_t k = 0; k < rows.size(); ++k) {
      std::string line;
      for (std::size_t c = 0; c < 6; ++c) {
        line += rows[k][c];
        if (c + 1 < 6) line += std::string(width[c] - rows[k][c].size() + 2, ' ');
      }
      out << line << '\n';
      if (k == 0) out << std::string(line.size(), '-') << '\n';
    }
    out << "\nok: " << p.variables.size() << " variables validated\n";
    return kExitOk;
  } catch (const Error& e) {
    log.error({{"stage", "validate"}, {"code", std::string(to_string(e.code()))}, {"subject", e.subject()},
               {"exit", std::to_string(kExitConfig)}, {"message", e.what()}});
    return kExitConfig;
  }
}

}  // namespace opcast
