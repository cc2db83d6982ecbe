#include "opcast/config.hpp"

#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "opcast/error.hpp"
#include "opcast/io.hpp"

namespace opcast {

namespace fs = std::filesystem;

std::string_view to_string(Contingency c) {
  switch (c) {
    case Contingency::none: return "none";
    case Contingency::latest_date: return "latest-date";
    case Contingency::preceding_year: return "preceding-year";
  }
  return "none";
}

Contingency parse_contingency(std::string_view text) {
  if (text == "none") return Contingency::none;
  if (text == "latest-date") return Contingency::latest_date;
  if (text == "preceding-year") return Contingency::preceding_year;
  throw Error(Errc::BadContingency, std::string(text), "expected latest-date, preceding-year or none");
}

const VariableSpec& DataStoreConfig::at(const std::string& name) const {
  auto it = variables.find(name);
  if (it == variables.end()) throw Error(Errc::UnknownVariable, name);
  return it->second;
}

fs::path PilotConfig::resolve(const std::string& p) const {
  fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

namespace {

const std::set<std::string> kGatheringKeys{"source", "dataset", "path", "open_with"};

toml::table parse_toml(std::string_view text) {
  try {
    return toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw Error(Errc::TomlSyntax, "line " + std::to_string(e.source().begin.line), std::string(e.description()));
  }
}

std::string stringify(const toml::node& node) {
  if (auto s = node.value<std::string>(); s && node.is_string()) return *s;
  std::ostringstream ss;
  node.visit([&](const auto& n) { ss << n; });
  return ss.str();
}

std::string require_string(const toml::node& node, const std::string& where) {
  if (!node.is_string()) throw Error(Errc::BadConfig, where, "expected a string");
  return *node.value<std::string>();
}

std::vector<std::string> string_array(const toml::node& node, const std::string& where) {
  const auto* arr = node.as_array();
  if (!arr) throw Error(Errc::BadConfig, where, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& item : *arr) out.push_back(require_string(item, where));
  return out;
}

double require_number(const toml::node& node, const std::string& where) {
  if (auto v = node.value<double>(); v && (node.is_floating_point() || node.is_integer())) return *v;
  throw Error(Errc::BadConfig, where, "expected a number");
}

Value to_value(const toml::node& node, const std::string& where) {
  if (node.is_integer()) return Value(*node.value<std::int64_t>());
  if (node.is_floating_point()) return Value(*node.value<double>());
  if (node.is_boolean()) return Value(*node.value<bool>());
  if (node.is_string()) return Value(*node.value<std::string>());
  if (const auto* arr = node.as_array()) {
    Value::List items;
    for (const auto& item : *arr) items.push_back(to_value(item, where));
    return Value(std::move(items));
  }
  if (node.is_date() || node.is_time() || node.is_date_time()) return Value(stringify(node));
  throw Error(Errc::BadConfig, where, "tables are not allowed here");
}

GatheringSpec parse_gathering(const std::string& var, const toml::table& tbl) {
  if (tbl.empty()) throw Error(Errc::MissingGathering, var, "gathering section is empty");
  GatheringSpec g;
  for (const auto& [k, node] : tbl) {
    const std::string key(k.str());
    const std::string where = "variables." + var + ".gathering." + key;
    if (key == "source") {
      const std::string src = require_string(node, where);
      if (src == "remote" || src == "dds") {
        g.source = Source::remote;
      } else if (src == "file") {
        g.source = Source::file;
      } else {
        throw Error(Errc::BadConfig, where, "unknown source `" + src + "`");
      }
    } else if (key == "dataset") {
      g.dataset = require_string(node, where);
    } else if (key == "path") {
      g.path = require_string(node, where);
    } else if (key == "open_with") {
      g.open_with = require_string(node, where);
    } else if (node.is_table()) {
      throw Error(Errc::BadConfig, where, "unexpected section");
    } else {
      g.request_params[key] = stringify(node);
    }
  }
  if (g.source == Source::file && (!g.path || !g.open_with)) {
    throw Error(Errc::MissingGathering, var, "source = file requires path and open_with");
  }
  if (g.source == Source::remote && g.dataset.empty()) {
    throw Error(Errc::MissingGathering, var, "remote source requires a dataset");
  }
  return g;
}

TransformSpec parse_processing(const std::string& var, const toml::table& tbl) {
  TransformSpec spec;
  bool have_kwargs = false;
  for (const auto& [k, node] : tbl) {
    const std::string key(k.str());
    const std::string where = "variables." + var + ".processing." + key;
    if (key == "functions") {
      spec.functions = string_array(node, where);
    } else if (key == "kwargs") {
      spec.kwargs = string_array(node, where);
      have_kwargs = true;
    } else {
      throw Error(Errc::BadConfig, where, "unknown processing key");
    }
  }
  if (!have_kwargs) spec.kwargs.assign(spec.functions.size(), "");
  if (spec.kwargs.size() != spec.functions.size()) {
    throw Error(Errc::BadConfig, "variables." + var + ".processing",
                "functions and kwargs must have the same length");
  }
  return spec;
}

VariableSpec parse_variable(const std::string& name, const toml::table& tbl) {
  if (name.empty()) throw Error(Errc::BadConfig, "variables", "variable names must be non-empty");
  VariableSpec spec;
  spec.name = name;
  const toml::table* gathering = nullptr;
  std::map<std::string, std::string> extra;
  for (const auto& [k, node] : tbl) {
    const std::string key(k.str());
    const std::string where = "variables." + name + "." + key;
    if (key == "gathering") {
      gathering = node.as_table();
      if (!gathering) throw Error(Errc::BadConfig, where, "expected a table");
    } else if (key == "processing") {
      const auto* p = node.as_table();
      if (!p) throw Error(Errc::BadConfig, where, "expected a table");
      spec.processing = parse_processing(name, *p);
    } else if (key == "static") {
      if (!node.is_boolean()) throw Error(Errc::BadConfig, where, "expected a boolean");
      spec.is_static = *node.value<bool>();
    } else if (key == "contingency") {
      spec.contingency = parse_contingency(require_string(node, where));
    } else if (node.is_table()) {
      throw Error(Errc::BadConfig, where, "unknown section");
    } else if (kGatheringKeys.contains(key)) {
      throw Error(Errc::BadConfig, where, "belongs in the gathering section");
    } else {
      extra[key] = stringify(node);
    }
  }
  if (!gathering) throw Error(Errc::MissingGathering, name);
  spec.gathering = parse_gathering(name, *gathering);
  for (auto& [k, v] : extra) {
    if (!spec.gathering.request_params.emplace(k, v).second) {
      throw Error(Errc::BadConfig, "variables." + name + "." + k, "also given in gathering");
    }
  }
  return spec;
}

}  // namespace

DataStoreConfig parse_datastore_config(std::string_view toml_text) {
  const toml::table root = parse_toml(toml_text);
  DataStoreConfig cfg;
  for (const auto& [k, node] : root) {
    if (k.str() != "variables") throw Error(Errc::BadConfig, std::string(k.str()), "unknown top-level section");
    const auto* vars = node.as_table();
    if (!vars) throw Error(Errc::BadConfig, "variables", "expected a table");
    for (const auto& [name, var] : *vars) {
      const auto* tbl = var.as_table();
      if (!tbl) throw Error(Errc::BadConfig, "variables." + std::string(name.str()), "expected a table");
      cfg.variables.emplace(std::string(name.str()), parse_variable(std::string(name.str()), *tbl));
    }
  }
  return cfg;
}

DataStoreConfig load_datastore_config(const fs::path& path) {
  DataStoreConfig cfg = parse_datastore_config(read_file_text(path));
  cfg.base_dir = path.parent_path();
  return cfg;
}

std::string serialize_datastore_config(const DataStoreConfig& cfg) {
  toml::table vars;
  for (const auto& [name, spec] : cfg.variables) {
    toml::table gathering;
    gathering.insert("source", spec.gathering.source == Source::file ? "file" : "remote");
    if (!spec.gathering.dataset.empty()) gathering.insert("dataset", spec.gathering.dataset);
    if (spec.gathering.path) gathering.insert("path", *spec.gathering.path);
    if (spec.gathering.open_with) gathering.insert("open_with", *spec.gathering.open_with);
    for (const auto& [k, v] : spec.gathering.request_params) gathering.insert(k, v);

    toml::table var;
    var.insert("static", spec.is_static);
    var.insert("contingency", std::string(to_string(spec.contingency)));
    var.insert("gathering", std::move(gathering));
    if (!spec.processing.empty()) {
      toml::array functions, kwargs;
      for (const auto& f : spec.processing.functions) functions.push_back(f);
      for (const auto& a : spec.processing.kwargs) kwargs.push_back(a);
      toml::table processing;
      processing.insert("functions", std::move(functions));
      processing.insert("kwargs", std::move(kwargs));
      var.insert("processing", std::move(processing));
    }
    vars.insert(name, std::move(var));
  }
  toml::table root;
  root.insert("variables", std::move(vars));
  std::ostringstream ss;
  ss << toml::toml_formatter{root, toml::toml_formatter::default_flags & ~toml::format_flags::allow_multi_line_strings}
     << '\n';
  return ss.str();
}

namespace {

BBox parse_bbox(const toml::node* node) {
  const auto* tbl = node ? node->as_table() : nullptr;
  if (!tbl) throw Error(Errc::BadBBox, "site.bbox", "missing bbox table");
  double v[4];
  const char* keys[4] = {"lat_min", "lat_max", "lon_min", "lon_max"};
  for (int k = 0; k < 4; ++k) {
    const auto* n = tbl->get(keys[k]);
    if (!n) throw Error(Errc::BadBBox, std::string("site.bbox.") + keys[k], "missing");
    v[k] = require_number(*n, std::string("site.bbox.") + keys[k]);
  }
  for (const auto& [k, _] : *tbl) {
    const std::string key(k.str());
    if (key != "lat_min" && key != "lat_max" && key != "lon_min" && key != "lon_max") {
      throw Error(Errc::BadConfig, "site.bbox." + key, "unknown key");
    }
  }
  return BBox::make(v[0], v[1], v[2], v[3]);
}

void check_thresholds(const std::vector<double>& t) {
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(t[k] > 0.0 && t[k] < 1.0) || (k > 0 && !(t[k - 1] < t[k]))) {
      throw Error(Errc::BadThresholds, "model.thresholds", "must be strictly ascending inside (0, 1)");
    }
  }
}

ModelSettings parse_model(const toml::node* node) {
  const auto* tbl = node ? node->as_table() : nullptr;
  if (!tbl) throw Error(Errc::MissingModelPath, "model", "missing [model] section");
  ModelSettings m;
  bool have_weights = false;
  for (const auto& [k, n] : *tbl) {
    const std::string key(k.str());
    const std::string where = "model." + key;
    if (key == "weights") {
      m.weights_path = require_string(n, where);
      have_weights = !m.weights_path.empty();
    } else if (key == "stats") {
      m.stats_path = require_string(n, where);
    } else if (key == "days") {
      if (!n.is_integer() || *n.value<std::int64_t>() < 1) throw Error(Errc::BadConfig, where, "positive integer");
      m.days = static_cast<int>(*n.value<std::int64_t>());
    } else if (key == "thresholds") {
      const auto* arr = n.as_array();
      if (!arr) throw Error(Errc::BadThresholds, where, "expected an array");
      m.thresholds.clear();
      for (const auto& item : *arr) m.thresholds.push_back(require_number(item, where));
    } else if (key == "mode") {
      const std::string mode = require_string(n, where);
      if (mode == "dense") {
        m.mode = InferenceMode::dense;
      } else if (mode == "patch") {
        m.mode = InferenceMode::patch;
      } else {
        throw Error(Errc::BadConfig, where, "expected dense or patch");
      }
    } else if (key == "patch") {
      if (!n.is_integer() || *n.value<std::int64_t>() < 1 || *n.value<std::int64_t>() % 2 == 0) {
        throw Error(Errc::BadConfig, where, "positive odd integer");
      }
      m.patch = static_cast<int>(*n.value<std::int64_t>());
    } else if (key == "features") {
      m.features = string_array(n, where);
    } else {
      throw Error(Errc::BadConfig, where, "unknown key");
    }
  }
  if (!have_weights) throw Error(Errc::MissingModelPath, "model.weights");
  check_thresholds(m.thresholds);
  return m;
}

}  // namespace

std::string pilot_datastore_path(std::string_view toml_text) {
  const toml::table root = parse_toml(toml_text);
  if (auto p = root["site"]["datastore"].value<std::string>()) return *p;
  return "datastore.toml";
}

PilotConfig parse_pilot_config(std::string_view toml_text, const DataStoreConfig& library) {
  const toml::table root = parse_toml(toml_text);
  PilotConfig pilot;
  bool have_site = false;
  for (const auto& [k, node] : root) {
    const std::string key(k.str());
    if (key == "variables") {
      pilot.variables = string_array(node, "variables");
    } else if (key == "site") {
      have_site = true;
      const auto* site = node.as_table();
      if (!site) throw Error(Errc::BadConfig, "site", "expected a table");
      for (const auto& [sk, sn] : *site) {
        const std::string skey(sk.str());
        const std::string where = "site." + skey;
        if (skey == "name") pilot.site_name = require_string(sn, where);
        else if (skey == "bbox") pilot.bbox = parse_bbox(&sn);
        else if (skey == "datastore") pilot.datastore_path = require_string(sn, where);
        else if (skey == "datastore_class") pilot.datastore_class = require_string(sn, where);
        else if (skey == "processing_class") pilot.processing_class = require_string(sn, where);
        else if (skey == "datastore_url") pilot.datastore_url = require_string(sn, where);
        else if (skey == "output_dir") pilot.output_dir = require_string(sn, where);
        else if (skey == "cache_dir") pilot.cache_dir = require_string(sn, where);
        else throw Error(Errc::BadConfig, where, "unknown key");
      }
      if (!site->get("bbox")) throw Error(Errc::BadBBox, "site.bbox", "missing bbox table");
    } else if (key == "model") {
      pilot.model = parse_model(&node);
    } else if (key == "locals") {
      const auto* locals = node.as_table();
      if (!locals) throw Error(Errc::BadConfig, "locals", "expected a table");
      for (const auto& [lk, ln] : *locals) {
        pilot.locals.emplace(std::string(lk.str()), to_value(ln, "locals." + std::string(lk.str())));
      }
    } else {
      throw Error(Errc::BadConfig, key, "unknown top-level key");
    }
  }
  if (!have_site || pilot.site_name.empty()) throw Error(Errc::BadConfig, "site.name", "missing");
  if (!root.get("model")) throw Error(Errc::MissingModelPath, "model", "missing [model] section");
  if (pilot.datastore_path.empty()) pilot.datastore_path = "datastore.toml";

  std::set<std::string> seen;
  for (const auto& v : pilot.variables) {
    if (!library.variables.contains(v)) throw Error(Errc::UnknownVariable, v, "not in the data store library");
    if (!seen.insert(v).second) throw Error(Errc::BadConfig, "variables", "duplicate variable `" + v + "`");
  }
  if (pilot.model.features.empty()) {
    pilot.model.features = pilot.variables;
  } else {
    for (const auto& f : pilot.model.features) {
      if (!seen.contains(f)) throw Error(Errc::UnknownVariable, f, "model feature is not a pilot variable");
    }
  }
  return pilot;
}

LoadedConfig load_configs(const fs::path& pilot_path) {
  const std::string text = read_file_text(pilot_path);
  const fs::path base = pilot_path.parent_path();
  fs::path ds(pilot_datastore_path(text));
  if (ds.is_relative()) ds = base / ds;
  LoadedConfig out{PilotConfig{}, load_datastore_config(ds)};
  out.pilot = parse_pilot_config(text, out.library);
  out.pilot.base_dir = base;
  return out;
}

}  // namespace opcast
