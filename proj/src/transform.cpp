#include "opcast/transform.hpp"

#include <json.hpp>

#include "opcast/error.hpp"
#include "opcast/io.hpp"

namespace opcast {

ScalingStats::ScalingStats(std::map<std::string, FeatureStats> entries) : entries_(std::move(entries)) {
  for (const auto& [name, s] : entries_) {
    if (!(s.std > 0.0) || !std::isfinite(s.std)) throw Error(Errc::ZeroSigma, name, "std must be > 0");
    if (!std::isfinite(s.mean)) throw Error(Errc::BadArgument, name, "mean must be finite");
  }
}

ScalingStats ScalingStats::parse(std::string_view json_text) {
  std::map<std::string, FeatureStats> entries;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    for (const auto& [name, item] : doc.items()) {
      FeatureStats s;
      s.mean = item.at("mean").get<double>();
      s.std = item.at("std").get<double>();
      s.fill = item.value("fill", 0.0f);
      entries.emplace(name, s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadConfig, "stats", e.what());
  }
  return ScalingStats(std::move(entries));
}

ScalingStats ScalingStats::load(const std::filesystem::path& path) { return parse(read_file_text(path)); }

const FeatureStats& ScalingStats::at(const std::string& feature) const {
  auto it = entries_.find(feature);
  if (it == entries_.end()) throw Error(Errc::UnknownFeature, feature, "no scaling statistics");
  return it->second;
}

std::set<std::string> PipelineEnv::consumed_names() const {
  std::set<std::string> out;
  for (const auto& [name, _] : consumed) out.insert(name);
  return out;
}

const ResolvedValue& TransformArgs::raw(const std::string& key) const {
  auto it = args_.find(key);
  if (it == args_.end()) throw Error(Errc::BadArgument, key, "missing argument");
  return it->second;
}

const Grid& TransformArgs::grid(const std::string& key) const {
  const auto& r = raw(key);
  const auto* ref = std::get_if<GridRef>(&r);
  if (!ref) throw Error(Errc::BadArgument, key, "expected a single variable reference");
  auto it = env_.consumed.find(ref->name);
  if (it == env_.consumed.end()) throw Error(Errc::DanglingGridRef, ref->name);
  return it->second;
}

std::vector<const Grid*> TransformArgs::grids(const std::string& key) const {
  const auto& r = raw(key);
  std::vector<GridRef> refs;
  if (const auto* one = std::get_if<GridRef>(&r)) {
    refs.push_back(*one);
  } else if (const auto* many = std::get_if<std::vector<GridRef>>(&r)) {
    refs = *many;
  } else {
    throw Error(Errc::BadArgument, key, "expected variable references");
  }
  std::vector<const Grid*> out;
  for (const auto& ref : refs) {
    auto it = env_.consumed.find(ref.name);
    if (it == env_.consumed.end()) throw Error(Errc::DanglingGridRef, ref.name);
    out.push_back(&it->second);
  }
  return out;
}

const Value& TransformArgs::value(const std::string& key) const {
  const auto& r = raw(key);
  if (const auto* v = std::get_if<Value>(&r)) return *v;
  if (const auto* c = std::get_if<ContextRef>(&r)) {
    auto it = env_.context.find(c->name);
    if (it == env_.context.end()) throw Error(Errc::UnresolvedReference, c->name);
    return it->second;
  }
  throw Error(Errc::BadArgument, key, "expected a value, got a variable reference");
}

std::string TransformArgs::string(const std::string& key) const { return value(key).as_string(); }

std::string TransformArgs::string_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? string(key) : fallback;
}

double TransformArgs::number(const std::string& key) const { return value(key).as_number(); }

std::vector<Date> TransformArgs::dates(const std::string& key) const {
  const Value& v = value(key);
  std::vector<Date> out;
  if (v.is_string()) {
    out.push_back(parse_date(v.as_string()));
  } else {
    for (const auto& item : v.as_list()) out.push_back(parse_date(item.as_string()));
  }
  return out;
}

void TransformRegistry::register_transform(const std::string& name, TransformFn fn) {
  if (name.empty() || !fn) throw Error(Errc::BadArgument, name, "transform needs a name and a callable");
  if (!entries_.emplace(name, std::move(fn)).second) throw Error(Errc::DuplicateTransform, name);
}

const TransformFn& TransformRegistry::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error(Errc::UnknownTransform, name);
  return it->second;
}

std::vector<std::string> TransformRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

TransformRegistry registry_for_class(const std::string& processing_class) {
  if (processing_class == "fdi" || processing_class == "builtin") return builtin_registry();
  throw Error(Errc::UnknownProcessingClass, processing_class);
}

void check_cascade(const std::string& variable, const TransformSpec& spec, const TransformRegistry& registry) {
  for (std::size_t k = 0; k < spec.functions.size(); ++k) {
    if (!registry.contains(spec.functions[k])) {
      throw Error(Errc::UnknownTransform, spec.functions[k],
                  "variable `" + variable + "`, cascade position " + std::to_string(k + 1));
    }
  }
}

Grid apply_cascade(const TransformSpec& spec, const Grid& input, const PipelineEnv& env,
                   const TransformRegistry& registry) {
  check_cascade(env.variable, spec, registry);
  const std::set<std::string> consumed = env.consumed_names();
  Grid current = input;
  for (std::size_t k = 0; k < spec.functions.size(); ++k) {
    const std::string& name = spec.functions[k];
    const ResolvedArgs resolved =
        resolve_args(parse_kwargs_string(k < spec.kwargs.size() ? spec.kwargs[k] : ""), env.locals, env.context,
                     consumed);
    try {
      current = registry.at(name)(current, TransformArgs(resolved, env));
    } catch (const Error& e) {
      throw Error(Errc::TransformFailed, name, e.what()).with_cause(e.code());
    } catch (const std::exception& e) {
      throw Error(Errc::TransformFailed, name, e.what());
    }
  }
  return current;
}

}  // namespace opcast
