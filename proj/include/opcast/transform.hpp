#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "opcast/config.hpp"
#include "opcast/grid.hpp"
#include "opcast/kwargs.hpp"

namespace opcast {

struct FeatureStats {
  double mean = 0.0;
  double std = 1.0;
  /// Post-scaling value written where the input is missing.
  float fill = 0.0f;
};

/// Training-set moments per feature. Every std is > 0.
class ScalingStats {
 public:
  ScalingStats() = default;
  explicit ScalingStats(std::map<std::string, FeatureStats> entries);

  /// JSON object: feature -> {"mean": m, "std": s, "fill": f}; `fill` defaults to 0.
  static ScalingStats parse(std::string_view json_text);
  static ScalingStats load(const std::filesystem::path& path);

  const FeatureStats& at(const std::string& feature) const;
  bool contains(const std::string& feature) const { return entries_.contains(feature); }
  const std::map<std::string, FeatureStats>& entries() const { return entries_; }

 private:
  std::map<std::string, FeatureStats> entries_;
};

/// Everything a transform may read besides its input grid.
struct PipelineEnv {
  std::map<std::string, Grid> consumed;
  ValueMap context;
  ValueMap locals;
  std::shared_ptr<const ScalingStats> stats;
  /// Variable whose cascade is running.
  std::string variable;

  std::set<std::string> consumed_names() const;
};

/// Typed access to resolved arguments, dereferencing grid and context refs.
class TransformArgs {
 public:
  TransformArgs(const ResolvedArgs& args, const PipelineEnv& env) : args_(args), env_(env) {}

  bool has(const std::string& key) const { return args_.contains(key); }
  const Grid& grid(const std::string& key) const;
  std::vector<const Grid*> grids(const std::string& key) const;
  const Value& value(const std::string& key) const;
  std::string string(const std::string& key) const;
  std::string string_or(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key) const;
  std::vector<Date> dates(const std::string& key) const;
  const PipelineEnv& env() const { return env_; }

 private:
  const ResolvedValue& raw(const std::string& key) const;

  const ResolvedArgs& args_;
  const PipelineEnv& env_;
};

using TransformFn = std::function<Grid(const Grid& input, const TransformArgs& args)>;

/// Named transform library. Frozen once a pipeline starts using it.
class TransformRegistry {
 public:
  /// Throws DuplicateTransform.
  void register_transform(const std::string& name, TransformFn fn);
  bool contains(const std::string& name) const { return entries_.contains(name); }
  /// Throws UnknownTransform.
  const TransformFn& at(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, TransformFn> entries_;
};

/// The transforms used by the fire-danger use case.
TransformRegistry builtin_registry();

/// Processing classes selectable per pilot (`processing_class`).
TransformRegistry registry_for_class(const std::string& processing_class);

/// Runs fN(...f2(f1(input))...), resolving each step's kwargs right before
/// invoking it. Failures inside a step surface as TransformFailed(name).
Grid apply_cascade(const TransformSpec& spec, const Grid& input, const PipelineEnv& env,
                   const TransformRegistry& registry);

/// Reports the first unknown transform in `spec` as UnknownTransform, with
/// the cascade position in the message.
void check_cascade(const std::string& variable, const TransformSpec& spec, const TransformRegistry& registry);

// Built-in transforms, callable directly.

enum class AggregateMode { max, min };

Grid wind_speed_from_uv(const Grid& u, const Grid& v);
Grid daily_aggregate(const Grid& hourly, AggregateMode mode);
Grid fill_time_dimension(const Grid& input, const std::vector<Date>& dates);
Grid compute_slope(const Grid& dem);
Grid relative_humidity(const Grid& t2m, const Grid& d2m);
Grid standardize(const Grid& input, const ScalingStats& stats, const std::string& feature);
/// Inverse of standardize for non-missing cells.
Grid destandardize(const Grid& input, const ScalingStats& stats, const std::string& feature);

inline constexpr double kMetersPerDegree = 111320.0;
inline constexpr double kMagnusA = 17.625;
inline constexpr double kMagnusB = 243.04;

}  // namespace opcast
