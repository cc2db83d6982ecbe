#pragma once

// Deterministic generators for the bundled demo pilot and the NetCDF
// golden files. The generated files are checked in; tests regenerate them
// and compare bytes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "opcast/grid.hpp"
#include "opcast/inference.hpp"

namespace opcast::assets {

inline constexpr const char* kDemoDate = "2024-07-09";

/// 72 hourly steps ending at 23:00 on `date` over the 0.1 degree weather grid.
Grid hourly_weather(const std::string& variable, Date date);
/// Sparse vegetation-index grid on a 0.05 degree grid.
Grid ndvi_snapshot(Date request);
Grid demo_dem();

ModelConfig demo_model_config();
ConvLstmWeights demo_weights();
std::string demo_stats_json();

/// Relative path -> file contents for every generated demo file.
std::map<std::string, std::vector<std::uint8_t>> demo_files();
std::map<std::string, std::vector<std::uint8_t>> golden_files();

/// Writes `files` below `root`; returns how many differed from what was there.
int write_tree(const std::filesystem::path& root, const std::map<std::string, std::vector<std::uint8_t>>& files);

}  // namespace opcast::assets
