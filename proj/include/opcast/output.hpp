#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "opcast/grid.hpp"
#include "opcast/inference.hpp"
#include "opcast/netcdf.hpp"

namespace opcast {

/// Cell edges along one axis: midpoints between neighbours, extended by
/// half a spacing at both ends. A single coordinate uses `fallback_spacing`.
std::vector<double> cell_edges(const std::vector<double>& coords, double fallback_spacing);

/// FeatureCollection with one Polygon per cell, row-major (lat, then lon).
/// Properties: p_fire, category, date, lat, lon. Numbers use 6 decimals.
std::string geojson_text(const DangerMap& map, bool suppress_category_1 = false);
void write_geojson(const DangerMap& map, const std::filesystem::path& path, bool suppress_category_1 = false);

/// CDF-1 layout of a danger map:
///   dims       time = 1, lat, lon
///   variables  time (double, days since 1970-01-01), lat, lon (double),
///              p_fire (float), category (int, with a `thresholds` attribute)
///   globals    Conventions, title, pilot, forecast_date, fallback_provenance
nc::File danger_netcdf(const DangerMap& map);
std::vector<std::uint8_t> encode_netcdf3(const DangerMap& map);
void write_netcdf3(const DangerMap& map, const std::filesystem::path& path);
/// p_nofire is reconstructed as 1 - p_fire.
DangerMap decode_netcdf3_danger(std::span<const std::uint8_t> bytes);
DangerMap read_netcdf3_danger(const std::filesystem::path& path);

/// Input snapshot: dims (feature, time, lat, lon), variable `sample`, global
/// attributes `features` (comma-joined names in channel order) and
/// `fallback_provenance`. Throws EmptySample for a sample without features.
nc::File snapshot_netcdf(const SampleTensor& sample, const std::string& pilot = {},
                         const std::vector<ProvenanceRecord>& provenance = {});
std::vector<std::uint8_t> encode_input_snapshot(const SampleTensor& sample, const std::string& pilot = {},
                                                const std::vector<ProvenanceRecord>& provenance = {});
void write_input_snapshot(const SampleTensor& sample, const std::filesystem::path& path, const std::string& pilot = {},
                          const std::vector<ProvenanceRecord>& provenance = {});
/// Fills `provenance` when given and the file records one.
SampleTensor decode_input_snapshot(std::span<const std::uint8_t> bytes,
                                   std::vector<ProvenanceRecord>* provenance = nullptr);
SampleTensor read_input_snapshot(const std::filesystem::path& path, std::vector<ProvenanceRecord>* provenance = nullptr);

/// One daily grid per feature, the inverse of stack_sample.
std::vector<Grid> unstack_sample(const SampleTensor& sample);

/// Per-pixel maximum of p_fire over the last `window` maps.
/// Throws WindowTooLarge (window == 0 or > maps.size()) or GridMismatch.
Grid fdi_window_max(const std::vector<DangerMap>& maps, std::size_t window);

std::string geojson_file_name(const std::string& pilot, Date date);
std::string netcdf_file_name(const std::string& pilot, Date date);
std::string snapshot_file_name(const std::string& pilot, Date date);

}  // namespace opcast
