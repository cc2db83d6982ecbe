#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "opcast/date.hpp"

namespace opcast {

/// Geographic bounding box in degrees. Construction validates
/// lat_min < lat_max and lon_min < lon_max (Error BadBBox).
struct BBox {
  double lat_min = 0.0;
  double lat_max = 0.0;
  double lon_min = 0.0;
  double lon_max = 0.0;

  static BBox make(double lat_min, double lat_max, double lon_min, double lon_max);
  /// Query form used on the wire: `latmin,lonmin,latmax,lonmax`.
  static BBox parse(std::string_view text);
  std::string to_query() const;

  friend bool operator==(const BBox&, const BBox&) = default;
};

inline constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();

/// Named, unit-carrying float32 field over (time?, lat, lon).
///
/// Dimensions are always ordered (time, lat, lon) with the time axis
/// optional: a grid without one is static. Coordinates are strictly
/// ascending. Values are stored row-major in dimension order.
class Grid {
 public:
  Grid() = default;

  static Grid make_static(std::string name, std::string units, std::vector<double> lat, std::vector<double> lon,
                          std::vector<float> values, float missing = kNaN);
  static Grid make_timed(std::string name, std::string units, std::vector<TimePoint> time, std::vector<double> lat,
                         std::vector<double> lon, std::vector<float> values, float missing = kNaN);

  /// Same coordinates and missing sentinel as `like`, new payload and metadata.
  static Grid like(const Grid& like, std::string name, std::string units, std::vector<float> values);

  const std::string& name() const noexcept { return name_; }
  const std::string& units() const noexcept { return units_; }
  bool has_time() const noexcept { return has_time_; }
  const std::vector<TimePoint>& time() const noexcept { return time_; }
  const std::vector<double>& lat() const noexcept { return lat_; }
  const std::vector<double>& lon() const noexcept { return lon_; }
  const std::vector<float>& values() const noexcept { return values_; }
  float missing() const noexcept { return missing_; }

  std::size_t nt() const noexcept { return has_time_ ? time_.size() : 1; }
  std::size_t ny() const noexcept { return lat_.size(); }
  std::size_t nx() const noexcept { return lon_.size(); }
  std::size_t plane() const noexcept { return ny() * nx(); }

  float at(std::size_t t, std::size_t i, std::size_t j) const { return values_[(t * ny() + i) * nx() + j]; }
  float at(std::size_t i, std::size_t j) const { return values_[i * nx() + j]; }
  std::span<const float> slice(std::size_t t) const { return {values_.data() + t * plane(), plane()}; }

  bool is_missing(float v) const noexcept {
    return std::isnan(v) || (!std::isnan(missing_) && v == missing_);
  }

  bool same_lat_lon(const Grid& other) const noexcept { return lat_ == other.lat_ && lon_ == other.lon_; }

  Grid renamed(std::string name) const;

 private:
  void validate() const;

  std::string name_;
  std::string units_;
  bool has_time_ = false;
  std::vector<TimePoint> time_;
  std::vector<double> lat_;
  std::vector<double> lon_;
  std::vector<float> values_;
  float missing_ = kNaN;
};

/// Structural equality comparing payloads bit-for-bit (so NaN == NaN when
/// the bit patterns agree).
bool bit_equal(const Grid& a, const Grid& b);

/// Dense (nf, days, h, w) model input with h <-> lat and w <-> lon.
struct SampleTensor {
  std::size_t nf = 0;
  std::size_t days = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<float> values;
  std::vector<std::string> features;
  std::vector<Date> dates;
  std::vector<double> lat;
  std::vector<double> lon;

  std::size_t index(std::size_t f, std::size_t d, std::size_t i, std::size_t j) const {
    return ((f * days + d) * h + i) * w + j;
  }
  float at(std::size_t f, std::size_t d, std::size_t i, std::size_t j) const { return values[index(f, d, i, j)]; }
};

/// Coordinates inside [min, max] inclusive; no interpolation. Throws EmptyCrop.
Grid crop_bbox(const Grid& g, const BBox& b);

/// Nearest source cell per target cell (Euclidean in degree space, ties
/// toward the smaller coordinate). Missing values propagate.
Grid regrid_nearest(const Grid& g, const std::vector<double>& target_lat, const std::vector<double>& target_lon);

/// Selects the midnight time steps for `dates`; throws MissingDate.
Grid align_time(const Grid& g, const std::vector<Date>& dates);

/// Stacks features into (nf, days, h, w). Static grids are broadcast along
/// days. Missing cells take `fill[f]` when a fill vector is given.
SampleTensor stack_sample(const std::vector<Grid>& grids, const std::vector<Date>& dates,
                          std::span<const float> fill = {});

// OPGRID snapshot / wire codec:
//   "OPGR" | version u8 | header length u32 LE | JSON header | float32 LE payload
inline constexpr std::uint8_t kOpgridVersion = 1;

std::vector<std::uint8_t> encode_opgrid(const Grid& g);
Grid decode_opgrid(std::span<const std::uint8_t> bytes);

Grid read_opgrid_file(const std::string& path);
void write_opgrid_file(const Grid& g, const std::string& path);

}  // namespace opcast
