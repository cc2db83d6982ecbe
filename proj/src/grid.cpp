#include "opcast/grid.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>

#include "opcast/error.hpp"

namespace opcast {

namespace {

template <typename T>
bool strictly_ascending(const std::vector<T>& v) {
  return std::adjacent_find(v.begin(), v.end(), [](const T& a, const T& b) { return !(a < b); }) == v.end();
}

// Index of the nearest coordinate; ties go to the smaller coordinate.
std::size_t nearest_index(const std::vector<double>& coords, double x) {
  auto it = std::lower_bound(coords.begin(), coords.end(), x);
  if (it == coords.begin()) return 0;
  if (it == coords.end()) return coords.size() - 1;
  const auto hi = static_cast<std::size_t>(it - coords.begin());
  const auto lo = hi - 1;
  const double dlo = x - coords[lo];
  const double dhi = coords[hi] - x;
  return dhi < dlo ? hi : lo;
}

}  // namespace

BBox BBox::make(double lat_min, double lat_max, double lon_min, double lon_max) {
  if (!(lat_min < lat_max) || !(lon_min < lon_max)) {
    throw Error(Errc::BadBBox, {}, "requires lat_min < lat_max and lon_min < lon_max");
  }
  return BBox{lat_min, lat_max, lon_min, lon_max};
}

BBox BBox::parse(std::string_view text) {
  double v[4];
  std::size_t pos = 0;
  for (int k = 0; k < 4; ++k) {
    const std::size_t end = k < 3 ? text.find(',', pos) : text.size();
    if (end == std::string_view::npos) throw Error(Errc::BadBBox, std::string(text), "expected 4 values");
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + end, v[k]);
    if (ec != std::errc{} || ptr != text.data() + end) throw Error(Errc::BadBBox, std::string(text));
    pos = end + 1;
  }
  return make(v[0], v[2], v[1], v[3]);
}

std::string BBox::to_query() const {
  std::string out;
  char buf[32];
  for (double v : {lat_min, lon_min, lat_max, lon_max}) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (!out.empty()) out += ',';
    out.append(buf, ptr);
  }
  return out;
}

Grid Grid::make_static(std::string name, std::string units, std::vector<double> lat, std::vector<double> lon,
                       std::vector<float> values, float missing) {
  Grid g;
  g.name_ = std::move(name);
  g.units_ = std::move(units);
  g.has_time_ = false;
  g.lat_ = std::move(lat);
  g.lon_ = std::move(lon);
  g.values_ = std::move(values);
  g.missing_ = missing;
  g.validate();
  return g;
}

Grid Grid::make_timed(std::string name, std::string units, std::vector<TimePoint> time, std::vector<double> lat,
                      std::vector<double> lon, std::vector<float> values, float missing) {
  Grid g;
  g.name_ = std::move(name);
  g.units_ = std::move(units);
  g.has_time_ = true;
  g.time_ = std::move(time);
  g.lat_ = std::move(lat);
  g.lon_ = std::move(lon);
  g.values_ = std::move(values);
  g.missing_ = missing;
  g.validate();
  return g;
}

Grid Grid::like(const Grid& like, std::string name, std::string units, std::vector<float> values) {
  Grid g = like;
  g.name_ = std::move(name);
  g.units_ = std::move(units);
  g.values_ = std::move(values);
  g.validate();
  return g;
}

Grid Grid::renamed(std::string name) const {
  Grid g = *this;
  g.name_ = std::move(name);
  return g;
}

void Grid::validate() const {
  if (lat_.empty() || lon_.empty()) throw Error(Errc::InvalidGrid, name_, "lat and lon must be non-empty");
  if (!strictly_ascending(lat_) || !strictly_ascending(lon_)) {
    throw Error(Errc::InvalidGrid, name_, "lat/lon coordinates must be strictly ascending");
  }
  if (has_time_ && !strictly_ascending(time_)) {
    throw Error(Errc::InvalidGrid, name_, "time coordinates must be strictly ascending");
  }
  const std::size_t expected = (has_time_ ? time_.size() : 1) * lat_.size() * lon_.size();
  if (values_.size() != expected) {
    throw Error(Errc::InvalidGrid, name_,
                "values length " + std::to_string(values_.size()) + " != " + std::to_string(expected));
  }
}

bool bit_equal(const Grid& a, const Grid& b) {
  if (a.name() != b.name() || a.units() != b.units() || a.has_time() != b.has_time() || a.time() != b.time() ||
      a.lat() != b.lat() || a.lon() != b.lon() || a.values().size() != b.values().size()) {
    return false;
  }
  if (std::bit_cast<std::uint32_t>(a.missing()) != std::bit_cast<std::uint32_t>(b.missing())) return false;
  return std::memcmp(a.values().data(), b.values().data(), a.values().size() * sizeof(float)) == 0;
}

Grid crop_bbox(const Grid& g, const BBox& b) {
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < g.ny(); ++i) {
    if (g.lat()[i] >= b.lat_min && g.lat()[i] <= b.lat_max) rows.push_back(i);
  }
  for (std::size_t j = 0; j < g.nx(); ++j) {
    if (g.lon()[j] >= b.lon_min && g.lon()[j] <= b.lon_max) cols.push_back(j);
  }
  if (rows.empty() || cols.empty()) throw Error(Errc::EmptyCrop, g.name(), "no coordinates inside bbox");

  std::vector<double> lat, lon;
  for (auto i : rows) lat.push_back(g.lat()[i]);
  for (auto j : cols) lon.push_back(g.lon()[j]);
  std::vector<float> values;
  values.reserve(g.nt() * rows.size() * cols.size());
  for (std::size_t t = 0; t < g.nt(); ++t) {
    for (auto i : rows) {
      for (auto j : cols) values.push_back(g.at(t, i, j));
    }
  }
  if (g.has_time()) {
    return Grid::make_timed(g.name(), g.units(), g.time(), std::move(lat), std::move(lon), std::move(values),
                            g.missing());
  }
  return Grid::make_static(g.name(), g.units(), std::move(lat), std::move(lon), std::move(values), g.missing());
}

Grid regrid_nearest(const Grid& g, const std::vector<double>& target_lat, const std::vector<double>& target_lon) {
  // Squared degree distance separates into lat and lon terms on a
  // rectilinear grid, so the 2-D argmin is the pair of 1-D argmins.
  std::vector<std::size_t> rows(target_lat.size()), cols(target_lon.size());
  for (std::size_t i = 0; i < target_lat.size(); ++i) rows[i] = nearest_index(g.lat(), target_lat[i]);
  for (std::size_t j = 0; j < target_lon.size(); ++j) cols[j] = nearest_index(g.lon(), target_lon[j]);

  std::vector<float> values;
  values.reserve(g.nt() * rows.size() * cols.size());
  for (std::size_t t = 0; t < g.nt(); ++t) {
    for (auto i : rows) {
      for (auto j : cols) values.push_back(g.at(t, i, j));
    }
  }
  if (g.has_time()) {
    return Grid::make_timed(g.name(), g.units(), g.time(), target_lat, target_lon, std::move(values), g.missing());
  }
  return Grid::make_static(g.name(), g.units(), target_lat, target_lon, std::move(values), g.missing());
}

Grid align_time(const Grid& g, const std::vector<Date>& dates) {
  if (!g.has_time()) throw Error(Errc::InvalidGrid, g.name(), "align_time needs a time dimension");
  std::vector<TimePoint> times;
  std::vector<float> values;
  values.reserve(dates.size() * g.plane());
  for (Date d : dates) {
    const TimePoint tp = to_timepoint(d);
    auto it = std::lower_bound(g.time().begin(), g.time().end(), tp);
    if (it == g.time().end() || *it != tp) throw Error(Errc::MissingDate, g.name(), format_date(d));
    const auto slice = g.slice(static_cast<std::size_t>(it - g.time().begin()));
    values.insert(values.end(), slice.begin(), slice.end());
    times.push_back(tp);
  }
  return Grid::make_timed(g.name(), g.units(), std::move(times), g.lat(), g.lon(), std::move(values), g.missing());
}

SampleTensor stack_sample(const std::vector<Grid>& grids, const std::vector<Date>& dates, std::span<const float> fill) {
  if (grids.empty()) throw Error(Errc::EmptySample, {}, "no features to stack");
  if (!fill.empty() && fill.size() != grids.size()) {
    throw Error(Errc::EmptySample, {}, "fill vector length does not match feature count");
  }
  const Grid& ref = grids.front();
  SampleTensor s;
  s.nf = grids.size();
  s.days = dates.size();
  s.h = ref.ny();
  s.w = ref.nx();
  s.dates = dates;
  s.lat = ref.lat();
  s.lon = ref.lon();
  s.values.resize(s.nf * s.days * s.h * s.w);

  for (std::size_t f = 0; f < grids.size(); ++f) {
    const Grid& g = grids[f];
    if (!g.same_lat_lon(ref)) throw Error(Errc::GridMismatch, g.name(), "lat/lon differ from " + ref.name());
    s.features.push_back(g.name());
    const Grid aligned = g.has_time() ? align_time(g, dates) : g;
    for (std::size_t d = 0; d < s.days; ++d) {
      const auto src = aligned.slice(g.has_time() ? d : 0);
      float* dst = s.values.data() + s.index(f, d, 0, 0);
      for (std::size_t k = 0; k < src.size(); ++k) {
        const float v = src[k];
        dst[k] = (!fill.empty() && aligned.is_missing(v)) ? fill[f] : v;
      }
    }
  }
  return s;
}

}  // namespace opcast
