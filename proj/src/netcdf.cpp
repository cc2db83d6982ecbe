#include "opcast/netcdf.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "opcast/error.hpp"

namespace opcast::nc {

namespace {

constexpr std::uint32_t kAbsent = 0;
constexpr std::uint32_t kDimensionTag = 0x0A;
constexpr std::uint32_t kVariableTag = 0x0B;
constexpr std::uint32_t kAttributeTag = 0x0C;
constexpr std::uint32_t kStreaming = 0xFFFFFFFFu;
constexpr std::size_t kMaxOffset = std::numeric_limits<std::int32_t>::max();

std::size_t pad4(std::size_t n) { return (n + 3) & ~std::size_t{3}; }

std::size_t name_size(const std::string& s) { return 4 + pad4(s.size()); }

std::size_t attr_list_size(const std::vector<Attribute>& attrs) {
  std::size_t n = 8;
  for (const auto& a : attrs) n += name_size(a.name) + 8 + pad4(length_of(a.values) * type_size(type_of(a.values)));
  return n;
}

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

  void u32(std::uint32_t v) {
    for (int k = 3; k >= 0; --k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void name(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
    pad();
  }
  void pad() {
    while (out_.size() % 4) out_.push_back(0);
  }
  void values(const Values& v) {
    std::visit(
        [&](const auto& xs) {
          using T = std::decay_t<decltype(xs)>;
          if constexpr (std::is_same_v<T, std::string>) {
            out_.insert(out_.end(), xs.begin(), xs.end());
          } else {
            for (auto x : xs) put(x);
          }
        },
        v);
    pad();
  }
  void attributes(const std::vector<Attribute>& attrs) {
    if (attrs.empty()) {
      u32(kAbsent);
      u32(0);
      return;
    }
    u32(kAttributeTag);
    u32(static_cast<std::uint32_t>(attrs.size()));
    for (const auto& a : attrs) {
      name(a.name);
      u32(static_cast<std::uint32_t>(type_of(a.values)));
      u32(static_cast<std::uint32_t>(length_of(a.values)));
      values(a.values);
    }
  }
  std::size_t size() const { return out_.size(); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void put(std::int8_t v) { out_.push_back(static_cast<std::uint8_t>(v)); }
  void put(std::int16_t v) {
    const auto u = static_cast<std::uint16_t>(v);
    out_.push_back(static_cast<std::uint8_t>(u >> 8));
    out_.push_back(static_cast<std::uint8_t>(u));
  }
  void put(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void put(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void put(double v) {
    const auto u = std::bit_cast<std::uint64_t>(v);
    u32(static_cast<std::uint32_t>(u >> 32));
    u32(static_cast<std::uint32_t>(u));
  }

  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(Errc::TruncatedPayload, "netcdf", "header ends early");
  }
  std::uint32_t u32() {
    need(4);
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += 4;
    return std::uint32_t{p[0]} << 24 | std::uint32_t{p[1]} << 16 | std::uint32_t{p[2]} << 8 | std::uint32_t{p[3]};
  }
  std::string name() {
    const std::uint32_t n = u32();
    need(pad4(n));
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += pad4(n);
    return s;
  }
  Values values(Type t, std::size_t n) {
    const std::size_t bytes = n * type_size(t);
    need(pad4(bytes));
    Values v = read_values(bytes_, pos_, t, n);
    pos_ += pad4(bytes);
    return v;
  }
  std::vector<Attribute> attributes() {
    const std::uint32_t tag = u32();
    const std::uint32_t count = u32();
    if (tag == kAbsent) {
      if (count != 0) throw Error(Errc::BadGridFile, "netcdf", "malformed ABSENT attribute list");
      return {};
    }
    if (tag != kAttributeTag) throw Error(Errc::BadGridFile, "netcdf", "expected NC_ATTRIBUTE");
    std::vector<Attribute> out;
    for (std::uint32_t k = 0; k < count; ++k) {
      Attribute a;
      a.name = name();
      const Type t = checked_type(u32());
      const std::uint32_t n = u32();
      a.values = values(t, n);
      out.push_back(std::move(a));
    }
    return out;
  }

  static Type checked_type(std::uint32_t raw) {
    if (raw < 1 || raw > 6) throw Error(Errc::BadGridFile, "netcdf", "unknown nc_type " + std::to_string(raw));
    return static_cast<Type>(raw);
  }

  static Values read_values(std::span<const std::uint8_t> bytes, std::size_t at, Type t, std::size_t n) {
    const std::uint8_t* p = bytes.data() + at;
    auto be32 = [](const std::uint8_t* q) {
      return std::uint32_t{q[0]} << 24 | std::uint32_t{q[1]} << 16 | std::uint32_t{q[2]} << 8 | std::uint32_t{q[3]};
    };
    switch (t) {
      case Type::byte_: {
        std::vector<std::int8_t> v(n);
        for (std::size_t k = 0; k < n; ++k) v[k] = static_cast<std::int8_t>(p[k]);
        return v;
      }
      case Type::char_: return std::string(reinterpret_cast<const char*>(p), n);
      case Type::short_: {
        std::vector<std::int16_t> v(n);
        for (std::size_t k = 0; k < n; ++k) v[k] = static_cast<std::int16_t>(p[2 * k] << 8 | p[2 * k + 1]);
        return v;
      }
      case Type::int_: {
        std::vector<std::int32_t> v(n);
        for (std::size_t k = 0; k < n; ++k) v[k] = static_cast<std::int32_t>(be32(p + 4 * k));
        return v;
      }
      case Type::float_: {
        std::vector<float> v(n);
        for (std::size_t k = 0; k < n; ++k) v[k] = std::bit_cast<float>(be32(p + 4 * k));
        return v;
      }
      case Type::double_: {
        std::vector<double> v(n);
        for (std::size_t k = 0; k < n; ++k) {
          const std::uint64_t u = std::uint64_t{be32(p + 8 * k)} << 32 | be32(p + 8 * k + 4);
          v[k] = std::bit_cast<double>(u);
        }
        return v;
      }
    }
    return std::vector<std::int8_t>{};
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::size_t element_count(const File& f, const Variable& v, bool skip_record) {
  std::size_t n = 1;
  for (std::size_t k = 0; k < v.dimids.size(); ++k) {
    const auto& d = f.dims.at(v.dimids[k]);
    if (d.length == 0) {
      if (skip_record && k == 0) continue;
      throw Error(Errc::BadGridFile, v.name, "record dimension must be the first dimension");
    }
    n *= d.length;
  }
  return n;
}

bool is_record(const File& f, const Variable& v) {
  return !v.dimids.empty() && v.dimids[0] < f.dims.size() && f.dims[v.dimids[0]].length == 0;
}

// Appends `src` (a Values holding one record slab) onto `dst`.
void append_values(Values& dst, const Values& src) {
  std::visit(
      [&](auto& d) {
        using T = std::decay_t<decltype(d)>;
        const auto& s = std::get<T>(src);
        d.insert(d.end(), s.begin(), s.end());
      },
      dst);
}

Values empty_values(Type t) {
  switch (t) {
    case Type::byte_: return std::vector<std::int8_t>{};
    case Type::char_: return std::string{};
    case Type::short_: return std::vector<std::int16_t>{};
    case Type::int_: return std::vector<std::int32_t>{};
    case Type::float_: return std::vector<float>{};
    case Type::double_: return std::vector<double>{};
  }
  return std::vector<std::int8_t>{};
}

std::vector<double> as_doubles(const Values& v) {
  return std::visit(
      [](const auto& xs) -> std::vector<double> {
        using T = std::decay_t<decltype(xs)>;
        if constexpr (std::is_same_v<T, std::string>) {
          throw Error(Errc::BadGridFile, "netcdf", "expected numeric data, got chars");
        } else {
          return std::vector<double>(xs.begin(), xs.end());
        }
      },
      v);
}

std::string attr_text(const Variable* v, const std::string& name) {
  if (!v) return {};
  const Attribute* a = v->attribute(name);
  if (!a) return {};
  const auto* s = std::get_if<std::string>(&a->values);
  return s ? *s : std::string{};
}

std::vector<TimePoint> decode_time(const Variable& var) {
  const std::string units = attr_text(&var, "units");
  const auto since = units.find(" since ");
  if (since == std::string::npos) throw Error(Errc::BadGridFile, var.name, "time units must be '<unit> since <date>'");
  const std::string unit = units.substr(0, since);
  std::string origin = units.substr(since + 7);
  std::chrono::seconds step;
  if (unit == "days") step = std::chrono::hours{24};
  else if (unit == "hours") step = std::chrono::hours{1};
  else if (unit == "seconds") step = std::chrono::seconds{1};
  else throw Error(Errc::BadGridFile, var.name, "unsupported time unit " + unit);
  const TimePoint base = to_timepoint(parse_date(origin.substr(0, 10)));
  std::vector<TimePoint> out;
  for (double x : as_doubles(var.data)) {
    out.push_back(base + std::chrono::seconds{std::llround(x * static_cast<double>(step.count()))});
  }
  return out;
}

}  // namespace

std::size_t type_size(Type t) {
  switch (t) {
    case Type::byte_:
    case Type::char_: return 1;
    case Type::short_: return 2;
    case Type::int_:
    case Type::float_: return 4;
    case Type::double_: return 8;
  }
  return 1;
}

Type type_of(const Values& v) {
  switch (v.index()) {
    case 0: return Type::byte_;
    case 1: return Type::char_;
    case 2: return Type::short_;
    case 3: return Type::int_;
    case 4: return Type::float_;
    default: return Type::double_;
  }
}

std::size_t length_of(const Values& v) {
  return std::visit([](const auto& xs) { return xs.size(); }, v);
}

const Attribute* Variable::attribute(const std::string& n) const {
  for (const auto& a : attributes) {
    if (a.name == n) return &a;
  }
  return nullptr;
}

const Variable* File::variable(const std::string& n) const {
  for (const auto& v : variables) {
    if (v.name == n) return &v;
  }
  return nullptr;
}

const Attribute* File::attribute(const std::string& n) const {
  for (const auto& a : attributes) {
    if (a.name == n) return &a;
  }
  return nullptr;
}

Layout compute_layout(const File& f) {
  Layout layout;
  std::size_t header = 8;  // magic + numrecs
  header += 8;
  for (const auto& d : f.dims) {
    if (d.name.empty()) throw Error(Errc::InvalidGrid, "netcdf", "dimension without a name");
    if (d.length == 0) throw Error(Errc::InvalidGrid, d.name, "record dimensions are not written");
    header += name_size(d.name) + 4;
  }
  header += attr_list_size(f.attributes);
  header += 8;
  for (const auto& v : f.variables) {
    if (v.name.empty()) throw Error(Errc::InvalidGrid, "netcdf", "variable without a name");
    header += name_size(v.name) + 4 + 4 * v.dimids.size() + attr_list_size(v.attributes) + 12;
  }
  layout.header_size = header;

  std::size_t offset = header;
  for (const auto& v : f.variables) {
    for (auto id : v.dimids) {
      if (id >= f.dims.size()) throw Error(Errc::InvalidGrid, v.name, "dimension id out of range");
    }
    const std::size_t bytes = pad4(element_count(f, v, false) * type_size(type_of(v.data)));
    if (bytes > std::numeric_limits<std::uint32_t>::max() - 3 || offset > kMaxOffset) {
      throw Error(Errc::GridTooLarge, v.name, "exceeds CDF-1 limits");
    }
    layout.vsize.push_back(static_cast<std::uint32_t>(bytes));
    layout.begin.push_back(static_cast<std::uint32_t>(offset));
    offset += bytes;
  }
  if (offset > kMaxOffset) throw Error(Errc::GridTooLarge, "netcdf", "file exceeds the 2 GiB CDF-1 limit");
  layout.file_size = offset;
  return layout;
}

std::vector<std::uint8_t> encode(const File& f) {
  const Layout layout = compute_layout(f);
  for (const auto& v : f.variables) {
    if (length_of(v.data) != element_count(f, v, false)) {
      throw Error(Errc::InvalidGrid, v.name, "data length does not match dimensions");
    }
  }

  Writer h(layout.file_size);
  h.u32(0x43444601u);  // "CDF\x01"
  h.u32(f.numrecs);
  if (f.dims.empty()) {
    h.u32(kAbsent);
    h.u32(0);
  } else {
    h.u32(kDimensionTag);
    h.u32(static_cast<std::uint32_t>(f.dims.size()));
    for (const auto& d : f.dims) {
      h.name(d.name);
      h.u32(d.length);
    }
  }
  h.attributes(f.attributes);
  if (f.variables.empty()) {
    h.u32(kAbsent);
    h.u32(0);
  } else {
    h.u32(kVariableTag);
    h.u32(static_cast<std::uint32_t>(f.variables.size()));
    for (std::size_t k = 0; k < f.variables.size(); ++k) {
      const auto& v = f.variables[k];
      h.name(v.name);
      h.u32(static_cast<std::uint32_t>(v.dimids.size()));
      for (auto id : v.dimids) h.u32(id);
      h.attributes(v.attributes);
      h.u32(static_cast<std::uint32_t>(type_of(v.data)));
      h.u32(layout.vsize[k]);
      h.u32(layout.begin[k]);
    }
  }
  for (const auto& v : f.variables) h.values(v.data);

  auto out = h.take();
  if (out.size() != layout.file_size) throw Error(Errc::IoFailure, "netcdf", "layout mismatch while encoding");
  return out;
}

ParsedHeader decode_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "CDF", 3) != 0) throw Error(Errc::BadMagic, "netcdf");
  if (bytes[3] != 1) {
    throw Error(Errc::BadMagic, "netcdf", "only the classic format (CDF-1) is supported, found version " +
                                              std::to_string(bytes[3]));
  }
  Reader r(bytes.subspan(0));
  r.need(4);
  static_cast<void>(r.u32());  // magic

  ParsedHeader out;
  File& f = out.file;
  f.numrecs = r.u32();
  if (f.numrecs == kStreaming) throw Error(Errc::BadGridFile, "netcdf", "streaming record count is not supported");

  std::uint32_t tag = r.u32();
  std::uint32_t count = r.u32();
  if (tag == kDimensionTag) {
    for (std::uint32_t k = 0; k < count; ++k) {
      Dimension d;
      d.name = r.name();
      d.length = r.u32();
      f.dims.push_back(std::move(d));
    }
  } else if (tag != kAbsent || count != 0) {
    throw Error(Errc::BadGridFile, "netcdf", "expected NC_DIMENSION");
  }

  f.attributes = r.attributes();

  tag = r.u32();
  count = r.u32();
  if (tag == kVariableTag) {
    for (std::uint32_t k = 0; k < count; ++k) {
      Variable v;
      v.name = r.name();
      const std::uint32_t ndims = r.u32();
      for (std::uint32_t d = 0; d < ndims; ++d) {
        const std::uint32_t id = r.u32();
        if (id >= f.dims.size()) throw Error(Errc::BadGridFile, v.name, "dimension id out of range");
        v.dimids.push_back(id);
      }
      v.attributes = r.attributes();
      v.data = empty_values(Reader::checked_type(r.u32()));
      out.vsize.push_back(r.u32());
      out.begin.push_back(r.u32());
      f.variables.push_back(std::move(v));
    }
  } else if (tag != kAbsent || count != 0) {
    throw Error(Errc::BadGridFile, "netcdf", "expected NC_VARIABLE");
  }
  out.header_size = r.pos();
  return out;
}

File decode(std::span<const std::uint8_t> bytes) {
  ParsedHeader parsed = decode_header(bytes);
  File& f = parsed.file;

  std::size_t record_size = 0;
  std::size_t record_vars = 0;
  for (std::size_t k = 0; k < f.variables.size(); ++k) {
    if (is_record(f, f.variables[k])) {
      record_size += parsed.vsize[k];
      ++record_vars;
    }
  }
  if (record_vars == 1) {
    for (std::size_t k = 0; k < f.variables.size(); ++k) {
      if (is_record(f, f.variables[k])) {
        record_size = element_count(f, f.variables[k], true) * type_size(type_of(f.variables[k].data));
      }
    }
  }

  for (std::size_t k = 0; k < f.variables.size(); ++k) {
    Variable& v = f.variables[k];
    const Type t = type_of(v.data);
    const std::size_t slab = element_count(f, v, true);
    const std::size_t records = is_record(f, v) ? f.numrecs : 1;
    for (std::size_t r = 0; r < records; ++r) {
      const std::size_t at = parsed.begin[k] + r * record_size;
      if (parsed.begin[k] < parsed.header_size || at + slab * type_size(t) > bytes.size()) {
        throw Error(Errc::TruncatedPayload, v.name, "variable data extends past end of file");
      }
      append_values(v.data, Reader::read_values(bytes, at, t, slab));
    }
  }
  return f;
}

Grid grid_from_file(const File& f, const std::string& variable) {
  auto find_dim = [&](std::initializer_list<const char*> names) -> std::optional<std::uint32_t> {
    for (std::uint32_t k = 0; k < f.dims.size(); ++k) {
      for (const char* n : names) {
        if (f.dims[k].name == n) return k;
      }
    }
    return std::nullopt;
  };
  const auto lat_dim = find_dim({"lat", "latitude"});
  const auto lon_dim = find_dim({"lon", "longitude"});
  if (!lat_dim || !lon_dim) throw Error(Errc::BadGridFile, "netcdf", "no lat/lon dimensions");
  const auto time_dim = find_dim({"time"});

  const Variable* var = nullptr;
  for (const auto& v : f.variables) {
    if (!variable.empty() ? v.name != variable : (v.dimids.size() < 2)) continue;
    const bool spatial = v.dimids.size() >= 2 && v.dimids[v.dimids.size() - 2] == *lat_dim &&
                         v.dimids.back() == *lon_dim &&
                         (v.dimids.size() == 2 || (v.dimids.size() == 3 && time_dim && v.dimids[0] == *time_dim));
    if (spatial) {
      var = &v;
      break;
    }
    if (!variable.empty()) throw Error(Errc::BadGridFile, variable, "not a (time?, lat, lon) variable");
  }
  if (!var) throw Error(Errc::BadGridFile, variable.empty() ? "netcdf" : variable, "variable not found");

  auto coord = [&](std::uint32_t dim) {
    const Variable* c = f.variable(f.dims[dim].name);
    if (!c) throw Error(Errc::BadGridFile, f.dims[dim].name, "missing coordinate variable");
    return as_doubles(c->data);
  };
  std::vector<double> lat = coord(*lat_dim);
  std::vector<double> lon = coord(*lon_dim);
  const bool timed = var->dimids.size() == 3;
  std::vector<TimePoint> time;
  if (timed) {
    const Variable* tv = f.variable(f.dims[*time_dim].name);
    if (!tv) throw Error(Errc::BadGridFile, "time", "missing coordinate variable");
    time = decode_time(*tv);
  }

  const std::vector<double> raw = as_doubles(var->data);
  const std::size_t nt = timed ? time.size() : 1, ny = lat.size(), nx = lon.size();
  if (raw.size() != nt * ny * nx) throw Error(Errc::BadGridFile, var->name, "data length mismatch");

  // Descending axes are flipped so coordinates ascend.
  const bool flip_lat = ny > 1 && lat.front() > lat.back();
  const bool flip_lon = nx > 1 && lon.front() > lon.back();
  if (flip_lat) std::reverse(lat.begin(), lat.end());
  if (flip_lon) std::reverse(lon.begin(), lon.end());

  float missing = kNaN;
  if (const Attribute* fv = var->attribute("_FillValue")) {
    const auto v = as_doubles(fv->values);
    if (!v.empty()) missing = static_cast<float>(v.front());
  }
  std::vector<float> values(raw.size());
  for (std::size_t t = 0; t < nt; ++t) {
    for (std::size_t i = 0; i < ny; ++i) {
      for (std::size_t j = 0; j < nx; ++j) {
        const std::size_t si = flip_lat ? ny - 1 - i : i;
        const std::size_t sj = flip_lon ? nx - 1 - j : j;
        values[(t * ny + i) * nx + j] = static_cast<float>(raw[(t * ny + si) * nx + sj]);
      }
    }
  }
  const std::string units = attr_text(var, "units");
  if (timed) {
    return Grid::make_timed(var->name, units, std::move(time), std::move(lat), std::move(lon), std::move(values),
                            missing);
  }
  return Grid::make_static(var->name, units, std::move(lat), std::move(lon), std::move(values), missing);
}

File file_from_grid(const Grid& g) {
  File f;
  std::uint32_t next = 0;
  std::vector<std::uint32_t> dims;
  if (g.has_time()) {
    f.dims.push_back({"time", static_cast<std::uint32_t>(g.time().size())});
    dims.push_back(next++);
  }
  f.dims.push_back({"lat", static_cast<std::uint32_t>(g.ny())});
  const std::uint32_t lat_id = next++;
  f.dims.push_back({"lon", static_cast<std::uint32_t>(g.nx())});
  const std::uint32_t lon_id = next++;
  dims.push_back(lat_id);
  dims.push_back(lon_id);

  if (g.has_time()) {
    const bool daily = std::all_of(g.time().begin(), g.time().end(), is_midnight);
    std::vector<double> t;
    for (auto tp : g.time()) {
      const auto secs = tp.time_since_epoch().count();
      t.push_back(daily ? static_cast<double>(secs / 86400) : static_cast<double>(secs) / 3600.0);
    }
    f.variables.push_back({"time",
                           {0},
                           {{"units", std::string(daily ? "days since 1970-01-01" : "hours since 1970-01-01 00:00:00")},
                            {"calendar", std::string("standard")}},
                           std::move(t)});
  }
  f.variables.push_back({"lat",
                         {lat_id},
                         {{"units", std::string("degrees_north")}, {"standard_name", std::string("latitude")}},
                         g.lat()});
  f.variables.push_back({"lon",
                         {lon_id},
                         {{"units", std::string("degrees_east")}, {"standard_name", std::string("longitude")}},
                         g.lon()});
  std::vector<Attribute> attrs;
  if (!g.units().empty()) attrs.push_back({"units", g.units()});
  attrs.push_back({"_FillValue", std::vector<float>{g.missing()}});
  f.variables.push_back({g.name(), dims, std::move(attrs), g.values()});
  return f;
}

}  // namespace opcast::nc
