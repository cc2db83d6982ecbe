#include <bit>
#include <cstring>
#include <json.hpp>

#include "opcast/error.hpp"
#include "opcast/grid.hpp"
#include "opcast/io.hpp"

namespace opcast {

namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'O', 'P', 'G', 'R'};
constexpr std::uint32_t kQuietNaN = 0x7FC00000u;

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::uint32_t get_u32le(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}

std::uint32_t canonical_bits(float v) { return std::isnan(v) ? kQuietNaN : std::bit_cast<std::uint32_t>(v); }

}  // namespace

std::vector<std::uint8_t> encode_opgrid(const Grid& g) {
  if (g.values().empty()) throw Error(Errc::InvalidGrid, g.name(), "cannot encode an empty grid");

  json header;
  header["name"] = g.name();
  header["units"] = g.units();
  header["dims"] = g.has_time() ? json::array({"time", "lat", "lon"}) : json::array({"lat", "lon"});
  json coords = json::object();
  if (g.has_time()) {
    json t = json::array();
    for (auto tp : g.time()) t.push_back(format_timestamp(tp));
    coords["time"] = std::move(t);
  }
  coords["lat"] = g.lat();
  coords["lon"] = g.lon();
  header["coords"] = std::move(coords);
  header["missing"] = std::isnan(g.missing()) ? json(nullptr) : json(static_cast<double>(g.missing()));
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(9 + text.size() + 4 * g.values().size());
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kOpgridVersion);
  put_u32le(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (float v : g.values()) put_u32le(out, canonical_bits(v));
  return out;
}

Grid decode_opgrid(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error(Errc::BadMagic, "OPGRID");
  if (bytes[4] != kOpgridVersion) {
    throw Error(Errc::BadMagic, "OPGRID", "unsupported version " + std::to_string(bytes[4]));
  }
  if (bytes.size() < 9) throw Error(Errc::TruncatedPayload, "OPGRID", "missing header length");
  const std::uint32_t header_len = get_u32le(bytes.data() + 5);
  if (header_len > bytes.size() - 9) throw Error(Errc::TruncatedPayload, "OPGRID", "header length exceeds input");

  json header;
  try {
    header = json::parse(bytes.begin() + 9, bytes.begin() + 9 + header_len);
  } catch (const json::exception& e) {
    throw Error(Errc::BadGridFile, "OPGRID", e.what());
  }

  try {
    const auto dims = header.at("dims").get<std::vector<std::string>>();
    const bool timed = dims == std::vector<std::string>{"time", "lat", "lon"};
    if (!timed && dims != std::vector<std::string>{"lat", "lon"}) {
      throw Error(Errc::BadGridFile, "OPGRID", "unsupported dims");
    }
    const auto& coords = header.at("coords");
    auto lat = coords.at("lat").get<std::vector<double>>();
    auto lon = coords.at("lon").get<std::vector<double>>();
    std::vector<TimePoint> time;
    if (timed) {
      for (const auto& t : coords.at("time")) time.push_back(parse_timestamp(t.get<std::string>()));
    }
    const float missing = header.at("missing").is_null() ? kNaN : header.at("missing").get<float>();

    const std::size_t count = (timed ? time.size() : 1) * lat.size() * lon.size();
    const std::size_t payload = bytes.size() - 9 - header_len;
    if (payload < count * 4) throw Error(Errc::TruncatedPayload, "OPGRID", "payload shorter than coordinates imply");
    if (payload > count * 4) throw Error(Errc::BadGridFile, "OPGRID", "trailing bytes after payload");

    std::vector<float> values(count);
    const std::uint8_t* p = bytes.data() + 9 + header_len;
    for (std::size_t k = 0; k < count; ++k) values[k] = std::bit_cast<float>(get_u32le(p + 4 * k));

    auto name = header.at("name").get<std::string>();
    auto units = header.at("units").get<std::string>();
    if (timed) {
      return Grid::make_timed(std::move(name), std::move(units), std::move(time), std::move(lat), std::move(lon),
                              std::move(values), missing);
    }
    return Grid::make_static(std::move(name), std::move(units), std::move(lat), std::move(lon), std::move(values),
                             missing);
  } catch (const json::exception& e) {
    throw Error(Errc::BadGridFile, "OPGRID", e.what());
  }
}

Grid read_opgrid_file(const std::string& path) { return decode_opgrid(read_file_bytes(path)); }

void write_opgrid_file(const Grid& g, const std::string& path) { write_file_atomic(path, encode_opgrid(g)); }

}  // namespace opcast
