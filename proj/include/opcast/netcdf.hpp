#pragma once

// NetCDF classic format (CDF-1) encoder and decoder.
//
// Only the classic 32-bit-offset layout is produced. The decoder also
// understands record (unlimited) variables so files from other writers
// can be read.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "opcast/grid.hpp"

namespace opcast::nc {

enum class Type : std::int32_t { byte_ = 1, char_ = 2, short_ = 3, int_ = 4, float_ = 5, double_ = 6 };

std::size_t type_size(Type t);

/// Typed payload of an attribute or variable; `std::string` is NC_CHAR.
using Values = std::variant<std::vector<std::int8_t>, std::string, std::vector<std::int16_t>,
                            std::vector<std::int32_t>, std::vector<float>, std::vector<double>>;

Type type_of(const Values& v);
std::size_t length_of(const Values& v);

struct Attribute {
  std::string name;
  Values values;
};

struct Dimension {
  std::string name;
  /// 0 marks the record (unlimited) dimension.
  std::uint32_t length = 0;
};

struct Variable {
  std::string name;
  std::vector<std::uint32_t> dimids;
  std::vector<Attribute> attributes;
  Values data;

  const Attribute* attribute(const std::string& name) const;
};

struct File {
  std::vector<Dimension> dims;
  std::vector<Attribute> attributes;
  std::vector<Variable> variables;
  std::uint32_t numrecs = 0;

  const Variable* variable(const std::string& name) const;
  const Attribute* attribute(const std::string& name) const;
};

/// Byte positions the encoder will use.
struct Layout {
  std::size_t header_size = 0;
  std::vector<std::uint32_t> vsize;
  std::vector<std::uint32_t> begin;
  std::size_t file_size = 0;
};

/// Throws GridTooLarge when the file exceeds CDF-1 offset limits.
Layout compute_layout(const File& f);

/// Writes fixed-size variables only; throws InvalidGrid on inconsistent
/// shapes and GridTooLarge past CDF-1 limits.
std::vector<std::uint8_t> encode(const File& f);

/// Throws BadMagic, TruncatedPayload or BadGridFile.
File decode(std::span<const std::uint8_t> bytes);

struct ParsedHeader {
  File file;  // variables without data
  std::vector<std::uint32_t> vsize;
  std::vector<std::uint32_t> begin;
  std::size_t header_size = 0;
};

/// Header only, with the recorded vsize/begin of each variable.
ParsedHeader decode_header(std::span<const std::uint8_t> bytes);

/// Reads a (lat, lon) or (time, lat, lon) field. Coordinates come from the
/// `lat`/`latitude` and `lon`/`longitude` variables, time from `time` with
/// units `days since ...` or `hours since ...`. When `variable` is empty the
/// first non-coordinate variable with those dimensions is used.
Grid grid_from_file(const File& f, const std::string& variable = {});

/// Static grid (lat, lon) as a CDF-1 model with CF-style coordinates.
File file_from_grid(const Grid& g);

}  // namespace opcast::nc
