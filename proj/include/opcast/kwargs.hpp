#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace opcast {

/// Literal value: pilot locals, context variables and resolved kwargs.
struct Value {
  using List = std::vector<Value>;
  std::variant<std::int64_t, double, bool, std::string, List> data;

  Value() : data(std::int64_t{0}) {}
  Value(std::int64_t v) : data(v) {}
  Value(int v) : data(std::int64_t{v}) {}
  Value(double v) : data(v) {}
  Value(bool v) : data(v) {}
  Value(std::string v) : data(std::move(v)) {}
  Value(const char* v) : data(std::string(v)) {}
  Value(List v) : data(std::move(v)) {}

  bool is_int() const { return std::holds_alternative<std::int64_t>(data); }
  bool is_real() const { return std::holds_alternative<double>(data); }
  bool is_number() const { return is_int() || is_real(); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_list() const { return std::holds_alternative<List>(data); }

  double as_number() const;
  const std::string& as_string() const;
  const List& as_list() const;
  bool as_bool() const;

  friend bool operator==(const Value&, const Value&) = default;
};

std::string to_display(const Value& v);

using ValueMap = std::map<std::string, Value>;

/// One unresolved token from a kwargs expression.
struct ArgToken {
  enum class Kind { integer, real, boolean, string, identifier, list };

  Kind kind = Kind::integer;
  std::int64_t integer = 0;
  double real = 0.0;
  bool boolean = false;
  std::string text;  // string contents or identifier name
  std::vector<ArgToken> items;

  static ArgToken make_int(std::int64_t v);
  static ArgToken make_real(double v);
  static ArgToken make_bool(bool v);
  static ArgToken make_string(std::string v);
  static ArgToken make_identifier(std::string v);
  static ArgToken make_list(std::vector<ArgToken> v);

  friend bool operator==(const ArgToken&, const ArgToken&);
};

using RawArgs = std::map<std::string, ArgToken>;

/// Parses the brace-delimited argument mini-language:
///
///   args   := '' | '{' '}' | '{' pair (',' pair)* '}'
///   pair   := key ':' value
///   key    := identifier | quoted-string
///   value  := int | float | bool | quoted-string | '[' [value (',' value)*] ']' | identifier
///
/// Booleans are `true`/`false` (also `True`/`False`) and are never
/// identifiers. Strings take single or double quotes with `\` escapes.
/// Throws KwargsSyntax (subject = byte offset) or DuplicateKey.
RawArgs parse_kwargs_string(std::string_view expr);

/// Canonical text form; parse_kwargs_string(format_kwargs(a)) == a.
std::string format_kwargs(const RawArgs& args);

struct GridRef {
  std::string name;
  friend bool operator==(const GridRef&, const GridRef&) = default;
};
struct ContextRef {
  std::string name;
  friend bool operator==(const ContextRef&, const ContextRef&) = default;
};

using ResolvedValue = std::variant<Value, GridRef, ContextRef, std::vector<GridRef>>;
using ResolvedArgs = std::map<std::string, ResolvedValue>;

/// Reserved key that turns its value into grid references.
inline constexpr std::string_view kVariableKey = "variable";

/// Resolves each raw token:
///  1. key `variable` naming a consumed grid -> GridRef (list -> list of GridRef)
///  2. bare identifier in pilot locals       -> that literal (pilot wins)
///  3. bare identifier in the context        -> ContextRef
///  4. anything else                         -> literal
/// Throws UnresolvedReference or DanglingGridRef.
ResolvedArgs resolve_args(const RawArgs& raw, const ValueMap& pilot_locals, const ValueMap& context,
                          const std::set<std::string>& consumed);

}  // namespace opcast
