#include "opcast/kwargs.hpp"

#include <cctype>
#include <charconv>

#include "opcast/error.hpp"

namespace opcast {

double Value::as_number() const {
  if (is_int()) return static_cast<double>(std::get<std::int64_t>(data));
  if (is_real()) return std::get<double>(data);
  throw Error(Errc::BadArgument, to_display(*this), "expected a number");
}

const std::string& Value::as_string() const {
  if (!is_string()) throw Error(Errc::BadArgument, to_display(*this), "expected a string");
  return std::get<std::string>(data);
}

const Value::List& Value::as_list() const {
  if (!is_list()) throw Error(Errc::BadArgument, to_display(*this), "expected a list");
  return std::get<List>(data);
}

bool Value::as_bool() const {
  if (!is_bool()) throw Error(Errc::BadArgument, to_display(*this), "expected a boolean");
  return std::get<bool>(data);
}

namespace {

std::string format_real(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'' || c == '\\') out += '\\';
    out += c;
  }
  out += '\'';
  return out;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool is_keyword(std::string_view s) { return s == "true" || s == "false" || s == "True" || s == "False"; }

bool is_plain_identifier(const std::string& s) {
  if (s.empty() || !is_ident_start(s[0]) || is_keyword(s)) return false;
  for (char c : s) {
    if (!is_ident_char(c)) return false;
  }
  return true;
}

class KwargsParser {
 public:
  explicit KwargsParser(std::string_view src) : src_(src) {}

  RawArgs parse() {
    RawArgs out;
    skip_ws();
    if (at_end()) return out;
    expect('{');
    skip_ws();
    if (peek() == '}') {
      ++pos_;
      finish();
      return out;
    }
    while (true) {
      skip_ws();
      const std::size_t key_pos = pos_;
      std::string key = parse_key();
      skip_ws();
      expect(':');
      skip_ws();
      ArgToken value = parse_value();
      if (!out.emplace(key, std::move(value)).second) {
        throw Error(Errc::DuplicateKey, key, "at offset " + std::to_string(key_pos));
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect('}');
      break;
    }
    finish();
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(Errc::KwargsSyntax, std::to_string(pos_), what + " in `" + std::string(src_) + "`");
  }

  bool at_end() const { return pos_ >= src_.size(); }
  char peek() const { return at_end() ? '\0' : src_[pos_]; }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void finish() {
    skip_ws();
    if (!at_end()) fail("trailing characters");
  }

  std::string parse_key() {
    const char c = peek();
    if (c == '\'' || c == '"') return parse_quoted();
    if (!is_ident_start(c)) fail("expected key");
    std::string id = parse_word();
    if (is_keyword(id)) fail("boolean literal cannot be a key");
    return id;
  }

  std::string parse_word() {
    const std::size_t start = pos_;
    while (!at_end() && is_ident_char(src_[pos_])) ++pos_;
    return std::string(src_.substr(start, pos_ - start));
  }

  std::string parse_quoted() {
    const char q = src_[pos_++];
    std::string out;
    while (true) {
      if (at_end()) fail("unterminated string");
      char c = src_[pos_++];
      if (c == q) break;
      if (c == '\\') {
        if (at_end()) fail("dangling escape");
        const char e = src_[pos_++];
        switch (e) {
          case '\\': out += '\\'; break;
          case '\'': out += '\''; break;
          case '"': out += '"'; break;
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          default: fail(std::string("unknown escape \\") + e);
        }
        continue;
      }
      out += c;
    }
    return out;
  }

  ArgToken parse_number() {
    const std::size_t start = pos_;
    if (peek() == '-') ++pos_;
    auto digits = [&] {
      const std::size_t d0 = pos_;
      while (!at_end() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      return pos_ - d0;
    };
    if (digits() == 0) fail("expected digits");
    bool real = false;
    if (peek() == '.') {
      ++pos_;
      real = true;
      if (digits() == 0) fail("expected digits after '.'");
    }
    if (peek() == 'e' || peek() == 'E') {
      ++pos_;
      real = true;
      if (peek() == '+' || peek() == '-') ++pos_;
      if (digits() == 0) fail("expected exponent digits");
    }
    if (is_ident_char(peek())) fail("malformed number");
    const char* b = src_.data() + start;
    const char* e = src_.data() + pos_;
    if (real) {
      double v = 0;
      auto [ptr, ec] = std::from_chars(b, e, v);
      if (ec != std::errc{} || ptr != e) fail("bad float");
      return ArgToken::make_real(v);
    }
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || ptr != e) fail("integer out of range");
    return ArgToken::make_int(v);
  }

  ArgToken parse_value() {
    const char c = peek();
    if (c == '\'' || c == '"') return ArgToken::make_string(parse_quoted());
    if (c == '[') {
      ++pos_;
      std::vector<ArgToken> items;
      skip_ws();
      if (peek() == ']') {
        ++pos_;
        return ArgToken::make_list(std::move(items));
      }
      while (true) {
        skip_ws();
        items.push_back(parse_value());
        skip_ws();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        expect(']');
        break;
      }
      return ArgToken::make_list(std::move(items));
    }
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) return parse_number();
    if (is_ident_start(c)) {
      std::string word = parse_word();
      if (word == "true" || word == "True") return ArgToken::make_bool(true);
      if (word == "false" || word == "False") return ArgToken::make_bool(false);
      return ArgToken::make_identifier(std::move(word));
    }
    if (c == '{') fail("nested dictionaries are not supported");
    fail("expected value");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

void format_token(const ArgToken& t, std::string& out) {
  switch (t.kind) {
    case ArgToken::Kind::integer: out += std::to_string(t.integer); break;
    case ArgToken::Kind::real: out += format_real(t.real); break;
    case ArgToken::Kind::boolean: out += t.boolean ? "true" : "false"; break;
    case ArgToken::Kind::string: out += quote(t.text); break;
    case ArgToken::Kind::identifier: out += t.text; break;
    case ArgToken::Kind::list:
      out += '[';
      for (std::size_t k = 0; k < t.items.size(); ++k) {
        if (k) out += ", ";
        format_token(t.items[k], out);
      }
      out += ']';
      break;
  }
}

Value token_literal(const ArgToken& t) {
  switch (t.kind) {
    case ArgToken::Kind::integer: return Value(t.integer);
    case ArgToken::Kind::real: return Value(t.real);
    case ArgToken::Kind::boolean: return Value(t.boolean);
    case ArgToken::Kind::string: return Value(t.text);
    default: break;
  }
  return Value{};
}

// Identifiers nested in lists inline their pilot/context value.
Value resolve_nested(const ArgToken& t, const ValueMap& locals, const ValueMap& context) {
  if (t.kind == ArgToken::Kind::identifier) {
    if (auto it = locals.find(t.text); it != locals.end()) return it->second;
    if (auto it = context.find(t.text); it != context.end()) return it->second;
    throw Error(Errc::UnresolvedReference, t.text);
  }
  if (t.kind == ArgToken::Kind::list) {
    Value::List items;
    for (const auto& item : t.items) items.push_back(resolve_nested(item, locals, context));
    return Value(std::move(items));
  }
  return token_literal(t);
}

GridRef grid_ref(const ArgToken& t, const std::set<std::string>& consumed) {
  if (t.kind != ArgToken::Kind::string && t.kind != ArgToken::Kind::identifier) {
    throw Error(Errc::BadArgument, std::string(kVariableKey), "expects variable names");
  }
  if (!consumed.contains(t.text)) throw Error(Errc::DanglingGridRef, t.text, "variable not consumed yet");
  return GridRef{t.text};
}

}  // namespace

std::string to_display(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(x);
        else if constexpr (std::is_same_v<T, double>) return format_real(x);
        else if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::string>) return quote(x);
        else {
          std::string out = "[";
          for (std::size_t k = 0; k < x.size(); ++k) out += (k ? ", " : "") + to_display(x[k]);
          return out + "]";
        }
      },
      v.data);
}

ArgToken ArgToken::make_int(std::int64_t v) {
  ArgToken t;
  t.kind = Kind::integer;
  t.integer = v;
  return t;
}
ArgToken ArgToken::make_real(double v) {
  ArgToken t;
  t.kind = Kind::real;
  t.real = v;
  return t;
}
ArgToken ArgToken::make_bool(bool v) {
  ArgToken t;
  t.kind = Kind::boolean;
  t.boolean = v;
  return t;
}
ArgToken ArgToken::make_string(std::string v) {
  ArgToken t;
  t.kind = Kind::string;
  t.text = std::move(v);
  return t;
}
ArgToken ArgToken::make_identifier(std::string v) {
  ArgToken t;
  t.kind = Kind::identifier;
  t.text = std::move(v);
  return t;
}
ArgToken ArgToken::make_list(std::vector<ArgToken> v) {
  ArgToken t;
  t.kind = Kind::list;
  t.items = std::move(v);
  return t;
}

bool operator==(const ArgToken& a, const ArgToken& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ArgToken::Kind::integer: return a.integer == b.integer;
    case ArgToken::Kind::real: return a.real == b.real;
    case ArgToken::Kind::boolean: return a.boolean == b.boolean;
    case ArgToken::Kind::string:
    case ArgToken::Kind::identifier: return a.text == b.text;
    case ArgToken::Kind::list: return a.items == b.items;
  }
  return false;
}

RawArgs parse_kwargs_string(std::string_view expr) { return KwargsParser(expr).parse(); }

std::string format_kwargs(const RawArgs& args) {
  std::string out = "{";
  bool first = true;
  for (const auto& [key, value] : args) {
    if (!first) out += ", ";
    first = false;
    out += is_plain_identifier(key) ? key : quote(key);
    out += ": ";
    format_token(value, out);
  }
  return out + "}";
}

ResolvedArgs resolve_args(const RawArgs& raw, const ValueMap& pilot_locals, const ValueMap& context,
                          const std::set<std::string>& consumed) {
  ResolvedArgs out;
  for (const auto& [key, token] : raw) {
    if (key == kVariableKey) {
      if (token.kind == ArgToken::Kind::list) {
        std::vector<GridRef> refs;
        for (const auto& item : token.items) refs.push_back(grid_ref(item, consumed));
        out.emplace(key, std::move(refs));
      } else {
        out.emplace(key, grid_ref(token, consumed));
      }
      continue;
    }
    switch (token.kind) {
      case ArgToken::Kind::identifier:
        if (auto it = pilot_locals.find(token.text); it != pilot_locals.end()) {
          out.emplace(key, it->second);
        } else if (context.contains(token.text)) {
          out.emplace(key, ContextRef{token.text});
        } else {
          throw Error(Errc::UnresolvedReference, token.text, "for argument `" + key + "`");
        }
        break;
      case ArgToken::Kind::list: out.emplace(key, resolve_nested(token, pilot_locals, context)); break;
      default: out.emplace(key, token_literal(token)); break;
    }
  }
  return out;
}

}  // namespace opcast
