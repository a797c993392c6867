#include "jpo/config.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

#include "jpo/error.hpp"
#include "jpo/util.hpp"

namespace jpo::config {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw Error(Errc::ConfigInvalid, "config line " + std::to_string(line) + ": " + msg);
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  }
  return true;
}

std::optional<double> parse_number(std::string_view s, bool& is_int, std::int64_t& as_int) {
  std::string clean;
  for (char c : s) {
    if (c != '_') clean += c;
  }
  is_int = false;
  {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(clean.data(), clean.data() + clean.size(), v);
    if (ec == std::errc() && p == clean.data() + clean.size()) {
      is_int = true;
      as_int = v;
      return static_cast<double>(v);
    }
  }
  double d = 0;
  auto [p, ec] = std::from_chars(clean.data(), clean.data() + clean.size(), d);
  if (ec == std::errc() && p == clean.data() + clean.size()) return d;
  return std::nullopt;
}

std::string parse_string(std::string_view s, std::size_t line) {
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (s[i] == '\\') {
      if (i + 2 >= s.size()) fail(line, "dangling escape");
      const char e = s[++i];
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(line, std::string("unsupported escape \\") + e);
      }
    } else {
      out += s[i];
    }
  }
  return out;
}

Value parse_value(std::string_view s, std::size_t line) {
  if (s.empty()) fail(line, "missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') fail(line, "unterminated string");
    return parse_string(s, line);
  }
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '[') {
    if (s.back() != ']') fail(line, "unterminated array");
    std::vector<double> out;
    std::string_view body = trim(s.substr(1, s.size() - 2));
    while (!body.empty()) {
      const auto comma = body.find(',');
      std::string_view item = trim(body.substr(0, comma));
      if (!item.empty()) {
        bool is_int = false;
        std::int64_t iv = 0;
        auto v = parse_number(item, is_int, iv);
        if (!v) fail(line, "arrays may only hold numbers");
        out.push_back(*v);
      }
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
    }
    return out;
  }
  bool is_int = false;
  std::int64_t iv = 0;
  auto v = parse_number(s, is_int, iv);
  if (!v) fail(line, "cannot parse value '" + std::string(s) + "'");
  if (is_int) return iv;
  return *v;
}

std::string format_double(double d) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), d);
  std::string s(buf, res.ptr);
  // Keep floats recognizable as floats on re-parse.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string format_value(const Value& v) {
  struct {
    std::string operator()(const std::string& s) const { return quote(s); }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const { return format_double(d); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(const std::vector<double>& a) const {
      std::string out = "[";
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (i) out += ", ";
        // Whole numbers print without a fraction so size lists stay readable.
        if (a[i] == static_cast<double>(static_cast<std::int64_t>(a[i]))) {
          out += std::to_string(static_cast<std::int64_t>(a[i]));
        } else {
          out += format_double(a[i]);
        }
      }
      return out + "]";
    }
  } visitor;
  return std::visit(visitor, v);
}

}  // namespace

Table Table::parse(std::string_view text) {
  Table t;
  std::string section;
  std::size_t lineno = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(lineno, "bad section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!valid_key(section)) fail(lineno, "bad section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(lineno, "expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    if (!valid_key(key)) fail(lineno, "bad key '" + std::string(key) + "'");
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (t.values_.contains(full)) fail(lineno, "duplicate key " + full);
    t.values_[full] = parse_value(trim(line.substr(eq + 1)), lineno);
  }
  return t;
}

Table Table::load(const std::filesystem::path& path) { return parse(read_file(path)); }

namespace {

[[noreturn]] void type_error(const std::string& key, std::string_view want) {
  throw Error(Errc::ConfigInvalid, "config key " + key + " must be " + std::string(want));
}

}  // namespace

std::optional<std::string> Table::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (auto* s = std::get_if<std::string>(&it->second)) return *s;
  type_error(key, "a string");
}

std::optional<std::int64_t> Table::get_int(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  type_error(key, "an integer");
}

std::optional<double> Table::get_double(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (auto* d = std::get_if<double>(&it->second)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  type_error(key, "a number");
}

std::optional<bool> Table::get_bool(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (auto* b = std::get_if<bool>(&it->second)) return *b;
  type_error(key, "a boolean");
}

std::optional<std::vector<double>> Table::get_array(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (auto* a = std::get_if<std::vector<double>>(&it->second)) return *a;
  type_error(key, "an array of numbers");
}

std::string Table::to_toml() const {
  std::string out;
  // Top-level keys must precede every section header.
  for (const auto& [key, value] : values_) {
    if (key.find('.') == std::string::npos) out += key + " = " + format_value(value) + "\n";
  }
  std::string current;
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) continue;
    const std::string section = key.substr(0, dot);
    if (section != current) {
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
      current = section;
    }
    out += key.substr(dot + 1) + " = " + format_value(value) + "\n";
  }
  return out;
}

}  // namespace jpo::config
