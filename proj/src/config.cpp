#include "fairpls/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fairpls/error.hpp"

namespace fairpls {

KvValue KvValue::scalar(std::string s) {
  KvValue v;
  v.kind_ = Kind::scalar;
  v.scalar_ = std::move(s);
  return v;
}

KvValue KvValue::list(std::vector<KvValue> items) {
  KvValue v;
  v.kind_ = Kind::list;
  v.list_ = std::move(items);
  return v;
}

KvValue KvValue::map(std::vector<std::pair<std::string, KvValue>> entries) {
  KvValue v;
  v.kind_ = Kind::map;
  v.map_ = std::move(entries);
  return v;
}

const std::string& KvValue::as_string() const {
  if (kind_ != Kind::scalar) throw Error(ErrorKind::invalid_argument, "expected a scalar value, got " + to_string());
  return scalar_;
}

double KvValue::as_double() const {
  const std::string& s = as_string();
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorKind::invalid_argument, "expected a number, got '" + s + "'");
  return out;
}

long long KvValue::as_int() const {
  const std::string& s = as_string();
  long long out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorKind::invalid_argument, "expected an integer, got '" + s + "'");
  return out;
}

bool KvValue::as_bool() const {
  std::string s = as_string();
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw Error(ErrorKind::invalid_argument, "expected a boolean, got '" + s + "'");
}

const std::vector<KvValue>& KvValue::as_list() const {
  if (kind_ != Kind::list) throw Error(ErrorKind::invalid_argument, "expected a list, got " + to_string());
  return list_;
}

const std::vector<std::pair<std::string, KvValue>>& KvValue::as_map() const {
  if (kind_ != Kind::map) throw Error(ErrorKind::invalid_argument, "expected a map, got " + to_string());
  return map_;
}

const KvValue* KvValue::find(const std::string& key) const {
  for (const auto& [k, v] : as_map())
    if (k == key) return &v;
  return nullptr;
}

std::vector<double> KvValue::as_doubles() const {
  std::vector<double> out;
  if (is_scalar()) {
    out.push_back(as_double());
    return out;
  }
  for (const auto& item : as_list()) out.push_back(item.as_double());
  return out;
}

std::vector<std::string> KvValue::as_strings() const {
  std::vector<std::string> out;
  if (is_scalar()) {
    out.push_back(as_string());
    return out;
  }
  for (const auto& item : as_list()) out.push_back(item.as_string());
  return out;
}

namespace {

bool needs_quotes(const std::string& s) {
  if (s.empty()) return true;
  for (char c : s)
    if (c == ',' || c == ':' || c == '[' || c == ']' || c == '{' || c == '}' || c == '#' || c == '"')
      return true;
  return std::isspace(static_cast<unsigned char>(s.front())) || std::isspace(static_cast<unsigned char>(s.back()));
}

}  // namespace

std::string KvValue::to_string() const {
  switch (kind_) {
    case Kind::scalar: {
      if (!needs_quotes(scalar_)) return scalar_;
      std::string q = "\"";
      for (char c : scalar_) {
        if (c == '"' || c == '\\') q += '\\';
        q += c;
      }
      return q + "\"";
    }
    case Kind::list: {
      std::string s = "[";
      for (std::size_t i = 0; i < list_.size(); ++i) s += (i ? ", " : "") + list_[i].to_string();
      return s + "]";
    }
    case Kind::map: {
      std::string s = "{";
      for (std::size_t i = 0; i < map_.size(); ++i)
        s += (i ? ", " : "") + KvValue::scalar(map_[i].first).to_string() + ": " + map_[i].second.to_string();
      return s + "}";
    }
  }
  return {};
}

namespace {

class ValueParser {
 public:
  ValueParser(std::string_view text, std::size_t line, std::size_t col0)
      : text_(text), line_(line), col0_(col0) {}

  KvValue parse_all() {
    KvValue v = parse_value();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing characters");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line_, col0_ + pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  KvValue parse_value() {
    skip_ws();
    if (pos_ >= text_.size()) fail("missing value");
    char c = text_[pos_];
    if (c == '[') return parse_list();
    if (c == '{') return parse_map();
    return KvValue::scalar(parse_scalar(false));
  }

  std::string parse_scalar(bool is_key) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '"') {
      ++pos_;
      std::string out;
      while (pos_ < text_.size() && text_[pos_] != '"') {
        if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
        out += text_[pos_++];
      }
      if (pos_ >= text_.size()) fail("unterminated quoted string");
      ++pos_;
      return out;
    }
    std::size_t start = pos_;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ',' || c == ']' || c == '}' || c == '[' || c == '{') break;
      if (is_key && c == ':') break;
      ++pos_;
    }
    std::string_view tok = text_.substr(start, pos_ - start);
    while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.back()))) tok.remove_suffix(1);
    if (tok.empty()) fail(is_key ? "empty key" : "empty value");
    return std::string(tok);
  }

  KvValue parse_list() {
    ++pos_;
    std::vector<KvValue> items;
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return KvValue::list(std::move(items));
    }
    while (true) {
      items.push_back(parse_value());
      skip_ws();
      if (pos_ >= text_.size()) fail("unterminated list");
      if (text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (text_[pos_] == ']') {
        ++pos_;
        break;
      }
      fail("expected ',' or ']'");
    }
    return KvValue::list(std::move(items));
  }

  KvValue parse_map() {
    ++pos_;
    std::vector<std::pair<std::string, KvValue>> entries;
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '}') {
      ++pos_;
      return KvValue::map(std::move(entries));
    }
    while (true) {
      std::string key = parse_scalar(true);
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != ':') fail("expected ':' after map key");
      ++pos_;
      for (const auto& e : entries)
        if (e.first == key) fail("duplicate map key '" + key + "'");
      entries.emplace_back(std::move(key), parse_value());
      skip_ws();
      if (pos_ >= text_.size()) fail("unterminated map");
      if (text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (text_[pos_] == '}') {
        ++pos_;
        break;
      }
      fail("expected ',' or '}'");
    }
    return KvValue::map(std::move(entries));
  }

  std::string_view text_;
  std::size_t line_;
  std::size_t col0_;
  std::size_t pos_ = 0;
};

// Strips a trailing comment, respecting double quotes.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '\\' && quoted) {
      ++i;
      continue;
    }
    if (c == '"') quoted = !quoted;
    if (c == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

namespace {

// Open brackets minus closing ones, ignoring quoted text.
int bracket_depth(std::string_view s) {
  int depth = 0;
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quoted) {
      if (c == '\\') ++i;
      else if (c == '"') quoted = false;
    } else if (c == '"') {
      quoted = true;
    } else if (c == '[' || c == '{') {
      ++depth;
    } else if (c == ']' || c == '}') {
      --depth;
    }
  }
  return depth;
}

}  // namespace

KvConfig KvConfig::parse(std::string_view text, const std::string& source) {
  KvConfig cfg;
  cfg.source_ = source;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    std::string_view line = trim(strip_comment(raw));
    if (line.empty()) {
      if (nl == text.size()) break;
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no, 1);
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ParseError("empty key", line_no, 1);
    if (cfg.has(key)) throw ParseError("duplicate key '" + key + "'", line_no, 1);
    std::string_view rhs = line.substr(eq + 1);
    std::size_t col = static_cast<std::size_t>(rhs.data() - raw.data()) + 1;
    const std::size_t start_line = line_no;
    // Bracketed values may continue over following lines.
    std::string joined(rhs);
    while (bracket_depth(joined) > 0 && nl < text.size()) {
      nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      std::string_view more = text.substr(pos, nl - pos);
      pos = nl + 1;
      ++line_no;
      if (!more.empty() && more.back() == '\r') more.remove_suffix(1);
      joined += ' ';
      joined += trim(strip_comment(more));
    }
    cfg.entries_.emplace_back(key, ValueParser(joined, start_line, col).parse_all());
    if (nl == text.size()) break;
  }
  return cfg;
}

KvConfig KvConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

bool KvConfig::has(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
}

const KvValue& KvConfig::at(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw Error(ErrorKind::invalid_argument, "missing config key '" + key + "' in " + source_);
}

void KvConfig::set(const std::string& key, KvValue value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = std::move(value);
      return;
    }
  entries_.emplace_back(key, std::move(value));
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? at(key).as_string() : fallback;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? at(key).as_double() : fallback;
}

long long KvConfig::get_int(const std::string& key, long long fallback) const {
  return has(key) ? at(key).as_int() : fallback;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? at(key).as_bool() : fallback;
}

std::vector<std::string> KvConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

std::string KvConfig::base_dir() const {
  if (source_.empty() || source_.front() == '<') return {};
  return std::filesystem::path(source_).parent_path().string();
}

}  // namespace fairpls
