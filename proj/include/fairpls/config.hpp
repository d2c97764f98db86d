#pragma once

// Key-value config files.
//
//   # comment
//   key = value
//
// A value is a scalar token, a list `[a, b, c]` or a map `{k: v, k2: v2}`;
// lists and maps nest. Scalars may be double-quoted to protect `,:[]{}#`.
// Keys are unique per file; a repeated key is a parse error.

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace fairpls {

class KvValue {
 public:
  enum class Kind { scalar, list, map };

  KvValue() = default;
  static KvValue scalar(std::string s);
  static KvValue list(std::vector<KvValue> items);
  static KvValue map(std::vector<std::pair<std::string, KvValue>> entries);

  Kind kind() const { return kind_; }
  bool is_scalar() const { return kind_ == Kind::scalar; }
  bool is_list() const { return kind_ == Kind::list; }
  bool is_map() const { return kind_ == Kind::map; }

  const std::string& as_string() const;
  double as_double() const;
  long long as_int() const;
  bool as_bool() const;
  const std::vector<KvValue>& as_list() const;
  // Map entries keep file order.
  const std::vector<std::pair<std::string, KvValue>>& as_map() const;
  const KvValue* find(const std::string& key) const;

  std::vector<double> as_doubles() const;
  std::vector<std::string> as_strings() const;

  std::string to_string() const;

 private:
  Kind kind_ = Kind::scalar;
  std::string scalar_;
  std::vector<KvValue> list_;
  std::vector<std::pair<std::string, KvValue>> map_;
};

class KvConfig {
 public:
  static KvConfig parse(std::string_view text, const std::string& source = "<string>");
  static KvConfig load(const std::string& path);

  bool has(const std::string& key) const;
  const KvValue& at(const std::string& key) const;
  void set(const std::string& key, KvValue value);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  std::vector<std::string> keys() const;
  const std::string& source() const { return source_; }
  // Directory of the file this config was loaded from ("" for strings).
  std::string base_dir() const;

 private:
  std::string source_;
  std::vector<std::pair<std::string, KvValue>> entries_;
};

}  // namespace fairpls
