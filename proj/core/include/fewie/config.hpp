#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fewie {

// A value in a TOML config file: strings, integers, floats, booleans and
// (nested) arrays. Dates and arrays of tables are rejected.
struct ConfigValue {
  using Array = std::vector<ConfigValue>;
  std::variant<bool, std::int64_t, double, std::string, Array> value;

  bool is_string() const { return std::holds_alternative<std::string>(value); }
  bool is_array() const { return std::holds_alternative<Array>(value); }

  // Typed accessors throw ConfigError naming `key` on a type mismatch.
  std::string as_string(std::string_view key) const;
  std::int64_t as_int(std::string_view key) const;
  std::uint64_t as_uint(std::string_view key) const;
  double as_double(std::string_view key) const;  // integers widen
  bool as_bool(std::string_view key) const;
  const Array& as_array(std::string_view key) const;
};

// TOML document flattened to a "section.key" -> value map.
class ConfigDocument {
 public:
  static ConfigDocument parse(std::string_view text);
  static ConfigDocument load(const std::filesystem::path& path);

  const ConfigValue* find(std::string_view dotted_key) const;
  bool contains(std::string_view dotted_key) const { return find(dotted_key) != nullptr; }
  void set(std::string dotted_key, ConfigValue value);
  // Parses `text` as a value, falling back to a bare string.
  void set_from_text(std::string dotted_key, std::string_view text);

  const std::map<std::string, ConfigValue, std::less<>>& entries() const noexcept { return entries_; }

 private:
  std::map<std::string, ConfigValue, std::less<>> entries_;
};

ConfigValue parse_config_value(std::string_view text);

}  // namespace fewie
