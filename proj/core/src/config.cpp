#include "fewie/config.hpp"

#include <fstream>
#include <sstream>

#include <toml.hpp>

#include "fewie/error.hpp"

namespace fewie {

namespace {

const char* type_name(const ConfigValue& v) {
  switch (v.value.index()) {
    case 0: return "boolean";
    case 1: return "integer";
    case 2: return "float";
    case 3: return "string";
    default: return "array";
  }
}

[[noreturn]] void mismatch(std::string_view key, const char* want, const ConfigValue& v) {
  throw ConfigError("config key '" + std::string(key) + "' must be " + want + ", got " + type_name(v));
}

ConfigValue convert(const toml::node& node, const std::string& key) {
  if (auto v = node.value_exact<bool>()) return ConfigValue{*v};
  if (auto v = node.value_exact<std::int64_t>()) return ConfigValue{*v};
  if (auto v = node.value_exact<double>()) return ConfigValue{*v};
  if (auto v = node.value_exact<std::string>()) return ConfigValue{*v};
  if (const auto* arr = node.as_array()) {
    ConfigValue::Array out;
    for (const auto& item : *arr) out.push_back(convert(item, key));
    return ConfigValue{std::move(out)};
  }
  throw ConfigError("config key '" + key + "' has an unsupported value type");
}

void flatten(const toml::table& table, const std::string& prefix, ConfigDocument& doc) {
  for (const auto& [k, node] : table) {
    const std::string key = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
    if (const auto* sub = node.as_table()) {
      flatten(*sub, key, doc);
    } else {
      doc.set(key, convert(node, key));
    }
  }
}

ConfigError parse_failure(const toml::parse_error& e) {
  std::ostringstream out;
  out << "config line " << e.source().begin.line << ": " << e.description();
  return ConfigError(out.str());
}

}  // namespace

std::string ConfigValue::as_string(std::string_view key) const {
  if (auto* s = std::get_if<std::string>(&value)) return *s;
  mismatch(key, "a string", *this);
}

std::int64_t ConfigValue::as_int(std::string_view key) const {
  if (auto* i = std::get_if<std::int64_t>(&value)) return *i;
  mismatch(key, "an integer", *this);
}

std::uint64_t ConfigValue::as_uint(std::string_view key) const {
  const auto i = as_int(key);
  if (i < 0) throw ConfigError("config key '" + std::string(key) + "' must be nonnegative");
  return static_cast<std::uint64_t>(i);
}

double ConfigValue::as_double(std::string_view key) const {
  if (auto* d = std::get_if<double>(&value)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
  mismatch(key, "a number", *this);
}

bool ConfigValue::as_bool(std::string_view key) const {
  if (auto* b = std::get_if<bool>(&value)) return *b;
  mismatch(key, "a boolean", *this);
}

const ConfigValue::Array& ConfigValue::as_array(std::string_view key) const {
  if (auto* a = std::get_if<Array>(&value)) return *a;
  mismatch(key, "an array", *this);
}

ConfigValue parse_config_value(std::string_view text) {
  toml::table t;
  try {
    t = toml::parse("v = " + std::string(text));
  } catch (const toml::parse_error& e) {
    throw ConfigError("config value '" + std::string(text) + "': " + std::string(e.description()));
  }
  return convert(*t.get("v"), "value");
}

ConfigDocument ConfigDocument::parse(std::string_view text) {
  toml::table table;
  try {
    table = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw parse_failure(e);
  }
  ConfigDocument doc;
  flatten(table, "", doc);
  return doc;
}

ConfigDocument ConfigDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

const ConfigValue* ConfigDocument::find(std::string_view dotted_key) const {
  auto it = entries_.find(dotted_key);
  return it == entries_.end() ? nullptr : &it->second;
}

void ConfigDocument::set(std::string dotted_key, ConfigValue value) {
  entries_.insert_or_assign(std::move(dotted_key), std::move(value));
}

void ConfigDocument::set_from_text(std::string dotted_key, std::string_view text) {
  ConfigValue value;
  try {
    value = parse_config_value(text);
  } catch (const ConfigError&) {
    value = ConfigValue{std::string(text)};
  }
  set(std::move(dotted_key), std::move(value));
}

}  // namespace fewie
