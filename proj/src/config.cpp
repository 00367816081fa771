#include "muffler/config.h"

#include <charconv>
#include <istream>
#include <limits>

namespace muffler {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw ConfigError(key, "expected a number, got '" + value + "'");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value, std::uint64_t max) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size() || out > max) {
    throw ConfigError(key, "expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

SocketAddress parse_addr(const std::string& key, const std::string& value) {
  try {
    return parse_address(value);
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

void set(RunConfig& c, const std::string& key, const std::string& value) {
  ObfuscationConfig& o = c.obfuscation;
  if (key == "role") {
    if (value == "ingress") {
      c.role = Role::Ingress;
    } else if (value == "egress") {
      c.role = Role::Egress;
    } else {
      throw ConfigError(key, "expected ingress or egress, got '" + value + "'");
    }
  } else if (key == "listen") {
    c.listen = parse_addr(key, value);
  } else if (key == "peer") {
    c.peer = parse_addr(key, value);
  } else if (key == "service") {
    c.service = parse_addr(key, value);
  } else if (key == "alpha") {
    o.alpha = parse_double(key, value);
  } else if (key == "beta") {
    o.beta = parse_double(key, value);
  } else if (key == "shuffle_threshold") {
    o.shuffle_threshold = static_cast<std::uint32_t>(
        parse_uint(key, value, std::numeric_limits<std::uint32_t>::max()));
  } else if (key == "m_min") {
    o.m_min = static_cast<std::uint32_t>(
        parse_uint(key, value, std::numeric_limits<std::uint32_t>::max()));
  } else if (key == "remap_interval_ms") {
    o.remap_interval = from_ms(static_cast<std::int64_t>(parse_uint(key, value, 1u << 30)));
  } else if (key == "rate_window_ms") {
    o.rate_window = from_ms(static_cast<std::int64_t>(parse_uint(key, value, 1u << 30)));
  } else if (key == "base_connections") {
    c.base_connections = static_cast<std::uint32_t>(
        parse_uint(key, value, std::numeric_limits<std::uint32_t>::max()));
  } else if (key == "trace_output") {
    if (value.empty()) {
      c.trace_output.reset();
    } else {
      c.trace_output = value;
    }
  } else {
    throw ConfigError(key, "unknown key");
  }
}

// ObfuscationConfig::validate names the key as "<key>: ...".
void validate(const RunConfig& c) {
  try {
    c.obfuscation.validate();
  } catch (const std::invalid_argument& e) {
    std::string what = e.what();
    throw ConfigError(what.substr(0, what.find(':')), what);
  }
  if (c.base_connections < c.obfuscation.m_min) {
    throw ConfigError("base_connections", "must be at least m_min");
  }
}

}  // namespace

ConfigError::ConfigError(const std::string& key, const std::string& what)
    : std::runtime_error("config key '" + key + "': " + what), key_(key) {}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "role",  "listen", "peer",  "service",           "alpha",
      "beta",  "shuffle_threshold", "m_min", "remap_interval_ms",
      "rate_window_ms", "base_connections", "trace_output"};
  return keys;
}

Settings parse_settings(std::istream& in) {
  Settings out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') {
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(t, "line " + std::to_string(line_no) + " is not key=value");
    }
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

RunConfig make_config(const Settings& file, const Settings& flags) {
  RunConfig c;
  for (const auto& [k, v] : file) {
    set(c, k, v);
  }
  for (const auto& [k, v] : flags) {
    set(c, k, v);
  }
  validate(c);
  return c;
}

}  // namespace muffler
