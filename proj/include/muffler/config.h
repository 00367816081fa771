#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "muffler/mapping.h"
#include "muffler/proxy.h"
#include "muffler/transport.h"

namespace muffler {

struct RunConfig {
  Role role = Role::Ingress;
  SocketAddress listen{"127.0.0.1", 9000};
  SocketAddress peer{"127.0.0.1", 9001};     // ingress: where the egress proxy listens
  SocketAddress service{"127.0.0.1", 8080};  // egress: where real connections go
  ObfuscationConfig obfuscation;
  std::uint32_t base_connections = 64;  // cap on simultaneously open base connections
  std::optional<std::string> trace_output;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what);
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

using Settings = std::vector<std::pair<std::string, std::string>>;

// Flat key=value lines; blank lines and lines starting with '#' are skipped.
// Throws ConfigError for a line without '='.
Settings parse_settings(std::istream& in);

// Applies `file` then `flags` on top of the defaults, so flags win. Throws
// ConfigError naming the key for unknown keys, unparsable values and
// violated invariants.
RunConfig make_config(const Settings& file, const Settings& flags = {});

// Keys make_config understands, in a stable order.
const std::vector<std::string>& config_keys();

}  // namespace muffler
