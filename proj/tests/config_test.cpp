#include "muffler/config.h"

#include <gtest/gtest.h>

#include <sstream>

namespace muffler {
namespace {

Settings parse(const std::string& text) {
  std::stringstream ss(text);
  return parse_settings(ss);
}

std::string failing_key(const Settings& file, const Settings& flags = {}) {
  try {
    make_config(file, flags);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

TEST(Config, EmptyGivesDefaults) {
  const RunConfig c = make_config({});
  EXPECT_DOUBLE_EQ(c.obfuscation.alpha, 0.1);
  EXPECT_DOUBLE_EQ(c.obfuscation.beta, 2.0);
  EXPECT_EQ(c.obfuscation.shuffle_threshold, 4u);
  EXPECT_EQ(c.obfuscation.m_min, 3u);
  EXPECT_EQ(c.role, Role::Ingress);
  EXPECT_FALSE(c.trace_output);
}

TEST(Config, AlphaOutOfRange) {
  EXPECT_EQ(failing_key({{"alpha", "1.5"}}), "alpha");
  EXPECT_EQ(failing_key({{"beta", "0.5"}}), "beta");
  EXPECT_EQ(failing_key({{"m_min", "0"}}), "m_min");
}

TEST(Config, FlagBeatsFile) {
  const Settings file = parse("# comment\nalpha = 0.2\n\nrole=egress\n");
  const RunConfig c = make_config(file, {{"alpha", "0.3"}});
  EXPECT_DOUBLE_EQ(c.obfuscation.alpha, 0.3);
  EXPECT_EQ(c.role, Role::Egress);
}

TEST(Config, UnknownKeyRejected) {
  EXPECT_EQ(failing_key({{"gamma", "1"}}), "gamma");
  EXPECT_EQ(failing_key({}, {{"alhpa", "0.1"}}), "alhpa");
}

TEST(Config, BadValuesNameTheKey) {
  EXPECT_EQ(failing_key({{"alpha", "lots"}}), "alpha");
  EXPECT_EQ(failing_key({{"m_min", "-1"}}), "m_min");
  EXPECT_EQ(failing_key({{"role", "middle"}}), "role");
  EXPECT_EQ(failing_key({{"listen", "nowhere"}}), "listen");
  EXPECT_EQ(failing_key({{"base_connections", "2"}}), "base_connections");
}

TEST(Config, Addresses) {
  const RunConfig c = make_config({{"listen", ":7000"}, {"peer", "[::1]:7001"},
                                   {"service", "example.org:80"}, {"trace_output", "t.csv"}});
  EXPECT_EQ(c.listen.port, 7000);
  EXPECT_EQ(c.peer.host, "::1");
  EXPECT_EQ(c.service.host, "example.org");
  EXPECT_EQ(*c.trace_output, "t.csv");
}

TEST(Config, LineWithoutEquals) {
  EXPECT_THROW(parse("alpha 0.1\n"), ConfigError);
}

TEST(Config, EveryKeyIsAccepted) {
  for (const std::string& key : config_keys()) {
    try {
      make_config({{key, "x"}});
    } catch (const ConfigError& e) {
      EXPECT_EQ(std::string(e.what()).find("unknown key"), std::string::npos) << key;
    }
  }
}

}  // namespace
}  // namespace muffler
