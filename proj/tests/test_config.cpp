#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "liouville/config.hpp"
#include "liouville/scenarios.hpp"

#include <string>

using namespace liouville;

namespace {

std::string error_of(const std::string& text) {
  try {
    (void)Config::parse_string(text, "test.ini");
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

std::string build_error(const std::string& scenario, const std::string& section, const std::string& key,
                        const std::string& value) {
  Config c;
  c.set("", "scenario", scenario);
  c.set(section, key, value);
  try {
    (void)build_scenario(c);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("parsing") {
  const auto c = Config::parse_string("scenario = flock  # comment\nT = 2.5\n\n[theta]\ncenter = 1, -2\n");
  CHECK(c.text("", "scenario") == "flock");
  CHECK(c.number("", "T") == 2.5);
  CHECK(c.vector("theta", "center") == make_vec({1.0, -2.0}));
  CHECK(c.number("", "missing", 7.0) == 7.0);
  CHECK(c.integer("", "K", 3) == 3);
  const auto pts = Config::parse_string("[target]\ncenters = 0,0; 1,2\n").points("target", "centers");
  REQUIRE(pts.size() == 2);
  CHECK(pts[1] == make_vec({1.0, 2.0}));
}

TEST_CASE("diagnostics name the source line") {
  CHECK(error_of("a = 1\n[sec\n") == "test.ini:2: unterminated section header");
  CHECK(error_of("a = 1\n\njunk\n") == "test.ini:3: expected 'key = value'");
  CHECK(error_of("[s]\na = 1\na = 2\n") == "test.ini:3: duplicate key [s] a");
  CHECK(error_of("= 4\n") == "test.ini:1: empty key");
  CHECK_THROWS_AS(Config::parse_string("T = fast").number("", "T"), ValidationError);
  CHECK_THROWS_AS(Config::parse_string("K = 1.5").integer("", "K", 1), ValidationError);
  CHECK_THROWS_AS(Config::parse_string("").text("", "scenario"), ValidationError);
}

TEST_CASE("serialization round trips") {
  for (const auto& name : scenario_names()) {
    const auto c = default_config(name);
    const auto text = c.serialize();
    CHECK(Config::parse_string(text) == c);
    CHECK(Config::parse_string(text).serialize() == text);
  }
}

TEST_CASE("scenarios") {
  const auto names = scenario_names();
  CHECK(names.size() == 5);
  for (const auto& name : names) {
    Config c;
    c.set("", "scenario", name);
    const auto s = build_scenario(c);
    CHECK(s.problem.name == name);
    CHECK(s.seed == 1);
  }
  Config c;
  c.set("", "scenario", "flock");
  c.set("", "K", "3");
  const auto s = build_scenario(c);
  CHECK(s.problem.cells == 3);
  CHECK(s.config.text("field", "kind") == "flock");
}

TEST_CASE("invalid values are rejected with the field name") {
  CHECK(build_error("flock", "", "T", "-1").find("config field T") != std::string::npos);
  CHECK(build_error("flock", "", "K", "0").find("config field K") != std::string::npos);
  CHECK(build_error("flock", "field", "kind", "vortex").find("[field] kind") != std::string::npos);
  CHECK(build_error("flock", "target", "radius", "0").find("[target] radius") != std::string::npos);
  CHECK(build_error("p_prime", "theta", "kind", "particles").find("[theta]") != std::string::npos);
  CHECK(build_error("flock", "", "seed", "1.5").find("seed") != std::string::npos);
  CHECK(build_error("nowhere", "", "T", "1").find("unknown scenario") != std::string::npos);
}
