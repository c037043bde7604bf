#include <doctest.h>

#include "rollout/config.hpp"
#include "rollout/errors.hpp"

using namespace rollout;

TEST_CASE("SHA-256 test vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("parsing, overrides and typed getters") {
  const Config c = Config::parse("# comment\n seed = 42 \nuucb.c=1.5\n\nname = a b\nflag=on\nseed=43\n");
  CHECK(c.get_int("seed", 0) == 43);
  CHECK(c.get_double("uucb.c", 0) == 1.5);
  CHECK(c.get_string("name", "") == "a b");
  CHECK(c.get_bool("flag", false));
  CHECK(c.get_u64("missing", 9) == 9);

  Config d = c;
  d.apply_override("uucb.c=2");
  CHECK(d.get_double("uucb.c", 0) == 2.0);
  CHECK(d.hash() != c.hash());

  CHECK_THROWS_AS(Config::parse("no equals sign"), ConfigError);
  CHECK_THROWS_AS(Config::parse("bad key! = 1"), ConfigError);
  CHECK_THROWS_AS(d.apply_override("novalue"), ConfigError);
  CHECK_THROWS_AS(c.get_int("uucb.c", 0), ConfigError);
  CHECK_THROWS_AS(c.get_double("name", 0), ConfigError);
  CHECK_THROWS_AS(c.get_bool("seed", false), ConfigError);
  CHECK_THROWS_AS(c.get_u64("name", 0), ConfigError);
  CHECK_THROWS_AS(Config::load("/nonexistent/file.cfg"), ConfigError);
}

TEST_CASE("canonical form is sorted, round-trips, and drives the hash") {
  const Config a = Config::parse("b=2\na=1\n");
  const Config b = Config::parse("a = 1\n# x\nb= 2");
  CHECK(a.canonical() == "a=1\nb=2\n");
  CHECK(a.canonical() == b.canonical());
  CHECK(a.hash() == b.hash());
  CHECK(Config::parse(a.canonical()).canonical() == a.canonical());
  CHECK(a.hash() == sha256_hex(a.canonical()));
  CHECK(a.hash().size() == 64);
}
