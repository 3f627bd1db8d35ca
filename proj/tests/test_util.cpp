#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "fidex/util.hpp"
#include "support/tmp.hpp"

using namespace fidex;

TEST_SUITE("util") {
  TEST_CASE("rng is deterministic per seed") {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
      const auto x = a.next();
      CHECK(x == b.next());
      differs |= x != c.next();
    }
    CHECK(differs);
  }

  TEST_CASE("rng ranges") {
    Rng r(7);
    for (int i = 0; i < 10000; ++i) {
      CHECK(r.below(13) < 13);
      const double u = r.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
      const double v = r.uniform(-2.0, 3.0);
      CHECK(v >= -2.0);
      CHECK(v < 3.0);
    }
  }

  TEST_CASE("below is roughly uniform") {
    Rng r(11);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 100000; ++i) ++counts[r.below(10)];
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  }

  TEST_CASE("shuffle permutes") {
    std::vector<int> xs(50);
    std::iota(xs.begin(), xs.end(), 0);
    auto ys = xs;
    Rng r(3);
    r.shuffle(ys);
    CHECK(ys != xs);
    std::sort(ys.begin(), ys.end());
    CHECK(ys == xs);
  }

  TEST_CASE("string helpers") {
    CHECK(trim("  a b \n") == "a b");
    CHECK(trim("   ").empty());
    CHECK(split_whitespace(" a  b\tc\n") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_whitespace("").empty());
    CHECK(join({"a", "b", "c"}, ", ") == "a, b, c");
    CHECK(join({}, ",").empty());
    CHECK(starts_with("explain x", "explain"));
    CHECK_FALSE(starts_with("ex", "explain"));
  }

  TEST_CASE("fnv1a reference values") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
  }

  TEST_CASE("mix_seed separates inputs") {
    CHECK(mix_seed(1, 2) != mix_seed(2, 1));
    CHECK(mix_seed(1, 2, 3) == mix_seed(1, 2, 3));
    CHECK(mix_seed(1, 2, 3) != mix_seed(1, 2, 4));
  }

  TEST_CASE("file round trip creates parent directories") {
    const std::string d = testing_tmp::dir("util_io");
    const std::string p = d + "/a/b/c.txt";
    CHECK_FALSE(file_exists(p));
    write_file(p, std::string("x\0y\n", 4));
    CHECK(file_exists(p));
    CHECK(read_file(p) == std::string("x\0y\n", 4));
    CHECK_THROWS_AS(read_file(d + "/missing"), DataError);
  }
}
