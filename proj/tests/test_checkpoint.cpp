#include <cstring>
#include <limits>

#include "doctest.h"
#include "fidex/checkpoint.hpp"
#include "support/model_fixtures.hpp"
#include "support/tmp.hpp"

using namespace fidex;

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip is bit exact") {
    const auto d = testing_tmp::dir("ckpt");
    const Checkpoint c{init_params(fixture::tiny_config(30, 2)), 0x0123456789abcdefULL, 42, "target", "inter.ckpt"};
    save_checkpoint(d + "/a.ckpt", c);
    const auto back = load_checkpoint(d + "/a.ckpt");
    CHECK(back.params == c.params);
    CHECK(back.vocab_hash == c.vocab_hash);
    CHECK(back.step == 42);
    CHECK(back.stage == "target");
    CHECK(back.init_from == "inter.ckpt");
    const std::string bytes = read_file(d + "/a.ckpt");
    CHECK(bytes.substr(0, 8) == "FIDEXCK1");
    CHECK(bytes.find("\"vocab_hash\":\"0123456789abcdef\"") != std::string::npos);
  }

  TEST_CASE("config json round trip") {
    ModelConfig c = fixture::tiny_config();
    c.dropout_rate = 0.25;
    c.seed = 77;
    CHECK(model_config_from_json(model_config_to_json(c)) == c);
  }

  TEST_CASE("corrupt files are rejected") {
    const auto d = testing_tmp::dir("ckpt_bad");
    CHECK_THROWS_WITH_AS(load_checkpoint(d + "/none.ckpt"), doctest::Contains("not found"), DataError);
    write_file(d + "/junk.ckpt", "hello world, not a checkpoint");
    CHECK_THROWS_WITH_AS(load_checkpoint(d + "/junk.ckpt"), doctest::Contains("not a checkpoint"), DataError);

    save_checkpoint(d + "/ok.ckpt", {init_params(fixture::tiny_config()), 1, 0, "target", ""});
    std::string bytes = read_file(d + "/ok.ckpt");
    write_file(d + "/short.ckpt", bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_WITH_AS(load_checkpoint(d + "/short.ckpt"), doctest::Contains("size mismatch"), DataError);

    // Rename one tensor in the header; same length keeps the layout intact.
    std::string renamed = bytes;
    const auto at = renamed.find("\"embedding\"");
    REQUIRE(at != std::string::npos);
    renamed.replace(at, 11, "\"embeddinX\"");
    write_file(d + "/renamed.ckpt", renamed);
    CHECK_THROWS_WITH_AS(load_checkpoint(d + "/renamed.ckpt"), doctest::Contains("embeddinX"), DataError);

    // A NaN weight is caught at load time.
    std::string nan = bytes;
    const double q = std::numeric_limits<double>::quiet_NaN();
    std::memcpy(nan.data() + nan.size() - 8, &q, 8);
    write_file(d + "/nan.ckpt", nan);
    CHECK_THROWS_WITH_AS(load_checkpoint(d + "/nan.ckpt"), doctest::Contains("non-finite"), DataError);
  }

  TEST_CASE("shape comparison names the field") {
    const ModelConfig a = fixture::tiny_config();
    ModelConfig b = a;
    CHECK_NOTHROW(require_same_shapes(a, b));
    b.seed = 99;
    b.dropout_rate = 0.1;
    CHECK_NOTHROW(require_same_shapes(a, b));
    b.d_ffn = 32;
    CHECK_THROWS_WITH_AS(require_same_shapes(a, b), doctest::Contains("d_ffn"), DataError);
    b = a;
    b.vocab_size = 21;
    CHECK_THROWS_WITH_AS(require_same_shapes(a, b), doctest::Contains("vocab_size"), DataError);
  }
}
