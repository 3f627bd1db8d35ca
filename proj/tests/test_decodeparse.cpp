#include "doctest.h"
#include "fidex/decodeparse.hpp"
#include "fidex/textproc.hpp"
#include "support/random_examples.hpp"
#include "support/tmp.hpp"

using namespace fidex;

namespace {

ParsedPrediction with_markers(std::vector<int> m) {
  ParsedPrediction p;
  p.label_text = "x";
  p.marker_ids = std::move(m);
  return p;
}

}  // namespace

TEST_SUITE("decodeparse") {
  TEST_CASE("parse examples") {
    auto p = parse_output("False explanation: S2 explanation: S3");
    CHECK(p.label_text == "False");
    CHECK(p.marker_ids == std::vector<int>{2, 3});
    CHECK(p.malformed_segments == 0);

    p = parse_output("True");
    CHECK(p.label_text == "True");
    CHECK(p.marker_ids.empty());

    p = parse_output("False explanation: S2 explanation: S2 explanation: the dog ran");
    CHECK(p.label_text == "False");
    CHECK(p.marker_ids == std::vector<int>{2});
    CHECK(p.malformed_segments == 1);
  }

  TEST_CASE("parse anomalies") {
    CHECK(parse_output("").label_text.empty());
    auto p = parse_output("  a  b explanation: S0 explanation: S explanation: s3 explanation: S1 S2 explanation: S07");
    CHECK(p.label_text == "a  b");
    CHECK(p.marker_ids == std::vector<int>{7});
    CHECK(p.malformed_segments == 4);
    p = parse_output("explanation: S5 explanation:");
    CHECK(p.label_text.empty());
    CHECK(p.marker_ids == std::vector<int>{5});
    CHECK(p.malformed_segments == 1);
    p = parse_output("L explanation: S99999999999");
    CHECK(p.marker_ids.empty());
    CHECK(p.malformed_segments == 1);
    // First occurrence order survives deduplication.
    CHECK(parse_output("L explanation: S9 explanation: S1 explanation: S9").marker_ids == std::vector<int>{9, 1});
  }

  TEST_CASE("map examples") {
    auto m = map_to_sentences(with_markers({2, 3}), 5);
    CHECK(m.rationale_indices == IndexSet{1, 2});
    CHECK_FALSE(m.not_in_input);
    m = map_to_sentences(with_markers({}), 7);
    CHECK(m.rationale_indices.empty());
    CHECK_FALSE(m.not_in_input);
    m = map_to_sentences(with_markers({261, 262}), 138);
    CHECK(m.rationale_indices.empty());
    CHECK(m.not_in_input);
    CHECK(m.out_of_range == std::vector<int>{261, 262});
    m = map_to_sentences(with_markers({1, 4}), 0);
    CHECK(m.rationale_indices.empty());
    CHECK(m.not_in_input);
  }

  TEST_CASE("round trip through the serializer") {
    Rng r(41);
    const char* labels[] = {"True", "False", "significantly increases", "no significant difference", "NEG"};
    for (int t = 0; t < 500; ++t) {
      const std::string label = labels[r.below(std::size(labels))];
      const IndexSet idx = gen::subset(r, 1 + r.below(300), 0.1);
      const auto p = parse_output(serialize_target(label, idx));
      CHECK(p.label_text == label);
      CHECK(p.malformed_segments == 0);
      IndexSet back;
      for (int m : p.marker_ids) back.insert(m - 1);
      CHECK(back == idx);
    }
  }

  TEST_CASE("extractiveness on arbitrary decoder text") {
    Rng r(43);
    const char* toks[] = {"explanation:", "S1", "S2", "S12", "S300", "S0", "the", "True", "S", "explanation:S3", " "};
    for (int t = 0; t < 1000; ++t) {
      std::string text;
      const std::size_t n = r.below(25);
      for (std::size_t i = 0; i < n; ++i) text += std::string(toks[r.below(std::size(toks))]) + " ";
      const std::size_t N = r.below(20);
      const auto p = parse_output(text);
      for (int m : p.marker_ids) {
        CHECK(m >= 1);
        CHECK(text.find("S" + std::to_string(m)) != std::string::npos);
      }
      const auto mapped = map_to_sentences(p, N);
      for (int i : mapped.rationale_indices) CHECK((i >= 0 && static_cast<std::size_t>(i) < N));
      CHECK(mapped.not_in_input == !mapped.out_of_range.empty());
      CHECK(mapped.rationale_indices.size() + mapped.out_of_range.size() == p.marker_ids.size());
    }
  }

  TEST_CASE("prediction dump round trip") {
    const auto p = parse_output("yes explanation: S4 explanation: S40 explanation: junk");
    const auto rec = make_prediction_record("e1", p, 10);
    CHECK(rec.marker_ids == std::vector<int>{4});
    CHECK(rec.out_of_range == std::vector<int>{40});
    CHECK(rec.malformed_segments == 1);
    CHECK(to_json_line(rec) ==
          R"({"id":"e1","label":"yes","marker_ids":[4],"out_of_range":[40],"malformed_segments":1})");
    const auto d = testing_tmp::dir("preds");
    save_predictions({rec, make_prediction_record("e2", parse_output("no"), 3)}, d + "/p.jsonl");
    const auto back = load_predictions(d + "/p.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[0] == rec);
    CHECK(back[1].label == "no");
    CHECK_THROWS_WITH_AS(parse_predictions("{\"id\":\"a\"}\n", "x.jsonl"), doctest::Contains("x.jsonl:1"), DataError);
    CHECK_THROWS_AS(load_predictions(d + "/missing.jsonl"), DataError);
  }
}
