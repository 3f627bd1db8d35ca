#include <algorithm>
#include <set>

#include "doctest.h"
#include "fidex/corpus.hpp"
#include "fidex/textproc.hpp"
#include "support/random_examples.hpp"
#include "support/tmp.hpp"

using namespace fidex;

namespace {

Example make(std::string id, std::vector<std::string> sentences, IndexSet r, std::string label = "True") {
  return Example{std::move(id), "boolq", "is it ?", std::move(sentences), std::move(label), std::move(r)};
}

bool is_subsequence(const std::vector<Example>& sub, const std::vector<Example>& xs) {
  std::size_t j = 0;
  for (const auto& x : xs)
    if (j < sub.size() && sub[j] == x) ++j;
  return j == sub.size();
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("load of an empty file is empty") {
    const auto d = testing_tmp::dir("corpus_empty");
    write_file(d + "/x.jsonl", "");
    CHECK(load_examples(d + "/x.jsonl").empty());
  }

  TEST_CASE("one record loads") {
    const auto xs = parse_examples(
        R"({"id":"a","task":"boolq","query":"q ?","sentences":["s one","s two","s three"],"label":"False","rationale_indices":[1]})");
    REQUIRE(xs.size() == 1);
    CHECK(xs[0].id == "a");
    CHECK(xs[0].sentences.size() == 3);
    CHECK(xs[0].rationale_indices == IndexSet{1});
  }

  TEST_CASE("rationale index out of range is rejected") {
    const std::string line =
        R"({"id":"a","task":"t","query":"q","sentences":["x","y","z"],"label":"L","rationale_indices":[5]})";
    CHECK_THROWS_WITH_AS(parse_examples(line, "f.jsonl"), doctest::Contains("rationale index out of range"),
                         DataError);
    CHECK_THROWS_WITH_AS(parse_examples("\n" + line, "f.jsonl"), doctest::Contains("f.jsonl:2"), DataError);
  }

  TEST_CASE("invariant violations name the field") {
    auto bad = [](const std::string& line) {
      try {
        parse_examples(line);
      } catch (const DataError& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(bad(R"({"id":"a","task":"t","query":"q","sentences":[],"label":"L","rationale_indices":[]})")
              .find("sentences") != std::string::npos);
    CHECK(bad(R"({"id":"a","task":"t","query":"q","sentences":["  "],"label":"L","rationale_indices":[]})")
              .find("sentence 0") != std::string::npos);
    CHECK(bad(R"({"id":"a","task":"t","query":"q","sentences":["x"],"label":"a explanation: b","rationale_indices":[]})")
              .find("explanation:") != std::string::npos);
    CHECK(bad(R"({"id":"a","task":"t","query":"q","sentences":["x"],"label":" L","rationale_indices":[]})")
              .find("whitespace") != std::string::npos);
    CHECK(bad(R"({"id":"a","task":"t","query":"q","sentences":["x"],"rationale_indices":[]})").find("label") !=
          std::string::npos);
    CHECK(bad(R"({"id":"a","task":"t","query":"q","sentences":["x"],"label":"L","rationale_indices":[-1]})")
              .find("out of range") != std::string::npos);
    CHECK(bad("{not json").find("malformed") != std::string::npos);
  }

  TEST_CASE("save then load is the identity") {
    const auto d = testing_tmp::dir("corpus_roundtrip");
    save_examples({}, d + "/empty.jsonl");
    CHECK(read_file(d + "/empty.jsonl").empty());
    Rng r(5);
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<Example> xs;
      const auto n = r.below(6);
      for (std::uint64_t i = 0; i < n; ++i) xs.push_back(gen::example(r, "e" + std::to_string(i), 20, true));
      save_examples(xs, d + "/x.jsonl");
      CHECK(load_examples(d + "/x.jsonl") == xs);
    }
  }

  TEST_CASE("record field order is stable") {
    const auto ex = make("a", {"x y"}, {0});
    CHECK(to_json_line(ex) ==
          R"({"id":"a","task":"boolq","query":"is it ?","sentences":["x y"],"label":"True","rationale_indices":[0]})");
  }

  TEST_CASE("span QA: answer inside sentence 1") {
    SpanQARecord r;
    r.id = "q1";
    r.question = "who wrote X ?";
    r.passage = "A b. C wrote X in 1990. D e.";
    r.answer_text = "C";
    r.answer_char_span = {5, 6};
    const Example ex = restructure_span_qa(r, segment_sentences);
    CHECK(ex.sentences == std::vector<std::string>{"A b.", "C wrote X in 1990.", "D e."});
    CHECK(ex.rationale_indices == IndexSet{1});
    CHECK(ex.label == "C");
    CHECK(ex.task == "nq");
    CHECK(ex.query == r.question);
  }

  TEST_CASE("span QA: whole single-sentence passage") {
    SpanQARecord r{"q", "what ?", "all of it", "all of it", {0, 9}};
    CHECK(restructure_span_qa(r, segment_sentences).rationale_indices == IndexSet{0});
  }

  TEST_CASE("span QA: straddling span takes the sentence holding its start") {
    // "One two. Three four." ; span "two. Three" starts at offset 4 (sentence 0).
    SpanQARecord r{"q", "?", "One two. Three four.", "two. Three", {4, 14}};
    CHECK(restructure_span_qa(r, segment_sentences).rationale_indices == IndexSet{0});
    // Starting on the space between sentences belongs to the next one.
    SpanQARecord s{"q", "?", "One two. Three four.", " Three", {8, 14}};
    CHECK(restructure_span_qa(s, segment_sentences).rationale_indices == IndexSet{1});
  }

  TEST_CASE("span QA: segmenter that drops text leaves the span uncovered") {
    SpanQARecord r{"q", "?", "Alpha beta. Gamma delta.", "Gamma", {12, 17}};
    auto first_only = [](std::string_view) { return std::vector<std::string>{"Alpha beta."}; };
    CHECK_THROWS_WITH_AS(restructure_span_qa(r, first_only), "span not covered", DataError);
  }

  TEST_CASE("span QA record validation") {
    CHECK_THROWS_AS(span_qa_from_json_line(R"({"question":"q","passage":"abc","answer_text":"x","answer_char_span":[0,1]})"),
                    DataError);
    CHECK_THROWS_AS(span_qa_from_json_line(R"({"question":"q","passage":"abc","answer_text":"a","answer_char_span":[2,9]})"),
                    DataError);
    const auto ok = span_qa_from_json_line(R"({"question":"q","passage":"abc","answer_text":"b","answer_char_span":[1,2]})");
    CHECK(ok.answer_text == "b");
  }

  TEST_CASE("multi-doc QA: one example per document") {
    MultiDocQARecord r;
    r.id = "h";
    r.question = "which ?";
    r.answer_text = "Yes";
    r.docs = {{"A", {"a0", "a1"}, {0}}, {"B", {"b0", "b1", "b2"}, {1, 2}}, {"C", {"c0"}, {}}};
    const auto out = restructure_multidoc_qa(r);
    REQUIRE(out.examples.size() == 3);
    const std::vector<IndexSet> expected{{0}, {1, 2}, {}};
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(out.examples[i].rationale_indices == expected[i]);
      CHECK(out.examples[i].sentences == r.docs[i].sentences);
      CHECK(out.examples[i].query == "which ?");
      CHECK(out.examples[i].label == "Yes");
      CHECK(out.examples[i].task == "hotpot");
      CHECK(out.examples[i].id == "h-" + std::to_string(i));
    }
  }

  TEST_CASE("multi-doc QA: two docs, empty supporting set, empty document") {
    MultiDocQARecord r{"h", "q", "A", {{"x", {"s"}, {}}, {"y", {"t", "u"}, {1}}}};
    CHECK(restructure_multidoc_qa(r).examples.size() == 2);
    CHECK(restructure_multidoc_qa(r).examples[0].rationale_indices.empty());
    r.docs.push_back({"z", {}, {}});
    const auto out = restructure_multidoc_qa(r);
    CHECK(out.examples.size() == 2);
    CHECK(out.skipped_documents == 1);
    MultiDocQARecord bad{"h", "q", "A", {{"x", {"s"}, {3}}}};
    CHECK_THROWS_AS(restructure_multidoc_qa(bad), DataError);
  }

  TEST_CASE("few-shot budget parsing") {
    CHECK(std::get<double>(FewShotBudget::parse("0.25").value) == 0.25);
    CHECK(std::get<std::size_t>(FewShotBudget::parse("2000").value) == 2000);
    CHECK(std::get<double>(FewShotBudget::parse("1.0").value) == 1.0);
    CHECK_THROWS_AS(FewShotBudget::parse("1.5"), UsageError);
    CHECK_THROWS_AS(FewShotBudget::parse("0"), UsageError);
    CHECK_THROWS_AS(FewShotBudget::parse("abc"), UsageError);
    CHECK_THROWS_AS(FewShotBudget::parse("-3"), UsageError);
  }

  TEST_CASE("few-shot sampling") {
    Rng r(1);
    std::vector<Example> xs;
    for (int i = 0; i < 101; ++i) xs.push_back(gen::example(r, "x" + std::to_string(i), 3));

    CHECK(fewshot_sample(xs, FewShotBudget::fraction(1.0), 9) == xs);
    CHECK(fewshot_sample(xs, FewShotBudget::fraction(0.25), 9).size() == 25);
    CHECK(fewshot_sample(xs, FewShotBudget::fraction(0.001), 9).size() == 1);
    CHECK(fewshot_sample(xs, FewShotBudget::count(40), 9).size() == 40);
    CHECK_THROWS_AS(fewshot_sample(xs, FewShotBudget::count(102), 9), UsageError);

    const auto a = fewshot_sample(xs, FewShotBudget::count(30), 4);
    CHECK(a == fewshot_sample(xs, FewShotBudget::count(30), 4));
    CHECK(a != fewshot_sample(xs, FewShotBudget::count(30), 5));
    CHECK(is_subsequence(a, xs));

    // Nested under shrinking budgets for one seed.
    const auto big = fewshot_sample(xs, FewShotBudget::fraction(0.5), 4);
    const auto small = fewshot_sample(xs, FewShotBudget::fraction(0.2), 4);
    CHECK(is_subsequence(small, big));
  }

  TEST_CASE("few-shot count on a large set") {
    std::vector<Example> xs(24029, make("x", {"s"}, {}));
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i].id = std::to_string(i);
    CHECK(fewshot_sample(xs, FewShotBudget::count(2000), 0).size() == 2000);
  }

  TEST_CASE("synthetic data") {
    CHECK(synth_dataset(default_synth_options(1, 0)).empty());
    const auto opts = default_synth_options(7, 500);
    const auto a = synth_dataset(opts);
    CHECK(a.size() == 500);
    CHECK(a == synth_dataset(opts));
    CHECK(a != synth_dataset(default_synth_options(8, 500)));
    std::set<std::string> ids;
    std::size_t positives = 0;
    for (const auto& ex : a) {
      CHECK_NOTHROW(validate(ex));
      CHECK(satisfies_keyword_rule(ex, opts.keyword_vocab));
      CHECK(ex.sentences.size() >= opts.min_sentences);
      CHECK(ex.sentences.size() <= opts.max_sentences);
      ids.insert(ex.id);
      positives += ex.label == "True";
      // Recompute the rule independently.
      IndexSet expected;
      for (std::size_t i = 0; i < ex.sentences.size(); ++i)
        for (const auto& w : split_whitespace(ex.sentences[i]))
          if (std::find(opts.keyword_vocab.begin(), opts.keyword_vocab.end(), w) != opts.keyword_vocab.end())
            expected.insert(static_cast<int>(i));
      CHECK(ex.rationale_indices == expected);
      CHECK(ex.label == (expected.empty() ? "False" : "True"));
    }
    CHECK(ids.size() == a.size());
    CHECK(positives > 100);
    CHECK(positives < 400);
  }

  TEST_CASE("keyword rule detects a broken example") {
    const auto opts = default_synth_options(7, 1);
    Example ex = make("k", {"dull words here", opts.keyword_vocab[0] + " here", "more dull"}, {1});
    CHECK(satisfies_keyword_rule(ex, opts.keyword_vocab));
    ex.rationale_indices = {0, 1};
    CHECK_FALSE(satisfies_keyword_rule(ex, opts.keyword_vocab));
    ex.rationale_indices = {1};
    ex.label = "False";
    CHECK_FALSE(satisfies_keyword_rule(ex, opts.keyword_vocab));
  }
}
