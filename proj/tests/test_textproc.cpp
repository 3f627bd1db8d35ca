#include <set>

#include "doctest.h"
#include "fidex/decodeparse.hpp"
#include "fidex/textproc.hpp"
#include "support/random_examples.hpp"
#include "support/tmp.hpp"

using namespace fidex;

namespace {

Example ten_by_ten() {
  Example ex{"p", "t", "q", {}, "True", {}};
  for (int s = 0; s < 10; ++s) {
    std::string sent;
    for (int w = 0; w < 10; ++w) sent += (w ? " w" : "w") + std::to_string(s * 10 + w);
    ex.sentences.push_back(sent);
  }
  return ex;
}

}  // namespace

TEST_SUITE("textproc") {
  TEST_CASE("segmentation examples") {
    CHECK(segment_sentences("A b. C d.") == std::vector<std::string>{"A b.", "C d."});
    CHECK(segment_sentences("Dr. Smith left. He ran.") == std::vector<std::string>{"Dr. Smith left.", "He ran."});
    CHECK(segment_sentences("no terminal punctuation") == std::vector<std::string>{"no terminal punctuation"});
  }

  TEST_CASE("segmentation rules") {
    CHECK(segment_sentences("It rained! Then it stopped? Yes.") ==
          std::vector<std::string>{"It rained!", "Then it stopped?", "Yes."});
    CHECK(segment_sentences("Born in 1990. 2001 was later.") ==
          std::vector<std::string>{"Born in 1990.", "2001 was later."});
    // Lowercase continuation does not split.
    CHECK(segment_sentences("see fig. then more.") == std::vector<std::string>{"see fig. then more."});
    // Single-capital initials and guarded abbreviations.
    CHECK(segment_sentences("J. Smith came. Mr. Jones too.") ==
          std::vector<std::string>{"J. Smith came.", "Mr. Jones too."});
    CHECK(segment_sentences("Made in the U.S. Army rules.") == std::vector<std::string>{"Made in the U.S. Army rules."});
    // Closing quotes stay with their sentence.
    CHECK(segment_sentences("He said \"Stop.\" Then left.") ==
          std::vector<std::string>{"He said \"Stop.\"", "Then left."});
    CHECK(segment_sentences("  spaced    out.   Words  here ") == std::vector<std::string>{"spaced out.", "Words here"});
    CHECK(segment_sentences("").empty());
  }

  TEST_CASE("segmentation keeps every non-space character in order") {
    Rng r(17);
    const char* pieces[] = {"A", "b", ".", "!", "?", " ", "  ", "Dr.", "3", "\"", ")", "x", "Mr", "e.g."};
    for (int t = 0; t < 500; ++t) {
      std::string text;
      for (int i = 0; i < 40; ++i) text += pieces[r.below(std::size(pieces))];
      std::string in, out;
      for (char c : text)
        if (c != ' ') in += c;
      for (const auto& s : segment_sentences(text)) {
        CHECK_FALSE(trim(s).empty());
        for (char c : s)
          if (c != ' ') out += c;
      }
      CHECK(in == out);
    }
  }

  TEST_CASE("abbreviation guard list is fixed and lower case") {
    const auto& g = abbreviation_guard_list();
    CHECK(g.size() > 10);
    for (const auto& a : g)
      for (char c : a) CHECK_FALSE((c >= 'A' && c <= 'Z'));
  }

  TEST_CASE("input serialization") {
    Example ex{"i", "boolq", "q?", {"a.", "b."}, "True", {}};
    CHECK(serialize_input(ex) == "explain boolq question: q? passage: S1 a. S2 b.");
    ex.sentences = {"only one"};
    CHECK(serialize_input(ex) == "explain boolq question: q? passage: S1 only one");
    ex.sentences = {"a", "b", "c"};
    CHECK_THROWS_WITH_AS(serialize_input(ex, 2), "too many sentences", DataError);
  }

  TEST_CASE("target serialization") {
    CHECK(serialize_target("False", {1, 2}) == "False explanation: S2 explanation: S3");
    CHECK(serialize_target("True", {}) == "True");
    CHECK(serialize_target("significantly increases", {0}) == "significantly increases explanation: S1");
    const auto p = parse_output(serialize_target("significantly increases", {0}));
    CHECK(p.label_text == "significantly increases");
    CHECK(p.marker_ids == std::vector<int>{1});
  }

  TEST_CASE("vocabulary layout") {
    Vocabulary v(4);
    CHECK(v.size() == 11);
    CHECK(v.id("<pad>") == Vocabulary::kPad);
    CHECK(v.id("<unk>") == Vocabulary::kUnk);
    CHECK(v.id("</s>") == Vocabulary::kEos);
    CHECK(v.id("explain") == Vocabulary::kExplain);
    CHECK(v.id("question:") == Vocabulary::kQuestion);
    CHECK(v.id("passage:") == Vocabulary::kPassage);
    CHECK(v.id("explanation:") == Vocabulary::kExplanation);
    CHECK(v.id("S1") == Vocabulary::kFirstMarker);
    CHECK(v.id("S4") == Vocabulary::kFirstMarker + 3);
    CHECK(v.id("S5") == Vocabulary::kUnk);
    CHECK(v.marker_id(4) == v.id("S4"));
    CHECK_THROWS_WITH_AS(v.marker_id(5), "too many sentences", DataError);
    CHECK(v.marker_number(v.id("S3")) == 3u);
    CHECK_FALSE(v.marker_number(Vocabulary::kEos).has_value());
  }

  TEST_CASE("vocabulary build ranks by frequency then lexically") {
    std::vector<Example> corpus{{"a", "t", "x y", {"y z z", "z"}, "y", {}}};
    const auto v = Vocabulary::build(corpus, 100, 2);
    const int base = static_cast<int>(v.reserved_count());
    CHECK(v.token(base) == "y");  // z:3, y:3 -> y first lexically
    CHECK(v.token(base + 1) == "z");
    CHECK(v.token(base + 2) == "t");
    CHECK(v.token(base + 3) == "x");
    CHECK(v.size() == v.reserved_count() + 4);
    const auto capped = Vocabulary::build(corpus, v.reserved_count() + 1, 2);
    CHECK(capped.size() == v.reserved_count() + 1);
    CHECK(capped.id("z") == Vocabulary::kUnk);
  }

  TEST_CASE("vocabulary file round trip") {
    Rng r(2);
    std::vector<Example> corpus;
    for (int i = 0; i < 20; ++i) corpus.push_back(gen::example(r, std::to_string(i), 8, true));
    const auto v = Vocabulary::build(corpus, 500, 16);
    const auto d = testing_tmp::dir("vocab");
    v.save(d + "/v.txt");
    const auto w = Vocabulary::load(d + "/v.txt");
    CHECK(w == v);
    CHECK(w.max_markers() == 16);
    CHECK(w.hash() == v.hash());
    CHECK(Vocabulary::build(corpus, 500, 8).hash() != v.hash());
    CHECK_THROWS_AS(Vocabulary::parse("<pad>\n<unk>\n"), DataError);
  }

  TEST_CASE("tokenize and detokenize") {
    std::vector<Example> corpus{{"a", "t", "q", {"a b c"}, "L", {}}};
    const auto v = Vocabulary::build(corpus);
    CHECK(tokenize("S1 a", v) == std::vector<int>{v.id("S1"), v.id("a")});
    CHECK(tokenize("nope", v) == std::vector<int>{Vocabulary::kUnk});
    CHECK(detokenize(tokenize("a b S2 c explanation: </s>", v), v) == "a b S2 c explanation: </s>");
  }

  TEST_CASE("tokenize round trip on random in-vocabulary text") {
    Rng r(3);
    std::vector<Example> corpus;
    for (int i = 0; i < 30; ++i) corpus.push_back(gen::example(r, std::to_string(i), 6, true));
    const auto v = Vocabulary::build(corpus);
    for (int t = 0; t < 200; ++t) {
      const auto& ex = corpus[r.below(corpus.size())];
      const std::string s = ex.sentences[r.below(ex.sentences.size())];
      CHECK(detokenize(tokenize(s, v), v) == s);
    }
  }

  TEST_CASE("a word spelled like a marker stays a plain word") {
    Example ex{"c", "t", "q", {"see S2 here", "next"}, "True", {}};
    const auto v = Vocabulary::build({ex});
    CHECK(serialize_input(ex) == "explain t question: q passage: S1 see S2 here S2 next");
    const auto m = mark_sentences(ex, v);
    REQUIRE(m.marked_passage_tokens.size() == 6);
    CHECK(m.marked_passage_tokens[2] == v.id("\\S2"));
    CHECK(m.marked_passage_tokens[2] != v.id("S2"));
    CHECK(m.marked_passage_tokens[4] == v.id("S2"));
    CHECK(m.sentence_starts == std::vector<std::size_t>{0, 4});
    std::vector<int> markers;
    for (int id : m.marked_passage_tokens)
      if (v.marker_number(id)) markers.push_back(id);
    CHECK(markers == std::vector<int>{v.id("S1"), v.id("S2")});
  }

  TEST_CASE("target ids") {
    const auto v = Vocabulary::build({{"a", "t", "q", {"x"}, "not sure", {}}});
    const auto ids = target_ids("not sure", {0, 2}, v, 64);
    CHECK(ids == std::vector<int>{v.id("not"), v.id("sure"), Vocabulary::kExplanation, v.marker_id(1),
                                  Vocabulary::kExplanation, v.marker_id(3), Vocabulary::kEos});
    // Marker pairs that do not fit are dropped whole.
    CHECK(target_ids("not sure", {0, 2}, v, 6) ==
          std::vector<int>{v.id("not"), v.id("sure"), Vocabulary::kExplanation, v.marker_id(1), Vocabulary::kEos});
    CHECK_THROWS_AS(target_ids("not sure", {}, v, 2), DataError);
  }

  TEST_CASE("chunking: hand-packed ten sentences") {
    const Example ex = ten_by_ten();
    const auto v = Vocabulary::build({ex});
    // prefix "explain t question: q passage:" is 5 tokens; budget 35.
    const auto cs = chunk(ex, v, 40, 10);
    CHECK(cs.prefix_length == 5);
    REQUIRE(cs.size() == 4);
    CHECK(cs.sentences_in_chunk[0] == IndexSet{0, 1, 2});
    CHECK(cs.sentences_in_chunk[1] == IndexSet{3, 4, 5});
    CHECK(cs.sentences_in_chunk[2] == IndexSet{6, 7, 8});
    CHECK(cs.sentences_in_chunk[3] == IndexSet{9});
    CHECK_FALSE(cs.truncated);
    CHECK(cs.valid_length(0) == 5 + 33);
    CHECK(cs.valid_length(3) == 5 + 11);
    for (std::size_t c = 0; c < cs.size(); ++c) {
      CHECK(cs.chunks[c].size() == 40);
      CHECK(cs.pad_mask[c].size() == 40);
      for (std::size_t i = cs.valid_length(c); i < 40; ++i) {
        CHECK(cs.chunks[c][i] == Vocabulary::kPad);
        CHECK(cs.pad_mask[c][i] == 1);
      }
    }

    const auto cut = chunk(ex, v, 40, 2);
    CHECK(cut.size() == 2);
    CHECK(cut.truncated);
    CHECK(cut.covered_sentences == IndexSet{0, 1, 2, 3, 4, 5});
  }

  TEST_CASE("chunking: over-long sentence is hard-split and its overflow dropped") {
    Example ex = ten_by_ten();
    ex.sentences = {ex.sentences[0] + " " + ex.sentences[1] + " " + ex.sentences[2] + " " + ex.sentences[3], "tail"};
    const auto v = Vocabulary::build({ex});
    const auto cs = chunk(ex, v, 40, 3);
    REQUIRE(cs.size() == 2);
    CHECK(cs.valid_length(0) == 40);
    CHECK(cs.sentences_in_chunk[0] == IndexSet{0});
    CHECK(cs.sentences_in_chunk[1] == IndexSet{1});
    CHECK_FALSE(cs.truncated);
  }

  TEST_CASE("chunking: query too long") {
    Example ex = ten_by_ten();
    ex.query = ex.sentences[0];
    const auto v = Vocabulary::build({ex});
    // prefix: explain t question: <10 words> passage: = 14 tokens
    CHECK_THROWS_WITH_AS(chunk(ex, v, 14, 1), "query too long", DataError);
    CHECK_THROWS_WITH_AS(chunk(ex, v, 13, 1), "query too long", DataError);
    CHECK_NOTHROW(chunk(ex, v, 15, 1));
  }

  TEST_CASE("chunking invariants on random examples") {
    Rng r(23);
    for (int t = 0; t < 200; ++t) {
      const Example ex = gen::example(r, "r", 30);
      const auto v = Vocabulary::build({ex});
      const std::size_t L = 12 + r.below(40), C = 1 + r.below(4);
      ChunkSet cs;
      try {
        cs = chunk(ex, v, L, C);
      } catch (const DataError&) {
        continue;  // query too long for this L
      }
      CHECK(cs.size() <= C);
      std::set<int> seen;
      for (std::size_t c = 0; c < cs.size(); ++c) {
        for (std::size_t i = 0; i < cs.prefix_length; ++i) CHECK(cs.chunks[c][i] == cs.chunks[0][i]);
        for (int s : cs.sentences_in_chunk[c]) CHECK(seen.insert(s).second);
      }
      // Downward closed: covered sentences are a prefix 0..k-1.
      int expect = 0;
      for (int s : cs.covered_sentences) CHECK(s == expect++);
      CHECK(cs.truncated == (cs.covered_sentences.size() != ex.sentences.size()));
    }
  }

  TEST_CASE("single chunk detokenizes to the serialized input") {
    Rng r(29);
    for (int t = 0; t < 50; ++t) {
      const Example ex = gen::example(r, "d", 10);
      const auto v = Vocabulary::build({ex});
      const auto cs = chunk(ex, v, 512, 1);
      REQUIRE_FALSE(cs.truncated);
      std::vector<int> ids(cs.chunks[0].begin(), cs.chunks[0].begin() + static_cast<long>(cs.valid_length(0)));
      CHECK(detokenize(ids, v) == serialize_input(ex));
    }
  }
}
