#include "cucvae/lexicon.h"
#include "doctest.h"

using namespace cucvae;

TEST_CASE("lexicon lookup and word spans") {
  const auto r = Lexicon::builtin().convert("Mary asked the time.");
  CHECK(r.words == std::vector<std::string>{"mary", "asked", "the", "time"});
  CHECK_FALSE(r.all_oov());
  REQUIRE(r.track.word_spans.size() == 4);
  CHECK(r.track.word_spans.front().start == 0);
  CHECK(r.track.word_spans.back().end == r.track.size());
  CHECK_NOTHROW(r.track.validate());
  for (int d : r.track.durations) CHECK(d == 0);
}

TEST_CASE("oov words spell out letters") {
  const auto r = Lexicon::builtin().convert("the zyxq");
  CHECK(r.oov == std::vector<bool>{false, true});
  CHECK(r.track.word_spans[1].size() >= 4);  // one or more sounds per letter
  CHECK(Lexicon::builtin().convert("zyxq qqq").all_oov());
}

TEST_CASE("phoneme ids strip stress and reserve zero") {
  CHECK(phoneme_id("AH0") == phoneme_id("AH"));
  CHECK(phoneme_id("not-a-phoneme") == kUnknownPhonemeId);
  CHECK(phoneme_inventory()[0] == "<unk>");
}

TEST_CASE("normalization") {
  CHECK(Lexicon::normalize_words("  Hello, WORLD!  it's ") ==
        std::vector<std::string>{"hello", "world", "its"});
}
