#include <sstream>

#include "cucvae/corpus.h"
#include "cucvae/errors.h"
#include "doctest.h"
#include "test_util.h"

using namespace cucvae;

namespace {

DatasetManifest manifest_from(const std::string& text) {
  std::istringstream in(text);
  return parse_manifest(in, "m.jsonl");
}

PhonemeTrack alignment_from(const std::string& text, double fps = 100.0) {
  std::istringstream in(text);
  return parse_alignment(in, "a.tsv", fps);
}

const char* kLine =
    R"({"id":"%s","speaker":"s1","text":"hello","audio":"a.wav","alignment":"a.tsv","split":"%s"})";

std::string line(const std::string& id, const std::string& split = "train") {
  std::string s = kLine;
  s.replace(s.find("%s"), 2, id);
  s.replace(s.find("%s"), 2, split);
  return s + "\n";
}

}  // namespace

TEST_CASE("manifest: empty file has no entries") {
  CHECK(manifest_from("").entries.empty());
  CHECK(manifest_from("\n  \n").entries.empty());
}

TEST_CASE("manifest: order preserved and round trip") {
  const auto m = manifest_from(line("u1") + line("u2", "val") + line("u3", "test"));
  REQUIRE(m.entries.size() == 3);
  CHECK(m.entries[0].id == "u1");
  CHECK(m.entries[1].split == Split::kVal);
  CHECK(m.entries[2].split == Split::kTest);
  CHECK(m.in_split(Split::kTrain).size() == 1);

  testing::TempDir dir;
  save_manifest(m, dir / "m.jsonl");
  CHECK(load_manifest(dir / "m.jsonl") == m);
}

TEST_CASE("manifest: errors") {
  SUBCASE("unknown split names the allowed values") {
    try {
      manifest_from(line("u1") + line("u2", "dev"));
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("train, val, test") != std::string::npos);
      CHECK(msg.find(":2:") != std::string::npos);
    }
  }
  SUBCASE("malformed line carries its number") {
    try {
      manifest_from(line("u1") + "{not json\n");
      FAIL("expected an error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("duplicate id") { CHECK_THROWS_AS(manifest_from(line("u1") + line("u1")), ValidationError); }
  SUBCASE("missing key") {
    CHECK_THROWS_AS(manifest_from(R"({"id":"x","speaker":"s","text":"t","audio":"a"})" "\n"),
                    ParseError);
  }
}

TEST_CASE("split assignment is seeded and honours fractions") {
  const auto a = assign_splits(100, {0.9, 0.05, 0.05}, 3);
  CHECK(a == assign_splits(100, {0.9, 0.05, 0.05}, 3));
  CHECK(std::count(a.begin(), a.end(), Split::kTrain) == 90);
  CHECK(std::count(a.begin(), a.end(), Split::kVal) == 5);
  CHECK(std::count(a.begin(), a.end(), Split::kTest) == 5);
}

TEST_CASE("alignment: durations from rounded frame edges") {
  const auto t = alignment_from("HH\t0\t0.1\t0\nAH\t0.1\t0.2\t0\n");
  CHECK(t.durations == std::vector<int>{10, 10});
  CHECK(t.word_spans == std::vector<WordSpan>{{0, 2}});
}

TEST_CASE("alignment: zero-length interval kept") {
  const auto t = alignment_from("HH\t0\t0.1\t0\nAH\t0.1\t0.1\t0\nL\t0.1\t0.15\t1\n");
  CHECK(t.durations == std::vector<int>{10, 0, 5});
  CHECK(t.word_spans == std::vector<WordSpan>{{0, 2}, {2, 3}});
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("alignment: errors") {
  CHECK_THROWS_AS(alignment_from("A\t0.1\t0.2\t0\nB\t0.0\t0.05\t0\n"), ValidationError);
  CHECK_THROWS_AS(alignment_from("A\t0\t0.2\t0\nB\t0.1\t0.3\t0\n"), ValidationError);
  CHECK_THROWS_AS(alignment_from("A\t-0.1\t0.2\t0\n"), ValidationError);
  CHECK_THROWS_AS(alignment_from("A\t0\t0.2\t1\n"), ValidationError);
  CHECK_THROWS_AS(alignment_from("A\t0\t0.2\n"), ParseError);
  CHECK_THROWS_AS(alignment_from("A\tx\t0.2\t0\n"), ParseError);
}

TEST_CASE("alignment: save and reload") {
  testing::TempDir dir;
  PhonemeTrack t{{"M", "EH", "R", "IY"}, {3, 5, 0, 7}, {{0, 2}, {2, 4}}};
  save_alignment(t, 86.1328125, dir / "a.tsv");
  CHECK(load_alignment(dir / "a.tsv", 86.1328125) == t);
}

TEST_CASE("duration reconciliation") {
  PhonemeTrack t{{"A", "B"}, {4, 6}, {{0, 2}}};
  CHECK(reconcile_durations(t, 10) == 10);
  CHECK(reconcile_durations(t, 9) == 9);
  CHECK(t.durations == std::vector<int>{4, 5});
  CHECK(reconcile_durations(t, 10) == 9);  // drop the trailing mel frame
  CHECK_THROWS_AS(reconcile_durations(t, 12), ValidationError);
}

TEST_CASE("context window") {
  std::vector<Utterance> corpus{{"a", "s", "A", {}, {}}, {"b", "s", "B", {}, {}},
                                {"c", "s", "C", {}, {}}};
  auto w = build_context_window(corpus, 1, 1);
  CHECK(w.neighbors_before == std::vector<std::string>{"A"});
  CHECK(w.neighbors_after == std::vector<std::string>{"C"});
  w = build_context_window(corpus, 0, 2);
  CHECK(w.neighbors_before == std::vector<std::string>{"", ""});
  CHECK(w.neighbors_after == std::vector<std::string>{"B", "C"});
  w = build_context_window(corpus, 2, 0);
  CHECK(w.neighbors_before.empty());
  CHECK(w.neighbors_after.empty());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (int l = 0; l < 5; ++l) {
      const auto u = build_context_window(corpus, i, l);
      CHECK(static_cast<int>(u.neighbors_before.size()) == l);
      CHECK(static_cast<int>(u.neighbors_after.size()) == l);
    }
  }
}

TEST_CASE("edit scripts") {
  std::istringstream in(
      R"({"id":"u1","op":"delete","word_start":1,"word_end":2,"text":""})" "\n"
      R"({"id":"u1","op":"insert","word_start":0,"word_end":0,"text":"only"})" "\n"
      R"({"id":"u2","op":"replace","word_start":0,"word_end":1,"text":"five"})" "\n");
  const auto s = parse_edit_scripts(in, "e.jsonl");
  REQUIRE(s.size() == 3);
  CHECK(s[0].op == EditOp::kDelete);
  CHECK(s[1].target_words.size() == 0);
  CHECK(s[2].replacement_text == "five");

  EditScript bad{"u", EditOp::kDelete, {0, 1}, "x"};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = {"u", EditOp::kInsert, {0, 1}, "x"};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  std::istringstream unknown(R"({"id":"u","op":"move","word_start":0,"word_end":1,"text":""})");
  CHECK_THROWS(parse_edit_scripts(unknown, "e.jsonl"));
}
