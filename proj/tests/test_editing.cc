#include <random>

#include "cucvae/editing.h"
#include "cucvae/errors.h"
#include "cucvae/lexicon.h"
#include "doctest.h"
#include "oracles.h"
#include "test_util.h"
#include "toy.h"

using namespace cucvae;
using testing::toy_track;

namespace {

PhonemeTrack words_track(int n_words, int phonemes_per_word, int frames_per_phoneme) {
  PhonemeTrack t;
  for (int w = 0; w < n_words; ++w) {
    t.word_spans.push_back({t.size(), t.size() + phonemes_per_word});
    for (int p = 0; p < phonemes_per_word; ++p) {
      t.phonemes.push_back("AH");
      t.durations.push_back(frames_per_phoneme);
    }
  }
  return t;
}

PhonemeTrack insert_track(int n) {
  PhonemeTrack t;
  for (int i = 0; i < n; ++i) t.phonemes.push_back("K");
  t.durations.assign(n, 0);
  t.word_spans.push_back({0, n});
  return t;
}

}  // namespace

TEST_CASE("delete the middle word") {
  const auto orig = toy_track();
  const auto plan = build_edit_plan(orig, {"u", EditOp::kDelete, {1, 2}, ""}, {});
  CHECK(plan.flag_del == std::vector<int>{0, 0, 1, 1, 0, 0});
  CHECK(plan.flag_add == std::vector<int>{0, 0, 0, 0});
  CHECK(plan.phonemes_edited.phonemes == std::vector<std::string>{"M", "EH", "AE", "S"});
  CHECK(plan.phonemes_edited.word_spans == std::vector<WordSpan>{{0, 2}, {2, 4}});
  const auto seg = plan.segments();
  CHECK(seg.a == 2);
  CHECK(seg.b == 2);
  CHECK(seg.b_new == 0);
  CHECK(seg.c == 2);
  CHECK_NOTHROW(plan.validate());
}

TEST_CASE("insert at the start") {
  const auto orig = toy_track();
  const auto plan = build_edit_plan(orig, {"u", EditOp::kInsert, {0, 0}, "x"}, insert_track(2));
  CHECK(plan.flag_add == std::vector<int>{1, 1, 0, 0, 0, 0, 0, 0});
  CHECK(plan.flag_del == std::vector<int>(6, 0));
  CHECK(plan.segments().a == 0);
  CHECK(plan.frame_mask == std::vector<int>(orig.total_frames(), 0));
  CHECK(plan.phonemes_edited.word_spans.front() == WordSpan{0, 2});
  CHECK(plan.phonemes_edited.word_spans.back() == WordSpan{6, 8});
}

TEST_CASE("span errors") {
  const auto orig = toy_track();
  CHECK_THROWS_AS(build_edit_plan(orig, {"u", EditOp::kDelete, {2, 4}, ""}, {}), ValidationError);
  CHECK_THROWS_AS(build_edit_plan(orig, {"u", EditOp::kInsert, {4, 4}, "x"}, insert_track(1)),
                  ValidationError);
  CHECK_NOTHROW(build_edit_plan(orig, {"u", EditOp::kInsert, {3, 3}, "x"}, insert_track(1)));
}

TEST_CASE("replace equals delete then insert") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> nw(1, 6), np(1, 3), nd(0, 4);
    PhonemeTrack orig;
    const int words = nw(rng);
    for (int w = 0; w < words; ++w) {
      const int n = np(rng);
      orig.word_spans.push_back({orig.size(), orig.size() + n});
      for (int p = 0; p < n; ++p) {
        orig.phonemes.push_back("P" + std::to_string(orig.size()));
        orig.durations.push_back(nd(rng));
      }
    }
    const int start = std::uniform_int_distribution<int>(0, words - 1)(rng);
    const int end = std::uniform_int_distribution<int>(start + 1, words)(rng);
    const auto repl = insert_track(np(rng));
    const auto direct = build_edit_plan(orig, {"u", EditOp::kReplace, {start, end}, "r"}, repl);
    const auto del = build_edit_plan(orig, {"u", EditOp::kDelete, {start, end}, ""}, {});
    const auto ins = build_edit_plan(del.phonemes_edited, {"u", EditOp::kInsert, {start, start}, "r"}, repl);
    CHECK(compose(del, ins) == direct);
    CHECK_NOTHROW(direct.validate());
  }
}

TEST_CASE("identity plan") {
  const auto t = toy_track();
  const auto plan = EditPlan::identity(t);
  CHECK_FALSE(plan.has_edit());
  CHECK(plan.phonemes_edited == t);
  CHECK_NOTHROW(plan.validate());
}

TEST_CASE("duration adjustment") {
  SUBCASE("worked example with a 7.5 tie") {
    // 100 original unedited frames over two phonemes, predicted 80.
    PhonemeTrack orig{{"A", "B", "C"}, {60, 10, 40}, {{0, 1}, {1, 2}, {2, 3}}};
    auto rep = insert_track(2);
    const auto plan = build_edit_plan(orig, {"u", EditOp::kReplace, {1, 2}, "x"}, rep);
    const auto d = adjust_durations({50.0, 4.0, 6.0, 30.0}, plan, orig);
    CHECK(d == std::vector<int>{60, 5, 8, 40});
  }
  SUBCASE("ratio one keeps rounded predictions") {
    PhonemeTrack orig{{"A", "B"}, {5, 5}, {{0, 1}, {1, 2}}};
    const auto plan = build_edit_plan(orig, {"u", EditOp::kInsert, {1, 1}, "x"}, insert_track(1));
    CHECK(adjust_durations({5.0, 3.4, 5.0}, plan, orig) == std::vector<int>{5, 3, 5});
  }
  SUBCASE("empty edited region returns the original durations") {
    const auto t = toy_track();
    CHECK(adjust_durations(std::vector<double>(6, 0.0), EditPlan::identity(t), t) == t.durations);
  }
  SUBCASE("zero predicted unedited frames") {
    PhonemeTrack orig{{"A", "B"}, {5, 5}, {{0, 1}, {1, 2}}};
    const auto plan = build_edit_plan(orig, {"u", EditOp::kInsert, {1, 1}, "x"}, insert_track(1));
    CHECK_THROWS(adjust_durations({0.0, 3.0, 0.0}, plan, orig));
  }
  SUBCASE("replacing every word keeps the rounded predictions") {
    PhonemeTrack orig{{"A", "B"}, {5, 5}, {{0, 1}, {1, 2}}};
    const auto plan = build_edit_plan(orig, {"u", EditOp::kReplace, {0, 2}, "x"}, insert_track(2));
    CHECK(adjust_durations({2.5, 3.4}, plan, orig) == std::vector<int>{3, 3});
  }
  SUBCASE("half away from zero") {
    CHECK(round_half_away(12.5) == 13);
    CHECK(round_half_away(2.5) == 3);
    CHECK(round_half_away(-2.5) == -3);
    CHECK(round_half_away(2.4999) == 2);
  }
  SUBCASE("randomized against the ratio oracle") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
      const auto orig = words_track(5, 2, 0);
      PhonemeTrack o = orig;
      for (auto& d : o.durations) d = std::uniform_int_distribution<int>(0, 9)(rng);
      o.durations[0] = std::max(o.durations[0], 1);
      const auto plan = build_edit_plan(o, {"u", EditOp::kReplace, {1, 3}, "x"}, insert_track(3));
      std::vector<double> pred;
      for (std::size_t j = 0; j < plan.flag_add.size(); ++j) {
        pred.push_back(std::uniform_int_distribution<int>(1, 40)(rng) * 0.5);
      }
      std::vector<int> kept;
      for (std::size_t i = 0; i < o.durations.size(); ++i) {
        if (!plan.flag_del[i]) kept.push_back(o.durations[i]);
      }
      CHECK(adjust_durations(pred, plan, o) == oracle::adjust_durations(pred, plan.flag_add, kept));
    }
  }
}

TEST_CASE("training mask") {
  SUBCASE("four equal words at half rate mask two") {
    const auto t = words_track(4, 2, 3);
    const auto plan = sample_training_mask(t, 0.5);
    CHECK(plan.flag_del == std::vector<int>{1, 1, 1, 1, 0, 0, 0, 0});
    CHECK(plan.flag_add == plan.flag_del);
    CHECK(plan.phonemes_edited == t);
    CHECK(std::count(plan.frame_mask.begin(), plan.frame_mask.end(), 1) == 12);
    CHECK(sample_training_mask(t, 0.5) == plan);
  }
  SUBCASE("tiny rate picks the shortest word") {
    PhonemeTrack t{{"A", "B", "C"}, {5, 2, 7}, {{0, 1}, {1, 2}, {2, 3}}};
    CHECK(sample_training_mask(t, 1e-6).flag_del == std::vector<int>{0, 1, 0});
  }
  SUBCASE("single word") {
    PhonemeTrack t{{"A", "B"}, {5, 2}, {{0, 2}}};
    CHECK(sample_training_mask(t, 0.5).flag_del == std::vector<int>{1, 1});
  }
  SUBCASE("coverage stays within the largest word's share") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
      PhonemeTrack t;
      const int words = std::uniform_int_distribution<int>(2, 8)(rng);
      int largest = 0;
      for (int w = 0; w < words; ++w) {
        const int n = std::uniform_int_distribution<int>(1, 3)(rng);
        int frames = 0;
        t.word_spans.push_back({t.size(), t.size() + n});
        for (int p = 0; p < n; ++p) {
          t.phonemes.push_back("AH");
          t.durations.push_back(std::uniform_int_distribution<int>(1, 9)(rng));
          frames += t.durations.back();
        }
        largest = std::max(largest, frames);
      }
      const auto plan = sample_training_mask(t);
      const double covered = std::count(plan.frame_mask.begin(), plan.frame_mask.end(), 1);
      CHECK(std::abs(covered - 0.5 * t.total_frames()) <= largest);
      CHECK_NOTHROW(plan.validate());
    }
  }
  CHECK_THROWS(sample_training_mask(toy_track(), 0.0));
  CHECK_THROWS(sample_training_mask(toy_track(), 1.0));
}

TEST_CASE("biased frame weights") {
  EditPlan plan;
  plan.frame_mask = {0, 0, 1, 1};
  const Vector w = biased_frame_weights(plan, 1.5);
  CHECK(w == Eigen::Vector4d(1, 1, 1.5, 1.5));
  CHECK(biased_frame_weights(plan, 1.0) == Vector::Ones(4));
  CHECK_THROWS(biased_frame_weights(plan, -1.0));
}

TEST_CASE("prior patching") {
  nn::Rng rng(3);
  nn::ParameterStore s;
  BoundarySmoother smooth(s, "sm", 2, 5, rng);
  const auto orig = toy_track();
  std::mt19937_64 g(1);
  SUBCASE("no edit region passes statistics through") {
    const Matrix mu = testing::random_matrix(6, 2, g), sigma = testing::random_matrix(6, 2, g, 0.5, 2);
    const auto p = patch_prior(mu, sigma, EditPlan::identity(orig), smooth);
    CHECK(p.mu_hat == mu);
    CHECK((p.sigma_hat - sigma).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(p.mu_prime == p.mu_hat);
  }
  SUBCASE("edited positions hold zeros and ones, identity smoothing is a no-op") {
    const auto plan = build_edit_plan(orig, {"u", EditOp::kReplace, {1, 2}, "x"}, insert_track(3));
    const Matrix mu = testing::random_matrix(4, 2, g), sigma = testing::random_matrix(4, 2, g, 0.5, 2);
    const auto p = patch_prior(mu, sigma, plan, smooth);
    REQUIRE(p.mu_hat.rows() == 7);
    for (int j = 2; j < 5; ++j) {
      CHECK(p.mu_hat.row(j).isZero());
      CHECK((p.sigma_hat.row(j).array() == 1.0).all());
    }
    CHECK(p.mu_hat.row(5) == mu.row(2));
    CHECK((p.mu_prime - p.mu_hat).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((p.sigma_prime - p.sigma_hat).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((p.sigma_prime.array() > 0).all());
    CHECK_THROWS(patch_prior(Matrix(mu.topRows(3)), Matrix(sigma.topRows(3)), plan, smooth));
  }
}

TEST_CASE("mel cut keeps original frames outside the edit") {
  const auto orig = toy_track();
  std::mt19937_64 g(2);
  const Matrix mel = testing::random_matrix(orig.total_frames(), 80, g);
  const auto id = EditPlan::identity(orig);
  CHECK(mel_cut(Matrix::Zero(mel.rows(), 80), mel, id, orig) == mel);

  auto plan = build_edit_plan(orig, {"u", EditOp::kReplace, {1, 2}, "x"}, insert_track(2));
  plan = with_durations(plan, {2, 1, 4, 4, 2, 1});
  const Matrix gen = Matrix::Constant(14, 80, 7.0);
  const Matrix cut = mel_cut(gen, mel, plan, orig);
  CHECK(cut.topRows(3) == mel.topRows(3));
  CHECK((cut.middleRows(3, 8).array() == 7.0).all());
  CHECK(cut.bottomRows(3) == mel.bottomRows(3));
}
