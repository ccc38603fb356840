#include <random>
#include "json.hpp"

#include "cucvae/metrics.h"
#include "doctest.h"
#include "oracles.h"
#include "test_util.h"

using namespace cucvae;

namespace {

ProsodyTracks tracks(std::vector<double> f0) {
  ProsodyTracks t;
  t.f0_hz = Eigen::Map<Vector>(f0.data(), static_cast<Index>(f0.size()));
  t.energy = Vector::Ones(t.f0_hz.size());
  for (double v : f0) t.voiced.push_back(v > 0);
  return t;
}

}  // namespace

TEST_CASE("ffe") {
  const auto ref = tracks({100, 100, 0, 100, 100, 100, 100, 0, 0, 100});
  CHECK(ffe(ref, ref).ffe == 0.0);
  // one U->V (frame 2), one V->U (frame 0), one F0 error (frame 3)
  const auto est = tracks({0, 100, 120, 150, 100, 110, 100, 0, 0, 100});
  const auto b = ffe(ref, est);
  CHECK(b.n_total == 10);
  CHECK(b.n_u_to_v == 1);
  CHECK(b.n_v_to_u == 1);
  CHECK(b.n_f0e == 1);
  CHECK(b.ffe == doctest::Approx(0.30));
  CHECK_THROWS(ffe(ref, tracks({100})));
  CHECK_THROWS(ffe(tracks({}), tracks({})));
}

TEST_CASE("ffe threshold is strict") {
  CHECK(ffe(tracks({220}), tracks({264})).n_f0e == 0);
  CHECK(ffe(tracks({220}), tracks({264.1})).n_f0e == 1);
}

TEST_CASE("mcd") {
  Matrix a = Matrix::Zero(1, 13), b = Matrix::Zero(1, 13);
  CHECK(mcd(a, a) == 0.0);
  b(0, 3) = 1.0;
  CHECK(mcd(a, b) == doctest::Approx(6.1419).epsilon(1e-4));
  CHECK(std::abs(mcd_constant() - 6.1419) < 1e-3);
  Matrix c = Matrix::Zero(2, 13), d = Matrix::Zero(2, 13);
  d(0, 0) = 1.0;
  d(1, 5) = 3.0;
  CHECK(mcd(c, d) == doctest::Approx(2 * mcd_constant()));
  CHECK_THROWS(mcd(c, a));

  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const Matrix x = testing::random_matrix(5, 13, rng, -5, 5);
    const Matrix y = testing::random_matrix(5, 13, rng, -5, 5);
    CHECK(std::abs(mcd(x, y) - oracle::mcd(x, y)) <= 1e-9);
  }
}

TEST_CASE("prosody diversity") {
  PhonemeTrack track{{"A", "B"}, {2, 2}, {{0, 2}}};
  auto s1 = tracks({100, 100, 200, 200});
  auto s2 = tracks({110, 110, 200, 200});
  const auto same = prosody_diversity({s1, s1, s1}, track);
  CHECK(same.f0_std_hz == 0.0);
  CHECK(same.energy_std == 0.0);
  const auto st = prosody_diversity({s1, s2}, track);
  CHECK(st.f0_std_hz == doctest::Approx(2.5));  // phoneme A: 5, phoneme B: 0
  CHECK_THROWS(prosody_diversity({s1}, track));
  CHECK_THROWS(prosody_diversity({tracks({0, 0, 0, 0}), tracks({0, 0, 0, 0})}, track));

  PhonemeTrack one{{"A"}, {2}, {{0, 1}}};
  auto e1 = tracks({100, 100});
  auto e2 = tracks({110, 110});
  CHECK(prosody_diversity({e1, e2}, one).f0_std_hz == doctest::Approx(5.0));
  e2.energy << 2.0, 2.0;  // relative energy is scale-free
  CHECK(prosody_diversity({e1, e2}, one).energy_std == doctest::Approx(0.0));
}

TEST_CASE("wer") {
  CHECK(wer("a b c", "a b c") == 0.0);
  CHECK(wer("a b c", "a x c") == doctest::Approx(1.0 / 3));
  CHECK(wer("a b c", "") == 1.0);
  CHECK(wer("Hello, World!", "hello world") == 0.0);
  CHECK_THROWS(wer("", "a"));
  CHECK_THROWS(wer("...", "a"));

  std::mt19937_64 rng(12);
  const std::vector<std::string> vocab{"a", "b", "c", "d"};
  for (int k = 0; k < 100; ++k) {
    std::vector<std::string> r(std::uniform_int_distribution<int>(1, 8)(rng));
    std::vector<std::string> h(std::uniform_int_distribution<int>(0, 8)(rng));
    for (auto& w : r) w = vocab[rng() % vocab.size()];
    for (auto& w : h) w = vocab[rng() % vocab.size()];
    std::string rs, hs;
    for (auto& w : r) rs += w + " ";
    for (auto& w : h) hs += w + " ";
    CHECK(wer(rs, hs) == doctest::Approx(static_cast<double>(oracle::edit_distance(r, h)) / r.size()));
  }
}

TEST_CASE("sidecar transcriber and report") {
  testing::TempDir dir;
  testing::write_text(dir / "x.wav.txt", "mary asked the time\n");
  SidecarTranscriber tr;
  CHECK(wer("Mary asked the time.", tr.transcribe(dir / "x.wav")) == 0.0);
  CHECK_THROWS(tr.transcribe(dir / "missing.wav"));

  MetricReport ok{"u1", 0.3, 1, 2, 6.0, 0.25, std::nullopt, std::nullopt, ""};
  MetricReport bad;
  bad.id = "u2";
  bad.error = "missing hyp";
  const auto j = nlohmann::json::parse(report_to_json({ok, bad}));
  CHECK(j["items"][0]["ffe"] == 0.3);
  CHECK(j["items"][0]["gpe_frames"] == 1);
  CHECK(j["items"][0]["f0_std_hz"].is_null());
  CHECK(j["items"][1]["error"] == "missing hyp");
  CHECK(j["corpus"]["items_scored"] == 1);
  CHECK(j["corpus"]["mcd_db"] == 6.0);
}
