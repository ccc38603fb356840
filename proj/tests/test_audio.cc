#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/FFT>

#include "cucvae/audio.h"
#include "doctest.h"
#include "test_util.h"

using namespace cucvae;

namespace {

std::vector<double> sine(double hz, double seconds, int sr = 22050, double amp = 0.5) {
  std::vector<double> s(static_cast<std::size_t>(seconds * sr));
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / sr);
  }
  return s;
}

// Bin of the largest magnitude over the middle of the signal.
std::size_t peak_bin(const std::vector<double>& x, std::size_t n) {
  Eigen::FFT<double> fft;
  std::vector<double> frame(x.begin() + (x.size() - n) / 2, x.begin() + (x.size() - n) / 2 + n);
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, frame);
  std::size_t best = 1;
  for (std::size_t k = 1; k < n / 2; ++k) {
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  }
  return best;
}

}  // namespace

TEST_CASE("config validation") {
  AudioConfig c;
  CHECK_NOTHROW(c.validate());
  c.n_mels = 64;
  CHECK_THROWS(c.validate());
  c = {};
  c.hop_length = 2048;
  CHECK_THROWS(c.validate());
  c = {};
  c.fmax_hz = 20000;
  CHECK_THROWS(c.validate());
}

TEST_CASE("one second at defaults gives 87 frames") {
  AudioConfig c;
  const auto x = sine(220, 1.0);
  CHECK(c.frame_count(x.size()) == 87);
  CHECK(wav_to_mel(x, c).n_frames() == 87);
  CHECK(extract_f0(x, c).size() == 87);
}

TEST_CASE("silence clamps to the log floor") {
  const std::vector<double> zeros(4096, 0.0);
  const auto mel = wav_to_mel(zeros, {});
  CHECK(mel.frames.cols() == 80);
  CHECK((mel.frames.array() == std::log(kLogFloor)).all());
  const auto f0 = extract_f0(zeros, {});
  for (Index i = 0; i < f0.size(); ++i) {
    CHECK_FALSE(f0.voiced[i]);
    CHECK(f0.f0_hz(i) == 0.0);
  }
}

TEST_CASE("bad input") {
  std::vector<double> x(4096, 0.1);
  x[100] = std::nan("");
  CHECK_THROWS(wav_to_mel(x, {}));
  CHECK_THROWS(wav_to_mel(std::vector<double>{}, {}));
  CHECK_THROWS(wav_to_mel(std::vector<double>(100, 0.0), {}));
}

TEST_CASE("mel analysis is deterministic") {
  const auto x = sine(330, 0.3);
  CHECK(wav_to_mel(x, {}).frames == wav_to_mel(x, {}).frames);
}

TEST_CASE("220 Hz sine tracks within 3 Hz") {
  const auto x = sine(220, 1.0);
  const auto t = extract_f0(x, {});
  for (Index i = 2; i + 2 < t.size(); ++i) {
    CHECK(t.voiced[i]);
    CHECK(std::abs(t.f0_hz(i) - 220.0) < 3.0);
  }
  CHECK((t.energy.array() >= 0.0).all());
}

TEST_CASE("white noise is mostly unvoiced") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.3);
  std::vector<double> x(22050);
  for (auto& v : x) v = n(rng);
  const auto t = extract_f0(x, {});
  const auto unvoiced = std::count(t.voiced.begin(), t.voiced.end(), false);
  CHECK(static_cast<double>(unvoiced) >= 0.9 * static_cast<double>(t.size()));
  for (Index i = 0; i < t.size(); ++i) CHECK((t.f0_hz(i) > 0) == t.voiced[i]);
}

TEST_CASE("mfcc") {
  MelSpectrogram mel{Matrix::Constant(2, 80, -3.0), {}};
  const Matrix c = mel_to_mfcc(mel);
  CHECK(c.cols() == 13);
  CHECK(c(0, 0) == doctest::Approx(-3.0 * std::sqrt(80.0)));
  CHECK(c.rightCols(12).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS(mel_to_mfcc(mel, 81));

  // 4-point DCT-II against direct summation.
  const Matrix basis = dct2_basis(4);
  const double x[4] = {1.0, -2.0, 0.5, 3.0};
  for (int k = 0; k < 4; ++k) {
    double s = 0.0;
    for (int n = 0; n < 4; ++n) s += x[n] * std::cos(std::numbers::pi * (n + 0.5) * k / 4.0);
    s *= k == 0 ? std::sqrt(1.0 / 4) : std::sqrt(2.0 / 4);
    double got = 0.0;
    for (int n = 0; n < 4; ++n) got += basis(k, n) * x[n];
    CHECK(got == doctest::Approx(s).epsilon(1e-12));
  }

  std::mt19937_64 rng(3);
  MelSpectrogram r{testing::random_matrix(5, 80, rng, -8, 1), {}};
  const Matrix full = mel_to_mfcc(r, 80);
  const Matrix back = full * dct2_basis(80);
  CHECK((back - r.frames).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("griffin-lim fallback") {
  AudioConfig c;
  SUBCASE("silence stays near silent") {
    const auto mel = wav_to_mel(std::vector<double>(8192, 0.0), c);
    CHECK(griffin_lim(mel).raw_peak < 1e-3);
  }
  SUBCASE("sine round trip keeps its spectral peak") {
    const auto x = sine(440, 0.5, c.sample_rate, 0.5);
    const auto y = mel_to_wav_fallback(wav_to_mel(x, c));
    double peak = 0.0;
    for (double v : y) {
      CHECK(std::isfinite(v));
      peak = std::max(peak, std::abs(v));
    }
    CHECK(peak == doctest::Approx(0.95));
    const std::size_t n = 4096;
    const long a = static_cast<long>(peak_bin(x, n));
    const long b = static_cast<long>(peak_bin(y, n));
    CHECK(std::abs(a - b) <= 1);
  }
  SUBCASE("zero iterations stay finite") {
    const auto y = mel_to_wav_fallback(wav_to_mel(sine(300, 0.2), c), 0);
    for (double v : y) CHECK(std::isfinite(v));
  }
}

TEST_CASE("mel1 and wav files") {
  testing::TempDir dir;
  std::mt19937_64 rng(9);
  MelSpectrogram mel{testing::random_matrix(7, 80, rng), {}};
  write_mel1(dir / "a.mel", mel);
  const auto back = read_mel1(dir / "a.mel");
  CHECK(back.n_frames() == 7);
  CHECK((back.frames - mel.frames).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(back.config.hop_length == 256);

  const auto x = sine(200, 0.1);
  write_wav(dir / "a.wav", x, 22050);
  const auto w = read_wav(dir / "a.wav");
  CHECK(w.sample_rate == 22050);
  REQUIRE(w.samples.size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(w.samples[i] - x[i]) < 1e-4);

  testing::write_text(dir / "bad.wav", "RIFF....WAVEjunk");
  CHECK_THROWS(read_wav(dir / "bad.wav"));
  testing::write_text(dir / "bad.mel", "MEL0");
  CHECK_THROWS(read_mel1(dir / "bad.mel"));
}
