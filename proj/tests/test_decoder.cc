#include <random>

#include "cucvae/decoder.h"
#include "doctest.h"
#include "grad_check.h"
#include "test_util.h"

using namespace cucvae;
using testing::random_matrix;

TEST_CASE("latent injection") {
  nn::Rng rng(1);
  nn::ParameterStore s;
  LatentProjection up(s, "up", 2, 16, rng);
  const Matrix h = random_matrix(4, 16, rng);
  CHECK(up.inject(h, Matrix::Zero(4, 2)) == h);
  const Matrix z1 = random_matrix(4, 2, rng), z2 = random_matrix(4, 2, rng);
  const double a = 0.7, b = -1.3;
  const Matrix lhs = up.inject(h, a * z1 + b * z2) - h;
  const Matrix rhs = a * (up.inject(h, z1) - h) + b * (up.inject(h, z2) - h);
  CHECK(lhs.rows() == 4);
  CHECK(lhs.cols() == 16);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS(up.inject(h, Matrix::Zero(3, 2)));
}

TEST_CASE("length regulation") {
  Matrix seq(3, 2);
  seq << 1, 1, 2, 2, 3, 3;
  const Matrix out = length_regulate(seq, {2, 0, 3});
  Matrix expect(5, 2);
  expect << 1, 1, 1, 1, 3, 3, 3, 3, 3, 3;
  CHECK(out == expect);
  CHECK(length_regulate(seq, {1, 1, 1}) == seq);
  CHECK_THROWS(length_regulate(seq, {1, -1, 1}));
  CHECK_THROWS(length_regulate(seq, {1, 1}));

  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> d(0, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix x = random_matrix(7, 3, rng);
    std::vector<int> dur(7);
    for (auto& v : dur) v = d(rng);
    const Matrix y = length_regulate(x, dur);
    Index row = 0;
    for (int t = 0; t < 7; ++t) {
      for (int k = 0; k < dur[t]; ++k) CHECK(y.row(row++) == x.row(t));
    }
    CHECK(row == y.rows());
    CHECK(length_regulate(ag::Var::constant(x), dur).value() == y);
  }
}

TEST_CASE("decoder") {
  nn::Rng rng(2);
  nn::ParameterStore s;
  DecoderConfig c{2, 8, 2, 3, 12, 80};
  AcousticDecoder dec(s, "dec", c, rng);
  const Matrix frames = random_matrix(6, 8, rng);
  const Matrix y = dec(ag::Var::constant(frames), {}).value();
  CHECK(y.rows() == 6);
  CHECK(y.cols() == 80);
  CHECK(dec(ag::Var::constant(frames), {}).value() == y);
  CHECK_THROWS(dec(ag::Var::constant(Matrix(0, 8)), {}));
  DecoderConfig bad = c;
  bad.n_mels = 40;
  CHECK_THROWS(bad.validate());
  bad = c;
  bad.n_blocks = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("decoder MAE gradient on six frames") {
  nn::Rng rng(6);
  nn::ParameterStore s;
  AcousticDecoder dec(s, "dec", {1, 8, 2, 3, 12, 80}, rng);
  auto x = s.create("input", random_matrix(3, 8, rng));
  const Matrix target = random_matrix(6, 80, rng, 4.0, 5.0);
  auto loss = [&] {
    const auto y = dec(length_regulate(x, {2, 1, 3}), {});
    return ag::mean(ag::abs(ag::sub(y, ag::Var::constant(target))));
  };
  const auto r = testing::grad_check(s.entries(), loss);
  CHECK_MESSAGE(r.worst_rel < 1e-4, r.worst_where);
}
