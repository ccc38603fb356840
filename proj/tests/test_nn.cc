#include "cucvae/nn.h"
#include "doctest.h"
#include "grad_check.h"
#include "test_util.h"

using namespace cucvae;

TEST_CASE("parameter store keeps insertion order and rejects duplicates") {
  nn::ParameterStore s;
  s.create("b", Matrix::Ones(2, 2));
  s.create("a", Matrix::Ones(1, 3));
  CHECK(s.entries()[0].first == "b");
  CHECK(s.scalar_count() == 7);
  CHECK(s.contains("a"));
  CHECK_THROWS(s.create("a", Matrix::Ones(1, 1)));
  CHECK_THROWS(s.get("zz"));
}

TEST_CASE("fft block gradients") {
  nn::Rng rng(4);
  nn::ParameterStore s;
  nn::FftBlock block(s, "blk", 8, 2, 12, 3, rng);
  const Matrix x = testing::random_matrix(4, 8, rng);
  const Matrix target = testing::random_matrix(4, 8, rng);
  auto loss = [&] {
    auto y = block(ag::Var::constant(x), {});
    return ag::mean(ag::square(ag::sub(y, ag::Var::constant(target))));
  };
  const auto r = testing::grad_check(s.entries(), loss);
  CHECK_MESSAGE(r.worst_rel < 1e-4, r.worst_where);
}

TEST_CASE("attention rows are distributions") {
  nn::Rng rng(2);
  nn::ParameterStore s;
  nn::MultiHeadAttention mha(s, "m", 8, 6, 8, 4, rng);
  std::vector<Matrix> w;
  mha(ag::Var::constant(testing::random_matrix(5, 8, rng)),
      ag::Var::constant(testing::random_matrix(3, 6, rng)), &w);
  REQUIRE(w.size() == 4);
  for (const auto& head : w) {
    CHECK(head.rows() == 5);
    CHECK(head.cols() == 3);
    CHECK((head.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("dropout only when training") {
  nn::Rng rng(1);
  const auto x = ag::Var::constant(Matrix::Ones(20, 20));
  CHECK(nn::dropout(x, {false, 0.5, &rng}).value() == x.value());
  CHECK(nn::dropout(x, {true, 0.0, &rng}).value() == x.value());
  const Matrix y = nn::dropout(x, {true, 0.5, &rng}).value();
  CHECK((y.array() == 0.0).count() > 100);
  CHECK(((y.array() == 0.0) || (y.array() == 2.0)).all());
}

TEST_CASE("adam moves against the gradient and ignores zero gradients") {
  nn::ParameterStore s;
  auto w = s.create("w", Matrix::Constant(1, 2, 1.0));
  auto still = s.create("still", Matrix::Constant(1, 1, 5.0));
  nn::Adam opt;
  for (int i = 0; i < 200; ++i) {
    s.zero_grad();
    ag::backward(ag::sum(ag::square(w)));
    opt.step(s);
  }
  CHECK(w.value().cwiseAbs().maxCoeff() < 0.85);
  CHECK(still.value()(0, 0) == 5.0);
  CHECK(opt.steps() == 200);
}
