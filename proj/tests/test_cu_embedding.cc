#include "cucvae/cu_embedding.h"
#include "cucvae/lexicon.h"
#include "doctest.h"
#include "grad_check.h"
#include "test_util.h"
#include "toy.h"

using namespace cucvae;
using testing::tiny_config;
using testing::toy_track;

namespace {

Matrix pairs_for(const ModelConfig& c, int rows, std::uint64_t seed) {
  nn::Rng rng(seed);
  return testing::random_matrix(rows, c.d_ctx, rng);
}

}  // namespace

TEST_CASE("pairs over the window") {
  Utterance u{"u", "s", "cur", {"A"}, {"C"}};
  CHECK(build_pairs(u) == std::vector<std::string>{"[CLS] A [SEP] cur", "[CLS] cur [SEP] C"});
  u.neighbors_before.clear();
  u.neighbors_after.clear();
  CHECK(build_pairs(u).empty());
  u = {"u", "s", "cur", {"", "B"}, {"C", ""}};
  const auto p = build_pairs(u);
  REQUIRE(p.size() == 4);
  CHECK(p[0] == "[CLS]  [SEP] B");
  CHECK(p[3] == "[CLS] C [SEP] ");
}

TEST_CASE("stub context encoder") {
  StubContextEncoder enc(32);
  CHECK(enc.encode("[CLS] a [SEP] b") == enc.encode("[CLS] a [SEP] b"));
  CHECK(enc.encode("[CLS] a [SEP] b") != enc.encode("[CLS] a [SEP] c"));
  const Vector empty = enc.encode("");
  CHECK(empty.size() == 32);
  CHECK(empty == enc.encode("   "));
  CHECK(empty.norm() > 0.0);
  CHECK(embed_pairs(enc, {"x", "y", "z"}).rows() == 3);
}

TEST_CASE("cached context encoder") {
  testing::TempDir dir;
  const std::string pair = "[CLS] a [SEP] b";
  testing::write_text(dir / "cache.jsonl",
                      "{\"pair_text_sha256\":\"" + sha256_hex(pair) + "\",\"vector\":[1,2,3]}\n");
  CachedContextEncoder enc(dir / "cache.jsonl");
  CHECK(enc.dim() == 3);
  CHECK(enc.encode(pair) == Eigen::Vector3d(1, 2, 3));
  CHECK_THROWS(enc.encode("missing"));
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("shapes and errors") {
  const auto c = tiny_config();
  nn::Rng rng(1);
  nn::ParameterStore s;
  CuEmbedding cu(s, c, {"s1", "s2"}, rng);
  PhonemeTrack one{{"AH"}, {0}, {{0, 1}}};
  const auto h = cu.forward(one, "s1", pairs_for(c, 2, 3), {});
  CHECK(h.h.rows() == 1);
  CHECK(h.h.cols() == c.d_model);
  CHECK(h.log_durations.rows() == 1);
  CHECK_THROWS(cu.encode_phonemes(PhonemeTrack{}, "s1", {}));
  CHECK_THROWS(cu.forward(one, "s1", Matrix::Zero(2, c.d_ctx + 1), {}));
  const auto f = cu.encode_phonemes(toy_track(), "s1", {});
  CHECK_THROWS(cu.project_hidden(ag::Var::constant(Matrix::Zero(2, c.d_model)), f, {}));
  CHECK(cu.speaker_index("nobody") == 0);
  CHECK(cu.speaker_index("s2") == 2);
}

TEST_CASE("speaker embedding is additive") {
  const auto c = tiny_config();
  nn::Rng rng(1);
  nn::ParameterStore s;
  CuEmbedding cu(s, c, {"s1", "s2"}, rng);
  const auto track = toy_track();
  CHECK(cu.encode_phonemes(track, "s1", {}).value() != cu.encode_phonemes(track, "s2", {}).value());
  ag::Var table = cu.speaker_table();
  table.mutable_value().setZero();
  CHECK(cu.encode_phonemes(track, "s1", {}).value() == cu.encode_phonemes(track, "s2", {}).value());
  CHECK(cu.encode_phonemes(track, "s1", {}).value() == cu.encode_phonemes(track, "x", {}).value());
}

TEST_CASE("fusion attention") {
  const auto c = tiny_config();
  nn::Rng rng(5);
  nn::ParameterStore s;
  CuEmbedding cu(s, c, {}, rng);
  const auto f = cu.encode_phonemes(toy_track(), "", {});

  SUBCASE("single pair attends with weight one") {
    std::vector<Matrix> w;
    const Matrix b = pairs_for(c, 1, 8);
    const Matrix g = cu.fuse_context(f, b, &w).value();
    REQUIRE(w.size() == 8);
    for (const auto& head : w) CHECK((head.array() - 1.0).abs().maxCoeff() < 1e-12);
    const auto& m = cu.fusion();
    const Matrix v = m.v()(ag::Var::constant(b)).value();
    const Matrix expect = m.out()(ag::Var::constant(v)).value();
    for (Index t = 0; t < g.rows(); ++t) {
      CHECK((g.row(t) - expect.row(0)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("rows sum to one and permutation only re-pairs") {
    const Matrix b = pairs_for(c, 3, 9);
    Matrix perm(3, c.d_ctx);
    perm << b.row(2), b.row(0), b.row(1);
    std::vector<Matrix> w1, w2;
    const Matrix g1 = cu.fuse_context(f, b, &w1).value();
    const Matrix g2 = cu.fuse_context(f, perm, &w2).value();
    CHECK((g1 - g2).cwiseAbs().maxCoeff() < 1e-12);
    for (std::size_t h = 0; h < w1.size(); ++h) {
      CHECK((w1[h].rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-6);
      CHECK((w1[h].col(2) - w2[h].col(0)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("no pairs gives zeros") {
    CHECK(cu.fuse_context(f, Matrix(0, c.d_ctx)).value().isZero());
  }
}

TEST_CASE("projection with [I; 0] returns G") {
  const auto c = tiny_config();
  nn::Rng rng(5);
  nn::ParameterStore s;
  CuEmbedding cu(s, c, {}, rng);
  ag::Var w = cu.projection();
  w.mutable_value().setZero();
  w.mutable_value().topRows(c.d_model).setIdentity();
  const auto f = cu.encode_phonemes(toy_track(), "", {});
  const auto g = cu.fuse_context(f, pairs_for(c, 2, 1));
  const auto h = cu.project_hidden(g, f, {});
  CHECK(h.h.value() == g.value());
}

TEST_CASE("context changes the hidden sequence") {
  const auto c = tiny_config();
  nn::Rng rng(5);
  nn::ParameterStore s;
  CuEmbedding cu(s, c, {}, rng);
  const auto track = toy_track();
  const Matrix a = cu.forward(track, "", pairs_for(c, 2, 1), {}).h.value();
  const Matrix b = cu.forward(track, "", pairs_for(c, 2, 2), {}).h.value();
  CHECK((a - b).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("duration loss gradient on a three-phoneme toy") {
  const auto c = tiny_config();
  nn::Rng rng(12);
  nn::ParameterStore s;
  CuEmbedding cu(s, c, {"s"}, rng);
  const PhonemeTrack track{{"M", "EH", "R"}, {3, 5, 2}, {{0, 3}}};
  const Matrix ctx = pairs_for(c, 2, 4);
  auto loss = [&] {
    const auto h = cu.forward(track, "s", ctx, {});
    Matrix target(3, 1);
    target << std::log(4.0), std::log(6.0), std::log(3.0);
    return ag::mean(ag::square(ag::sub(h.log_durations, ag::Var::constant(target))));
  };
  std::vector<std::pair<std::string, ag::Var>> params;
  for (const auto& [name, v] : s.entries()) {
    if (name.rfind("cu.duration", 0) == 0 || name == "cu.projection") params.emplace_back(name, v);
  }
  const auto r = testing::grad_check(params, loss);
  CHECK_MESSAGE(r.worst_rel < 1e-4, r.worst_where);
}
