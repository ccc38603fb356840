// Small model configurations shared by the tests.
#ifndef CUCVAE_TESTS_TOY_H_
#define CUCVAE_TESTS_TOY_H_

#include "cucvae/model_config.h"
#include "cucvae/corpus.h"

namespace cucvae::testing {

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.d_model = 16;
  c.n_enc_layers = 1;
  c.n_dec_blocks = 1;
  c.n_heads = 2;
  c.fusion_heads = 8;
  c.context_l = 1;
  c.d_ctx = 12;
  c.ffn_dim = 24;
  c.conv_kernel = 3;
  c.dropout = 0.0;
  return c;
}

// Three words over six phonemes.
inline PhonemeTrack toy_track(std::vector<int> durations = {2, 1, 3, 0, 2, 1}) {
  return {{"M", "EH", "R", "IY", "AE", "S"}, std::move(durations), {{0, 2}, {2, 4}, {4, 6}}};
}

}  // namespace cucvae::testing

#endif  // CUCVAE_TESTS_TOY_H_
