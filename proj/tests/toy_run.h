// A prepared synthetic corpus plus a toy-scale run configuration.
#ifndef CUCVAE_TESTS_TOY_RUN_H_
#define CUCVAE_TESTS_TOY_RUN_H_

#include "cucvae/commands.h"
#include "test_util.h"

namespace cucvae::testing {

inline RunConfig toy_run_config(const std::filesystem::path& dir) {
  RunConfig c;
  c.model.d_model = 32;
  c.model.n_enc_layers = 1;
  c.model.n_dec_blocks = 2;
  c.model.n_heads = 2;
  c.model.context_l = 1;
  c.model.d_ctx = 16;
  c.model.ffn_dim = 64;
  c.model.conv_kernel = 3;
  c.model.dropout = 0.0;
  c.train.steps = 10;
  c.train.checkpoint_every = 5;
  c.paths.manifest = (dir / "corpus" / "manifest.jsonl").string();
  c.paths.run_dir = (dir / "run").string();
  return c;
}

// Writes a 4-utterance corpus and its feature cache under `dir`.
inline RunConfig prepared_toy_run(const std::filesystem::path& dir, int utterances = 4) {
  RunConfig c = toy_run_config(dir);
  ToyCorpusOptions opts;
  opts.utterances = utterances;
  write_toy_corpus(dir / "corpus", c.audio, opts);
  cmd_prepare(c);
  return c;
}

}  // namespace cucvae::testing

#endif  // CUCVAE_TESTS_TOY_RUN_H_
