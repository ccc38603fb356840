#ifndef CUCVAE_MODEL_CONFIG_H_
#define CUCVAE_MODEL_CONFIG_H_

#include <string>

#include "cucvae/autograd.h"

namespace cucvae {

// Which prior the variational heads use. kStandard fixes the prior to
// N(0, 1), i.e. a plain fine-grained VAE.
enum class PriorKind { kContext, kStandard };

struct ModelConfig {
  Index d_model = 256;
  Index n_enc_layers = 4;
  Index n_dec_blocks = 4;
  Index n_heads = 2;
  Index fusion_heads = 8;
  Index latent_dim = 2;
  int context_l = 5;
  Index d_ctx = 768;
  Index ffn_dim = 1024;
  Index conv_kernel = 9;
  Index duration_kernel = 3;
  Index smoothing_kernel = 5;
  Index n_mels = 80;
  double dropout = 0.1;
  PriorKind prior = PriorKind::kContext;

  void validate() const;
};

}  // namespace cucvae

#endif  // CUCVAE_MODEL_CONFIG_H_
