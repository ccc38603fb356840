#include "cucvae/model_config.h"

#include "cucvae/errors.h"

namespace cucvae {

void ModelConfig::validate() const {
  if (d_model < 1 || n_enc_layers < 1 || n_dec_blocks < 1 || n_heads < 1 ||
      fusion_heads < 1 || d_ctx < 1 || ffn_dim < 1) {
    throw ValidationError("model config: sizes must be positive");
  }
  if (latent_dim != 2) throw ValidationError("model config: latent_dim must be 2");
  if (context_l < 0) throw ValidationError("model config: context_l must be >= 0");
  if (d_model % n_heads != 0 || d_model % fusion_heads != 0) {
    throw ValidationError("model config: d_model must be divisible by head counts");
  }
  if (n_mels != 80) throw ValidationError("model config: n_mels must be 80");
  if (conv_kernel % 2 == 0 || duration_kernel % 2 == 0 || smoothing_kernel % 2 == 0) {
    throw ValidationError("model config: kernel sizes must be odd");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ValidationError("model config: dropout must be in [0, 1)");
  }
}

}  // namespace cucvae
