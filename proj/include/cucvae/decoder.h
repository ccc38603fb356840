// Latent projection, length regulation and the feed-forward Transformer
// decoder that emits 80-bin mel frames.
#ifndef CUCVAE_DECODER_H_
#define CUCVAE_DECODER_H_

#include <vector>

#include "cucvae/model_config.h"
#include "cucvae/nn.h"

namespace cucvae {

struct DecoderConfig {
  Index n_blocks = 4;
  Index d_model = 256;
  Index n_heads = 2;
  Index conv_kernel = 9;
  Index ffn_dim = 1024;
  Index n_mels = 80;

  static DecoderConfig from(const ModelConfig& model);
  void validate() const;
};

// z [T x latent] -> z * W_up, no bias, added onto h.
class LatentProjection {
 public:
  LatentProjection() = default;
  LatentProjection(nn::ParameterStore& store, const std::string& name,
                   Index latent_dim, Index d_model, nn::Rng& rng);
  ag::Var inject(const ag::Var& h, const ag::Var& z) const;
  Matrix inject(const Matrix& h, const Matrix& z) const;
  const ag::Var& weight() const { return up_; }

 private:
  ag::Var up_;
};

// Row t repeated durations[t] times. Negative durations throw.
std::vector<Index> expand_durations(const std::vector<int>& durations);
ag::Var length_regulate(const ag::Var& seq, const std::vector<int>& durations);
Matrix length_regulate(const Matrix& seq, const std::vector<int>& durations);

class AcousticDecoder {
 public:
  AcousticDecoder() = default;
  AcousticDecoder(nn::ParameterStore& store, const std::string& name,
                  const DecoderConfig& config, nn::Rng& rng);

  // frames [n x d_model] -> mel [n x n_mels]; frame-level sinusoidal
  // positions are added first. n = 0 throws.
  ag::Var operator()(const ag::Var& frames, const nn::ForwardContext& ctx) const;
  const DecoderConfig& config() const { return config_; }

 private:
  DecoderConfig config_;
  std::vector<nn::FftBlock> blocks_;
  nn::Linear out_;
};

}  // namespace cucvae

#endif  // CUCVAE_DECODER_H_
