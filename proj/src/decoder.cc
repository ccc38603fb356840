#include "cucvae/decoder.h"

#include <stdexcept>

#include "cucvae/errors.h"

namespace cucvae {

DecoderConfig DecoderConfig::from(const ModelConfig& m) {
  return {m.n_dec_blocks, m.d_model, m.n_heads, m.conv_kernel, m.ffn_dim, m.n_mels};
}

void DecoderConfig::validate() const {
  if (n_blocks < 1) throw ValidationError("decoder needs at least one block");
  if (n_mels != 80) throw ValidationError("decoder emits 80 mel bins");
  if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) {
    throw ValidationError("decoder d_model must be divisible by n_heads");
  }
  if (conv_kernel < 1 || conv_kernel % 2 == 0) {
    throw ValidationError("decoder conv kernel must be odd");
  }
}

LatentProjection::LatentProjection(nn::ParameterStore& store,
                                   const std::string& name, Index latent_dim,
                                   Index d_model, nn::Rng& rng) {
  up_ = store.create(name + ".weight", nn::xavier_uniform(latent_dim, d_model, rng));
}

ag::Var LatentProjection::inject(const ag::Var& h, const ag::Var& z) const {
  if (h.rows() != z.rows()) {
    throw std::invalid_argument("inject_latent: " + std::to_string(h.rows()) +
                                " phonemes but " + std::to_string(z.rows()) +
                                " latent rows");
  }
  if (z.cols() != up_.rows() || h.cols() != up_.cols()) {
    throw std::invalid_argument("inject_latent: width mismatch");
  }
  return ag::add(h, ag::matmul(z, up_));
}

Matrix LatentProjection::inject(const Matrix& h, const Matrix& z) const {
  ag::NoGradGuard no_grad;
  return inject(ag::Var::constant(h), ag::Var::constant(z)).value();
}

std::vector<Index> expand_durations(const std::vector<int>& durations) {
  std::vector<Index> owner;
  for (std::size_t t = 0; t < durations.size(); ++t) {
    if (durations[t] < 0) throw std::invalid_argument("length_regulate: negative duration");
    owner.insert(owner.end(), durations[t], static_cast<Index>(t));
  }
  return owner;
}

ag::Var length_regulate(const ag::Var& seq, const std::vector<int>& durations) {
  if (static_cast<Index>(durations.size()) != seq.rows()) {
    throw std::invalid_argument("length_regulate: one duration per row required");
  }
  return ag::gather_rows(seq, expand_durations(durations));
}

Matrix length_regulate(const Matrix& seq, const std::vector<int>& durations) {
  if (static_cast<Index>(durations.size()) != seq.rows()) {
    throw std::invalid_argument("length_regulate: one duration per row required");
  }
  const auto owner = expand_durations(durations);
  Matrix out(static_cast<Index>(owner.size()), seq.cols());
  for (std::size_t i = 0; i < owner.size(); ++i) {
    out.row(static_cast<Index>(i)) = seq.row(owner[i]);
  }
  return out;
}

AcousticDecoder::AcousticDecoder(nn::ParameterStore& store, const std::string& name,
                                 const DecoderConfig& config, nn::Rng& rng)
    : config_(config) {
  config.validate();
  for (Index b = 0; b < config.n_blocks; ++b) {
    blocks_.emplace_back(store, name + ".block" + std::to_string(b), config.d_model,
                         config.n_heads, config.ffn_dim, config.conv_kernel, rng);
  }
  out_ = nn::Linear(store, name + ".out", config.d_model, config.n_mels, rng);
}

ag::Var AcousticDecoder::operator()(const ag::Var& frames,
                                    const nn::ForwardContext& ctx) const {
  if (frames.rows() == 0) throw std::invalid_argument("decode_mel: zero frames");
  if (frames.cols() != config_.d_model) {
    throw std::invalid_argument("decode_mel: frame width != d_model");
  }
  auto x = ag::add(frames, ag::Var::constant(nn::sinusoid_table(frames.rows(), frames.cols())));
  for (const auto& block : blocks_) x = block(x, ctx);
  return out_(x);
}

}  // namespace cucvae
