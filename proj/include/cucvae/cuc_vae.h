// Utterance-specific prior, reference-mel posterior, the residual
// reparameterization chain and the two-KL evidence lower bound.
//
// Sampling chain per phoneme and latent dimension:
//   z_p = mu_p + sigma_p * eps
//   z   = mu + sigma * z_p  =  mu + sigma * mu_p + sigma * sigma_p * eps
// so q(z | context) = N(mu + sigma * mu_p, (sigma * sigma_p)^2), which makes
// both KL terms closed-form diagonal Gaussians.
#ifndef CUCVAE_CUC_VAE_H_
#define CUCVAE_CUC_VAE_H_

#include <utility>

#include "cucvae/corpus.h"
#include "cucvae/nn.h"

namespace cucvae {

// Per-phoneme latent statistics, [T x 2] each. Scales are stored as logs.
struct LatentBundle {
  Matrix mu;
  Matrix log_sigma;
  Matrix mu_p;
  Matrix log_sigma_p;
  Matrix z_p;
  Matrix z;

  Matrix sigma() const { return log_sigma.array().exp(); }
  Matrix sigma_p() const { return log_sigma_p.array().exp(); }
};

struct ElboTerms {
  double recon = 0.0;
  double kl_posterior_prior = 0.0;
  double kl_prior_standard = 0.0;
  double beta1 = 1.0;
  double beta2 = 1.0;
  double total = 0.0;
};

// Graph-level counterparts used during training.
struct LatentVars {
  ag::Var mu, log_sigma, mu_p, log_sigma_p, z_p, z;
  LatentBundle values() const;
};

struct ElboVars {
  ag::Var recon, kl1, kl2, total;
  ElboTerms values(double beta1, double beta2) const;
};

// Two kernel-1 convolutions h -> (mu_p, log sigma_p).
class PriorNet {
 public:
  PriorNet() = default;
  PriorNet(nn::ParameterStore& store, const std::string& name, Index d_model,
           Index latent_dim, nn::Rng& rng);
  std::pair<ag::Var, ag::Var> operator()(const ag::Var& h) const;

  const nn::Conv1d& mean_conv() const { return mean_; }
  const nn::Conv1d& log_scale_conv() const { return log_scale_; }

 private:
  nn::Conv1d mean_, log_scale_;
};

// [T x n_frames] averaging operator over each phoneme's frame span;
// zero-duration phonemes get an all-zero row.
Matrix pooling_matrix(const std::vector<int>& durations);
// Per-phoneme mean of mel frames, [T x n_mels].
Matrix pool_frames(const Matrix& mel, const PhonemeTrack& track);

// Rows centered on the mean over phonemes with frames and divided by the
// centered RMS; zero-duration rows stay zero.
Matrix normalize_pooled(const Matrix& pooled, const std::vector<int>& durations);

// Mean-pooled, normalized reference mel -> two kernel-1 convolutions
// (mu, log sigma). Both log-scale heads start with zero weights.
class PosteriorNet {
 public:
  PosteriorNet() = default;
  PosteriorNet(nn::ParameterStore& store, const std::string& name, Index n_mels,
               Index latent_dim, nn::Rng& rng);
  std::pair<ag::Var, ag::Var> operator()(const Matrix& mel,
                                         const PhonemeTrack& track) const;

  const nn::Conv1d& mean_conv() const { return mean_; }
  const nn::Conv1d& log_scale_conv() const { return log_scale_; }

 private:
  nn::Conv1d mean_, log_scale_;
};

// Plain-matrix sampling chain. `sigma`/`sigma_p` are scales, not logs.
// Throws std::logic_error if the two-step and closed-form results disagree.
LatentBundle sample_latent(const Matrix& mu, const Matrix& sigma,
                           const Matrix& mu_p, const Matrix& sigma_p,
                           const Matrix& eps);
// Same chain on graph values.
LatentVars sample_latent(const ag::Var& mu, const ag::Var& log_sigma,
                         const ag::Var& mu_p, const ag::Var& log_sigma_p,
                         const Matrix& eps);

// z = mu_p + temperature * sigma_p * eps.
Matrix inference_sample(const Matrix& mu_p, const Matrix& sigma_p,
                        double temperature, const Matrix& eps);

Matrix standard_normal(Index rows, Index cols, nn::Rng& rng);

// KL(N(m1, s1^2) || N(m2, s2^2)) for scalars.
double kl_gaussian(double m1, double s1, double m2, double s2);

// recon = sum_f w_f * mean_bins |pred_f - target_f| / n_frames
// kl1   = sum KL(N(mu + sigma mu_p, (sigma sigma_p)^2) || N(mu_p, sigma_p^2))
// kl2   = sum KL(N(mu_p, sigma_p^2) || N(0, 1))
// total = recon + beta1 * kl1 + beta2 * kl2
ElboVars elbo_loss(const ag::Var& pred, const Matrix& target,
                   const LatentVars& latents, double beta1, double beta2,
                   const Vector& frame_weights);
ElboTerms elbo_loss(const Matrix& pred, const Matrix& target,
                    const LatentBundle& bundle, double beta1, double beta2,
                    const Vector& frame_weights);

}  // namespace cucvae

#endif  // CUCVAE_CUC_VAE_H_
