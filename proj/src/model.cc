#include "cucvae/model.h"

#include <cmath>
#include <stdexcept>

namespace cucvae {
namespace {

nn::ForwardContext eval_context() { return {}; }

std::vector<Index> kept_rows(const EditPlan& plan) {
  std::vector<Index> rows;
  for (int s : unedited_source(plan)) {
    if (s >= 0) rows.push_back(s);
  }
  return rows;
}

}  // namespace

CucVaeModel::CucVaeModel(const ModelConfig& config,
                         const std::vector<std::string>& speakers,
                         std::uint64_t init_seed)
    : config_(config) {
  config.validate();
  nn::Rng rng(init_seed);
  cu_ = CuEmbedding(store_, config, speakers, rng);
  if (config.prior == PriorKind::kContext) {
    prior_ = PriorNet(store_, "vae.prior", config.d_model, config.latent_dim, rng);
  }
  posterior_ = PosteriorNet(store_, "vae.posterior", config.n_mels, config.latent_dim, rng);
  projection_ = LatentProjection(store_, "dec.latent_up", config.latent_dim, config.d_model, rng);
  decoder_ = AcousticDecoder(store_, "dec", DecoderConfig::from(config), rng);
  smoother_ = BoundarySmoother(store_, "edit.smoother", config.latent_dim,
                               config.smoothing_kernel, rng);
}

CucVaeModel::PriorOut CucVaeModel::prior(const PhonemeTrack& track,
                                         const std::string& speaker,
                                         const Matrix& context,
                                         const nn::ForwardContext& ctx) const {
  const auto hidden = cu_.forward(track, speaker, context, ctx);
  PriorOut out{hidden.h, {}, {}, hidden.log_durations};
  if (config_.prior == PriorKind::kContext) {
    std::tie(out.mu_p, out.log_sigma_p) = prior_(hidden.h);
  } else {
    out.mu_p = ag::Var::constant(Matrix::Zero(hidden.h.rows(), config_.latent_dim));
    out.log_sigma_p = out.mu_p;
  }
  return out;
}

ag::Var CucVaeModel::decode(const ag::Var& h, const ag::Var& z,
                            const std::vector<int>& durations,
                            const nn::ForwardContext& ctx) const {
  return decoder_(length_regulate(projection_.inject(h, z), durations), ctx);
}

ag::Var duration_loss(const ag::Var& log_durations, const std::vector<int>& durations) {
  if (static_cast<Index>(durations.size()) != log_durations.rows()) {
    throw std::invalid_argument("duration_loss: one target per phoneme required");
  }
  Matrix target(log_durations.rows(), 1);
  for (std::size_t i = 0; i < durations.size(); ++i) {
    target(static_cast<Index>(i), 0) = std::log(durations[i] + 1.0);
  }
  return ag::mean(ag::square(ag::sub(log_durations, ag::Var::constant(std::move(target)))));
}

TrainForward CucVaeModel::forward_train(const TrainingExample& ex, const Matrix& eps,
                                        double beta1, double beta2,
                                        const nn::ForwardContext& ctx,
                                        const EditPlan* mask,
                                        const Vector& frame_weights) const {
  const auto p = prior(ex.track, ex.speaker, ex.context, ctx);
  auto [mu, log_sigma] = posterior_(ex.mel, ex.track);
  if (mask) {
    if (mask->flag_del.size() != ex.track.phonemes.size() ||
        mask->phonemes_edited.phonemes != ex.track.phonemes) {
      throw std::invalid_argument("forward_train: mask does not belong to " + ex.id);
    }
    const auto rows = kept_rows(*mask);
    const auto patched = patch_prior(ag::gather_rows(mu, rows),
                                     ag::gather_rows(log_sigma, rows), *mask, smoother_);
    mu = patched.mu_prime;
    log_sigma = patched.log_sigma_prime;
  }
  TrainForward out;
  out.latents = sample_latent(mu, log_sigma, p.mu_p, p.log_sigma_p, eps);
  out.mel = decode(p.h, out.latents.z, ex.track.durations, ctx);
  const Vector weights =
      frame_weights.size() == 0 ? Vector::Ones(ex.mel.rows()) : frame_weights;
  const auto elbo = elbo_loss(out.mel, ex.mel, out.latents, beta1, beta2, weights);
  const auto dur = duration_loss(p.log_durations, ex.track.durations);
  out.loss = ag::add(elbo.total, dur);
  out.terms = {elbo.recon.item(), elbo.kl1.item(), elbo.kl2.item(), dur.item(),
               out.loss.item()};
  return out;
}

Matrix CucVaeModel::reconstruct(const TrainingExample& ex, const Matrix& eps) const {
  ag::NoGradGuard no_grad;
  const auto ctx = eval_context();
  const auto p = prior(ex.track, ex.speaker, ex.context, ctx);
  const auto [mu, log_sigma] = posterior_(ex.mel, ex.track);
  const auto latents = sample_latent(mu, log_sigma, p.mu_p, p.log_sigma_p, eps);
  return decode(p.h, latents.z, ex.track.durations, ctx).value();
}

std::vector<double> CucVaeModel::frames_from_log(const Matrix& log_durations) {
  std::vector<double> out;
  for (Index i = 0; i < log_durations.size(); ++i) {
    out.push_back(std::max(1.0, std::exp(log_durations.data()[i]) - 1.0));
  }
  return out;
}

std::vector<int> CucVaeModel::durations_from_log(const Matrix& log_durations) {
  std::vector<int> out;
  for (double f : frames_from_log(log_durations)) out.push_back(std::max(1, round_half_away(f)));
  return out;
}

Synthesis CucVaeModel::synthesize(const PhonemeTrack& track, const std::string& speaker,
                                  const Matrix& context, double temperature,
                                  const Matrix& eps,
                                  const std::optional<std::vector<int>>& durations) const {
  ag::NoGradGuard no_grad;
  const auto ctx = eval_context();
  const auto p = prior(track, speaker, context, ctx);
  Synthesis out;
  out.z = inference_sample(p.mu_p.value(), p.log_sigma_p.value().array().exp(),
                           temperature, eps);
  out.durations = durations ? *durations : durations_from_log(p.log_durations.value());
  out.mel = decode(p.h, ag::Var::constant(out.z), out.durations, ctx).value();
  return out;
}

EditResult edit_infer(const CucVaeModel& model, const Matrix& original_mel,
                      const PhonemeTrack& original_track, const EditPlan& plan,
                      const std::string& speaker, const Matrix& context,
                      const Matrix& eps) {
  plan.validate();
  if (plan.flag_del.size() != original_track.phonemes.size()) {
    throw std::invalid_argument("edit_infer: plan does not match the original alignment");
  }
  ag::NoGradGuard no_grad;
  const nn::ForwardContext ctx;
  const auto [mu, log_sigma] = model.posterior_net()(original_mel, original_track);
  const auto rows = kept_rows(plan);
  const auto patched = patch_prior(ag::gather_rows(mu, rows), ag::gather_rows(log_sigma, rows),
                                   plan, model.smoother());
  const auto p = model.prior(plan.phonemes_edited, speaker, context, ctx);
  const auto latents = sample_latent(patched.mu_prime, patched.log_sigma_prime, p.mu_p,
                                     p.log_sigma_p, eps);
  const auto durations = adjust_durations(
      CucVaeModel::frames_from_log(p.log_durations.value()), plan, original_track);
  EditResult out;
  out.mel = model.decode(p.h, latents.z, durations, ctx).value();
  out.plan = with_durations(plan, durations);
  out.latents = latents.values();
  return out;
}

}  // namespace cucvae
