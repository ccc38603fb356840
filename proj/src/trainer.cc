#include "cucvae/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cucvae/errors.h"
#include "json.hpp"

namespace cucvae {

TrainMode parse_train_mode(const std::string& s) {
  if (s == "tts") return TrainMode::kTts;
  if (s == "se") return TrainMode::kSe;
  throw ValidationError("unknown training mode '" + s + "' (allowed: tts, se)");
}

std::string to_string(TrainMode mode) { return mode == TrainMode::kTts ? "tts" : "se"; }

std::string to_json_line(const StepLog& l) {
  return nlohmann::json{{"step", l.step},         {"recon", l.recon}, {"kl1", l.kl1},
                        {"kl2", l.kl2},           {"dur_loss", l.dur_loss},
                        {"total", l.total},       {"beta1", l.beta1}, {"beta2", l.beta2}}
      .dump();
}

double warmup_beta(double beta, long step, long total_steps, double frac) {
  const double span = frac * static_cast<double>(total_steps);
  if (span <= 0.0) return beta;
  return beta * std::min(1.0, static_cast<double>(step) / span);
}

Trainer::Trainer(CucVaeModel& model, nn::Adam& optimizer, const TrainConfig& config,
                 TrainMode mode, long start_step)
    : model_(model),
      optimizer_(optimizer),
      config_(config),
      mode_(mode),
      step_(start_step),
      noise_rng_(config.seed_noise),
      dropout_rng_(config.seed_dropout),
      order_rng_(config.seed_order) {}

StepLog Trainer::step(const std::vector<const TrainingExample*>& batch) {
  if (batch.empty()) throw std::invalid_argument("empty training batch");
  const double b1 = warmup_beta(config_.beta1, step_, config_.steps, config_.kl_warmup_frac);
  const double b2 = warmup_beta(config_.beta2, step_, config_.steps, config_.kl_warmup_frac);
  const double inv = 1.0 / static_cast<double>(batch.size());
  const nn::ForwardContext ctx{true, model_.config().dropout, &dropout_rng_};
  StepLog log;
  log.step = step_;
  log.beta1 = b1;
  log.beta2 = b2;
  model_.store().zero_grad();
  for (const auto* ex : batch) {
    const Matrix eps = standard_normal(ex->track.size(), model_.config().latent_dim, noise_rng_);
    TrainForward out;
    if (mode_ == TrainMode::kSe) {
      const auto plan = sample_training_mask(ex->track, config_.mask_rate);
      const Vector weights = config_.unbiased ? Vector::Ones(ex->mel.rows())
                                              : biased_frame_weights(plan, config_.lambda_mask);
      out = model_.forward_train(*ex, eps, b1, b2, ctx, &plan, weights);
    } else {
      out = model_.forward_train(*ex, eps, b1, b2, ctx);
    }
    if (!std::isfinite(out.terms.total)) {
      model_.store().zero_grad();
      throw NonFiniteLoss("non-finite loss at step " + std::to_string(step_) + " on " + ex->id);
    }
    ag::backward(ag::scale(out.loss, inv));
    log.recon += inv * out.terms.recon;
    log.kl1 += inv * out.terms.kl1;
    log.kl2 += inv * out.terms.kl2;
    log.dur_loss += inv * out.terms.dur_loss;
    log.total += inv * out.terms.total;
  }
  optimizer_.step(model_.store());
  ++step_;
  return log;
}

std::vector<const TrainingExample*> Trainer::next_batch(const std::vector<TrainingExample>& data) {
  std::vector<const TrainingExample*> batch;
  const std::size_t size = std::min<std::size_t>(config_.batch_size, data.size());
  while (batch.size() < size) {
    if (cursor_ == order_.size()) {
      order_.resize(data.size());
      std::iota(order_.begin(), order_.end(), 0);
      std::shuffle(order_.begin(), order_.end(), order_rng_);
      cursor_ = 0;
    }
    batch.push_back(&data[order_[cursor_++]]);
  }
  return batch;
}

Trainer::RunResult Trainer::run(const std::vector<TrainingExample>& data, long steps,
                                const std::function<void(const StepLog&)>& on_step) {
  RunResult result;
  if (steps > 0 && data.empty()) throw std::invalid_argument("no training examples");
  for (long i = 0; i < steps; ++i) {
    try {
      result.log.push_back(step(next_batch(data)));
    } catch (const NonFiniteLoss& e) {
      result.diverged = true;
      result.message = e.what();
      break;
    }
    if (on_step) on_step(result.log.back());
  }
  return result;
}

}  // namespace cucvae
