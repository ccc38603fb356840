#include "cucvae/cuc_vae.h"

#include <cmath>
#include <stdexcept>

namespace cucvae {
namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

}  // namespace

LatentBundle LatentVars::values() const {
  return {mu.value(), log_sigma.value(), mu_p.value(), log_sigma_p.value(),
          z_p.value(), z.value()};
}

ElboTerms ElboVars::values(double beta1, double beta2) const {
  return {recon.item(), kl1.item(), kl2.item(), beta1, beta2, total.item()};
}

PriorNet::PriorNet(nn::ParameterStore& store, const std::string& name,
                   Index d_model, Index latent_dim, nn::Rng& rng) {
  mean_ = nn::Conv1d(store, name + ".mean", d_model, latent_dim, 1, rng);
  log_scale_ = nn::Conv1d(store, name + ".log_scale", d_model, latent_dim, 1, rng);
  ag::Var w = log_scale_.weight();  // shares the parameter node
  w.mutable_value().setZero();      // sigma_p starts at 1
}

std::pair<ag::Var, ag::Var> PriorNet::operator()(const ag::Var& h) const {
  return {mean_(h), log_scale_(h)};
}

Matrix pooling_matrix(const std::vector<int>& durations) {
  Index frames = 0;
  for (int d : durations) {
    if (d < 0) throw std::invalid_argument("pooling: negative duration");
    frames += d;
  }
  Matrix pool = Matrix::Zero(static_cast<Index>(durations.size()), frames);
  Index at = 0;
  for (std::size_t p = 0; p < durations.size(); ++p) {
    const int d = durations[p];
    if (d > 0) pool.block(static_cast<Index>(p), at, 1, d).setConstant(1.0 / d);
    at += d;
  }
  return pool;
}

Matrix pool_frames(const Matrix& mel, const PhonemeTrack& track) {
  if (track.total_frames() != mel.rows()) {
    throw std::invalid_argument("posterior: durations cover " +
                                std::to_string(track.total_frames()) +
                                " frames but the mel has " +
                                std::to_string(mel.rows()));
  }
  return pooling_matrix(track.durations) * mel;
}

PosteriorNet::PosteriorNet(nn::ParameterStore& store, const std::string& name,
                           Index n_mels, Index latent_dim, nn::Rng& rng) {
  mean_ = nn::Conv1d(store, name + ".mean", n_mels, latent_dim, 1, rng);
  log_scale_ = nn::Conv1d(store, name + ".log_scale", n_mels, latent_dim, 1, rng);
  ag::Var w = log_scale_.weight();
  w.mutable_value().setZero();
}

Matrix normalize_pooled(const Matrix& pooled, const std::vector<int>& durations) {
  if (static_cast<Index>(durations.size()) != pooled.rows()) {
    throw std::invalid_argument("normalize_pooled: one duration per row required");
  }
  Vector mean = Vector::Zero(pooled.cols());
  Index voiced_rows = 0;
  for (Index p = 0; p < pooled.rows(); ++p) {
    if (durations[p] > 0) {
      mean += pooled.row(p).transpose();
      ++voiced_rows;
    }
  }
  Matrix out = Matrix::Zero(pooled.rows(), pooled.cols());
  if (voiced_rows == 0) return out;
  mean /= static_cast<double>(voiced_rows);
  double sq = 0.0;
  for (Index p = 0; p < pooled.rows(); ++p) {
    if (durations[p] == 0) continue;
    out.row(p) = pooled.row(p) - mean.transpose();
    sq += out.row(p).squaredNorm();
  }
  const double rms = std::sqrt(sq / static_cast<double>(voiced_rows * pooled.cols()));
  return out / std::max(rms, 1e-3);
}

std::pair<ag::Var, ag::Var> PosteriorNet::operator()(
    const Matrix& mel, const PhonemeTrack& track) const {
  const auto pooled =
      ag::Var::constant(normalize_pooled(pool_frames(mel, track), track.durations));
  return {mean_(pooled), log_scale_(pooled)};
}

LatentBundle sample_latent(const Matrix& mu, const Matrix& sigma,
                           const Matrix& mu_p, const Matrix& sigma_p,
                           const Matrix& eps) {
  require_same_shape(mu, sigma, "sample_latent");
  require_same_shape(mu, mu_p, "sample_latent");
  require_same_shape(mu, sigma_p, "sample_latent");
  require_same_shape(mu, eps, "sample_latent");
  if ((sigma.array() <= 0.0).any() || (sigma_p.array() <= 0.0).any()) {
    throw std::invalid_argument("sample_latent: scales must be positive");
  }
  LatentBundle b;
  b.mu = mu;
  b.log_sigma = sigma.array().log();
  b.mu_p = mu_p;
  b.log_sigma_p = sigma_p.array().log();
  b.z_p = mu_p.array() + sigma_p.array() * eps.array();
  b.z = mu.array() + sigma.array() * b.z_p.array();
  const Matrix direct = mu.array() + sigma.array() * mu_p.array() +
                        sigma.array() * sigma_p.array() * eps.array();
  const double tol = 1e-12 * (1.0 + direct.cwiseAbs().maxCoeff());
  if ((b.z - direct).cwiseAbs().maxCoeff() > tol) {
    throw std::logic_error("sample_latent: two-step and closed-form samples disagree");
  }
  return b;
}

LatentVars sample_latent(const ag::Var& mu, const ag::Var& log_sigma,
                         const ag::Var& mu_p, const ag::Var& log_sigma_p,
                         const Matrix& eps) {
  LatentVars v{mu, log_sigma, mu_p, log_sigma_p, {}, {}};
  v.z_p = ag::add(mu_p, ag::mul(ag::exp(log_sigma_p), ag::Var::constant(eps)));
  v.z = ag::add(mu, ag::mul(ag::exp(log_sigma), v.z_p));
  return v;
}

Matrix inference_sample(const Matrix& mu_p, const Matrix& sigma_p,
                        double temperature, const Matrix& eps) {
  if (temperature < 0.0) throw std::invalid_argument("temperature must be >= 0");
  require_same_shape(mu_p, sigma_p, "inference_sample");
  require_same_shape(mu_p, eps, "inference_sample");
  if (temperature == 0.0) return mu_p;
  return mu_p.array() + temperature * sigma_p.array() * eps.array();
}

Matrix standard_normal(Index rows, Index cols, nn::Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

double kl_gaussian(double m1, double s1, double m2, double s2) {
  const double d = m1 - m2;
  return std::log(s2 / s1) + (s1 * s1 + d * d) / (2.0 * s2 * s2) - 0.5;
}

ElboVars elbo_loss(const ag::Var& pred, const Matrix& target,
                   const LatentVars& l, double beta1, double beta2,
                   const Vector& frame_weights) {
  require_same_shape(pred.value(), target, "elbo_loss");
  const Index frames = target.rows();
  if (frames == 0) throw std::invalid_argument("elbo_loss: no frames");
  if (frame_weights.size() != frames) {
    throw std::invalid_argument("elbo_loss: one weight per frame required");
  }
  ElboVars out;
  const auto per_frame = ag::row_mean(ag::abs(ag::sub(pred, ag::Var::constant(target))));
  Matrix w = frame_weights.transpose() / static_cast<double>(frames);
  out.recon = ag::matmul(ag::Var::constant(std::move(w)), per_frame);

  // KL(N(mu + s*mu_p, (s*s_p)^2) || N(mu_p, s_p^2))
  //   = -log s + s^2/2 + (mu + (s - 1) mu_p)^2 / (2 s_p^2) - 1/2
  const auto sigma = ag::exp(l.log_sigma);
  const auto shift = ag::add(l.mu, ag::mul(ag::add_scalar(sigma, -1.0), l.mu_p));
  const auto inv_var_p = ag::exp(ag::scale(l.log_sigma_p, -2.0));
  const auto kl1 = ag::add_scalar(
      ag::add(ag::sub(ag::scale(ag::square(sigma), 0.5), l.log_sigma),
              ag::scale(ag::mul(ag::square(shift), inv_var_p), 0.5)),
      -0.5);
  out.kl1 = ag::sum(kl1);
  // KL(N(mu_p, s_p^2) || N(0, 1)) = (mu_p^2 + s_p^2 - 1 - 2 log s_p) / 2
  const auto sigma_p = ag::exp(l.log_sigma_p);
  const auto kl2 = ag::scale(
      ag::add_scalar(ag::sub(ag::add(ag::square(l.mu_p), ag::square(sigma_p)),
                             ag::scale(l.log_sigma_p, 2.0)),
                     -1.0),
      0.5);
  out.kl2 = ag::sum(kl2);
  out.total = out.recon;
  if (beta1 != 0.0) out.total = ag::add(out.total, ag::scale(out.kl1, beta1));
  if (beta2 != 0.0) out.total = ag::add(out.total, ag::scale(out.kl2, beta2));
  return out;
}

ElboTerms elbo_loss(const Matrix& pred, const Matrix& target,
                    const LatentBundle& bundle, double beta1, double beta2,
                    const Vector& frame_weights) {
  ag::NoGradGuard no_grad;
  LatentVars l{ag::Var::constant(bundle.mu),   ag::Var::constant(bundle.log_sigma),
               ag::Var::constant(bundle.mu_p), ag::Var::constant(bundle.log_sigma_p),
               ag::Var::constant(bundle.z_p),  ag::Var::constant(bundle.z)};
  return elbo_loss(ag::Var::constant(pred), target, l, beta1, beta2, frame_weights)
      .values(beta1, beta2);
}

}  // namespace cucvae
