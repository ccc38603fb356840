// The full conditional VAE: CU-embedding, prior / posterior heads, latent
// projection, decoder and the editing smoother, sharing one parameter store.
#ifndef CUCVAE_MODEL_H_
#define CUCVAE_MODEL_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cucvae/cu_embedding.h"
#include "cucvae/cuc_vae.h"
#include "cucvae/decoder.h"
#include "cucvae/editing.h"

namespace cucvae {

struct TrainingExample {
  std::string id;
  std::string speaker;
  PhonemeTrack track;  // ground-truth durations summing to mel.rows()
  Matrix mel;          // [frames x 80] log-mel
  Matrix context;      // [2l x d_ctx] pair embeddings, 0 rows when l = 0
};

struct LossTerms {
  double recon = 0.0;
  double kl1 = 0.0;
  double kl2 = 0.0;
  double dur_loss = 0.0;
  double total = 0.0;
};

struct TrainForward {
  ag::Var loss;
  LossTerms terms;
  ag::Var mel;
  LatentVars latents;
};

struct Synthesis {
  Matrix mel;
  std::vector<int> durations;
  Matrix z;
};

class CucVaeModel {
 public:
  CucVaeModel(const ModelConfig& config, const std::vector<std::string>& speakers,
              std::uint64_t init_seed);
  CucVaeModel(const CucVaeModel&) = delete;
  CucVaeModel& operator=(const CucVaeModel&) = delete;

  // One utterance. With `mask` set the step is a masked-reconstruction
  // (editing) step: posterior statistics of masked phonemes are replaced by
  // (0, 1) and smoothed before sampling. `frame_weights` empty means ones.
  // `eps` is [T x latent_dim].
  TrainForward forward_train(const TrainingExample& ex, const Matrix& eps,
                             double beta1, double beta2,
                             const nn::ForwardContext& ctx,
                             const EditPlan* mask = nullptr,
                             const Vector& frame_weights = {}) const;

  // Posterior path with ground-truth durations; z = mu + sigma * z_p.
  Matrix reconstruct(const TrainingExample& ex, const Matrix& eps) const;

  // Prior path. Durations come from the predictor unless given.
  Synthesis synthesize(const PhonemeTrack& track, const std::string& speaker,
                       const Matrix& context, double temperature, const Matrix& eps,
                       const std::optional<std::vector<int>>& durations = std::nullopt) const;

  // (mu_p, log sigma_p) and predicted log(d + 1) for a phoneme track.
  struct PriorOut {
    ag::Var h, mu_p, log_sigma_p, log_durations;
  };
  PriorOut prior(const PhonemeTrack& track, const std::string& speaker,
                 const Matrix& context, const nn::ForwardContext& ctx) const;

  // Frames per phoneme from predicted log(d + 1), each at least one frame;
  // the integer version rounds half away from zero.
  static std::vector<int> durations_from_log(const Matrix& log_durations);
  static std::vector<double> frames_from_log(const Matrix& log_durations);

  ag::Var decode(const ag::Var& h, const ag::Var& z, const std::vector<int>& durations,
                 const nn::ForwardContext& ctx) const;

  nn::ParameterStore& store() { return store_; }
  const nn::ParameterStore& store() const { return store_; }
  const ModelConfig& config() const { return config_; }
  const std::vector<std::string>& speakers() const { return cu_.speakers(); }
  const CuEmbedding& cu() const { return cu_; }
  const PriorNet& prior_net() const { return prior_; }
  const PosteriorNet& posterior_net() const { return posterior_; }
  const LatentProjection& projection() const { return projection_; }
  const AcousticDecoder& decoder() const { return decoder_; }
  const BoundarySmoother& smoother() const { return smoother_; }

 private:
  ModelConfig config_;
  nn::ParameterStore store_;
  CuEmbedding cu_;
  PriorNet prior_;
  PosteriorNet posterior_;
  LatentProjection projection_;
  AcousticDecoder decoder_;
  BoundarySmoother smoother_;
};

// Duration loss: mean squared error between predicted and target log(d + 1).
ag::Var duration_loss(const ag::Var& log_durations, const std::vector<int>& durations);

struct EditResult {
  Matrix mel;
  EditPlan plan;  // with the adjusted durations D'
  LatentBundle latents;
};

// Entire-inference editing: posterior on the unedited original phonemes,
// prior patching and smoothing, adjusted durations and a full decode.
// `context` is the pair embedding matrix for the edited utterance, `eps`
// is [T' x latent_dim].
EditResult edit_infer(const CucVaeModel& model, const Matrix& original_mel,
                      const PhonemeTrack& original_track, const EditPlan& plan,
                      const std::string& speaker, const Matrix& context,
                      const Matrix& eps);

}  // namespace cucvae

#endif  // CUCVAE_MODEL_H_
