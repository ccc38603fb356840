// Edit plans (deletion / insertion flags), prior patching with boundary
// smoothing, duration adjustment, training masks and biased frame weights.
#ifndef CUCVAE_EDITING_H_
#define CUCVAE_EDITING_H_

#include <utility>
#include <vector>

#include "cucvae/corpus.h"
#include "cucvae/nn.h"

namespace cucvae {

// Original phonemes [a, b, c] become [a, b', c]. Either middle run may be
// empty; both empty is the identity edit.
struct EditPlan {
  PhonemeTrack phonemes_edited;
  std::vector<int> flag_del;    // over original phonemes
  std::vector<int> flag_add;    // over edited phonemes
  std::vector<int> frame_mask;  // over edited frames, 1 = generated

  struct Segments {
    int a = 0, b = 0, b_new = 0, c = 0;
  };
  Segments segments() const;
  bool has_edit() const;
  // Throws ValidationError unless both flags are single contiguous runs at
  // the same offset and frame_mask matches flag_add expanded by durations.
  void validate() const;
  bool operator==(const EditPlan&) const = default;

  static EditPlan identity(const PhonemeTrack& track);
};

// Original phoneme index of every unedited edited-track position, -1 for
// positions inside b'.
std::vector<int> unedited_source(const EditPlan& plan);

std::vector<int> expand_flags(const std::vector<int>& flags,
                              const std::vector<int>& durations);

// Replaces phonemes [pa, pb) of `original` with `inserted`.
EditPlan splice_plan(const PhonemeTrack& original, int pa, int pb,
                     const PhonemeTrack& inserted);

// `replacement` is the G2P track of script.replacement_text (ignored for
// delete). Word span errors throw ValidationError.
EditPlan build_edit_plan(const PhonemeTrack& original, const EditScript& script,
                         const PhonemeTrack& replacement);

// Plan equivalent to applying `first` and then `second` (whose original is
// first's edited track). Throws if the result is not a three-run plan.
EditPlan compose(const EditPlan& first, const EditPlan& second);

// Returns `plan` with new edited-track durations and a rebuilt frame mask.
EditPlan with_durations(EditPlan plan, const std::vector<int>& durations);

// Round half away from zero.
int round_half_away(double x);

// Unedited positions keep their ground-truth frames; edited ones are the
// predictions scaled by (original unedited frames / predicted unedited
// frames), then rounded. Predictions are frame counts, not logs. With no
// unedited phoneme left the ratio is 1.
std::vector<int> adjust_durations(const std::vector<double>& predicted,
                                  const EditPlan& plan,
                                  const PhonemeTrack& original);

// Contiguous word run whose frame coverage is closest to rate * frames,
// earlier start then shorter run on ties. b' = b.
EditPlan sample_training_mask(const PhonemeTrack& track, double rate = 0.5);

Vector biased_frame_weights(const EditPlan& plan, double lambda = 1.5);

struct PatchedPrior {
  Matrix mu_hat, sigma_hat;
  Matrix mu_prime, sigma_prime;
};

// Learned kernel-5 convolution over the phoneme axis of (mu, log sigma),
// identity at initialization.
class BoundarySmoother {
 public:
  BoundarySmoother() = default;
  BoundarySmoother(nn::ParameterStore& store, const std::string& name,
                   Index latent_dim, Index kernel, nn::Rng& rng);
  std::pair<ag::Var, ag::Var> operator()(const ag::Var& mu,
                                         const ag::Var& log_sigma) const;
  const nn::Conv1d& conv() const { return conv_; }

 private:
  nn::Conv1d conv_;
  Index latent_dim_ = 2;
};

struct PatchedVars {
  ag::Var mu_hat, log_sigma_hat;
  ag::Var mu_prime, log_sigma_prime;
};

// mu / log_sigma cover the unedited phonemes in edited-track order.
// Smoothing is skipped for plans without an edit.
PatchedVars patch_prior(const ag::Var& mu, const ag::Var& log_sigma,
                        const EditPlan& plan, const BoundarySmoother& smoother);
PatchedPrior patch_prior(const Matrix& mu, const Matrix& sigma,
                         const EditPlan& plan, const BoundarySmoother& smoother);

// Generated mel with every unedited phoneme's frames overwritten by the
// matching original frames. `plan` must carry the durations used to
// generate `generated`.
Matrix mel_cut(const Matrix& generated, const Matrix& original,
               const EditPlan& plan, const PhonemeTrack& original_track);

}  // namespace cucvae

#endif  // CUCVAE_EDITING_H_
