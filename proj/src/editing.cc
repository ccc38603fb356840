#include "cucvae/editing.h"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "cucvae/errors.h"

namespace cucvae {
namespace {

int count_ones(const std::vector<int>& v) {
  int n = 0;
  for (int x : v) n += x != 0;
  return n;
}

// Offset of the single run of ones, or -1 when there is none. Throws if the
// ones are not contiguous.
int run_start(const std::vector<int>& flags, const char* what) {
  int start = -1, end = -1;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i] != 0 && flags[i] != 1) {
      throw ValidationError(std::string(what) + " must be binary");
    }
    if (flags[i] == 1) {
      if (start < 0) start = static_cast<int>(i);
      else if (end != static_cast<int>(i)) {
        throw ValidationError(std::string(what) + " is not a single run");
      }
      end = static_cast<int>(i) + 1;
    }
  }
  return start;
}

}  // namespace

EditPlan::Segments EditPlan::segments() const {
  Segments s;
  s.b = count_ones(flag_del);
  s.b_new = count_ones(flag_add);
  const int del_at = run_start(flag_del, "flag_del");
  const int add_at = run_start(flag_add, "flag_add");
  if (del_at >= 0) s.a = del_at;
  else if (add_at >= 0) s.a = add_at;
  else s.a = static_cast<int>(flag_del.size());
  s.c = static_cast<int>(flag_del.size()) - s.a - s.b;
  return s;
}

bool EditPlan::has_edit() const {
  return count_ones(flag_del) > 0 || count_ones(flag_add) > 0;
}

void EditPlan::validate() const {
  const int del_at = run_start(flag_del, "flag_del");
  const int add_at = run_start(flag_add, "flag_add");
  if (del_at >= 0 && add_at >= 0 && del_at != add_at) {
    throw ValidationError("edit plan: deletion and insertion runs start at different phonemes");
  }
  const auto s = segments();
  if (static_cast<int>(flag_add.size()) != s.a + s.b_new + s.c) {
    throw ValidationError("edit plan: flag_add length does not match [a, b', c]");
  }
  if (flag_add.size() != phonemes_edited.phonemes.size()) {
    throw ValidationError("edit plan: flag_add length != edited phoneme count");
  }
  if (frame_mask != expand_flags(flag_add, phonemes_edited.durations)) {
    throw ValidationError("edit plan: frame mask disagrees with flag_add");
  }
}

EditPlan EditPlan::identity(const PhonemeTrack& track) {
  return splice_plan(track, track.size(), track.size(), PhonemeTrack{});
}

std::vector<int> unedited_source(const EditPlan& plan) {
  const auto s = plan.segments();
  std::vector<int> src(plan.flag_add.size(), -1);
  for (int j = 0; j < s.a; ++j) src[j] = j;
  for (int j = 0; j < s.c; ++j) src[s.a + s.b_new + j] = s.a + s.b + j;
  return src;
}

std::vector<int> expand_flags(const std::vector<int>& flags,
                              const std::vector<int>& durations) {
  if (flags.size() != durations.size()) {
    throw std::invalid_argument("expand_flags: one duration per flag required");
  }
  std::vector<int> out;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (durations[i] < 0) throw std::invalid_argument("expand_flags: negative duration");
    out.insert(out.end(), durations[i], flags[i]);
  }
  return out;
}

EditPlan splice_plan(const PhonemeTrack& original, int pa, int pb,
                     const PhonemeTrack& inserted) {
  if (pa < 0 || pb < pa || pb > original.size()) {
    throw ValidationError("edit plan: phoneme range out of bounds");
  }
  if (inserted.durations.size() != inserted.phonemes.size()) {
    throw ValidationError("edit plan: replacement durations missing");
  }
  EditPlan plan;
  auto& e = plan.phonemes_edited;
  const int n_new = inserted.size();
  for (int i = 0; i < pa; ++i) {
    e.phonemes.push_back(original.phonemes[i]);
    e.durations.push_back(original.durations[i]);
  }
  e.phonemes.insert(e.phonemes.end(), inserted.phonemes.begin(), inserted.phonemes.end());
  e.durations.insert(e.durations.end(), inserted.durations.begin(), inserted.durations.end());
  for (int i = pb; i < original.size(); ++i) {
    e.phonemes.push_back(original.phonemes[i]);
    e.durations.push_back(original.durations[i]);
  }
  const int shift = pa + n_new - pb;
  for (const auto& w : original.word_spans) {
    if (w.end <= pa) e.word_spans.push_back(w);
  }
  for (const auto& w : inserted.word_spans) {
    e.word_spans.push_back({w.start + pa, w.end + pa});
  }
  for (const auto& w : original.word_spans) {
    if (w.start >= pb && w.end > pb) e.word_spans.push_back({w.start + shift, w.end + shift});
  }
  plan.flag_del.assign(original.phonemes.size(), 0);
  for (int i = pa; i < pb; ++i) plan.flag_del[i] = 1;
  plan.flag_add.assign(e.phonemes.size(), 0);
  for (int j = pa; j < pa + n_new; ++j) plan.flag_add[j] = 1;
  plan.frame_mask = expand_flags(plan.flag_add, e.durations);
  return plan;
}

EditPlan build_edit_plan(const PhonemeTrack& original, const EditScript& script,
                         const PhonemeTrack& replacement) {
  script.validate();
  const int words = original.word_count();
  const auto& span = script.target_words;
  if (span.end > words || span.start > words) {
    throw ValidationError("edit script: word span [" + std::to_string(span.start) +
                          ", " + std::to_string(span.end) + ") out of range for " +
                          std::to_string(words) + " words");
  }
  const int pa = span.start == words ? original.size()
                                     : original.word_spans[span.start].start;
  const int pb = span.size() == 0 ? pa : original.word_spans[span.end - 1].end;
  if (script.op != EditOp::kDelete && replacement.size() == 0) {
    throw ValidationError("edit script: replacement text has no phonemes");
  }
  PhonemeTrack inserted = script.op == EditOp::kDelete ? PhonemeTrack{} : replacement;
  inserted.durations.resize(inserted.phonemes.size(), 0);
  return splice_plan(original, pa, pb, inserted);
}

EditPlan compose(const EditPlan& first, const EditPlan& second) {
  if (second.flag_del.size() != first.flag_add.size()) {
    throw ValidationError("compose: second plan does not start from first's output");
  }
  EditPlan out;
  out.phonemes_edited = second.phonemes_edited;
  out.flag_del = first.flag_del;
  out.flag_add = second.flag_add;
  // Original phonemes that survived `first` but were deleted by `second`.
  const auto src1 = unedited_source(first);
  for (std::size_t i = 0; i < src1.size(); ++i) {
    if (src1[i] >= 0 && second.flag_del[i]) out.flag_del[src1[i]] = 1;
  }
  // Phonemes added by `first` that `second` kept.
  const auto src2 = unedited_source(second);
  for (std::size_t j = 0; j < src2.size(); ++j) {
    if (src2[j] >= 0 && first.flag_add[src2[j]]) out.flag_add[j] = 1;
  }
  out.frame_mask = expand_flags(out.flag_add, out.phonemes_edited.durations);
  out.validate();
  return out;
}

EditPlan with_durations(EditPlan plan, const std::vector<int>& durations) {
  if (durations.size() != plan.phonemes_edited.phonemes.size()) {
    throw std::invalid_argument("with_durations: one duration per edited phoneme required");
  }
  plan.phonemes_edited.durations = durations;
  plan.frame_mask = expand_flags(plan.flag_add, durations);
  return plan;
}

int round_half_away(double x) {
  return static_cast<int>(std::round(x));  // std::round ties away from zero
}

std::vector<int> adjust_durations(const std::vector<double>& predicted,
                                  const EditPlan& plan,
                                  const PhonemeTrack& original) {
  if (predicted.size() != plan.flag_add.size()) {
    throw std::invalid_argument("adjust_durations: one prediction per edited phoneme required");
  }
  if (plan.flag_del.size() != original.durations.size()) {
    throw std::invalid_argument("adjust_durations: plan does not match the original track");
  }
  const auto src = unedited_source(plan);
  std::vector<int> out(predicted.size(), 0);
  double original_frames = 0.0, predicted_frames = 0.0;
  bool edited = false, kept = false;
  for (std::size_t j = 0; j < src.size(); ++j) {
    if (src[j] >= 0) {
      kept = true;
      out[j] = original.durations[src[j]];
      original_frames += original.durations[src[j]];
      predicted_frames += predicted[j];
    } else {
      edited = true;
    }
  }
  if (!edited) return out;
  if (kept && !(predicted_frames > 0.0)) {
    throw std::invalid_argument("adjust_durations: predicted unedited duration sum is zero");
  }
  const double r = kept ? original_frames / predicted_frames : 1.0;
  for (std::size_t j = 0; j < src.size(); ++j) {
    if (src[j] < 0) out[j] = std::max(0, round_half_away(predicted[j] * r));
  }
  return out;
}

EditPlan sample_training_mask(const PhonemeTrack& track, double rate) {
  if (!(rate > 0.0 && rate < 1.0)) {
    throw std::invalid_argument("mask rate must lie in (0, 1)");
  }
  if (track.word_spans.empty()) throw ValidationError("mask: track has no word spans");
  const auto offsets = track.frame_offsets();
  const double target = rate * track.total_frames();
  const int words = track.word_count();
  int best_i = 0, best_j = 1;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < words; ++i) {
    for (int j = i + 1; j <= words; ++j) {
      const int cover = offsets[track.word_spans[j - 1].end] -
                        offsets[track.word_spans[i].start];
      const double gap = std::abs(cover - target);
      if (gap < best) {
        best = gap;
        best_i = i;
        best_j = j;
      }
    }
  }
  EditPlan plan;
  plan.phonemes_edited = track;
  plan.flag_del.assign(track.phonemes.size(), 0);
  for (int p = track.word_spans[best_i].start; p < track.word_spans[best_j - 1].end; ++p) {
    plan.flag_del[p] = 1;
  }
  plan.flag_add = plan.flag_del;
  plan.frame_mask = expand_flags(plan.flag_add, track.durations);
  return plan;
}

Vector biased_frame_weights(const EditPlan& plan, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  Vector w(static_cast<Index>(plan.frame_mask.size()));
  for (std::size_t f = 0; f < plan.frame_mask.size(); ++f) {
    w(static_cast<Index>(f)) = plan.frame_mask[f] ? lambda : 1.0;
  }
  return w;
}

BoundarySmoother::BoundarySmoother(nn::ParameterStore& store, const std::string& name,
                                   Index latent_dim, Index kernel, nn::Rng& rng)
    : latent_dim_(latent_dim) {
  const Index channels = 2 * latent_dim;
  conv_ = nn::Conv1d(store, name, channels, channels, kernel, rng);
  ag::Var w = conv_.weight();
  w.mutable_value().setZero();
  w.mutable_value().block((kernel / 2) * channels, 0, channels, channels).setIdentity();
}

std::pair<ag::Var, ag::Var> BoundarySmoother::operator()(const ag::Var& mu,
                                                         const ag::Var& log_sigma) const {
  const auto y = conv_(ag::concat_cols({mu, log_sigma}));
  return {ag::slice_cols(y, 0, latent_dim_), ag::slice_cols(y, latent_dim_, latent_dim_)};
}

PatchedVars patch_prior(const ag::Var& mu, const ag::Var& log_sigma,
                        const EditPlan& plan, const BoundarySmoother& smoother) {
  const auto src = unedited_source(plan);
  const Index kept = static_cast<Index>(plan.flag_add.size()) - plan.segments().b_new;
  if (mu.rows() != kept || log_sigma.rows() != kept) {
    throw std::invalid_argument("patch_prior: " + std::to_string(mu.rows()) +
                                " unedited rows but the plan keeps " + std::to_string(kept));
  }
  // Row `kept` of the padded matrices is the zero row: mu = 0, log sigma = 0.
  std::vector<Index> index(src.size());
  Index next = 0;
  for (std::size_t j = 0; j < src.size(); ++j) index[j] = src[j] >= 0 ? next++ : kept;
  const auto pad = ag::Var::constant(Matrix::Zero(1, mu.cols()));
  PatchedVars out;
  out.mu_hat = ag::gather_rows(ag::concat_rows({mu, pad}), index);
  out.log_sigma_hat = ag::gather_rows(ag::concat_rows({log_sigma, pad}), index);
  if (plan.has_edit()) {
    std::tie(out.mu_prime, out.log_sigma_prime) = smoother(out.mu_hat, out.log_sigma_hat);
  } else {
    out.mu_prime = out.mu_hat;
    out.log_sigma_prime = out.log_sigma_hat;
  }
  return out;
}

PatchedPrior patch_prior(const Matrix& mu, const Matrix& sigma, const EditPlan& plan,
                         const BoundarySmoother& smoother) {
  if ((sigma.array() <= 0.0).any()) throw std::invalid_argument("patch_prior: sigma must be positive");
  ag::NoGradGuard no_grad;
  const auto v = patch_prior(ag::Var::constant(mu), ag::Var::constant(sigma.array().log().matrix()),
                             plan, smoother);
  return {v.mu_hat.value(), v.log_sigma_hat.value().array().exp(), v.mu_prime.value(),
          v.log_sigma_prime.value().array().exp()};
}

Matrix mel_cut(const Matrix& generated, const Matrix& original, const EditPlan& plan,
               const PhonemeTrack& original_track) {
  const auto& edited = plan.phonemes_edited;
  if (generated.rows() != edited.total_frames()) {
    throw std::invalid_argument("mel_cut: generated frames do not match plan durations");
  }
  if (original.rows() != original_track.total_frames() || original.cols() != generated.cols()) {
    throw std::invalid_argument("mel_cut: original mel does not match its alignment");
  }
  const auto src = unedited_source(plan);
  const auto off_new = edited.frame_offsets();
  const auto off_old = original_track.frame_offsets();
  Matrix out = generated;
  for (std::size_t j = 0; j < src.size(); ++j) {
    if (src[j] < 0) continue;
    const int n = original_track.durations[src[j]];
    if (edited.durations[j] != n) {
      throw std::invalid_argument("mel_cut: unedited phoneme changed duration");
    }
    out.middleRows(off_new[j], n) = original.middleRows(off_old[src[j]], n);
  }
  return out;
}

}  // namespace cucvae
