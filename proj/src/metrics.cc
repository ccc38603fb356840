#include "cucvae/metrics.h"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "cucvae/lexicon.h"
#include "json.hpp"

namespace cucvae {
namespace {

double population_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(v.size()));
}

}  // namespace

FfeBreakdown ffe(const ProsodyTracks& ref, const ProsodyTracks& est) {
  if (ref.size() != est.size()) {
    throw std::invalid_argument("ffe: frame counts differ (" + std::to_string(ref.size()) +
                                " vs " + std::to_string(est.size()) + ")");
  }
  if (ref.size() == 0) throw std::invalid_argument("ffe: zero frames");
  FfeBreakdown b;
  b.n_total = static_cast<long>(ref.size());
  for (Index i = 0; i < ref.size(); ++i) {
    const bool rv = ref.voiced[i], ev = est.voiced[i];
    if (!rv && ev) ++b.n_u_to_v;
    else if (rv && !ev) ++b.n_v_to_u;
    else if (rv && ev && std::abs(est.f0_hz(i) / ref.f0_hz(i) - 1.0) > 0.2) ++b.n_f0e;
  }
  b.ffe = static_cast<double>(b.n_u_to_v + b.n_v_to_u + b.n_f0e) / b.n_total;
  return b;
}

ProsodyTracks truncate(const ProsodyTracks& t, Index frames) {
  frames = std::min(frames, t.size());
  return {t.f0_hz.head(frames), t.energy.head(frames),
          std::vector<bool>(t.voiced.begin(), t.voiced.begin() + frames)};
}

double mcd_constant() { return 10.0 * std::numbers::sqrt2 / std::numbers::ln10; }

double mcd(const Matrix& ref, const Matrix& est) {
  if (ref.rows() != est.rows() || ref.cols() != est.cols()) {
    throw std::invalid_argument("mcd: MFCC shapes differ");
  }
  if (ref.rows() == 0) throw std::invalid_argument("mcd: zero frames");
  return mcd_constant() * (ref - est).rowwise().norm().mean();
}

ProsodyStats prosody_diversity(const std::vector<ProsodyTracks>& samples,
                               const PhonemeTrack& track) {
  if (samples.size() < 2) throw std::invalid_argument("prosody_diversity: need at least two samples");
  const auto offsets = track.frame_offsets();
  for (const auto& s : samples) {
    if (s.size() != track.total_frames()) {
      throw std::invalid_argument("prosody_diversity: sample is not frame-aligned to the durations");
    }
  }
  std::vector<double> utt_mean;
  for (const auto& s : samples) utt_mean.push_back(s.energy.size() ? s.energy.mean() : 0.0);

  double f0_sum = 0.0, energy_sum = 0.0;
  int f0_count = 0, energy_count = 0;
  for (int p = 0; p < track.size(); ++p) {
    const int begin = offsets[p], end = offsets[p + 1];
    if (begin == end) continue;
    std::vector<double> f0s, energies;
    bool all_voiced = true;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const auto& s = samples[k];
      double f0 = 0.0, e = 0.0;
      int voiced = 0;
      for (int f = begin; f < end; ++f) {
        e += s.energy(f);
        if (s.voiced[f]) {
          f0 += s.f0_hz(f);
          ++voiced;
        }
      }
      e /= (end - begin);
      energies.push_back(utt_mean[k] > 0.0 ? e / utt_mean[k] : 0.0);
      if (voiced == 0) all_voiced = false;
      else f0s.push_back(f0 / voiced);
    }
    energy_sum += population_std(energies);
    ++energy_count;
    if (all_voiced) {
      f0_sum += population_std(f0s);
      ++f0_count;
    }
  }
  if (f0_count == 0) throw std::invalid_argument("prosody_diversity: no phoneme is voiced in every sample");
  return {f0_sum / f0_count, energy_sum / energy_count};
}

std::size_t word_edit_distance(const std::vector<std::string>& ref,
                               const std::vector<std::string>& hyp) {
  std::vector<std::size_t> row(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (ref[i - 1] != hyp[j - 1])});
      diag = up;
    }
  }
  return row[hyp.size()];
}

double wer(const std::string& ref_text, const std::string& hyp_text) {
  const auto ref = Lexicon::normalize_words(ref_text);
  if (ref.empty()) throw std::invalid_argument("wer: empty reference");
  const auto hyp = Lexicon::normalize_words(hyp_text);
  return static_cast<double>(word_edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

std::string SidecarTranscriber::transcribe(const std::filesystem::path& audio) const {
  auto path = audio;
  path += ".txt";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("no transcript for " + audio.string() + " (expected " + path.string() + ")");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string report_to_json(const std::vector<MetricReport>& items) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json out;
  out["items"] = json::array();
  double ffe_sum = 0.0, mcd_sum = 0.0, wer_sum = 0.0;
  long gpe = 0, vde = 0;
  int scored = 0, wer_count = 0, failed = 0;
  for (const auto& r : items) {
    json item{{"id", r.id}};
    if (!r.error.empty()) {
      item["error"] = r.error;
      ++failed;
    } else {
      item.update({{"ffe", r.ffe}, {"gpe_frames", r.gpe_frames}, {"vde_frames", r.vde_frames},
                   {"mcd_db", r.mcd_db}, {"wer", opt(r.wer)}, {"f0_std_hz", opt(r.f0_std_hz)},
                   {"energy_std", opt(r.energy_std)}});
      ffe_sum += r.ffe;
      mcd_sum += r.mcd_db;
      gpe += r.gpe_frames;
      vde += r.vde_frames;
      ++scored;
      if (r.wer) {
        wer_sum += *r.wer;
        ++wer_count;
      }
    }
    out["items"].push_back(item);
  }
  json mean{{"items_scored", scored}, {"items_failed", failed}};
  if (scored > 0) {
    mean.update({{"ffe", ffe_sum / scored}, {"gpe_frames", gpe}, {"vde_frames", vde},
                 {"mcd_db", mcd_sum / scored}});
  }
  mean["wer"] = wer_count > 0 ? json(wer_sum / wer_count) : json(nullptr);
  out["corpus"] = mean;
  return out.dump(2);
}

}  // namespace cucvae
