// Objective metrics: F0 frame error, mel-cepstral distortion, per-phoneme
// prosody spread across samples and word error rate.
#ifndef CUCVAE_METRICS_H_
#define CUCVAE_METRICS_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cucvae/audio.h"
#include "cucvae/corpus.h"

namespace cucvae {

struct FfeBreakdown {
  long n_total = 0;
  long n_u_to_v = 0;
  long n_v_to_u = 0;
  long n_f0e = 0;
  double ffe = 0.0;
};

// Both tracks must have the same, non-zero frame count. A frame voiced in
// both tracks is an F0 error when |est / ref - 1| > 0.2.
FfeBreakdown ffe(const ProsodyTracks& ref, const ProsodyTracks& est);

// First min(n_ref, n_est) frames of each track.
ProsodyTracks truncate(const ProsodyTracks& tracks, Index frames);

// 10 * sqrt(2) / ln(10), about 6.1419 dB per unit cepstral distance.
double mcd_constant();
// Mean over frames of the Euclidean distance between MFCC rows, in dB.
double mcd(const Matrix& ref_mfcc, const Matrix& est_mfcc);

struct ProsodyStats {
  double f0_std_hz = 0.0;
  double energy_std = 0.0;
};

// Per phoneme: mean voiced F0 and mean relative energy (frame energy over the
// utterance mean) in every sample, population std across samples, averaged
// over phonemes. Phonemes unvoiced in any sample are left out of the F0
// figure; zero-duration phonemes are left out entirely.
ProsodyStats prosody_diversity(const std::vector<ProsodyTracks>& samples,
                               const PhonemeTrack& track);

double wer(const std::string& ref_text, const std::string& hyp_text);
std::size_t word_edit_distance(const std::vector<std::string>& ref,
                               const std::vector<std::string>& hyp);

class Transcriber {
 public:
  virtual ~Transcriber() = default;
  virtual std::string transcribe(const std::filesystem::path& audio) const = 0;
};

// Reads the hypothesis from "<audio>.txt" next to the audio file; a stand-in
// for a real recognizer.
class SidecarTranscriber : public Transcriber {
 public:
  std::string transcribe(const std::filesystem::path& audio) const override;
};

struct MetricReport {
  std::string id;
  double ffe = 0.0;
  long gpe_frames = 0;
  long vde_frames = 0;
  double mcd_db = 0.0;
  std::optional<double> wer;
  std::optional<double> f0_std_hz;
  std::optional<double> energy_std;
  std::string error;  // non-empty when the item could not be scored
};

std::string report_to_json(const std::vector<MetricReport>& items);

}  // namespace cucvae

#endif  // CUCVAE_METRICS_H_
