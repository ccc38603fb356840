// Deterministic DSP: log-mel analysis, F0/energy tracks, MFCC, and a
// Griffin-Lim fallback for turning mels back into audio.
#ifndef CUCVAE_AUDIO_H_
#define CUCVAE_AUDIO_H_

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "cucvae/autograd.h"

namespace cucvae {

struct AudioConfig {
  int sample_rate = 22050;
  int fft_size = 1024;
  int hop_length = 256;
  int win_length = 1024;
  int n_mels = 80;
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;

  void validate() const;
  double frames_per_second() const {
    return static_cast<double>(sample_rate) / hop_length;
  }
  // Frames produced for `samples` input samples with centered framing.
  Index frame_count(std::size_t samples) const;
  bool operator==(const AudioConfig&) const = default;
};

inline constexpr double kLogFloor = 1e-5;
inline constexpr int kMelBins = 80;

struct MelSpectrogram {
  Matrix frames;  // [n_frames x n_mels], natural-log amplitudes
  AudioConfig config;

  Index n_frames() const { return frames.rows(); }
};

struct ProsodyTracks {
  Vector f0_hz;               // 0 where unvoiced
  Vector energy;              // L2 norm of the frame's magnitude spectrum
  std::vector<bool> voiced;

  Index size() const { return f0_hz.size(); }
};

MelSpectrogram wav_to_mel(std::span<const double> samples,
                          const AudioConfig& config);

// Normalized-autocorrelation pitch tracker, frame-synchronous with
// wav_to_mel.
struct F0Options {
  double min_hz = 60.0;
  double max_hz = 500.0;
  double voicing_threshold = 0.3;
};
ProsodyTracks extract_f0(std::span<const double> samples,
                         const AudioConfig& config, F0Options options = {});

// Orthonormal type-II DCT of each log-mel row, first `n_coeffs` kept.
Matrix mel_to_mfcc(const MelSpectrogram& mel, int n_coeffs = 13);
// [n x n] orthonormal DCT-II basis; row k is coefficient k.
Matrix dct2_basis(Index n);

// [n_mels x (fft_size/2 + 1)] Slaney-normalized triangular filterbank.
Matrix mel_filterbank(const AudioConfig& config);

struct GriffinLimResult {
  std::vector<double> samples;
  double raw_peak = 0.0;  // max |sample| before peak normalization
};
GriffinLimResult griffin_lim(const MelSpectrogram& mel, int iterations = 60);
// Griffin-Lim output peak-normalized to 0.95.
std::vector<double> mel_to_wav_fallback(const MelSpectrogram& mel,
                                        int iterations = 60);

// Pluggable mel-to-waveform stage. Only the Griffin-Lim fallback ships.
class Vocoder {
 public:
  virtual ~Vocoder() = default;
  virtual std::vector<double> synthesize(const MelSpectrogram& mel) const = 0;
};

class GriffinLimVocoder : public Vocoder {
 public:
  explicit GriffinLimVocoder(int iterations = 60) : iterations_(iterations) {}
  std::vector<double> synthesize(const MelSpectrogram& mel) const override;

 private:
  int iterations_;
};

// MEL1 cache: "MEL1", n_frames u32, n_mels u32, sample_rate u32, hop u32,
// then row-major little-endian float32.
void write_mel1(const std::filesystem::path& path, const MelSpectrogram& mel);
std::vector<unsigned char> encode_mel1(const MelSpectrogram& mel);
MelSpectrogram read_mel1(const std::filesystem::path& path);

struct Wav {
  int sample_rate = 0;
  std::vector<double> samples;  // mono, [-1, 1]
};
// Mono RIFF/WAVE, PCM 16/24/32-bit or IEEE float32.
Wav read_wav(const std::filesystem::path& path);
// 16-bit PCM, samples clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, std::span<const double> samples,
               int sample_rate);

}  // namespace cucvae

#endif  // CUCVAE_AUDIO_H_
