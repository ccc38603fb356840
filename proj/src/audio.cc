#include "cucvae/audio.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "cucvae/errors.h"

namespace cucvae {
namespace {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic,
                                    Eigen::RowMajor>;

void check_samples(std::span<const double> samples, const AudioConfig& config) {
  config.validate();
  if (samples.empty()) throw std::invalid_argument("audio: empty input");
  if (samples.size() < static_cast<std::size_t>(config.win_length)) {
    throw std::invalid_argument("audio: input shorter than one analysis window");
  }
  for (double s : samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("audio: non-finite sample");
  }
}

// Periodic Hann of win_length, zero-padded to fft_size and centered.
std::vector<double> analysis_window(const AudioConfig& config) {
  std::vector<double> window(static_cast<std::size_t>(config.fft_size), 0.0);
  const int offset = (config.fft_size - config.win_length) / 2;
  for (int n = 0; n < config.win_length; ++n) {
    window[static_cast<std::size_t>(offset + n)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / config.win_length);
  }
  return window;
}

// Reflect-pads by fft_size/2 on both sides so frame t is centered on
// sample t*hop.
std::vector<double> reflect_pad(std::span<const double> x, int pad) {
  const auto n = static_cast<long>(x.size());
  if (n <= pad) throw std::invalid_argument("audio: input too short for centered framing");
  std::vector<double> out(static_cast<std::size_t>(n + 2 * pad));
  for (long i = 0; i < n + 2 * pad; ++i) {
    long src = i - pad;
    if (src < 0) src = -src;
    if (src >= n) src = 2 * (n - 1) - src;
    out[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(src)];
  }
  return out;
}

ComplexMatrix stft(std::span<const double> samples, const AudioConfig& config) {
  const auto padded = reflect_pad(samples, config.fft_size / 2);
  const auto window = analysis_window(config);
  const Index frames = config.frame_count(samples.size());
  const Index bins = config.fft_size / 2 + 1;
  ComplexMatrix spec(frames, bins);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buf(static_cast<std::size_t>(config.fft_size));
  std::vector<Complex> out;
  for (Index t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t * config.hop_length);
    for (std::size_t n = 0; n < buf.size(); ++n) buf[n] = padded[start + n] * window[n];
    fft.fwd(out, buf);
    for (Index k = 0; k < bins; ++k) spec(t, k) = out[static_cast<std::size_t>(k)];
  }
  return spec;
}

// Weighted overlap-add inverse, trimmed back to the uncentered signal.
std::vector<double> istft(const ComplexMatrix& spec, const AudioConfig& config) {
  const Index frames = spec.rows();
  const auto window = analysis_window(config);
  const int pad = config.fft_size / 2;
  const std::size_t full =
      static_cast<std::size_t>(config.fft_size + (frames - 1) * config.hop_length);
  std::vector<double> acc(full, 0.0), norm(full, 0.0);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<Complex> half(static_cast<std::size_t>(spec.cols()));
  std::vector<double> frame;
  for (Index t = 0; t < frames; ++t) {
    for (Index k = 0; k < spec.cols(); ++k) half[static_cast<std::size_t>(k)] = spec(t, k);
    fft.inv(frame, half, config.fft_size);
    const std::size_t start = static_cast<std::size_t>(t * config.hop_length);
    for (std::size_t n = 0; n < frame.size(); ++n) {
      acc[start + n] += frame[n] * window[n];
      norm[start + n] += window[n] * window[n];
    }
  }
  const std::size_t length = static_cast<std::size_t>((frames - 1) * config.hop_length);
  std::vector<double> out(length, 0.0);
  for (std::size_t i = 0; i < length; ++i) {
    const double w = norm[i + static_cast<std::size_t>(pad)];
    out[i] = w > 1e-11 ? acc[i + static_cast<std::size_t>(pad)] / w : 0.0;
  }
  return out;
}

double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return hz >= min_log_hz ? min_log_mel + std::log(hz / min_log_hz) / logstep
                          : hz / f_sp;
}

double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return mel >= min_log_mel ? min_log_hz * std::exp(logstep * (mel - min_log_mel))
                            : f_sp * mel;
}

const Matrix& cached_pinv(const AudioConfig& config) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int, double, double>, Matrix> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(config.sample_rate, config.fft_size, config.n_mels,
                             config.fmin_hz, config.fmax_hz);
  auto it = cache.find(key);
  if (it == cache.end()) {
    const Eigen::MatrixXd fb = mel_filterbank(config);
    Matrix pinv = fb.completeOrthogonalDecomposition().pseudoInverse();
    it = cache.emplace(key, std::move(pinv)).first;
  }
  return it->second;
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

void AudioConfig::validate() const {
  if (sample_rate <= 0 || fft_size <= 0 || hop_length <= 0 || win_length <= 0) {
    throw ValidationError("audio config: sizes must be positive");
  }
  if (!(hop_length <= win_length && win_length <= fft_size)) {
    throw ValidationError("audio config: need hop <= win <= fft");
  }
  if (n_mels != kMelBins) throw ValidationError("audio config: n_mels must be 80");
  if (!(fmin_hz >= 0.0 && fmin_hz < fmax_hz && fmax_hz <= sample_rate / 2.0)) {
    throw ValidationError("audio config: need 0 <= fmin < fmax <= nyquist");
  }
}

Index AudioConfig::frame_count(std::size_t samples) const {
  return 1 + static_cast<Index>(samples) / hop_length;
}

Matrix mel_filterbank(const AudioConfig& config) {
  const Index bins = config.fft_size / 2 + 1;
  Matrix fb = Matrix::Zero(config.n_mels, bins);
  const double mel_lo = hz_to_mel(config.fmin_hz);
  const double mel_hi = hz_to_mel(config.fmax_hz);
  std::vector<double> hz(static_cast<std::size_t>(config.n_mels + 2));
  for (std::size_t i = 0; i < hz.size(); ++i) {
    hz[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                   static_cast<double>(config.n_mels + 1));
  }
  for (Index m = 0; m < config.n_mels; ++m) {
    const double lo = hz[m], mid = hz[m + 1], hi = hz[m + 2];
    const double enorm = 2.0 / (hi - lo);
    for (Index k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * config.sample_rate / config.fft_size;
      const double w = std::max(0.0, std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid)));
      fb(m, k) = w * enorm;
    }
  }
  return fb;
}

MelSpectrogram wav_to_mel(std::span<const double> samples,
                          const AudioConfig& config) {
  check_samples(samples, config);
  const ComplexMatrix spec = stft(samples, config);
  const Matrix magnitude = spec.cwiseAbs();
  const Matrix fb = mel_filterbank(config);
  MelSpectrogram mel;
  mel.config = config;
  mel.frames = (magnitude * fb.transpose()).cwiseMax(kLogFloor).array().log();
  return mel;
}

ProsodyTracks extract_f0(std::span<const double> samples,
                         const AudioConfig& config, F0Options options) {
  check_samples(samples, config);
  const Index frames = config.frame_count(samples.size());
  const auto padded = reflect_pad(samples, config.fft_size / 2);
  const ComplexMatrix spec = stft(samples, config);

  ProsodyTracks tracks;
  tracks.f0_hz = Vector::Zero(frames);
  tracks.energy = spec.cwiseAbs().rowwise().norm();
  tracks.voiced.assign(static_cast<std::size_t>(frames), false);

  const int n = config.win_length;
  const int offset = (config.fft_size - config.win_length) / 2;
  const int min_lag = static_cast<int>(std::floor(config.sample_rate / options.max_hz));
  const int max_lag = std::min(
      n - 2, static_cast<int>(std::ceil(config.sample_rate / options.min_hz)));
  std::vector<double> x(static_cast<std::size_t>(n));
  std::vector<double> r(static_cast<std::size_t>(max_lag + 2), 0.0);
  for (Index t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t * config.hop_length + offset);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
      x[static_cast<std::size_t>(i)] = padded[start + static_cast<std::size_t>(i)];
      mean += x[static_cast<std::size_t>(i)];
    }
    mean /= n;
    double power = 0.0;
    for (auto& v : x) {
      v -= mean;
      power += v * v;
    }
    if (power / n < 1e-12) continue;
    for (int lag = min_lag - 1; lag <= max_lag + 1; ++lag) {
      double num = 0.0, e0 = 0.0, e1 = 0.0;
      for (int i = 0; i + lag < n; ++i) {
        const double a = x[static_cast<std::size_t>(i)];
        const double b = x[static_cast<std::size_t>(i + lag)];
        num += a * b;
        e0 += a * a;
        e1 += b * b;
      }
      r[static_cast<std::size_t>(lag)] = (e0 > 0 && e1 > 0) ? num / std::sqrt(e0 * e1) : 0.0;
    }
    double best = -1.0;
    for (int lag = min_lag; lag <= max_lag; ++lag) best = std::max(best, r[static_cast<std::size_t>(lag)]);
    if (best < options.voicing_threshold) continue;
    // First local peak close to the global maximum avoids octave-down picks.
    int pick = -1;
    for (int lag = min_lag; lag <= max_lag; ++lag) {
      const double v = r[static_cast<std::size_t>(lag)];
      if (v >= 0.9 * best && v >= r[static_cast<std::size_t>(lag - 1)] &&
          v >= r[static_cast<std::size_t>(lag + 1)]) {
        pick = lag;
        break;
      }
    }
    if (pick < 0) continue;
    const double ym = r[static_cast<std::size_t>(pick - 1)];
    const double y0 = r[static_cast<std::size_t>(pick)];
    const double yp = r[static_cast<std::size_t>(pick + 1)];
    const double denom = ym - 2.0 * y0 + yp;
    const double shift = std::abs(denom) > 1e-12 ? 0.5 * (ym - yp) / denom : 0.0;
    const double lag = pick + std::clamp(shift, -0.5, 0.5);
    tracks.f0_hz(t) = config.sample_rate / lag;
    tracks.voiced[static_cast<std::size_t>(t)] = true;
  }
  return tracks;
}

Matrix dct2_basis(Index n) {
  Matrix basis(n, n);
  for (Index k = 0; k < n; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (Index i = 0; i < n; ++i) {
      basis(k, i) = s * std::cos(std::numbers::pi * k * (2.0 * i + 1.0) / (2.0 * n));
    }
  }
  return basis;
}

Matrix mel_to_mfcc(const MelSpectrogram& mel, int n_coeffs) {
  const Index bins = mel.frames.cols();
  if (n_coeffs < 1 || n_coeffs > bins) {
    throw std::invalid_argument("mfcc: n_coeffs must be in [1, n_mels]");
  }
  const Matrix basis = dct2_basis(bins);
  return mel.frames * basis.topRows(n_coeffs).transpose();
}

GriffinLimResult griffin_lim(const MelSpectrogram& mel, int iterations) {
  const AudioConfig& config = mel.config;
  config.validate();
  if (mel.frames.cols() != config.n_mels) {
    throw std::invalid_argument("griffin_lim: mel width does not match config");
  }
  GriffinLimResult result;
  if (mel.n_frames() < 2) return result;
  const Matrix amplitude = mel.frames.array().exp();
  const Matrix magnitude = (amplitude * cached_pinv(config).transpose()).cwiseMax(0.0);
  ComplexMatrix spec = magnitude.cast<Complex>();
  std::vector<double> signal = istft(spec, config);
  // Re-analysis needs enough samples for centered framing.
  if (signal.size() <= static_cast<std::size_t>(config.fft_size / 2)) iterations = 0;
  for (int it = 0; it < iterations; ++it) {
    const ComplexMatrix rebuilt = stft(signal, config);
    for (Index i = 0; i < spec.size(); ++i) {
      const Complex c = rebuilt.data()[i];
      const double a = std::abs(c);
      spec.data()[i] = a > 1e-12 ? magnitude.data()[i] * (c / a)
                                 : Complex(magnitude.data()[i], 0.0);
    }
    signal = istft(spec, config);
  }
  for (double s : signal) result.raw_peak = std::max(result.raw_peak, std::abs(s));
  result.samples = std::move(signal);
  return result;
}

std::vector<double> mel_to_wav_fallback(const MelSpectrogram& mel,
                                        int iterations) {
  auto result = griffin_lim(mel, iterations);
  if (result.raw_peak > 0.0) {
    const double gain = 0.95 / result.raw_peak;
    for (auto& s : result.samples) s *= gain;
  }
  return std::move(result.samples);
}

std::vector<double> GriffinLimVocoder::synthesize(const MelSpectrogram& mel) const {
  return mel_to_wav_fallback(mel, iterations_);
}

std::vector<unsigned char> encode_mel1(const MelSpectrogram& mel) {
  std::vector<unsigned char> out;
  out.reserve(20 + static_cast<std::size_t>(mel.frames.size()) * 4);
  for (char c : {'M', 'E', 'L', '1'}) out.push_back(static_cast<unsigned char>(c));
  put_u32(out, static_cast<std::uint32_t>(mel.frames.rows()));
  put_u32(out, static_cast<std::uint32_t>(mel.frames.cols()));
  put_u32(out, static_cast<std::uint32_t>(mel.config.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(mel.config.hop_length));
  for (Index i = 0; i < mel.frames.size(); ++i) {
    const float f = static_cast<float>(mel.frames.data()[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  return out;
}

void write_mel1(const std::filesystem::path& path, const MelSpectrogram& mel) {
  const auto bytes = encode_mel1(mel);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

MelSpectrogram read_mel1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 20 || std::memcmp(bytes.data(), "MEL1", 4) != 0) {
    throw ValidationError(path.string() + ": not a MEL1 file");
  }
  const std::uint32_t rows = get_u32(bytes.data() + 4);
  const std::uint32_t cols = get_u32(bytes.data() + 8);
  MelSpectrogram mel;
  mel.config.sample_rate = static_cast<int>(get_u32(bytes.data() + 12));
  mel.config.hop_length = static_cast<int>(get_u32(bytes.data() + 16));
  mel.config.n_mels = static_cast<int>(cols);
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  if (bytes.size() != 20 + 4 * count) {
    throw ValidationError(path.string() + ": MEL1 payload size mismatch");
  }
  mel.frames.resize(rows, cols);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = get_u32(bytes.data() + 20 + 4 * i);
    float f;
    std::memcpy(&f, &bits, 4);
    mel.frames.data()[i] = f;
  }
  return mel;
}

Wav read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
      std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    throw ValidationError(name + ": not a RIFF/WAVE file");
  }
  int format = 0, channels = 0, bits = 0;
  Wav wav;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::uint32_t size = get_u32(b.data() + pos + 4);
    const unsigned char* body = b.data() + pos + 8;
    if (pos + 8 + size > b.size()) throw ValidationError(name + ": truncated chunk");
    if (std::memcmp(b.data() + pos, "fmt ", 4) == 0 && size >= 16) {
      format = get_u16(body);
      channels = get_u16(body + 2);
      wav.sample_rate = static_cast<int>(get_u32(body + 4));
      bits = get_u16(body + 14);
      if (format == 0xFFFE && size >= 26) format = get_u16(body + 24);
    } else if (std::memcmp(b.data() + pos, "data", 4) == 0) {
      data = body;
      data_size = size;
    }
    pos += 8 + size + (size & 1u);
  }
  if (data == nullptr || format == 0) throw ValidationError(name + ": missing fmt or data chunk");
  if (channels != 1) throw ValidationError(name + ": only mono audio is supported");
  const std::size_t width = static_cast<std::size_t>(bits / 8);
  if (width == 0) throw ValidationError(name + ": bad sample width");
  const std::size_t count = data_size / width;
  wav.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* p = data + i * width;
    double v = 0.0;
    if (format == 1 && bits == 16) {
      v = static_cast<std::int16_t>(get_u16(p)) / 32768.0;
    } else if (format == 1 && bits == 24) {
      std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
      if (s & 0x800000) s |= ~0xFFFFFF;
      v = s / 8388608.0;
    } else if (format == 1 && bits == 32) {
      v = static_cast<std::int32_t>(get_u32(p)) / 2147483648.0;
    } else if (format == 3 && bits == 32) {
      const std::uint32_t u = get_u32(p);
      float f;
      std::memcpy(&f, &u, 4);
      v = f;
    } else {
      throw ValidationError(name + ": unsupported sample format");
    }
    if (!std::isfinite(v)) throw ValidationError(name + ": non-finite sample");
    wav.samples[i] = v;
  }
  return wav;
}

void write_wav(const std::filesystem::path& path, std::span<const double> samples,
               int sample_rate) {
  std::vector<unsigned char> out;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  auto tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };
  auto u16 = [&](std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xFF));
    out.push_back(static_cast<unsigned char>(v >> 8));
  };
  tag("RIFF");
  put_u32(out, 36 + data_bytes);
  tag("WAVE");
  tag("fmt ");
  put_u32(out, 16);
  u16(1);
  u16(1);
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate * 2));
  u16(2);
  u16(16);
  tag("data");
  put_u32(out, data_bytes);
  for (double s : samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32767.0))));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace cucvae
