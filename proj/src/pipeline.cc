#include "cucvae/pipeline.h"

#include <cmath>
#include <numbers>
#include <set>

#include "cucvae/errors.h"
#include "cucvae/lexicon.h"
#include "cucvae/metrics.h"

namespace cucvae {
namespace fs = std::filesystem;

CachePaths cache_paths(const RunConfig& config, const std::string& id) {
  const fs::path dir = config.cache_dir();
  return {dir / (id + ".mel"), dir / (id + ".prosody"), dir / (id + ".align.tsv")};
}

void write_prosody(const fs::path& path, const ProsodyTracks& tracks, const AudioConfig& audio) {
  MelSpectrogram m;
  m.config = audio;
  m.config.n_mels = 2;
  m.frames.resize(tracks.size(), 2);
  m.frames.col(0) = tracks.f0_hz;
  m.frames.col(1) = tracks.energy;
  write_mel1(path, m);
}

ProsodyTracks read_prosody(const fs::path& path) {
  const MelSpectrogram m = read_mel1(path);
  if (m.frames.cols() != 2) throw ValidationError(path.string() + ": expected 2 prosody columns");
  ProsodyTracks t;
  t.f0_hz = m.frames.col(0);
  t.energy = m.frames.col(1);
  t.voiced.resize(static_cast<std::size_t>(t.f0_hz.size()));
  for (Index i = 0; i < t.f0_hz.size(); ++i) t.voiced[i] = t.f0_hz[i] > 0.0;
  return t;
}

PrepareSummary prepare_corpus(const RunConfig& config) {
  config.audio.validate();
  const fs::path manifest_path = config.paths.manifest;
  if (manifest_path.empty()) throw ValidationError("paths.manifest is not set");
  const DatasetManifest manifest = load_manifest(manifest_path);
  fs::create_directories(config.cache_dir());
  PrepareSummary summary;
  for (const auto& entry : manifest.entries) {
    const fs::path audio = resolve_relative(manifest_path, entry.audio);
    const fs::path align = resolve_relative(manifest_path, entry.alignment);
    try {
      const Wav wav = read_wav(audio);
      if (wav.sample_rate != config.audio.sample_rate) {
        throw ValidationError(audio.string() + ": sample rate " + std::to_string(wav.sample_rate) +
                              " differs from audio.sample_rate " +
                              std::to_string(config.audio.sample_rate));
      }
      MelSpectrogram mel = wav_to_mel(wav.samples, config.audio);
      ProsodyTracks prosody = extract_f0(wav.samples, config.audio);
      PhonemeTrack track = load_alignment(align, config.audio.frames_per_second());
      if (track.size() == 0) throw ValidationError(align.string() + ": no phonemes");
      const int keep = reconcile_durations(track, static_cast<int>(mel.n_frames()));
      if (keep < mel.n_frames()) {
        mel.frames.conservativeResize(keep, Eigen::NoChange);
        prosody = truncate(prosody, keep);
      }
      track.validate();
      const CachePaths out = cache_paths(config, entry.id);
      write_mel1(out.mel, mel);
      write_prosody(out.prosody, prosody, config.audio);
      save_alignment(track, config.audio.frames_per_second(), out.alignment);
      summary.mel_files.push_back(out.mel);
      ++summary.utterances;
    } catch (const std::exception& e) {
      throw std::runtime_error("prepare " + entry.id + " (" + audio.string() + ", " +
                               align.string() + "): " + e.what());
    }
  }
  return summary;
}

PreparedUtterance load_prepared(const RunConfig& config, const ManifestEntry& entry) {
  const CachePaths paths = cache_paths(config, entry.id);
  if (!fs::exists(paths.mel)) {
    throw ValidationError("no cached features for " + entry.id + " (" + paths.mel.string() +
                          "); run prepare first");
  }
  PreparedUtterance u;
  u.entry = entry;
  u.mel = read_mel1(paths.mel);
  u.mel.config = config.audio;  // MEL1 keeps only rate and hop
  u.prosody = read_prosody(paths.prosody);
  u.track = load_alignment(paths.alignment, config.audio.frames_per_second());
  if (u.track.total_frames() != u.mel.n_frames()) {
    throw ValidationError(paths.alignment.string() + ": durations do not match " +
                          paths.mel.string());
  }
  return u;
}

std::unique_ptr<ContextEncoder> make_context_encoder(const RunConfig& config) {
  if (config.paths.embedding_cache.empty()) {
    return std::make_unique<StubContextEncoder>(config.model.d_ctx);
  }
  auto cached = std::make_unique<CachedContextEncoder>(config.paths.embedding_cache);
  if (cached->dim() != config.model.d_ctx) {
    throw ValidationError(config.paths.embedding_cache + ": vectors have width " +
                          std::to_string(cached->dim()) + " but model.d_ctx is " +
                          std::to_string(config.model.d_ctx));
  }
  return cached;
}

std::vector<Utterance> manifest_utterances(const DatasetManifest& manifest) {
  std::vector<Utterance> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) out.push_back({e.id, e.speaker, e.text, {}, {}});
  return out;
}

Matrix context_matrix(const ContextEncoder& encoder, const Utterance& window) {
  return embed_pairs(encoder, build_pairs(window));
}

Matrix context_matrix(const ContextEncoder& encoder, const std::vector<Utterance>& corpus,
                      std::size_t index, int l) {
  return context_matrix(encoder, build_context_window(corpus, index, l));
}

std::vector<std::string> manifest_speakers(const DatasetManifest& manifest) {
  std::set<std::string> s;
  for (const auto& e : manifest.entries) s.insert(e.speaker);
  return {s.begin(), s.end()};
}

TrainingSet load_training_set(const RunConfig& config, Split split) {
  TrainingSet set;
  set.manifest = load_manifest(config.paths.manifest);
  set.speakers = manifest_speakers(set.manifest);
  const auto corpus = manifest_utterances(set.manifest);
  const auto encoder = make_context_encoder(config);
  for (std::size_t i = 0; i < set.manifest.entries.size(); ++i) {
    const auto& entry = set.manifest.entries[i];
    if (entry.split != split) continue;
    PreparedUtterance u = load_prepared(config, entry);
    set.examples.push_back({entry.id, entry.speaker, std::move(u.track), std::move(u.mel.frames),
                            context_matrix(*encoder, corpus, i, config.model.context_l)});
  }
  return set;
}

namespace {

const std::vector<std::string>& toy_sentences() {
  static const std::vector<std::string> s = {
      "mary asked the time",     "the old man told her", "she saw the red bird",
      "who was at the door",     "they went home early", "the sun came up",
      "my friend found a book",  "we walked by the river"};
  return s;
}

struct Voice {
  double f0_scale;
  double f1, f2;
  double gain;
};

Voice phoneme_voice(int id) {
  return {1.0 + 0.25 * (static_cast<double>((id * 37) % 11) / 10.0 - 0.5),
          300.0 + static_cast<double>((id * 53) % 600),
          900.0 + static_cast<double>((id * 97) % 1500),
          0.6 + 0.4 * static_cast<double>((id * 29) % 7) / 6.0};
}

}  // namespace

DatasetManifest write_toy_corpus(const fs::path& dir, const AudioConfig& audio,
                                 const ToyCorpusOptions& options) {
  audio.validate();
  if (options.utterances < 1 || options.speakers < 1) {
    throw ValidationError("toy corpus needs at least one utterance and one speaker");
  }
  if (options.min_frames < 1 || options.max_frames < options.min_frames) {
    throw ValidationError("toy corpus frame range must satisfy 1 <= min <= max");
  }
  fs::create_directories(dir / "wav");
  fs::create_directories(dir / "align");
  nn::Rng rng(options.seed);
  std::uniform_int_distribution<int> frames_dist(options.min_frames, options.max_frames);
  const double sr = audio.sample_rate;
  const double top = std::min(audio.fmax_hz, 0.5 * sr - 200.0);
  const int hop = audio.hop_length;
  DatasetManifest manifest;
  for (int u = 0; u < options.utterances; ++u) {
    char id[32];
    std::snprintf(id, sizeof(id), "toy_%03d", u);
    const int spk = u % options.speakers;
    const std::string text = toy_sentences()[u % toy_sentences().size()];
    PhonemeTrack track = Lexicon::builtin().convert(text).track;
    for (auto& d : track.durations) d = frames_dist(rng);
    const double base_f0 = 110.0 + 70.0 * spk;

    const int frames = track.total_frames();
    // frame_count(n) = 1 + n / hop, so n = frames * hop - 1 gives `frames`.
    const std::size_t n = static_cast<std::size_t>(frames) * hop - 1;
    std::vector<int> owner;
    for (int p = 0; p < track.size(); ++p) owner.insert(owner.end(), track.durations[p], p);
    std::vector<double> samples(n);
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto frame = std::min<std::size_t>(
          static_cast<std::size_t>(std::lround(static_cast<double>(i) / hop)), owner.size() - 1);
      const int p = owner[frame];
      const Voice v = phoneme_voice(phoneme_id(track.phonemes[p]));
      const double f0 = base_f0 * v.f0_scale;
      phase += 2.0 * std::numbers::pi * f0 / sr;
      double s = 0.0, norm = 0.0;
      for (int k = 1; k * f0 < top; ++k) {
        const double f = k * f0;
        const double a = std::exp(-0.5 * std::pow((f - v.f1) / 150.0, 2)) +
                         0.6 * std::exp(-0.5 * std::pow((f - v.f2) / 200.0, 2)) + 0.05;
        s += a * std::sin(k * phase);
        norm += a;
      }
      samples[i] = 0.3 * v.gain * s / norm;
    }
    const std::string wav_rel = std::string("wav/") + id + ".wav";
    const std::string align_rel = std::string("align/") + id + ".tsv";
    write_wav(dir / wav_rel, samples, audio.sample_rate);
    save_alignment(track, audio.frames_per_second(), dir / align_rel);
    manifest.entries.push_back({id, "spk" + std::to_string(spk), text, wav_rel, align_rel,
                                Split::kTrain});
  }
  save_manifest(manifest, dir / "manifest.jsonl");
  return manifest;
}

}  // namespace cucvae
