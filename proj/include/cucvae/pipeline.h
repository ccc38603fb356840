// Feature cache and data loading shared by the commands: per-utterance MEL1
// mel and prosody files, reconciled alignments, context matrices, plus a
// synthetic corpus writer for smoke runs.
#ifndef CUCVAE_PIPELINE_H_
#define CUCVAE_PIPELINE_H_

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "cucvae/audio.h"
#include "cucvae/corpus.h"
#include "cucvae/cu_embedding.h"
#include "cucvae/model.h"
#include "cucvae/run_config.h"

namespace cucvae {

struct CachePaths {
  std::filesystem::path mel;        // <id>.mel, [frames x n_mels]
  std::filesystem::path prosody;    // <id>.prosody, MEL1 with columns (f0_hz, energy)
  std::filesystem::path alignment;  // <id>.align.tsv, durations match the mel
};
CachePaths cache_paths(const RunConfig& config, const std::string& id);

struct PrepareSummary {
  std::size_t utterances = 0;
  std::vector<std::filesystem::path> mel_files;
};
// Reads every manifest entry's wav and alignment and writes the cache.
// Errors are rethrown with the offending file in the message.
PrepareSummary prepare_corpus(const RunConfig& config);

void write_prosody(const std::filesystem::path& path, const ProsodyTracks& tracks,
                   const AudioConfig& audio);
ProsodyTracks read_prosody(const std::filesystem::path& path);

struct PreparedUtterance {
  ManifestEntry entry;
  MelSpectrogram mel;
  ProsodyTracks prosody;
  PhonemeTrack track;
};
PreparedUtterance load_prepared(const RunConfig& config, const ManifestEntry& entry);

// Stub encoder of width model.d_ctx, or the embedding cache when configured.
std::unique_ptr<ContextEncoder> make_context_encoder(const RunConfig& config);

// Manifest order defines adjacency for neighbor windows.
std::vector<Utterance> manifest_utterances(const DatasetManifest& manifest);
// [2l x encoder.dim()] pair embeddings for the window around corpus[index].
Matrix context_matrix(const ContextEncoder& encoder, const std::vector<Utterance>& corpus,
                      std::size_t index, int l);
Matrix context_matrix(const ContextEncoder& encoder, const Utterance& window);

// Sorted distinct speaker ids.
std::vector<std::string> manifest_speakers(const DatasetManifest& manifest);

struct TrainingSet {
  DatasetManifest manifest;
  std::vector<std::string> speakers;
  std::vector<TrainingExample> examples;
};
TrainingSet load_training_set(const RunConfig& config, Split split = Split::kTrain);

struct ToyCorpusOptions {
  int utterances = 4;
  int speakers = 2;
  std::uint64_t seed = 7;
  int min_frames = 2;  // per phoneme
  int max_frames = 5;
};
// Writes <dir>/wav/*.wav, <dir>/align/*.tsv and <dir>/manifest.jsonl. Each
// phoneme is a harmonic tone with its own pitch and spectral envelope, and
// every entry is in the train split.
DatasetManifest write_toy_corpus(const std::filesystem::path& dir, const AudioConfig& audio,
                                 const ToyCorpusOptions& options = {});

}  // namespace cucvae

#endif  // CUCVAE_PIPELINE_H_
