// The user-facing commands. Each one writes under config.run_dir() and
// leaves a copy of the resolved configuration there as config.txt.
#ifndef CUCVAE_COMMANDS_H_
#define CUCVAE_COMMANDS_H_

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cucvae/metrics.h"
#include "cucvae/pipeline.h"
#include "cucvae/trainer.h"

namespace cucvae {

void snapshot_config(const RunConfig& config);

PrepareSummary cmd_prepare(const RunConfig& config);

struct TrainOptions {
  TrainMode mode = TrainMode::kTts;
  std::optional<std::filesystem::path> resume;
  std::ostream* progress = nullptr;  // one line per logged step when set
  long progress_every = 50;
};

struct TrainSummary {
  long start_step = 0;
  long final_step = 0;
  bool diverged = false;
  std::string message;
  std::filesystem::path last_checkpoint;
  std::vector<StepLog> log;
};

// Trains up to config.train.steps total steps. Writes train_log.jsonl,
// step_<n>.ckpt every checkpoint_every steps and last.ckpt at the end. On a
// non-finite loss the parameters from the last good step go to last.ckpt and
// the summary reports diverged.
TrainSummary cmd_train(const RunConfig& config, const TrainOptions& options = {});

struct SynthesizeRequest {
  std::filesystem::path checkpoint;
  // Either a manifest utterance (text, speaker and neighbors come from the
  // manifest) or raw text with explicit neighbors.
  std::string utterance_id;
  std::string text;
  std::string speaker;
  std::vector<std::string> neighbors_before;  // nearest last
  std::vector<std::string> neighbors_after;   // nearest first
  double temperature = 1.0;
  std::uint64_t seed = 0;
  // Posterior path on the cached reference mel of utterance_id, noise scaled
  // by the temperature.
  bool reconstruct = false;
  std::string name;  // output stem, defaults to the utterance id or "synth"
  bool write_wav = true;
};

struct SynthesizeResult {
  MelSpectrogram mel;
  std::vector<int> durations;
  std::filesystem::path mel_path;
  std::filesystem::path wav_path;
};

SynthesizeResult cmd_synthesize(const RunConfig& config, const SynthesizeRequest& request);

enum class EditMode { kEntire, kMelCut };
EditMode parse_edit_mode(const std::string& s);
std::string to_string(EditMode mode);

struct EditRequest {
  std::filesystem::path checkpoint;
  std::filesystem::path scripts;  // edit-script JSON lines
  std::string identity_id;        // instead of scripts: the no-op edit of one utterance
  EditMode mode = EditMode::kEntire;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  bool write_wav = true;
};

struct EditOutput {
  std::string utterance_id;
  MelSpectrogram mel;
  EditPlan plan;  // carries the adjusted durations
  std::filesystem::path mel_path;
  std::filesystem::path wav_path;
};

std::vector<EditOutput> cmd_edit(const RunConfig& config, const EditRequest& request);

struct EvaluateRequest {
  // JSON lines {id, ref, hyp, text?, samples?, alignment?}; paths relative
  // to this file. ref/hyp/samples are wavs.
  std::filesystem::path pairs;
  std::filesystem::path output;  // defaults to <run_dir>/outputs/metrics.json
};

struct EvaluateResult {
  std::vector<MetricReport> items;
  std::vector<std::string> warnings;
  std::string json;
  std::filesystem::path output;
};

EvaluateResult cmd_evaluate(const RunConfig& config, const EvaluateRequest& request,
                            const Transcriber& transcriber = SidecarTranscriber());

}  // namespace cucvae

#endif  // CUCVAE_COMMANDS_H_
