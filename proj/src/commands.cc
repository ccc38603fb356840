#include "cucvae/commands.h"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "cucvae/checkpoint.h"
#include "cucvae/errors.h"
#include "cucvae/lexicon.h"
#include "json.hpp"

namespace cucvae {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

MelSpectrogram as_mel(Matrix frames, const AudioConfig& audio) {
  MelSpectrogram m;
  m.frames = std::move(frames);
  m.config = audio;
  return m;
}

// Writes <output_dir>/<stem>.mel and, optionally, <stem>.wav.
std::pair<fs::path, fs::path> write_outputs(const RunConfig& config, const std::string& stem,
                                            const MelSpectrogram& mel, bool wav) {
  fs::create_directories(config.output_dir());
  const fs::path mel_path = config.output_dir() / (stem + ".mel");
  write_mel1(mel_path, mel);
  fs::path wav_path;
  if (wav) {
    wav_path = config.output_dir() / (stem + ".wav");
    write_wav(wav_path, GriffinLimVocoder().synthesize(mel), mel.config.sample_rate);
  }
  return {mel_path, wav_path};
}

// Run config with the model section taken from the checkpoint.
RunConfig with_model(const RunConfig& config, const Checkpoint& ck) {
  RunConfig merged = config;
  merged.model = ck.config.model;
  if (merged.model.n_mels != merged.audio.n_mels) {
    throw ValidationError("checkpoint predicts " + std::to_string(merged.model.n_mels) +
                          " mel bins but audio.n_mels is " +
                          std::to_string(merged.audio.n_mels));
  }
  return merged;
}

std::size_t find_entry(const DatasetManifest& manifest, const std::string& id) {
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (manifest.entries[i].id == id) return i;
  }
  throw ValidationError("unknown utterance '" + id + "'");
}

// Keeps the l nearest neighbors on each side and pads with "" to exactly l.
Utterance fit_window(Utterance u, int l) {
  auto& before = u.neighbors_before;
  auto& after = u.neighbors_after;
  if (static_cast<int>(before.size()) > l) before.erase(before.begin(), before.end() - l);
  while (static_cast<int>(before.size()) < l) before.insert(before.begin(), std::string());
  if (static_cast<int>(after.size()) > l) after.resize(static_cast<std::size_t>(l));
  while (static_cast<int>(after.size()) < l) after.push_back(std::string());
  return u;
}

G2pResult g2p_or_throw(const std::string& text) {
  G2pResult g = Lexicon::builtin().convert(text);
  if (g.words.empty()) throw ValidationError("no words in text '" + text + "'");
  if (g.all_oov()) {
    throw ValidationError("every word of '" + text + "' is out of vocabulary");
  }
  return g;
}

Matrix scaled_noise(Index rows, Index cols, double temperature, std::uint64_t seed) {
  if (temperature < 0.0) throw ValidationError("temperature must be >= 0");
  nn::Rng rng(seed);
  return temperature * standard_normal(rows, cols, rng);
}

std::string edited_text(const std::string& original, const EditScript& script) {
  auto words = Lexicon::normalize_words(original);
  const auto insert = Lexicon::normalize_words(script.replacement_text);
  const int n = static_cast<int>(words.size());
  const int start = std::clamp(script.target_words.start, 0, n);
  const int end = std::clamp(script.target_words.end, start, n);
  words.erase(words.begin() + start, words.begin() + end);
  words.insert(words.begin() + start, insert.begin(), insert.end());
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

}  // namespace

void snapshot_config(const RunConfig& config) {
  fs::create_directories(config.run_dir());
  config.save(config.run_dir() / "config.txt");
}

PrepareSummary cmd_prepare(const RunConfig& config) {
  config.validate();
  snapshot_config(config);
  return prepare_corpus(config);
}

TrainSummary cmd_train(const RunConfig& config, const TrainOptions& options) {
  config.validate();
  snapshot_config(config);
  TrainingSet data = load_training_set(config);
  if (data.examples.empty() && config.train.steps > 0) {
    throw ValidationError("no prepared training utterances in " + config.paths.manifest);
  }

  std::unique_ptr<CucVaeModel> model;
  nn::Adam optimizer({config.train.lr});
  TrainSummary summary;
  if (options.resume) {
    Checkpoint ck = load_checkpoint(*options.resume);
    if (ck.speakers != data.speakers) {
      throw ValidationError(options.resume->string() + ": speaker table differs from the manifest");
    }
    model = std::move(ck.model);
    optimizer = std::move(ck.optimizer);
    summary.start_step = ck.step;
  } else {
    model = std::make_unique<CucVaeModel>(config.model, data.speakers, config.train.seed_init);
  }

  const fs::path ckpt_dir = config.checkpoint_dir();
  fs::create_directories(ckpt_dir);
  const fs::path log_path = config.run_dir() / "train_log.jsonl";
  std::ofstream log(log_path, options.resume ? std::ios::app : std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + log_path.string());

  Trainer trainer(*model, optimizer, config.train, options.mode, summary.start_step);
  const long remaining = std::max(0L, config.train.steps - summary.start_step);
  auto result = trainer.run(data.examples, remaining, [&](const StepLog& s) {
    log << to_json_line(s) << '\n';
    const long done = s.step + 1;
    if (config.train.checkpoint_every > 0 && done % config.train.checkpoint_every == 0) {
      save_checkpoint(ckpt_dir / ("step_" + std::to_string(done) + ".ckpt"), config, *model,
                      optimizer, done);
    }
    if (options.progress && (done % std::max(1L, options.progress_every) == 0)) {
      *options.progress << "step " << done << " recon " << s.recon << " kl1 " << s.kl1
                        << " kl2 " << s.kl2 << " dur " << s.dur_loss << '\n';
    }
  });
  log.flush();
  summary.final_step = trainer.global_step();
  summary.diverged = result.diverged;
  summary.message = result.message;
  summary.log = std::move(result.log);
  summary.last_checkpoint = ckpt_dir / "last.ckpt";
  save_checkpoint(summary.last_checkpoint, config, *model, optimizer, summary.final_step);
  return summary;
}

SynthesizeResult cmd_synthesize(const RunConfig& base, const SynthesizeRequest& req) {
  const Checkpoint ck = load_checkpoint(req.checkpoint);
  const RunConfig config = with_model(base, ck);
  snapshot_config(config);
  const auto encoder = make_context_encoder(config);
  const int l = config.model.context_l;
  const Index latent = config.model.latent_dim;

  SynthesizeResult out;
  std::string stem = req.name;
  if (!req.utterance_id.empty()) {
    const DatasetManifest manifest = load_manifest(config.paths.manifest);
    const std::size_t index = find_entry(manifest, req.utterance_id);
    const auto& entry = manifest.entries[index];
    const Matrix context = context_matrix(*encoder, manifest_utterances(manifest), index, l);
    if (stem.empty()) stem = entry.id;
    if (req.reconstruct) {
      PreparedUtterance u = load_prepared(config, entry);
      TrainingExample ex{entry.id, entry.speaker, u.track, u.mel.frames, context};
      const Matrix eps = scaled_noise(u.track.size(), latent, req.temperature, req.seed);
      out.mel = as_mel(ck.model->reconstruct(ex, eps), config.audio);
      out.durations = u.track.durations;
    } else {
      const G2pResult g = g2p_or_throw(entry.text);
      if (req.temperature < 0.0) throw ValidationError("temperature must be >= 0");
      nn::Rng rng(req.seed);
      const Matrix eps = standard_normal(g.track.size(), latent, rng);
      Synthesis s = ck.model->synthesize(g.track, entry.speaker, context, req.temperature, eps);
      out.mel = as_mel(std::move(s.mel), config.audio);
      out.durations = std::move(s.durations);
    }
  } else {
    if (req.reconstruct) throw ValidationError("reconstruction needs an utterance id");
    const G2pResult g = g2p_or_throw(req.text);
    Utterance window{"", req.speaker, req.text, req.neighbors_before, req.neighbors_after};
    const Matrix context = context_matrix(*encoder, fit_window(window, l));
    if (req.temperature < 0.0) throw ValidationError("temperature must be >= 0");
    nn::Rng rng(req.seed);
    const Matrix eps = standard_normal(g.track.size(), latent, rng);
    Synthesis s = ck.model->synthesize(g.track, req.speaker, context, req.temperature, eps);
    out.mel = as_mel(std::move(s.mel), config.audio);
    out.durations = std::move(s.durations);
    if (stem.empty()) stem = "synth";
  }
  std::tie(out.mel_path, out.wav_path) = write_outputs(config, stem, out.mel, req.write_wav);
  return out;
}

EditMode parse_edit_mode(const std::string& s) {
  if (s == "entire") return EditMode::kEntire;
  if (s == "mel_cut") return EditMode::kMelCut;
  throw ValidationError("unknown edit mode '" + s + "' (allowed: entire, mel_cut)");
}

std::string to_string(EditMode mode) { return mode == EditMode::kEntire ? "entire" : "mel_cut"; }

std::vector<EditOutput> cmd_edit(const RunConfig& base, const EditRequest& req) {
  const Checkpoint ck = load_checkpoint(req.checkpoint);
  const RunConfig config = with_model(base, ck);
  snapshot_config(config);
  const DatasetManifest manifest = load_manifest(config.paths.manifest);
  const auto encoder = make_context_encoder(config);

  struct Job {
    std::string id;
    std::optional<EditScript> script;
    std::string stem;
  };
  std::vector<Job> jobs;
  if (!req.identity_id.empty()) {
    jobs.push_back({req.identity_id, std::nullopt, req.identity_id + "_identity"});
  } else {
    const auto scripts = load_edit_scripts(req.scripts);
    for (std::size_t k = 0; k < scripts.size(); ++k) {
      jobs.push_back({scripts[k].utterance_id, scripts[k],
                      scripts[k].utterance_id + "_edit" + std::to_string(k)});
    }
  }

  std::vector<EditOutput> outputs;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const Job& job = jobs[k];
    const std::size_t index = find_entry(manifest, job.id);
    const auto& entry = manifest.entries[index];
    const PreparedUtterance u = load_prepared(config, entry);
    EditPlan plan = EditPlan::identity(u.track);
    std::string text = entry.text;
    if (job.script) {
      PhonemeTrack replacement;
      if (job.script->op != EditOp::kDelete) {
        replacement = g2p_or_throw(job.script->replacement_text).track;
      }
      plan = build_edit_plan(u.track, *job.script, replacement);
      text = edited_text(entry.text, *job.script);
    }
    auto corpus = manifest_utterances(manifest);
    corpus[index].text = text;
    const Matrix context = context_matrix(*encoder, corpus, index, config.model.context_l);
    const Matrix eps = scaled_noise(plan.phonemes_edited.size(), config.model.latent_dim,
                                    req.temperature, req.seed + k);
    EditResult r = edit_infer(*ck.model, u.mel.frames, u.track, plan, entry.speaker, context, eps);
    Matrix mel = req.mode == EditMode::kMelCut ? mel_cut(r.mel, u.mel.frames, r.plan, u.track)
                                               : std::move(r.mel);
    EditOutput out{entry.id, as_mel(std::move(mel), config.audio), std::move(r.plan), {}, {}};
    std::tie(out.mel_path, out.wav_path) =
        write_outputs(config, job.stem + "_" + to_string(req.mode), out.mel, req.write_wav);
    outputs.push_back(std::move(out));
  }
  return outputs;
}

namespace {

struct LoadedAudio {
  MelSpectrogram mel;
  ProsodyTracks prosody;
};

LoadedAudio analyze(const fs::path& path, const AudioConfig& audio) {
  const Wav wav = read_wav(path);
  if (wav.sample_rate != audio.sample_rate) {
    throw ValidationError(path.string() + ": sample rate " + std::to_string(wav.sample_rate) +
                          " differs from audio.sample_rate");
  }
  return {wav_to_mel(wav.samples, audio), extract_f0(wav.samples, audio)};
}

}  // namespace

EvaluateResult cmd_evaluate(const RunConfig& config, const EvaluateRequest& req,
                            const Transcriber& transcriber) {
  snapshot_config(config);
  std::ifstream in(req.pairs);
  if (!in) throw std::runtime_error("cannot open " + req.pairs.string());
  EvaluateResult result;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(req.pairs.string(), line_no, e.what());
    }
    if (!j.is_object() || !j.contains("ref") || !j.contains("hyp")) {
      throw ParseError(req.pairs.string(), line_no, "expected an object with ref and hyp");
    }
    MetricReport item;
    item.id = j.value("id", "line" + std::to_string(line_no));
    try {
      const auto ref = analyze(resolve_relative(req.pairs, j.at("ref").get<std::string>()),
                               config.audio);
      const fs::path hyp_path = resolve_relative(req.pairs, j.at("hyp").get<std::string>());
      const auto hyp = analyze(hyp_path, config.audio);
      const Index frames = std::min(ref.mel.n_frames(), hyp.mel.n_frames());
      if (frames == 0) {
        result.warnings.push_back(item.id + ": no overlapping frames, skipped");
        continue;
      }
      const FfeBreakdown f = ffe(truncate(ref.prosody, frames), truncate(hyp.prosody, frames));
      item.ffe = f.ffe;
      item.gpe_frames = f.n_f0e;
      item.vde_frames = f.n_u_to_v + f.n_v_to_u;
      item.mcd_db = mcd(mel_to_mfcc(ref.mel).topRows(frames), mel_to_mfcc(hyp.mel).topRows(frames));
      if (j.contains("text")) item.wer = wer(j.at("text").get<std::string>(), transcriber.transcribe(hyp_path));
      if (j.contains("samples") && j.contains("alignment")) {
        const PhonemeTrack track = load_alignment(
            resolve_relative(req.pairs, j.at("alignment").get<std::string>()),
            config.audio.frames_per_second());
        std::vector<ProsodyTracks> samples;
        for (const auto& s : j.at("samples")) {
          const auto a = analyze(resolve_relative(req.pairs, s.get<std::string>()), config.audio);
          if (a.prosody.size() < track.total_frames()) {
            throw ValidationError("sample shorter than the alignment");
          }
          samples.push_back(truncate(a.prosody, track.total_frames()));
        }
        const ProsodyStats stats = prosody_diversity(samples, track);
        item.f0_std_hz = stats.f0_std_hz;
        item.energy_std = stats.energy_std;
      }
    } catch (const std::exception& e) {
      item.error = e.what();
    }
    result.items.push_back(std::move(item));
  }
  result.json = report_to_json(result.items);
  result.output = req.output.empty() ? config.output_dir() / "metrics.json" : req.output;
  if (result.output.has_parent_path()) fs::create_directories(result.output.parent_path());
  std::ofstream out(result.output);
  if (!out) throw std::runtime_error("cannot write " + result.output.string());
  out << result.json << '\n';
  return result;
}

}  // namespace cucvae
