// cucvae: prepare | train | synthesize | edit | evaluate | toy-corpus
#include <iostream>

#include "CLI11.hpp"
#include "cucvae/commands.h"

using namespace cucvae;

namespace {

RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig config = path.empty() ? RunConfig{} : RunConfig::load(path);
  config.apply_overrides(overrides);
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-utterance conditional VAE speech synthesis and editing"};
  app.require_subcommand(1);
  app.fallthrough();  // --config and --set may follow the subcommand
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "key = value configuration file");
  app.add_option("--set", overrides, "override one key, e.g. --set train.steps=10")
      ->allow_extra_args(false);

  auto* prepare = app.add_subcommand("prepare", "compute the mel/prosody cache");

  auto* train = app.add_subcommand("train", "train a model");
  std::string mode = "tts";
  std::string resume;
  train->add_option("--mode", mode, "tts or se")->check(CLI::IsMember({"tts", "se"}));
  train->add_option("--resume", resume, "continue from a checkpoint");

  auto* synth = app.add_subcommand("synthesize", "generate a mel and wav");
  SynthesizeRequest sreq;
  std::string ckpt;
  synth->add_option("--checkpoint", ckpt)->required();
  auto* sid = synth->add_option("--utterance", sreq.utterance_id, "manifest utterance id");
  auto* stext = synth->add_option("--text", sreq.text, "raw text");
  sid->excludes(stext);
  synth->add_option("--speaker", sreq.speaker);
  synth->add_option("--before", sreq.neighbors_before, "preceding sentences, nearest last");
  synth->add_option("--after", sreq.neighbors_after, "following sentences, nearest first");
  synth->add_option("--temperature", sreq.temperature)->capture_default_str();
  synth->add_option("--seed", sreq.seed)->capture_default_str();
  synth->add_flag("--reconstruct", sreq.reconstruct, "posterior path on the reference mel");
  synth->add_option("--name", sreq.name, "output file stem");
  bool no_wav = false;
  synth->add_flag("--no-wav", no_wav);

  auto* edit = app.add_subcommand("edit", "apply edit scripts");
  EditRequest ereq;
  std::string emode = "entire";
  std::string scripts;
  edit->add_option("--checkpoint", ckpt)->required();
  auto* escripts = edit->add_option("--scripts", scripts, "edit-script JSON lines");
  auto* eid = edit->add_option("--identity", ereq.identity_id, "no-op edit of one utterance");
  escripts->excludes(eid);
  edit->add_option("--mode", emode)->check(CLI::IsMember({"entire", "mel_cut"}));
  edit->add_option("--temperature", ereq.temperature)->capture_default_str();
  edit->add_option("--seed", ereq.seed)->capture_default_str();
  edit->add_flag("--no-wav", no_wav);

  auto* eval = app.add_subcommand("evaluate", "score ref/hyp pairs");
  std::string pairs, report;
  eval->add_option("--pairs", pairs, "JSON lines {id, ref, hyp, text?, samples?, alignment?}")
      ->required();
  eval->add_option("--output", report, "report path");

  auto* toy = app.add_subcommand("toy-corpus", "write a small synthetic corpus");
  std::string toy_dir;
  ToyCorpusOptions toy_opts;
  toy->add_option("dir", toy_dir)->required();
  toy->add_option("--utterances", toy_opts.utterances)->capture_default_str();
  toy->add_option("--speakers", toy_opts.speakers)->capture_default_str();
  toy->add_option("--seed", toy_opts.seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig config = resolve_config(config_path, overrides);
    if (*prepare) {
      const auto s = cmd_prepare(config);
      std::cout << "prepared " << s.utterances << " utterances in " << config.cache_dir().string()
                << '\n';
    } else if (*train) {
      TrainOptions opts;
      opts.mode = parse_train_mode(mode);
      if (!resume.empty()) opts.resume = resume;
      opts.progress = &std::cout;
      const auto s = cmd_train(config, opts);
      std::cout << "trained to step " << s.final_step << ", checkpoint "
                << s.last_checkpoint.string() << '\n';
      if (s.diverged) {
        std::cerr << "error: " << s.message << " (last good parameters kept)\n";
        return 3;
      }
    } else if (*synth) {
      if (sreq.utterance_id.empty() && sreq.text.empty()) {
        std::cerr << "error: give --utterance or --text\n";
        return 2;
      }
      sreq.checkpoint = ckpt;
      sreq.write_wav = !no_wav;
      const auto r = cmd_synthesize(config, sreq);
      std::cout << r.mel_path.string() << " (" << r.mel.n_frames() << " frames)\n";
    } else if (*edit) {
      if (scripts.empty() && ereq.identity_id.empty()) {
        std::cerr << "error: give --scripts or --identity\n";
        return 2;
      }
      ereq.checkpoint = ckpt;
      ereq.scripts = scripts;
      ereq.mode = parse_edit_mode(emode);
      ereq.write_wav = !no_wav;
      for (const auto& o : cmd_edit(config, ereq)) {
        std::cout << o.mel_path.string() << " (" << o.mel.n_frames() << " frames)\n";
      }
    } else if (*eval) {
      const auto r = cmd_evaluate(config, {pairs, report});
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << r.json << '\n';
    } else if (*toy) {
      const auto m = write_toy_corpus(toy_dir, config.audio, toy_opts);
      std::cout << "wrote " << m.entries.size() << " utterances to " << toy_dir << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
