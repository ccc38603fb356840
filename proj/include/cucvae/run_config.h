// Run configuration: one "key = value" document with dotted keys, e.g.
//   model.d_model = 32
//   train.steps = 2000
// Every key has a default; unknown keys are errors.
#ifndef CUCVAE_RUN_CONFIG_H_
#define CUCVAE_RUN_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cucvae/audio.h"
#include "cucvae/model_config.h"

namespace cucvae {

struct TrainConfig {
  double beta1 = 1.0;
  double beta2 = 1.0;
  double kl_warmup_frac = 0.2;
  double lambda_mask = 1.5;
  double mask_rate = 0.5;
  bool unbiased = false;  // se mode with all-ones frame weights
  double lr = 1e-3;
  long steps = 1000;
  int batch_size = 4;
  long checkpoint_every = 500;
  // One generator per concern.
  std::uint64_t seed_init = 1;
  std::uint64_t seed_noise = 2;
  std::uint64_t seed_dropout = 3;
  std::uint64_t seed_order = 4;
};

struct PathsConfig {
  std::string manifest;
  std::string run_dir = "run";
  std::string checkpoint_dir;   // defaults to <run_dir>/checkpoints
  std::string embedding_cache;  // empty: stub context encoder
};

struct RunConfig {
  AudioConfig audio;
  ModelConfig model;
  TrainConfig train;
  PathsConfig paths;

  static RunConfig load(const std::filesystem::path& path);
  static RunConfig parse(const std::string& text, const std::string& source);
  // "key=value" override; throws ValidationError on unknown keys or values.
  void set(const std::string& key, const std::string& value);
  void apply_overrides(const std::vector<std::string>& assignments);
  std::string to_text() const;
  void save(const std::filesystem::path& path) const;
  void validate() const;
  std::string fingerprint() const;

  std::filesystem::path run_dir() const { return paths.run_dir; }
  std::filesystem::path cache_dir() const { return run_dir() / "cache"; }
  std::filesystem::path checkpoint_dir() const;
  std::filesystem::path output_dir() const { return run_dir() / "outputs"; }

  static std::vector<std::string> keys();
};

}  // namespace cucvae

#endif  // CUCVAE_RUN_CONFIG_H_
