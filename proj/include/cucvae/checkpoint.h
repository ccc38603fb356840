// Binary checkpoints: "CUCVAECK", u64 header length, JSON header (config
// text and fingerprint, speakers, step, parameter names and shapes), then
// float64 little-endian parameter values followed by the Adam moments.
#ifndef CUCVAE_CHECKPOINT_H_
#define CUCVAE_CHECKPOINT_H_

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "cucvae/model.h"
#include "cucvae/run_config.h"

namespace cucvae {

struct Checkpoint {
  RunConfig config;
  std::vector<std::string> speakers;
  long step = 0;
  std::unique_ptr<CucVaeModel> model;
  nn::Adam optimizer;
};

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config,
                     const CucVaeModel& model, const nn::Adam& optimizer, long step);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cucvae

#endif  // CUCVAE_CHECKPOINT_H_
