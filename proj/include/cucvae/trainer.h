// Training loop over in-memory examples: per-concern generators, KL warm-up,
// batch-averaged losses and a non-finite loss guard.
#ifndef CUCVAE_TRAINER_H_
#define CUCVAE_TRAINER_H_

#include <functional>
#include <string>
#include <vector>

#include "cucvae/model.h"
#include "cucvae/run_config.h"

namespace cucvae {

enum class TrainMode { kTts, kSe };
TrainMode parse_train_mode(const std::string& s);
std::string to_string(TrainMode mode);

struct StepLog {
  long step = 0;
  double recon = 0.0;
  double kl1 = 0.0;
  double kl2 = 0.0;
  double dur_loss = 0.0;
  double total = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
};

std::string to_json_line(const StepLog& log);

// beta * min(1, step / (frac * total_steps)); no warm-up when frac or
// total_steps is zero.
double warmup_beta(double beta, long step, long total_steps, double frac);

class Trainer {
 public:
  Trainer(CucVaeModel& model, nn::Adam& optimizer, const TrainConfig& config,
          TrainMode mode, long start_step = 0);

  // One optimizer update on `batch`. Throws NonFiniteLoss without touching
  // the parameters when the batch loss is NaN or infinite.
  StepLog step(const std::vector<const TrainingExample*>& batch);

  struct RunResult {
    std::vector<StepLog> log;
    bool diverged = false;
    std::string message;
  };
  // Draws batches by walking seeded shuffles of `data`. `on_step` runs after
  // every successful update.
  RunResult run(const std::vector<TrainingExample>& data, long steps,
                const std::function<void(const StepLog&)>& on_step = {});

  long global_step() const { return step_; }

 private:
  std::vector<const TrainingExample*> next_batch(const std::vector<TrainingExample>& data);

  CucVaeModel& model_;
  nn::Adam& optimizer_;
  TrainConfig config_;
  TrainMode mode_;
  long step_;
  nn::Rng noise_rng_, dropout_rng_, order_rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cucvae

#endif  // CUCVAE_TRAINER_H_
