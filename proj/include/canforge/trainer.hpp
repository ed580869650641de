#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "canforge/adam.hpp"
#include "canforge/checkpoint.hpp"
#include "canforge/manifest.hpp"
#include "canforge/model_spec.hpp"
#include "canforge/models.hpp"
#include "canforge/pipeline.hpp"
#include "canforge/training_config.hpp"

namespace canforge {

struct DStepResult {
  double bce_real = 0;
  double bce_fake = 0;
  double style = 0;
  double total = 0;
};

/// Raised when a step produces a non-finite loss; carries the diagnostic.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DivergenceReport {
  bool collapse = false;       // d_loss < 0.05 sustained for 5 epochs
  int collapse_epoch = 0;      // first epoch of the sustained window
  bool nonfinite = false;
  int nonfinite_epoch = 0;
  double g_growth_rate = 0;    // least-squares slope of g_loss, trailing window
  bool growth = false;
  bool any() const { return collapse || nonfinite || growth; }
  std::string summary() const;
};

/// Trailing-window health checks over a loss log. Requires >= 2 records.
DivergenceReport divergence_monitor(const std::vector<LossRecord>& history);

/// Alternating D/G optimization. One master seed derives independent
/// streams for parameter init, shuffling, noise and fake labels; noise and
/// label streams are re-derived at every epoch boundary so that resuming
/// from a checkpoint replays the identical sequence.
class Trainer {
 public:
  Trainer(const TrainingConfig& config, const ModelSpec& spec);
  explicit Trainer(const TrainingConfig& config);

  static Trainer resume(const std::filesystem::path& checkpoint_file);

  /// Re-derives the per-epoch noise/label streams. train() calls this; call
  /// it directly when driving steps manually.
  void begin_epoch(int epoch);

  /// One discriminator update: real minibatch + freshly generated fakes.
  /// Generator parameters are untouched.
  DStepResult train_step_d(const Batch& batch);

  /// One generator update on fresh noise; discriminator parameters are
  /// untouched.
  double train_step_g(int batch_size);

  /// Full run to config.epochs: per-epoch loss records, CSV log and
  /// scheduled checkpoints under config.output_dir.
  void train(const DatasetManifest& manifest);

  Checkpoint make_checkpoint();
  void write_loss_csv(const std::filesystem::path& file) const;

  /// Adjust the target epoch count / output dir after a resume; everything
  /// else stays as recorded in the checkpoint.
  void set_target_epochs(int epochs) { config_.epochs = epochs; }
  void set_output_dir(std::filesystem::path dir) { config_.output_dir = std::move(dir); }

  Generator<float>& generator() { return *gen_; }
  Discriminator<float>& discriminator() { return *disc_; }
  const std::vector<LossRecord>& history() const { return history_; }
  int completed_epochs() const { return epoch_; }
  const TrainingConfig& config() const { return config_; }
  const ModelSpec& spec() const { return spec_; }

 private:
  void load_state(const Checkpoint& ckpt);
  Tensor<float> sample_noise(int n);
  std::vector<int> sample_fake_labels(int n);

  TrainingConfig config_;
  ModelSpec spec_;
  std::unique_ptr<Generator<float>> gen_;
  std::unique_ptr<Discriminator<float>> disc_;
  std::unique_ptr<Adam<float>> opt_g_, opt_d_;
  std::vector<LossRecord> history_;
  int epoch_ = 0;  // completed epochs
  int64_t step_index_ = 0;
  std::mt19937_64 noise_eng_, label_eng_;
};

/// epoch,avg_d_loss,avg_g_loss with 6 decimal places.
void write_loss_csv(const std::filesystem::path& file, const std::vector<LossRecord>& history);
std::vector<LossRecord> read_loss_csv(const std::filesystem::path& file);

}  // namespace canforge
