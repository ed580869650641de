#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "canforge/model_spec.hpp"

namespace canforge {

/// Hyperparameters for one training run. Defaults are the reference values:
/// 120 epochs, batch 128, Adam(1e-4, 0.5, 0.999).
struct TrainingConfig {
  Variant variant = Variant::kDcgan;
  int epochs = 120;
  int batch_size = 128;
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  uint64_t seed = 0;
  int checkpoint_every = 10;
  std::filesystem::path output_dir;

  void validate() const {
    if (lr <= 0) throw std::invalid_argument("TrainingConfig: lr must be positive");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
      throw std::invalid_argument("TrainingConfig: betas must lie in [0,1)");
    if (epochs < 1) throw std::invalid_argument("TrainingConfig: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("TrainingConfig: batch_size must be >= 1");
    if (checkpoint_every < 1) throw std::invalid_argument("TrainingConfig: checkpoint_every must be >= 1");
  }
};

struct LossRecord {
  int epoch = 0;  // 1-based
  double avg_d_loss = 0;
  double avg_g_loss = 0;
};

}  // namespace canforge
