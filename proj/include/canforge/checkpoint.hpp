#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "canforge/model_spec.hpp"
#include "canforge/tensor.hpp"
#include "canforge/training_config.hpp"

namespace canforge {

inline constexpr char kCheckpointMagic[] = "CANFORGE-CKPT-1";

/// Self-describing training snapshot: spec + config + epoch + loss history
/// in a JSON header, followed by a raw little-endian float32 tensor payload.
/// save(load(x)) is byte-identical to x.
struct Checkpoint {
  ModelSpec spec;
  TrainingConfig config;
  int epoch = 0;  // number of completed epochs
  std::vector<LossRecord> loss_history;
  int64_t opt_g_steps = 0;
  int64_t opt_d_steps = 0;
  std::map<std::string, Tensor<float>> tensors;
};

/// Atomic write (temp file + rename).
void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace canforge
