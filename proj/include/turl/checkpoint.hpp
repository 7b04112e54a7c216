#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "turl/model.hpp"
#include "turl/trainer.hpp"

namespace turl {

inline constexpr char kCheckpointMagic[4] = {'T', 'U', 'R', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  ModelConfig model;
  TrainConfig train;
  std::vector<std::string> labels;  // class names by id
  BpeVocab vocab;
  double best_val_loss = 0.0;
  int epoch = 0;
};

/// "TURL", u32 version, u64 header length, JSON header, then every parameter
/// as little-endian f32 in header order.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<T>& params, const CheckpointMeta& meta);

template <typename T>
struct LoadedCheckpoint {
  CheckpointMeta meta;
  ModelParams<T> params;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path);

std::string hash_hex(std::uint64_t h);

}  // namespace turl
