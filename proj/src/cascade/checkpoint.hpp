#pragma once

#include <string>

#include "cascade/cascade.hpp"
#include "preprocess/preprocess.hpp"

namespace cunet::cascade {

// Self-describing checkpoint: a JSON header carrying the cascade topology,
// the preprocessing parameters and a tensor index, followed by raw
// little-endian float64 parameter data.
struct CheckpointMeta {
  CascadeConfig cascade;
  preprocess::PreprocessParams preprocess;
  int epoch = 0;
  double loss = 0.0;
};

void save_checkpoint(const std::string& path, CascadeModel& model, const preprocess::PreprocessParams& pp,
                     int epoch, double loss);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::unique_ptr<CascadeModel> model;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace cunet::cascade
