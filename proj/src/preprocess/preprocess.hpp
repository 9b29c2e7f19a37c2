#pragma once

#include "vol/resample.hpp"
#include "vol/volume.hpp"

namespace cunet::preprocess {

struct PreprocessParams {
  double clamp_lo = -5.0;
  double clamp_hi = 5.0;
  double shift = 5.0;  // kept equal to -clamp_lo so the output floor is 0
  vol::Shape3 target_grid{128, 128, 128};

  void validate() const {
    if (!(clamp_lo < clamp_hi)) throw_config("preprocess: clamp_lo must be < clamp_hi");
    if (shift != -clamp_lo) throw_config("preprocess: shift must equal -clamp_lo");
    for (int a = 0; a < 3; ++a)
      if (target_grid[a] <= 0) throw_config("preprocess: target_grid must be positive");
  }
};

// Standardizes the channel over mask voxels (population statistics); voxels
// outside the mask are left untouched at this step.
vol::VolumeD zscore_channel(const vol::VolumeD& channel, const vol::BrainMask& mask);

vol::VolumeD clamp_channel(const vol::VolumeD& channel, double lo, double hi);

// Adds `shift` inside the mask and forces the background to exactly zero.
vol::VolumeD shift_and_zero_background(const vol::VolumeD& channel, const vol::BrainMask& mask, double shift);

struct PreprocessedCase {
  vol::MultiModalCase case_;   // channels on the target grid, labels nearest-resampled
  vol::BrainMask native_mask;  // brain mask at the input resolution
  vol::BrainMask target_mask;  // the same mask nearest-resampled to the target grid
};

// Full chain: mask -> z-score -> clamp -> shift/zero -> resample. Channels are
// interpolated linearly and re-zeroed outside the resampled mask; labels use
// nearest mode.
PreprocessedCase preprocess_case(const vol::MultiModalCase& c, const PreprocessParams& params);

}  // namespace cunet::preprocess
