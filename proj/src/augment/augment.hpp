#pragma once

#include <array>
#include <cstdint>

#include "common/rng.hpp"
#include "vol/volume.hpp"

namespace cunet::augment {

struct AugmentConfig {
  double flip_prob = 0.5;
  double mute_prob = 0.1;      // per channel
  double noise_mean = 5.0;     // mute noise sits inside the preprocessed [0,10] range
  double noise_std = 2.5;
  int bspline_grid = 32;       // control-point spacing in voxels
  double bspline_sigma = 4.0;  // control-point displacement stddev in voxels
  std::uint64_t rng_seed = 1234;

  void validate() const {
    if (flip_prob < 0.0 || flip_prob > 1.0) throw_config("augment: flip_prob must be in [0,1]");
    if (mute_prob < 0.0 || mute_prob > 1.0) throw_config("augment: mute_prob must be in [0,1]");
    if (noise_std < 0.0) throw_config("augment: noise_std must be >= 0");
    if (bspline_grid < 2) throw_config("augment: bspline_grid must be >= 2 voxels");
    if (bspline_sigma < 0.0) throw_config("augment: bspline_sigma must be >= 0");
  }
};

// Mirrors channels and labels along the left-right (x) axis when draw is set.
vol::MultiModalCase sagittal_flip(const vol::MultiModalCase& c, bool draw);

// Replaces each drawn channel entirely with i.i.d. Gaussian noise. Labels and
// undrawn channels are untouched.
vol::MultiModalCase channel_mute(const vol::MultiModalCase& c, const std::array<bool, 4>& draws,
                                 double noise_mean, double noise_std, Rng& rng);

// Draws the four per-channel mute decisions from one RNG stream.
std::array<bool, 4> draw_mutes(double mute_prob, Rng& rng);

struct DeformResult {
  vol::MultiModalCase case_;
  bool folded = false;  // deformation produced a negative Jacobian somewhere
};

// Random cubic b-spline displacement field; channels warped linearly, labels
// with nearest interpolation. The grid shape and metadata are preserved.
DeformResult bspline_deform(const vol::MultiModalCase& c, const AugmentConfig& cfg, std::uint64_t seed);

}  // namespace cunet::augment
