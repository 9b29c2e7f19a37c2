#pragma once

#include "vol/volume.hpp"

namespace cunet::vol {

enum class Interp { Linear, Nearest };

// Index-space mapping used by all resampling in the project: the physical
// extent (cell model, N voxels of size s span N*s) of input and output is
// identical, so output voxel centre j maps to input coordinate
//   x = (j + 0.5) * N/M - 0.5.
// When M == N this is exactly the identity.
inline double source_coordinate(int j, int in_size, int out_size) {
  const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  return (static_cast<double>(j) + 0.5) * scale - 0.5;
}

// Nearest source index with half-up rounding, clamped to the grid.
inline int nearest_source_index(int j, int in_size, int out_size) {
  const double x = source_coordinate(j, in_size, out_size);
  int i = static_cast<int>(std::floor(x + 0.5));
  if (i < 0) i = 0;
  if (i >= in_size) i = in_size - 1;
  return i;
}

// Trilinear sample with coordinates clamped to the valid range.
double sample_linear(const VolumeD& v, double x, double y, double z);

VolumeD resample(const VolumeD& v, const Shape3& target, Interp mode);
VolumeU8 resample_nearest(const VolumeU8& v, const Shape3& target);

}  // namespace cunet::vol
