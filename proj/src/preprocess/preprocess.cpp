#include "preprocess/preprocess.hpp"

#include <cmath>

namespace cunet::preprocess {

using vol::BrainMask;
using vol::VolumeD;

vol::VolumeD zscore_channel(const VolumeD& channel, const BrainMask& mask) {
  if (channel.shape != mask.mask.shape) throw_data("zscore: channel and mask grids differ");
  const std::size_t n = channel.data.size();

  double sum = 0.0;
  std::int64_t m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask.mask.data[i]) {
      sum += channel.data[i];
      ++m;
    }
  }
  if (m == 0) throw_data("zscore: empty brain mask");
  const double mean = sum / static_cast<double>(m);

  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask.mask.data[i]) {
      const double d = channel.data[i] - mean;
      ss += d * d;
    }
  }
  const double var = ss / static_cast<double>(m);
  if (var <= 0.0) throw_data("constant channel: zero variance over brain voxels");
  const double inv_std = 1.0 / std::sqrt(var);

  VolumeD out = channel;
  for (std::size_t i = 0; i < n; ++i)
    if (mask.mask.data[i]) out.data[i] = (channel.data[i] - mean) * inv_std;
  return out;
}

vol::VolumeD clamp_channel(const VolumeD& channel, double lo, double hi) {
  if (!(lo < hi)) throw_argument("clamp: lo must be < hi");
  VolumeD out = channel;
  for (auto& v : out.data) v = v < lo ? lo : (v > hi ? hi : v);
  return out;
}

vol::VolumeD shift_and_zero_background(const VolumeD& channel, const BrainMask& mask, double shift) {
  if (channel.shape != mask.mask.shape) throw_data("shift: channel and mask grids differ");
  VolumeD out = channel;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = mask.mask.data[i] ? channel.data[i] + shift : 0.0;
  return out;
}

PreprocessedCase preprocess_case(const vol::MultiModalCase& c, const PreprocessParams& params) {
  params.validate();
  vol::validate_case(c);

  PreprocessedCase out;
  out.native_mask = vol::compute_brain_mask(c);

  out.case_.case_id = c.case_id;
  for (int ch = 0; ch < 4; ++ch) {
    VolumeD v = zscore_channel(c.channels[ch], out.native_mask);
    v = clamp_channel(v, params.clamp_lo, params.clamp_hi);
    v = shift_and_zero_background(v, out.native_mask, params.shift);
    out.case_.channels[ch] = vol::resample(v, params.target_grid, vol::Interp::Linear);
  }

  out.target_mask.mask = vol::resample_nearest(out.native_mask.mask, params.target_grid);
  // Interpolation smears the brain boundary; the background rule is restated
  // on the target grid.
  for (int ch = 0; ch < 4; ++ch) {
    auto& data = out.case_.channels[ch].data;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (!out.target_mask.mask.data[i]) data[i] = 0.0;
  }

  if (c.labels) out.case_.labels = vol::resample_nearest(*c.labels, params.target_grid);
  return out;
}

}  // namespace cunet::preprocess
