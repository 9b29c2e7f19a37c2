#include "vol/volume.hpp"

#include <cmath>

namespace cunet::vol {

BrainMask compute_brain_mask(const MultiModalCase& c) {
  BrainMask out;
  out.mask = c.channels[0].like<std::uint8_t>();
  const std::size_t n = c.channels[0].data.size();
  std::int64_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool inside = false;
    for (int ch = 0; ch < 4; ++ch) {
      if (std::abs(c.channels[ch].data[i]) > 0.0) {
        inside = true;
        break;
      }
    }
    out.mask.data[i] = inside ? 1 : 0;
    count += inside ? 1 : 0;
  }
  if (count == 0) throw_data("empty brain mask: all channels are zero everywhere in case '" + c.case_id + "'");
  return out;
}

void validate_case(const MultiModalCase& c) {
  const Shape3& s = c.channels[0].shape;
  if (voxel_count(s) <= 0) throw_data("case '" + c.case_id + "' has an empty grid");
  for (int ch = 1; ch < 4; ++ch) {
    if (c.channels[ch].shape != s)
      throw_data("grid mismatch in case '" + c.case_id + "': channel " + kModalitySuffix[ch] + " is " +
                 shape_string(c.channels[ch].shape) + ", expected " + shape_string(s));
  }
  constexpr double kMetaTol = 1e-4;  // float32 header round-trip slack
  for (int ch = 1; ch < 4; ++ch) {
    for (int a = 0; a < 3; ++a)
      if (std::abs(c.channels[ch].spacing[a] - c.channels[0].spacing[a]) > kMetaTol)
        throw_data("spacing mismatch in case '" + c.case_id + "' between channels t1 and " + kModalitySuffix[ch]);
    if (c.channels[ch].affine.max_abs_difference(c.channels[0].affine) > kMetaTol)
      throw_data("affine mismatch in case '" + c.case_id + "' between channels t1 and " + kModalitySuffix[ch]);
  }
  if (c.labels) {
    if (c.labels->shape != s)
      throw_data("grid mismatch in case '" + c.case_id + "': labels are " + shape_string(c.labels->shape) +
                 ", expected " + shape_string(s));
    for (auto v : c.labels->data)
      if (!is_valid_label(v))
        throw_data("unexpected label value " + std::to_string(static_cast<int>(v)) + " in case '" + c.case_id + "'");
  }
}

}  // namespace cunet::vol
