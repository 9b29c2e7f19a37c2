#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "common/error.hpp"

namespace cunet::vol {

using Shape3 = std::array<int, 3>;  // nx, ny, nz

inline std::int64_t voxel_count(const Shape3& s) {
  return static_cast<std::int64_t>(s[0]) * s[1] * s[2];
}

inline std::string shape_string(const Shape3& s) {
  return std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" + std::to_string(s[2]);
}

// Grid-to-world mapping: world = rotation * diag(spacing) * index + origin,
// stored as a plain 4x4 row-major affine like a NIfTI sform.
struct Affine {
  std::array<std::array<double, 4>, 4> m{{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}};

  static Affine from_spacing(const std::array<double, 3>& spacing,
                             const std::array<double, 3>& origin = {0, 0, 0}) {
    Affine a;
    for (int i = 0; i < 3; ++i) {
      a.m[i][i] = spacing[i];
      a.m[i][3] = origin[i];
    }
    return a;
  }

  std::array<double, 3> apply(double x, double y, double z) const {
    std::array<double, 3> out{};
    for (int i = 0; i < 3; ++i)
      out[i] = m[i][0] * x + m[i][1] * y + m[i][2] * z + m[i][3];
    return out;
  }

  double max_abs_difference(const Affine& other) const {
    double d = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double e = std::abs(m[i][j] - other.m[i][j]);
        if (e > d) d = e;
      }
    return d;
  }
};

// Dense scalar volume, x fastest. Voxel (i,j,k) lives at i + nx*(j + ny*k).
template <typename T>
struct Volume {
  Shape3 shape{0, 0, 0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  Affine affine;
  std::vector<T> data;

  Volume() = default;
  Volume(Shape3 s, T fill = T{}) : shape(s), data(static_cast<std::size_t>(voxel_count(s)), fill) {}

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }

  std::int64_t index(int i, int j, int k) const {
    return static_cast<std::int64_t>(i) + static_cast<std::int64_t>(shape[0]) * (j + static_cast<std::int64_t>(shape[1]) * k);
  }

  T& at(int i, int j, int k) { return data[static_cast<std::size_t>(index(i, j, k))]; }
  const T& at(int i, int j, int k) const { return data[static_cast<std::size_t>(index(i, j, k))]; }

  bool same_grid(const Shape3& other) const { return shape == other; }

  template <typename U>
  Volume<U> like() const {
    Volume<U> v;
    v.shape = shape;
    v.spacing = spacing;
    v.affine = affine;
    v.data.assign(data.size(), U{});
    return v;
  }
};

using VolumeD = Volume<double>;
using VolumeU8 = Volume<std::uint8_t>;

constexpr std::array<std::uint8_t, 4> kLabelValues{0, 1, 2, 4};

inline bool is_valid_label(std::uint8_t v) { return v == 0 || v == 1 || v == 2 || v == 4; }

// Fixed channel order. All loaders, savers and the network input agree on it.
enum Modality : int { kT1 = 0, kT1ce = 1, kT2 = 2, kFlair = 3 };
constexpr std::array<const char*, 4> kModalitySuffix{"t1", "t1ce", "t2", "flair"};

struct MultiModalCase {
  std::string case_id;
  std::array<VolumeD, 4> channels;  // T1, T1ce, T2, FLAIR
  std::optional<VolumeU8> labels;

  const Shape3& shape() const { return channels[0].shape; }
  const std::array<double, 3>& spacing() const { return channels[0].spacing; }
  const Affine& affine() const { return channels[0].affine; }
};

struct BrainMask {
  Volume<std::uint8_t> mask;  // 1 inside the brain, 0 background

  std::int64_t count() const {
    std::int64_t n = 0;
    for (auto v : mask.data) n += v ? 1 : 0;
    return n;
  }
  bool empty() const { return count() == 0; }
};

// Mask of voxels where any channel is non-zero. Defined on pre-normalization
// intensities; an all-zero case cannot be normalized and is rejected.
BrainMask compute_brain_mask(const MultiModalCase& c);

// Consistency checks for a freshly assembled case (shared grid, label values).
void validate_case(const MultiModalCase& c);

}  // namespace cunet::vol
