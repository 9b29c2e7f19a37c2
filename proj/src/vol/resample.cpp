#include "vol/resample.hpp"

#include <cmath>

namespace cunet::vol {

namespace {

void check_target(const Shape3& target) {
  if (target[0] <= 0 || target[1] <= 0 || target[2] <= 0)
    throw_argument("resample target shape must be positive, got " + shape_string(target));
}

// Spacing and affine scale with the grid so the physical extent is kept.
template <typename T>
void rescale_metadata(const Volume<T>& in, Volume<T>& out) {
  std::array<double, 3> scale{};
  std::array<double, 3> shift{};
  for (int a = 0; a < 3; ++a) {
    scale[a] = static_cast<double>(in.shape[a]) / static_cast<double>(out.shape[a]);
    shift[a] = 0.5 * scale[a] - 0.5;
    out.spacing[a] = in.spacing[a] * scale[a];
  }
  out.affine = in.affine;
  for (int i = 0; i < 3; ++i) {
    out.affine.m[i][3] = in.affine.m[i][0] * shift[0] + in.affine.m[i][1] * shift[1] +
                         in.affine.m[i][2] * shift[2] + in.affine.m[i][3];
    for (int j = 0; j < 3; ++j) out.affine.m[i][j] = in.affine.m[i][j] * scale[j];
  }
}

}  // namespace

double sample_linear(const VolumeD& v, double x, double y, double z) {
  const auto clampf = [](double t, int n) {
    if (t < 0.0) return 0.0;
    const double hi = static_cast<double>(n - 1);
    return t > hi ? hi : t;
  };
  x = clampf(x, v.shape[0]);
  y = clampf(y, v.shape[1]);
  z = clampf(z, v.shape[2]);
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int z0 = static_cast<int>(std::floor(z));
  const int x1 = x0 + 1 < v.shape[0] ? x0 + 1 : x0;
  const int y1 = y0 + 1 < v.shape[1] ? y0 + 1 : y0;
  const int z1 = z0 + 1 < v.shape[2] ? z0 + 1 : z0;
  const double fx = x - x0, fy = y - y0, fz = z - z0;

  const double c000 = v.at(x0, y0, z0), c100 = v.at(x1, y0, z0);
  const double c010 = v.at(x0, y1, z0), c110 = v.at(x1, y1, z0);
  const double c001 = v.at(x0, y0, z1), c101 = v.at(x1, y0, z1);
  const double c011 = v.at(x0, y1, z1), c111 = v.at(x1, y1, z1);

  const double c00 = c000 * (1.0 - fx) + c100 * fx;
  const double c10 = c010 * (1.0 - fx) + c110 * fx;
  const double c01 = c001 * (1.0 - fx) + c101 * fx;
  const double c11 = c011 * (1.0 - fx) + c111 * fx;
  const double c0 = c00 * (1.0 - fy) + c10 * fy;
  const double c1 = c01 * (1.0 - fy) + c11 * fy;
  return c0 * (1.0 - fz) + c1 * fz;
}

VolumeD resample(const VolumeD& v, const Shape3& target, Interp mode) {
  check_target(target);
  VolumeD out(target);
  rescale_metadata(v, out);

  if (mode == Interp::Nearest) {
    for (int k = 0; k < target[2]; ++k) {
      const int sk = nearest_source_index(k, v.shape[2], target[2]);
      for (int j = 0; j < target[1]; ++j) {
        const int sj = nearest_source_index(j, v.shape[1], target[1]);
        for (int i = 0; i < target[0]; ++i)
          out.at(i, j, k) = v.at(nearest_source_index(i, v.shape[0], target[0]), sj, sk);
      }
    }
    return out;
  }

  for (int k = 0; k < target[2]; ++k) {
    const double z = source_coordinate(k, v.shape[2], target[2]);
    for (int j = 0; j < target[1]; ++j) {
      const double y = source_coordinate(j, v.shape[1], target[1]);
      for (int i = 0; i < target[0]; ++i)
        out.at(i, j, k) = sample_linear(v, source_coordinate(i, v.shape[0], target[0]), y, z);
    }
  }
  return out;
}

VolumeU8 resample_nearest(const VolumeU8& v, const Shape3& target) {
  check_target(target);
  VolumeU8 out(target);
  rescale_metadata(v, out);
  for (int k = 0; k < target[2]; ++k) {
    const int sk = nearest_source_index(k, v.shape[2], target[2]);
    for (int j = 0; j < target[1]; ++j) {
      const int sj = nearest_source_index(j, v.shape[1], target[1]);
      for (int i = 0; i < target[0]; ++i)
        out.at(i, j, k) = v.at(nearest_source_index(i, v.shape[0], target[0]), sj, sk);
    }
  }
  return out;
}

}  // namespace cunet::vol
