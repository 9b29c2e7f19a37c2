#include "augment/augment.hpp"

#include <cmath>

#include "vol/resample.hpp"

namespace cunet::augment {

using vol::MultiModalCase;
using vol::VolumeD;
using vol::VolumeU8;

namespace {

template <typename T>
vol::Volume<T> flip_x(const vol::Volume<T>& v) {
  vol::Volume<T> out = v;
  const int nx = v.shape[0];
  for (int k = 0; k < v.shape[2]; ++k)
    for (int j = 0; j < v.shape[1]; ++j)
      for (int i = 0; i < nx; ++i) out.at(i, j, k) = v.at(nx - 1 - i, j, k);
  return out;
}

// Uniform cubic b-spline basis and its derivative, t in [0,1).
inline std::array<double, 4> bspline_weights(double t) {
  const double t2 = t * t, t3 = t2 * t;
  return {(1.0 - 3.0 * t + 3.0 * t2 - t3) / 6.0, (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
          (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0, t3 / 6.0};
}

inline std::array<double, 4> bspline_dweights(double t) {
  const double t2 = t * t;
  return {(-3.0 + 6.0 * t - 3.0 * t2) / 6.0, (9.0 * t2 - 12.0 * t) / 6.0,
          (-9.0 * t2 + 6.0 * t + 3.0) / 6.0, 3.0 * t2 / 6.0};
}

// Control lattice covering the volume with one extra point on each side.
struct ControlLattice {
  std::array<int, 3> npts{};
  double spacing;
  std::vector<std::array<double, 3>> disp;  // per control point displacement

  std::int64_t index(int i, int j, int k) const {
    return static_cast<std::int64_t>(i) + npts[0] * (j + static_cast<std::int64_t>(npts[1]) * k);
  }
};

ControlLattice make_lattice(const vol::Shape3& grid, int spacing_vox, double sigma, Rng& rng) {
  ControlLattice lat;
  lat.spacing = static_cast<double>(spacing_vox);
  for (int a = 0; a < 3; ++a)
    lat.npts[a] = static_cast<int>(std::floor((grid[a] - 1) / lat.spacing)) + 4;
  lat.disp.assign(static_cast<std::size_t>(lat.npts[0]) * lat.npts[1] * lat.npts[2], {0.0, 0.0, 0.0});
  for (auto& d : lat.disp)
    for (int a = 0; a < 3; ++a) d[a] = sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0;
  return lat;
}

struct SplineSample {
  std::array<double, 3> u;          // displacement
  std::array<std::array<double, 3>, 3> du;  // du[a][b] = d u_a / d x_b
};

SplineSample evaluate(const ControlLattice& lat, double x, double y, double z) {
  const double gx = x / lat.spacing, gy = y / lat.spacing, gz = z / lat.spacing;
  const int ix = static_cast<int>(std::floor(gx)), iy = static_cast<int>(std::floor(gy)),
            iz = static_cast<int>(std::floor(gz));
  const auto wx = bspline_weights(gx - ix), wy = bspline_weights(gy - iy), wz = bspline_weights(gz - iz);
  const auto dx = bspline_dweights(gx - ix), dy = bspline_dweights(gy - iy), dz = bspline_dweights(gz - iz);

  SplineSample s{};
  for (int c = 0; c < 4; ++c) {
    const int kk = iz + c;  // lattice is padded so iz+c, iy+b, ix+a stay in range
    for (int b = 0; b < 4; ++b) {
      const int jj = iy + b;
      for (int a = 0; a < 4; ++a) {
        const auto& d = lat.disp[static_cast<std::size_t>(lat.index(ix + a, jj, kk))];
        const double w = wx[a] * wy[b] * wz[c];
        const double wdx = dx[a] * wy[b] * wz[c] / lat.spacing;
        const double wdy = wx[a] * dy[b] * wz[c] / lat.spacing;
        const double wdz = wx[a] * wy[b] * dz[c] / lat.spacing;
        for (int comp = 0; comp < 3; ++comp) {
          s.u[comp] += w * d[comp];
          s.du[comp][0] += wdx * d[comp];
          s.du[comp][1] += wdy * d[comp];
          s.du[comp][2] += wdz * d[comp];
        }
      }
    }
  }
  return s;
}

double jacobian_det(const SplineSample& s) {
  double j[3][3];
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) j[a][b] = (a == b ? 1.0 : 0.0) + s.du[a][b];
  return j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) -
         j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0]) +
         j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
}

}  // namespace

vol::MultiModalCase sagittal_flip(const MultiModalCase& c, bool draw) {
  if (!draw) return c;
  MultiModalCase out = c;
  for (int ch = 0; ch < 4; ++ch) out.channels[ch] = flip_x(c.channels[ch]);
  if (c.labels) out.labels = flip_x(*c.labels);
  return out;
}

std::array<bool, 4> draw_mutes(double mute_prob, Rng& rng) {
  std::array<bool, 4> draws{};
  for (int ch = 0; ch < 4; ++ch) draws[ch] = rng.bernoulli(mute_prob);
  return draws;
}

vol::MultiModalCase channel_mute(const MultiModalCase& c, const std::array<bool, 4>& draws,
                                 double noise_mean, double noise_std, Rng& rng) {
  MultiModalCase out = c;
  for (int ch = 0; ch < 4; ++ch) {
    if (!draws[ch]) continue;
    for (auto& v : out.channels[ch].data) v = rng.normal(noise_mean, noise_std);
  }
  return out;
}

DeformResult bspline_deform(const MultiModalCase& c, const AugmentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  vol::validate_case(c);
  const vol::Shape3& grid = c.shape();

  Rng rng = Rng(seed).derive("bspline");
  ControlLattice lat = make_lattice(grid, cfg.bspline_grid, cfg.bspline_sigma, rng);

  DeformResult out;
  out.case_.case_id = c.case_id;
  for (int ch = 0; ch < 4; ++ch) {
    out.case_.channels[ch] = c.channels[ch];  // copies metadata; voxels rewritten below
  }
  VolumeU8 labels;
  const bool has_labels = c.labels.has_value();
  if (has_labels) labels = *c.labels;

  bool folded = false;
  for (int k = 0; k < grid[2]; ++k) {
    for (int j = 0; j < grid[1]; ++j) {
      for (int i = 0; i < grid[0]; ++i) {
        const SplineSample s = evaluate(lat, i, j, k);
        if (jacobian_det(s) <= 0.0) folded = true;
        const double sx = i + s.u[0], sy = j + s.u[1], sz = k + s.u[2];
        for (int ch = 0; ch < 4; ++ch)
          out.case_.channels[ch].at(i, j, k) = vol::sample_linear(c.channels[ch], sx, sy, sz);
        if (has_labels) {
          const auto nearest = [](double t, int n) {
            int v = static_cast<int>(std::floor(t + 0.5));
            return v < 0 ? 0 : (v >= n ? n - 1 : v);
          };
          labels.at(i, j, k) =
              c.labels->at(nearest(sx, grid[0]), nearest(sy, grid[1]), nearest(sz, grid[2]));
        }
      }
    }
  }

  if (has_labels) out.case_.labels = std::move(labels);
  out.folded = folded;
  return out;
}

}  // namespace cunet::augment
