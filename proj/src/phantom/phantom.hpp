#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>

#include "vol/volume.hpp"

namespace cunet::phantom {

// Tissue classes of the synthetic case. Label values follow the dataset
// convention: necrotic centre 1, edema 2, enhancing rim 4.
enum class Tissue : int { Background = 0, Healthy = 1, Edema = 2, Enhancing = 3, Necrotic = 4 };

struct Ellipsoid {
  std::array<double, 3> center{};  // voxel coordinates
  std::array<double, 3> radii{};   // semi-axes in voxels

  bool contains(double x, double y, double z) const {
    const double a = (x - center[0]) / radii[0];
    const double b = (y - center[1]) / radii[1];
    const double c = (z - center[2]) / radii[2];
    return a * a + b * b + c * c <= 1.0;
  }
};

struct PhantomSpec {
  vol::Shape3 grid{48, 48, 48};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};

  // Brain support; centred on the grid by default (set center to NaN-free
  // values to override, see make_default()).
  std::array<double, 3> brain_radii{19.0, 18.0, 16.0};

  // Nested lesion: edema contains the enhancing rim, which contains the
  // necrotic centre. Offsets are relative to the brain centre and chosen
  // off-centre so orientation-sensitive tests have signal.
  std::array<double, 3> lesion_offset{6.0, 2.0, -3.0};
  std::array<double, 3> edema_radii{9.0, 8.0, 7.0};
  std::array<double, 3> rim_radii{6.0, 5.5, 5.0};
  std::array<double, 3> core_radii{3.0, 3.0, 2.5};

  // Mean intensity per tissue and modality (T1, T1ce, T2, FLAIR). The default
  // table makes every tissue pair separable by some modality while no single
  // modality separates all tissues, so fusion across channels carries signal.
  std::array<std::array<double, 4>, 4> intensities{{
      {100.0, 100.0, 80.0, 70.0},   // healthy
      {100.0, 100.0, 120.0, 110.0}, // edema
      {110.0, 160.0, 80.0, 110.0},  // enhancing
      {60.0, 60.0, 120.0, 70.0},    // necrotic
  }};
  double noise_std = 4.0;
  std::uint64_t seed = 7;

  std::string case_id = "phantom";
};

// Exact construction-time bookkeeping.
struct PhantomBook {
  std::map<int, std::int64_t> label_counts;          // per label value (1, 2, 4)
  std::int64_t brain_voxels = 0;                     // ellipsoid support size
  std::map<int, std::array<double, 3>> label_centroids;  // voxel-space centroids
};

struct PhantomResult {
  vol::MultiModalCase case_;
  PhantomBook book;
};

PhantomResult generate_phantom(const PhantomSpec& spec);

}  // namespace cunet::phantom
