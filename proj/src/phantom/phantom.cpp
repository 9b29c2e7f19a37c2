#include "phantom/phantom.hpp"

#include "common/rng.hpp"

namespace cunet::phantom {

namespace {

int label_for(Tissue t) {
  switch (t) {
    case Tissue::Necrotic: return 1;
    case Tissue::Edema: return 2;
    case Tissue::Enhancing: return 4;
    default: return 0;
  }
}

int intensity_row(Tissue t) {
  switch (t) {
    case Tissue::Healthy: return 0;
    case Tissue::Edema: return 1;
    case Tissue::Enhancing: return 2;
    case Tissue::Necrotic: return 3;
    default: return -1;
  }
}

}  // namespace

PhantomResult generate_phantom(const PhantomSpec& spec) {
  for (int a = 0; a < 3; ++a) {
    if (spec.grid[a] <= 0) throw_argument("phantom grid must be positive");
    if (spec.brain_radii[a] <= 0 || spec.edema_radii[a] <= 0 || spec.rim_radii[a] <= 0 || spec.core_radii[a] <= 0)
      throw_argument("phantom radii must be positive");
    if (!(spec.core_radii[a] < spec.rim_radii[a] && spec.rim_radii[a] < spec.edema_radii[a]))
      throw_argument("phantom lesion radii must be strictly nested (core < rim < edema)");
  }

  const std::array<double, 3> center{(spec.grid[0] - 1) / 2.0, (spec.grid[1] - 1) / 2.0,
                                     (spec.grid[2] - 1) / 2.0};
  const Ellipsoid brain{center, spec.brain_radii};
  std::array<double, 3> lesion_center{};
  for (int a = 0; a < 3; ++a) lesion_center[a] = center[a] + spec.lesion_offset[a];
  const Ellipsoid edema{lesion_center, spec.edema_radii};
  const Ellipsoid rim{lesion_center, spec.rim_radii};
  const Ellipsoid core{lesion_center, spec.core_radii};

  PhantomResult out;
  out.case_.case_id = spec.case_id;
  const vol::Affine affine = vol::Affine::from_spacing(spec.spacing);
  for (int ch = 0; ch < 4; ++ch) {
    out.case_.channels[ch] = vol::VolumeD(spec.grid);
    out.case_.channels[ch].spacing = spec.spacing;
    out.case_.channels[ch].affine = affine;
  }
  vol::VolumeU8 labels(spec.grid);
  labels.spacing = spec.spacing;
  labels.affine = affine;

  Rng rng = Rng(spec.seed).derive(spec.case_id);
  PhantomBook& book = out.book;
  for (int lbl : {1, 2, 4}) {
    book.label_counts[lbl] = 0;
    book.label_centroids[lbl] = {0.0, 0.0, 0.0};
  }

  for (int k = 0; k < spec.grid[2]; ++k) {
    for (int j = 0; j < spec.grid[1]; ++j) {
      for (int i = 0; i < spec.grid[0]; ++i) {
        const double x = i, y = j, z = k;
        Tissue tissue = Tissue::Background;
        if (brain.contains(x, y, z)) {
          tissue = Tissue::Healthy;
          if (edema.contains(x, y, z)) {
            tissue = Tissue::Edema;
            if (rim.contains(x, y, z)) tissue = core.contains(x, y, z) ? Tissue::Necrotic : Tissue::Enhancing;
          }
        } else if (edema.contains(x, y, z)) {
          throw_data("phantom lesion exceeds the brain ellipsoid at voxel " + std::to_string(i) + "," +
                     std::to_string(j) + "," + std::to_string(k));
        }

        if (tissue == Tissue::Background) continue;

        book.brain_voxels += 1;
        const int row = intensity_row(tissue);
        for (int ch = 0; ch < 4; ++ch) {
          double v = spec.intensities[row][ch];
          if (spec.noise_std > 0.0) v += rng.normal(0.0, spec.noise_std);
          out.case_.channels[ch].at(i, j, k) = v;
        }
        const int lbl = label_for(tissue);
        if (lbl != 0) {
          labels.at(i, j, k) = static_cast<std::uint8_t>(lbl);
          book.label_counts[lbl] += 1;
          auto& cen = book.label_centroids[lbl];
          cen[0] += x;
          cen[1] += y;
          cen[2] += z;
        }
      }
    }
  }

  for (int lbl : {1, 2, 4}) {
    const auto n = book.label_counts[lbl];
    if (n > 0)
      for (int a = 0; a < 3; ++a) book.label_centroids[lbl][a] /= static_cast<double>(n);
  }

  out.case_.labels = std::move(labels);
  vol::validate_case(out.case_);
  return out;
}

}  // namespace cunet::phantom
