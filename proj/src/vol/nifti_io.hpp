#pragma once

#include <string>

#include "vol/volume.hpp"

namespace cunet::vol {

// Minimal NIfTI-1 single-file reader/writer (.nii and .nii.gz).
// Reading accepts uint8/int16/uint16/int32/float32/float64 voxels and applies
// scl_slope/scl_inter; writing emits float64 for intensities and uint8 for
// label volumes, so a save/load round trip is bit-exact.
VolumeD read_nifti(const std::string& path);
VolumeU8 read_nifti_labels(const std::string& path);

void write_nifti(const std::string& path, const VolumeD& v);
void write_nifti(const std::string& path, const VolumeU8& v);

}  // namespace cunet::vol
