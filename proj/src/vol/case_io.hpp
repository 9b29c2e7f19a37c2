#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vol/volume.hpp"

namespace cunet::vol {

// BraTS layout: <dir>/<case_id>_<suffix>.nii[.gz] with suffixes
// t1, t1ce, t2, flair and optional seg. case_id is the directory name.
MultiModalCase load_case(const std::filesystem::path& case_dir);

// Writes the same layout (channels as float64, labels as uint8, gzipped).
void save_case(const MultiModalCase& c, const std::filesystem::path& parent_dir);

bool is_case_dir(const std::filesystem::path& dir);

// Case subdirectories of a dataset directory, sorted by case id.
std::vector<std::filesystem::path> list_case_dirs(const std::filesystem::path& dataset_dir);

}  // namespace cunet::vol
