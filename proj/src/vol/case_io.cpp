#include "vol/case_io.hpp"

#include <algorithm>

#include "vol/nifti_io.hpp"

namespace fs = std::filesystem;

namespace cunet::vol {

namespace {

// Returns the existing modality file path, preferring .nii.gz.
fs::path find_component(const fs::path& dir, const std::string& base, const std::string& suffix) {
  const fs::path gz = dir / (base + "_" + suffix + ".nii.gz");
  if (fs::exists(gz)) return gz;
  const fs::path plain = dir / (base + "_" + suffix + ".nii");
  if (fs::exists(plain)) return plain;
  return {};
}

}  // namespace

bool is_case_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) return false;
  return !find_component(dir, dir.filename().string(), "t1").empty();
}

MultiModalCase load_case(const fs::path& case_dir) {
  if (!fs::is_directory(case_dir)) throw_io("case directory '" + case_dir.string() + "' does not exist");
  MultiModalCase c;
  c.case_id = case_dir.filename().string();
  for (int ch = 0; ch < 4; ++ch) {
    const fs::path p = find_component(case_dir, c.case_id, kModalitySuffix[ch]);
    if (p.empty())
      throw_io("modality " + std::string(kModalitySuffix[ch]) + " not found in '" + case_dir.string() + "'");
    c.channels[ch] = read_nifti(p.string());
  }
  const fs::path seg = find_component(case_dir, c.case_id, "seg");
  if (!seg.empty()) c.labels = read_nifti_labels(seg.string());
  validate_case(c);
  return c;
}

void save_case(const MultiModalCase& c, const fs::path& parent_dir) {
  validate_case(c);
  const fs::path dir = parent_dir / c.case_id;
  fs::create_directories(dir);
  for (int ch = 0; ch < 4; ++ch)
    write_nifti((dir / (c.case_id + "_" + kModalitySuffix[ch] + ".nii.gz")).string(), c.channels[ch]);
  if (c.labels) write_nifti((dir / (c.case_id + "_seg.nii.gz")).string(), *c.labels);
}

std::vector<fs::path> list_case_dirs(const fs::path& dataset_dir) {
  if (!fs::is_directory(dataset_dir)) throw_io("dataset directory '" + dataset_dir.string() + "' does not exist");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(dataset_dir))
    if (is_case_dir(entry.path())) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace cunet::vol
