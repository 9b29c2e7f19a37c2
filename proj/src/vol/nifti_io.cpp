#include "vol/nifti_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <vector>

namespace cunet::vol {

namespace {

#pragma pack(push, 1)
struct Nifti1Header {
  std::int32_t sizeof_hdr;  // must be 348
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must pack to 348 bytes");

enum NiftiType : std::int16_t {
  kDtUint8 = 2,
  kDtInt16 = 4,
  kDtInt32 = 8,
  kDtFloat32 = 16,
  kDtFloat64 = 64,
  kDtUint16 = 512,
};

template <typename T>
void swap_bytes(T& value) {
  auto* p = reinterpret_cast<unsigned char*>(&value);
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
}

void swap_header(Nifti1Header& h) {
  swap_bytes(h.sizeof_hdr);
  for (auto& d : h.dim) swap_bytes(d);
  swap_bytes(h.intent_code);
  swap_bytes(h.datatype);
  swap_bytes(h.bitpix);
  for (auto& p : h.pixdim) swap_bytes(p);
  swap_bytes(h.vox_offset);
  swap_bytes(h.scl_slope);
  swap_bytes(h.scl_inter);
  swap_bytes(h.qform_code);
  swap_bytes(h.sform_code);
  swap_bytes(h.quatern_b);
  swap_bytes(h.quatern_c);
  swap_bytes(h.quatern_d);
  swap_bytes(h.qoffset_x);
  swap_bytes(h.qoffset_y);
  swap_bytes(h.qoffset_z);
  for (auto& v : h.srow_x) swap_bytes(v);
  for (auto& v : h.srow_y) swap_bytes(v);
  for (auto& v : h.srow_z) swap_bytes(v);
}

class GzFile {
 public:
  GzFile(const std::string& path, const char* mode) : path_(path) {
    f_ = gzopen(path.c_str(), mode);
    if (!f_) throw_io("cannot open '" + path + "'");
  }
  ~GzFile() {
    if (f_) gzclose(f_);
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;

  void read(void* buf, std::size_t bytes) {
    const int got = gzread(f_, buf, static_cast<unsigned>(bytes));
    if (got < 0 || static_cast<std::size_t>(got) != bytes)
      throw_io("short read from '" + path_ + "'");
  }
  void write(const void* buf, std::size_t bytes) {
    const int put = gzwrite(f_, buf, static_cast<unsigned>(bytes));
    if (put <= 0 || static_cast<std::size_t>(put) != bytes)
      throw_io("short write to '" + path_ + "'");
  }

 private:
  std::string path_;
  gzFile f_ = nullptr;
};

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct RawImage {
  Shape3 shape;
  std::array<double, 3> spacing;
  Affine affine;
  std::vector<double> data;
};

template <typename T>
void read_voxels(GzFile& f, std::size_t n, bool swap, double slope, double inter, std::vector<double>& out) {
  std::vector<T> raw(n);
  f.read(raw.data(), n * sizeof(T));
  if (swap)
    for (auto& v : raw) swap_bytes(v);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(raw[i]) * slope + inter;
}

RawImage read_raw(const std::string& path) {
  GzFile f(path, "rb");
  Nifti1Header h{};
  f.read(&h, sizeof(h));

  bool swap = false;
  if (h.sizeof_hdr != 348) {
    swap_header(h);
    swap = true;
    if (h.sizeof_hdr != 348) throw_io("'" + path + "' is not a NIfTI-1 file");
  }
  if (std::strncmp(h.magic, "n+1", 3) != 0)
    throw_io("'" + path + "' is not a single-file NIfTI-1 image (magic mismatch)");

  const int ndim = h.dim[0];
  if (ndim < 3 || ndim > 7) throw_io("'" + path + "' has unsupported dimensionality " + std::to_string(ndim));
  for (int d = 4; d <= ndim; ++d)
    if (h.dim[d] > 1) throw_io("'" + path + "' has a non-scalar extra dimension; expected a 3D volume");

  RawImage img;
  img.shape = {h.dim[1], h.dim[2], h.dim[3]};
  if (voxel_count(img.shape) <= 0) throw_io("'" + path + "' has an empty grid");
  for (int a = 0; a < 3; ++a) img.spacing[a] = h.pixdim[a + 1] != 0.0f ? std::abs(h.pixdim[a + 1]) : 1.0;

  if (h.sform_code > 0) {
    for (int j = 0; j < 4; ++j) {
      img.affine.m[0][j] = h.srow_x[j];
      img.affine.m[1][j] = h.srow_y[j];
      img.affine.m[2][j] = h.srow_z[j];
    }
  } else {
    // qform rotations are rare in this pipeline's data; fall back to a
    // spacing-scaled axis-aligned mapping with the qform offset.
    img.affine = Affine::from_spacing(img.spacing, {h.qoffset_x, h.qoffset_y, h.qoffset_z});
  }

  double slope = h.scl_slope;
  double inter = h.scl_inter;
  if (slope == 0.0) {
    slope = 1.0;
    inter = 0.0;
  }

  const long offset = static_cast<long>(h.vox_offset);
  if (offset > 348) {
    std::vector<char> skip(static_cast<std::size_t>(offset) - 348);
    f.read(skip.data(), skip.size());
  }

  const std::size_t n = static_cast<std::size_t>(voxel_count(img.shape));
  switch (h.datatype) {
    case kDtUint8: read_voxels<std::uint8_t>(f, n, swap, slope, inter, img.data); break;
    case kDtInt16: read_voxels<std::int16_t>(f, n, swap, slope, inter, img.data); break;
    case kDtUint16: read_voxels<std::uint16_t>(f, n, swap, slope, inter, img.data); break;
    case kDtInt32: read_voxels<std::int32_t>(f, n, swap, slope, inter, img.data); break;
    case kDtFloat32: read_voxels<float>(f, n, swap, slope, inter, img.data); break;
    case kDtFloat64: read_voxels<double>(f, n, swap, slope, inter, img.data); break;
    default: throw_io("'" + path + "' uses unsupported NIfTI datatype " + std::to_string(h.datatype));
  }
  return img;
}

Nifti1Header make_header(const Shape3& shape, const std::array<double, 3>& spacing, const Affine& affine,
                         std::int16_t datatype, std::int16_t bitpix) {
  Nifti1Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = static_cast<std::int16_t>(shape[0]);
  h.dim[2] = static_cast<std::int16_t>(shape[1]);
  h.dim[3] = static_cast<std::int16_t>(shape[2]);
  for (int d = 4; d < 8; ++d) h.dim[d] = 1;
  h.datatype = datatype;
  h.bitpix = bitpix;
  h.pixdim[0] = 1.0f;
  for (int a = 0; a < 3; ++a) h.pixdim[a + 1] = static_cast<float>(spacing[a]);
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2;  // millimetres
  h.sform_code = 1;
  h.qform_code = 0;
  for (int j = 0; j < 4; ++j) {
    h.srow_x[j] = static_cast<float>(affine.m[0][j]);
    h.srow_y[j] = static_cast<float>(affine.m[1][j]);
    h.srow_z[j] = static_cast<float>(affine.m[2][j]);
  }
  std::memcpy(h.magic, "n+1", 4);
  return h;
}

void write_raw(const std::string& path, const Nifti1Header& h, const void* voxels, std::size_t bytes) {
  // "T" writes transparently (no gzip framing) so plain .nii stays plain.
  const char* mode = ends_with(path, ".gz") ? "wb" : "wbT";
  GzFile f(path, mode);
  f.write(&h, sizeof(h));
  const char pad[4] = {0, 0, 0, 0};
  f.write(pad, 4);
  f.write(voxels, bytes);
}

}  // namespace

VolumeD read_nifti(const std::string& path) {
  RawImage img = read_raw(path);
  VolumeD v;
  v.shape = img.shape;
  v.spacing = img.spacing;
  v.affine = img.affine;
  v.data = std::move(img.data);
  return v;
}

VolumeU8 read_nifti_labels(const std::string& path) {
  RawImage img = read_raw(path);
  VolumeU8 v;
  v.shape = img.shape;
  v.spacing = img.spacing;
  v.affine = img.affine;
  v.data.resize(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double x = img.data[i];
    const double r = std::nearbyint(x);
    if (std::abs(x - r) > 1e-6 || r < 0.0 || r > 255.0)
      throw_data("label volume '" + path + "' contains non-integer value " + std::to_string(x));
    v.data[i] = static_cast<std::uint8_t>(r);
  }
  return v;
}

void write_nifti(const std::string& path, const VolumeD& v) {
  Nifti1Header h = make_header(v.shape, v.spacing, v.affine, kDtFloat64, 64);
  write_raw(path, h, v.data.data(), v.data.size() * sizeof(double));
}

void write_nifti(const std::string& path, const VolumeU8& v) {
  Nifti1Header h = make_header(v.shape, v.spacing, v.affine, kDtUint8, 8);
  write_raw(path, h, v.data.data(), v.data.size());
}

}  // namespace cunet::vol
