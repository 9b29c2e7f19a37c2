#include "nn/layers.hpp"

#include <cblas.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <mutex>

extern "C" void openblas_set_num_threads(int);

namespace cunet::nn {

namespace {

std::once_flag g_blas_once;

void ensure_single_thread_blas() {
  // All coarse parallelism lives in OpenMP; nested BLAS threading would be
  // both slower and a determinism hazard.
  std::call_once(g_blas_once, [] { openblas_set_num_threads(1); });
}

constexpr std::int64_t kColBudgetDoubles = 6'000'000;  // ~48 MB im2col slab

}  // namespace

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
  ensure_single_thread_blas();
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// ---------------------------------------------------------------------------
// Conv3d
// ---------------------------------------------------------------------------

Conv3d::Conv3d(std::string name, int c_in, int c_out, int kernel, int stride, int pad, int groups,
               bool with_bias)
    : name_(std::move(name)),
      c_in_(c_in),
      c_out_(c_out),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      groups_(groups),
      with_bias_(with_bias) {
  if (kernel != 1 && kernel != 3) throw_internal(name_ + ": kernel must be 1 or 3");
  if (stride != 1 && stride != 2) throw_internal(name_ + ": stride must be 1 or 2");
  if (groups < 1 || c_in % groups != 0 || c_out % groups != 0)
    throw_internal(name_ + ": channel counts must divide groups");
  weight_.name = name_ + ".w";
  weight_.kind = ParamKind::KernelWeight;
  weight_.resize({c_out, c_in / groups, kernel, kernel, kernel});
  if (with_bias_) {
    bias_.name = name_ + ".b";
    bias_.kind = ParamKind::Bias;
    bias_.resize({c_out});
  }
}

void Conv3d::init(Rng& rng) {
  const double fan_in = static_cast<double>(c_in_ / groups_) * kernel_ * kernel_ * kernel_;
  const double std = std::sqrt(2.0 / fan_in);
  for (auto& v : weight_.value) v = rng.normal(0.0, std);
  if (with_bias_) std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

void Conv3d::collect(std::vector<Param*>& out) {
  out.push_back(&weight_);
  if (with_bias_) out.push_back(&bias_);
}

std::array<int, 3> Conv3d::output_spatial(int d, int h, int w) const {
  const auto out_dim = [&](int n) { return (n + 2 * pad_ - kernel_) / stride_ + 1; };
  return {out_dim(d), out_dim(h), out_dim(w)};
}

void Conv3d::check_input(const Tensor& x) const {
  if (x.c != c_in_)
    throw_internal(name_ + ": expected " + std::to_string(c_in_) + " input channels, got " + std::to_string(x.c));
  const auto os = output_spatial(x.d, x.h, x.w);
  if (os[0] < 1 || os[1] < 1 || os[2] < 1)
    throw_internal(name_ + ": input " + x.shape_string() + " too small for this kernel/stride");
}

namespace {

// Patch matrix for one group and one contiguous range of output z-slices.
// Rows: (c_in_per_group * k^3); columns: slab output voxels.
void im2col_slab(const Tensor& x, int group_cin_base, int cg_in, int kernel, int stride, int pad,
                 int z0, int z1, int out_h, int out_w, std::vector<double>& col) {
  const std::int64_t cols = static_cast<std::int64_t>(z1 - z0) * out_h * out_w;
  const int rows = cg_in * kernel * kernel * kernel;
  col.resize(static_cast<std::size_t>(rows) * cols);

#pragma omp parallel for schedule(static)
  for (int row = 0; row < rows; ++row) {
    const int e = row % kernel;
    const int b = (row / kernel) % kernel;
    const int a = (row / (kernel * kernel)) % kernel;
    const int ci = row / (kernel * kernel * kernel);
    const double* src = x.channel(group_cin_base + ci);
    double* dst = col.data() + static_cast<std::size_t>(row) * cols;
    std::int64_t idx = 0;
    for (int zo = z0; zo < z1; ++zo) {
      const int zi = zo * stride - pad + a;
      const bool z_ok = zi >= 0 && zi < x.d;
      for (int yo = 0; yo < out_h; ++yo) {
        const int yi = yo * stride - pad + b;
        const bool y_ok = yi >= 0 && yi < x.h;
        if (!z_ok || !y_ok) {
          for (int xo = 0; xo < out_w; ++xo) dst[idx++] = 0.0;
          continue;
        }
        const double* line = src + (static_cast<std::size_t>(zi) * x.h + yi) * x.w;
        for (int xo = 0; xo < out_w; ++xo) {
          const int xi = xo * stride - pad + e;
          dst[idx++] = (xi >= 0 && xi < x.w) ? line[xi] : 0.0;
        }
      }
    }
  }
}

// Transpose of im2col_slab: scatter-adds dcol back into the input gradient.
// Parallel over input channels; each channel's taps stay on one thread.
void col2im_slab(Tensor& gx, int group_cin_base, int cg_in, int kernel, int stride, int pad, int z0,
                 int z1, int out_h, int out_w, const std::vector<double>& col) {
  const std::int64_t cols = static_cast<std::int64_t>(z1 - z0) * out_h * out_w;

#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < cg_in; ++ci) {
    double* dst = gx.channel(group_cin_base + ci);
    for (int a = 0; a < kernel; ++a) {
      for (int b = 0; b < kernel; ++b) {
        for (int e = 0; e < kernel; ++e) {
          const int row = ((ci * kernel + a) * kernel + b) * kernel + e;
          const double* src = col.data() + static_cast<std::size_t>(row) * cols;
          std::int64_t idx = 0;
          for (int zo = z0; zo < z1; ++zo) {
            const int zi = zo * stride - pad + a;
            const bool z_ok = zi >= 0 && zi < gx.d;
            for (int yo = 0; yo < out_h; ++yo) {
              const int yi = yo * stride - pad + b;
              if (!z_ok || yi < 0 || yi >= gx.h) {
                idx += out_w;
                continue;
              }
              double* line = dst + (static_cast<std::size_t>(zi) * gx.h + yi) * gx.w;
              for (int xo = 0; xo < out_w; ++xo, ++idx) {
                const int xi = xo * stride - pad + e;
                if (xi >= 0 && xi < gx.w) line[xi] += src[idx];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor Conv3d::forward(const Tensor& x, bool cache) {
  check_input(x);
  const auto os = output_spatial(x.d, x.h, x.w);
  Tensor out(c_out_, os[0], os[1], os[2]);
  const int cg_in = c_in_ / groups_;
  const int cg_out = c_out_ / groups_;
  const int rows = cg_in * kernel_ * kernel_ * kernel_;
  const std::int64_t out_plane = static_cast<std::int64_t>(os[1]) * os[2];
  const std::int64_t out_spatial = out.spatial();

  if (kernel_ == 1 && stride_ == 1) {
    // Pointwise: the input itself is the patch matrix.
#pragma omp parallel for schedule(static)
    for (int g = 0; g < groups_; ++g) {
      gemm(false, false, cg_out, static_cast<int>(x.spatial()), cg_in, 1.0,
           weight_.value.data() + static_cast<std::size_t>(g) * cg_out * rows, rows,
           x.channel(g * cg_in), static_cast<int>(x.spatial()), 0.0, out.channel(g * cg_out),
           static_cast<int>(out_spatial));
    }
  } else {
    const int slab = std::max<int>(1, static_cast<int>(kColBudgetDoubles / std::max<std::int64_t>(1, rows * out_plane)));
    std::vector<double> col;
    for (int z0 = 0; z0 < os[0]; z0 += slab) {
      const int z1 = std::min(os[0], z0 + slab);
      const std::int64_t cols = static_cast<std::int64_t>(z1 - z0) * out_plane;
      for (int g = 0; g < groups_; ++g) {
        im2col_slab(x, g * cg_in, cg_in, kernel_, stride_, pad_, z0, z1, os[1], os[2], col);
        gemm(false, false, cg_out, static_cast<int>(cols), rows, 1.0,
             weight_.value.data() + static_cast<std::size_t>(g) * cg_out * rows, rows, col.data(),
             static_cast<int>(cols), 0.0, out.channel(g * cg_out) + z0 * out_plane,
             static_cast<int>(out_spatial));
      }
    }
  }

  if (with_bias_) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < c_out_; ++co) {
      double* p = out.channel(co);
      const double b = bias_.value[co];
      for (std::int64_t i = 0; i < out_spatial; ++i) p[i] += b;
    }
  }

  if (cache) {
    cached_input_ = x;
    has_cache_ = true;
  }
  return out;
}

Tensor Conv3d::backward(const Tensor& gy) {
  if (!has_cache_) throw_internal(name_ + ": backward without cached forward");
  const Tensor& x = cached_input_;
  const auto os = output_spatial(x.d, x.h, x.w);
  if (gy.c != c_out_ || gy.d != os[0] || gy.h != os[1] || gy.w != os[2])
    throw_internal(name_ + ": gradient shape mismatch");

  Tensor gx(x.c, x.d, x.h, x.w);
  const int cg_in = c_in_ / groups_;
  const int cg_out = c_out_ / groups_;
  const int rows = cg_in * kernel_ * kernel_ * kernel_;
  const std::int64_t out_plane = static_cast<std::int64_t>(os[1]) * os[2];
  const std::int64_t out_spatial = gy.spatial();

  if (with_bias_) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < c_out_; ++co) {
      const double* p = gy.channel(co);
      double s = 0.0;
      for (std::int64_t i = 0; i < out_spatial; ++i) s += p[i];
      bias_.grad[co] += s;
    }
  }

  if (kernel_ == 1 && stride_ == 1) {
#pragma omp parallel for schedule(static)
    for (int g = 0; g < groups_; ++g) {
      // dW += gy * x^T
      gemm(false, true, cg_out, rows, static_cast<int>(out_spatial), 1.0, gy.channel(g * cg_out),
           static_cast<int>(out_spatial), x.channel(g * cg_in), static_cast<int>(x.spatial()), 1.0,
           weight_.grad.data() + static_cast<std::size_t>(g) * cg_out * rows, rows);
      // dx = W^T * gy
      gemm(true, false, rows, static_cast<int>(out_spatial), cg_out, 1.0,
           weight_.value.data() + static_cast<std::size_t>(g) * cg_out * rows, rows,
           gy.channel(g * cg_out), static_cast<int>(out_spatial), 1.0, gx.channel(g * cg_in),
           static_cast<int>(gx.spatial()));
    }
  } else {
    const int slab = std::max<int>(1, static_cast<int>(kColBudgetDoubles / std::max<std::int64_t>(1, rows * out_plane)));
    std::vector<double> col, dcol;
    for (int z0 = 0; z0 < os[0]; z0 += slab) {
      const int z1 = std::min(os[0], z0 + slab);
      const std::int64_t cols = static_cast<std::int64_t>(z1 - z0) * out_plane;
      dcol.resize(static_cast<std::size_t>(rows) * cols);
      for (int g = 0; g < groups_; ++g) {
        im2col_slab(x, g * cg_in, cg_in, kernel_, stride_, pad_, z0, z1, os[1], os[2], col);
        gemm(false, true, cg_out, rows, static_cast<int>(cols), 1.0,
             gy.channel(g * cg_out) + z0 * out_plane, static_cast<int>(out_spatial), col.data(),
             static_cast<int>(cols), 1.0,
             weight_.grad.data() + static_cast<std::size_t>(g) * cg_out * rows, rows);
        gemm(true, false, rows, static_cast<int>(cols), cg_out, 1.0,
             weight_.value.data() + static_cast<std::size_t>(g) * cg_out * rows, rows,
             gy.channel(g * cg_out) + z0 * out_plane, static_cast<int>(out_spatial), 0.0, dcol.data(),
             static_cast<int>(cols));
        col2im_slab(gx, g * cg_in, cg_in, kernel_, stride_, pad_, z0, z1, os[1], os[2], dcol);
      }
    }
  }

  cached_input_ = Tensor();
  has_cache_ = false;
  return gx;
}

// ---------------------------------------------------------------------------
// ConvTranspose3d (kernel 2, stride 2)
// ---------------------------------------------------------------------------

ConvTranspose3d::ConvTranspose3d(std::string name, int c_in, int c_out, bool with_bias)
    : name_(std::move(name)), c_in_(c_in), c_out_(c_out), with_bias_(with_bias) {
  weight_.name = name_ + ".w";
  weight_.kind = ParamKind::KernelWeight;
  weight_.resize({c_in, c_out, 2, 2, 2});
  if (with_bias_) {
    bias_.name = name_ + ".b";
    bias_.kind = ParamKind::Bias;
    bias_.resize({c_out});
  }
}

void ConvTranspose3d::init(Rng& rng) {
  const double std = std::sqrt(2.0 / static_cast<double>(c_in_));
  for (auto& v : weight_.value) v = rng.normal(0.0, std);
  if (with_bias_) std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

void ConvTranspose3d::collect(std::vector<Param*>& out) {
  out.push_back(&weight_);
  if (with_bias_) out.push_back(&bias_);
}

Tensor ConvTranspose3d::forward(const Tensor& x, bool cache) {
  if (x.c != c_in_) throw_internal(name_ + ": input channel mismatch");
  Tensor out(c_out_, x.d * 2, x.h * 2, x.w * 2);
  const std::int64_t pin = x.spatial();

  // Pack (c_in, c_out, offset) weights into one (c_out x c_in) matrix per
  // corner offset; each offset then becomes a plain GEMM plus a scatter.
  std::vector<double> packed(static_cast<std::size_t>(8) * c_out_ * c_in_);
  for (int ci = 0; ci < c_in_; ++ci)
    for (int co = 0; co < c_out_; ++co)
      for (int o = 0; o < 8; ++o)
        packed[(static_cast<std::size_t>(o) * c_out_ + co) * c_in_ + ci] =
            weight_.value[(static_cast<std::size_t>(ci) * c_out_ + co) * 8 + o];

  std::vector<double> tmp(static_cast<std::size_t>(c_out_) * pin);
  for (int o = 0; o < 8; ++o) {
    const int a = (o >> 2) & 1, b = (o >> 1) & 1, e = o & 1;
    gemm(false, false, c_out_, static_cast<int>(pin), c_in_, 1.0,
         packed.data() + static_cast<std::size_t>(o) * c_out_ * c_in_, c_in_, x.v.data(),
         static_cast<int>(pin), 0.0, tmp.data(), static_cast<int>(pin));
#pragma omp parallel for schedule(static)
    for (int co = 0; co < c_out_; ++co) {
      const double* src = tmp.data() + static_cast<std::size_t>(co) * pin;
      double* dst = out.channel(co);
      std::int64_t idx = 0;
      for (int z = 0; z < x.d; ++z)
        for (int y = 0; y < x.h; ++y) {
          double* line = dst + (static_cast<std::size_t>(2 * z + a) * out.h + (2 * y + b)) * out.w;
          for (int xx = 0; xx < x.w; ++xx, ++idx) line[2 * xx + e] = src[idx];
        }
    }
  }

  if (with_bias_) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < c_out_; ++co) {
      double* p = out.channel(co);
      const double bv = bias_.value[co];
      for (std::int64_t i = 0; i < out.spatial(); ++i) p[i] += bv;
    }
  }

  if (cache) {
    cached_input_ = x;
    has_cache_ = true;
  }
  return out;
}

Tensor ConvTranspose3d::backward(const Tensor& gy) {
  if (!has_cache_) throw_internal(name_ + ": backward without cached forward");
  const Tensor& x = cached_input_;
  if (gy.c != c_out_ || gy.d != x.d * 2 || gy.h != x.h * 2 || gy.w != x.w * 2)
    throw_internal(name_ + ": gradient shape mismatch");

  const std::int64_t pin = x.spatial();
  Tensor gx(x.c, x.d, x.h, x.w);
  std::vector<double> gathered(static_cast<std::size_t>(c_out_) * pin);
  std::vector<double> dpacked(static_cast<std::size_t>(c_out_) * c_in_);

  if (with_bias_) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < c_out_; ++co) {
      const double* p = gy.channel(co);
      double s = 0.0;
      for (std::int64_t i = 0; i < gy.spatial(); ++i) s += p[i];
      bias_.grad[co] += s;
    }
  }

  for (int o = 0; o < 8; ++o) {
    const int a = (o >> 2) & 1, b = (o >> 1) & 1, e = o & 1;
#pragma omp parallel for schedule(static)
    for (int co = 0; co < c_out_; ++co) {
      double* dst = gathered.data() + static_cast<std::size_t>(co) * pin;
      const double* src = gy.channel(co);
      std::int64_t idx = 0;
      for (int z = 0; z < x.d; ++z)
        for (int y = 0; y < x.h; ++y) {
          const double* line = src + (static_cast<std::size_t>(2 * z + a) * gy.h + (2 * y + b)) * gy.w;
          for (int xx = 0; xx < x.w; ++xx, ++idx) dst[idx] = line[2 * xx + e];
        }
    }

    // dW for this offset: gy_o * x^T, scattered back to the packed layout.
    gemm(false, true, c_out_, c_in_, static_cast<int>(pin), 1.0, gathered.data(),
         static_cast<int>(pin), x.v.data(), static_cast<int>(pin), 0.0, dpacked.data(), c_in_);
    for (int ci = 0; ci < c_in_; ++ci)
      for (int co = 0; co < c_out_; ++co)
        weight_.grad[(static_cast<std::size_t>(ci) * c_out_ + co) * 8 + o] +=
            dpacked[static_cast<std::size_t>(co) * c_in_ + ci];

    // dx += W_o^T * gy_o. Pack W_o as (c_out x c_in) like in forward.
    std::vector<double> packed(static_cast<std::size_t>(c_out_) * c_in_);
    for (int ci = 0; ci < c_in_; ++ci)
      for (int co = 0; co < c_out_; ++co)
        packed[static_cast<std::size_t>(co) * c_in_ + ci] =
            weight_.value[(static_cast<std::size_t>(ci) * c_out_ + co) * 8 + o];
    gemm(true, false, c_in_, static_cast<int>(pin), c_out_, 1.0, packed.data(), c_in_,
         gathered.data(), static_cast<int>(pin), 1.0, gx.v.data(), static_cast<int>(pin));
  }

  cached_input_ = Tensor();
  has_cache_ = false;
  return gx;
}

// ---------------------------------------------------------------------------
// InstanceNorm
// ---------------------------------------------------------------------------

InstanceNorm::InstanceNorm(std::string name, int channels, double eps)
    : name_(std::move(name)), channels_(channels), eps_(eps) {
  scale_.name = name_ + ".g";
  scale_.kind = ParamKind::NormScale;
  scale_.resize({channels});
  shift_.name = name_ + ".b";
  shift_.kind = ParamKind::NormShift;
  shift_.resize({channels});
  std::fill(scale_.value.begin(), scale_.value.end(), 1.0);
}

void InstanceNorm::init(Rng&) {
  std::fill(scale_.value.begin(), scale_.value.end(), 1.0);
  std::fill(shift_.value.begin(), shift_.value.end(), 0.0);
}

void InstanceNorm::collect(std::vector<Param*>& out) {
  out.push_back(&scale_);
  out.push_back(&shift_);
}

Tensor InstanceNorm::forward(const Tensor& x, bool cache) {
  if (x.c != channels_) throw_internal(name_ + ": channel mismatch");
  Tensor out(x.c, x.d, x.h, x.w);
  Tensor hat(x.c, x.d, x.h, x.w);
  std::vector<double> inv_std(static_cast<std::size_t>(channels_));
  const std::int64_t p = x.spatial();

#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < channels_; ++ci) {
    const double* src = x.channel(ci);
    double mean = 0.0;
    for (std::int64_t i = 0; i < p; ++i) mean += src[i];
    mean /= static_cast<double>(p);
    double var = 0.0;
    for (std::int64_t i = 0; i < p; ++i) {
      const double d = src[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(p);
    const double is = 1.0 / std::sqrt(var + eps_);
    inv_std[ci] = is;
    const double g = scale_.value[ci], b = shift_.value[ci];
    double* ho = hat.channel(ci);
    double* po = out.channel(ci);
    for (std::int64_t i = 0; i < p; ++i) {
      const double xh = (src[i] - mean) * is;
      ho[i] = xh;
      po[i] = g * xh + b;
    }
  }

  if (cache) {
    cached_hat_ = std::move(hat);
    cached_inv_std_ = std::move(inv_std);
    has_cache_ = true;
  }
  return out;
}

Tensor InstanceNorm::backward(const Tensor& gy) {
  if (!has_cache_) throw_internal(name_ + ": backward without cached forward");
  const Tensor& hat = cached_hat_;
  if (!gy.same_shape(hat)) throw_internal(name_ + ": gradient shape mismatch");
  Tensor gx(gy.c, gy.d, gy.h, gy.w);
  const std::int64_t p = gy.spatial();

#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < channels_; ++ci) {
    const double* g = gy.channel(ci);
    const double* xh = hat.channel(ci);
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::int64_t i = 0; i < p; ++i) {
      sum_g += g[i];
      sum_gx += g[i] * xh[i];
    }
    scale_.grad[ci] += sum_gx;
    shift_.grad[ci] += sum_g;
    const double mean_g = sum_g / static_cast<double>(p);
    const double mean_gx = sum_gx / static_cast<double>(p);
    const double a = scale_.value[ci] * cached_inv_std_[ci];
    double* out = gx.channel(ci);
    for (std::int64_t i = 0; i < p; ++i) out[i] = a * (g[i] - mean_g - xh[i] * mean_gx);
  }

  cached_hat_ = Tensor();
  cached_inv_std_.clear();
  has_cache_ = false;
  return gx;
}

// ---------------------------------------------------------------------------
// ReLU / MaxMerge / Softmax
// ---------------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, bool cache) {
  Tensor out(x.c, x.d, x.h, x.w);
  if (cache) cached_positive_.assign(x.v.size(), 0);
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    const bool pos = x.v[i] > 0.0;
    out.v[i] = pos ? x.v[i] : 0.0;
    if (cache) cached_positive_[i] = pos;
  }
  has_cache_ = cache;
  return out;
}

Tensor ReLU::backward(const Tensor& gy) {
  if (!has_cache_) throw_internal("relu: backward without cached forward");
  if (gy.v.size() != cached_positive_.size()) throw_internal("relu: gradient shape mismatch");
  Tensor gx(gy.c, gy.d, gy.h, gy.w);
  for (std::size_t i = 0; i < gy.v.size(); ++i) gx.v[i] = cached_positive_[i] ? gy.v[i] : 0.0;
  cached_positive_.clear();
  has_cache_ = false;
  return gx;
}

Tensor MaxMerge::forward(const Tensor& x, bool cache) {
  if (x.c % groups_ != 0) throw_internal("max merge: channels not divisible by groups");
  const int f = x.c / groups_;
  Tensor out(f, x.d, x.h, x.w);
  const std::int64_t p = x.spatial();
  if (cache) {
    cached_argmax_.assign(static_cast<std::size_t>(f) * p, 0);
    in_channels_ = x.c;
    in_spatial_ = {x.d, x.h, x.w};
  }

#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < f; ++ci) {
    double* dst = out.channel(ci);
    std::uint8_t* am = cache ? cached_argmax_.data() + static_cast<std::size_t>(ci) * p : nullptr;
    for (std::int64_t i = 0; i < p; ++i) {
      double best = x.channel(ci)[i];
      int best_g = 0;
      for (int g = 1; g < groups_; ++g) {
        const double v = x.channel(g * f + ci)[i];
        if (v > best) {
          best = v;
          best_g = g;
        }
      }
      dst[i] = best;
      if (am) am[i] = static_cast<std::uint8_t>(best_g);
    }
  }
  has_cache_ = cache;
  return out;
}

Tensor MaxMerge::backward(const Tensor& gy) {
  if (!has_cache_) throw_internal("max merge: backward without cached forward");
  const int f = in_channels_ / groups_;
  if (gy.c != f) throw_internal("max merge: gradient shape mismatch");
  Tensor gx(in_channels_, in_spatial_[0], in_spatial_[1], in_spatial_[2]);
  const std::int64_t p = gy.spatial();

#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < f; ++ci) {
    const double* g = gy.channel(ci);
    const std::uint8_t* am = cached_argmax_.data() + static_cast<std::size_t>(ci) * p;
    for (std::int64_t i = 0; i < p; ++i) gx.channel(am[i] * f + ci)[i] = g[i];
  }

  cached_argmax_.clear();
  has_cache_ = false;
  return gx;
}

Tensor Softmax::forward(const Tensor& x, bool cache) {
  Tensor out(x.c, x.d, x.h, x.w);
  const std::int64_t p = x.spatial();

#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < p; ++i) {
    double mx = x.v[i];
    for (int ci = 1; ci < x.c; ++ci) mx = std::max(mx, x.channel(ci)[i]);
    double sum = 0.0;
    for (int ci = 0; ci < x.c; ++ci) {
      const double e = std::exp(x.channel(ci)[i] - mx);
      out.channel(ci)[i] = e;
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (int ci = 0; ci < x.c; ++ci) out.channel(ci)[i] *= inv;
  }

  if (cache) {
    cached_output_ = out;
    has_cache_ = true;
  }
  return out;
}

Tensor Softmax::backward(const Tensor& gy) {
  if (!has_cache_) throw_internal("softmax: backward without cached forward");
  const Tensor& y = cached_output_;
  if (!gy.same_shape(y)) throw_internal("softmax: gradient shape mismatch");
  Tensor gx(gy.c, gy.d, gy.h, gy.w);
  const std::int64_t p = gy.spatial();

#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < p; ++i) {
    double dot = 0.0;
    for (int ci = 0; ci < gy.c; ++ci) dot += gy.channel(ci)[i] * y.channel(ci)[i];
    for (int ci = 0; ci < gy.c; ++ci) gx.channel(ci)[i] = y.channel(ci)[i] * (gy.channel(ci)[i] - dot);
  }

  cached_output_ = Tensor();
  has_cache_ = false;
  return gx;
}

// ---------------------------------------------------------------------------
// Trilinear resampling
// ---------------------------------------------------------------------------

namespace {

struct Taps {
  int i0, i1;
  double f;
};

std::vector<Taps> axis_taps(int out_n, int in_n) {
  std::vector<Taps> taps(static_cast<std::size_t>(out_n));
  const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
  for (int j = 0; j < out_n; ++j) {
    double x = (static_cast<double>(j) + 0.5) * scale - 0.5;
    if (x < 0.0) x = 0.0;
    const double hi = static_cast<double>(in_n - 1);
    if (x > hi) x = hi;
    const int i0 = static_cast<int>(std::floor(x));
    taps[j] = {i0, i0 + 1 < in_n ? i0 + 1 : i0, x - i0};
  }
  return taps;
}

}  // namespace

Tensor resample_trilinear(const Tensor& x, int d, int h, int w) {
  if (x.d == d && x.h == h && x.w == w) return x;
  Tensor out(x.c, d, h, w);
  const auto tz = axis_taps(d, x.d), ty = axis_taps(h, x.h), tx = axis_taps(w, x.w);

#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < x.c; ++ci) {
    const double* src = x.channel(ci);
    double* dst = out.channel(ci);
    std::int64_t idx = 0;
    for (int z = 0; z < d; ++z) {
      const auto& az = tz[z];
      for (int y = 0; y < h; ++y) {
        const auto& ay = ty[y];
        for (int xx = 0; xx < w; ++xx, ++idx) {
          const auto& ax = tx[xx];
          const auto pick = [&](int zz, int yy, int ww) {
            return src[(static_cast<std::size_t>(zz) * x.h + yy) * x.w + ww];
          };
          const double c00 = pick(az.i0, ay.i0, ax.i0) * (1 - ax.f) + pick(az.i0, ay.i0, ax.i1) * ax.f;
          const double c10 = pick(az.i0, ay.i1, ax.i0) * (1 - ax.f) + pick(az.i0, ay.i1, ax.i1) * ax.f;
          const double c01 = pick(az.i1, ay.i0, ax.i0) * (1 - ax.f) + pick(az.i1, ay.i0, ax.i1) * ax.f;
          const double c11 = pick(az.i1, ay.i1, ax.i0) * (1 - ax.f) + pick(az.i1, ay.i1, ax.i1) * ax.f;
          const double c0 = c00 * (1 - ay.f) + c10 * ay.f;
          const double c1 = c01 * (1 - ay.f) + c11 * ay.f;
          dst[idx] = c0 * (1 - az.f) + c1 * az.f;
        }
      }
    }
  }
  return out;
}

Tensor resample_trilinear_adjoint(const Tensor& gy, int in_d, int in_h, int in_w) {
  if (gy.d == in_d && gy.h == in_h && gy.w == in_w) return gy;
  Tensor gx(gy.c, in_d, in_h, in_w);
  const auto tz = axis_taps(gy.d, in_d), ty = axis_taps(gy.h, in_h), tx = axis_taps(gy.w, in_w);

#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < gy.c; ++ci) {
    const double* src = gy.channel(ci);
    double* dst = gx.channel(ci);
    std::int64_t idx = 0;
    for (int z = 0; z < gy.d; ++z) {
      const auto& az = tz[z];
      for (int y = 0; y < gy.h; ++y) {
        const auto& ay = ty[y];
        for (int xx = 0; xx < gy.w; ++xx, ++idx) {
          const auto& ax = tx[xx];
          const double g = src[idx];
          const auto put = [&](int zz, int yy, int ww, double v) {
            dst[(static_cast<std::size_t>(zz) * gx.h + yy) * gx.w + ww] += v;
          };
          put(az.i0, ay.i0, ax.i0, g * (1 - az.f) * (1 - ay.f) * (1 - ax.f));
          put(az.i0, ay.i0, ax.i1, g * (1 - az.f) * (1 - ay.f) * ax.f);
          put(az.i0, ay.i1, ax.i0, g * (1 - az.f) * ay.f * (1 - ax.f));
          put(az.i0, ay.i1, ax.i1, g * (1 - az.f) * ay.f * ax.f);
          put(az.i1, ay.i0, ax.i0, g * az.f * (1 - ay.f) * (1 - ax.f));
          put(az.i1, ay.i0, ax.i1, g * az.f * (1 - ay.f) * ax.f);
          put(az.i1, ay.i1, ax.i0, g * az.f * ay.f * (1 - ax.f));
          put(az.i1, ay.i1, ax.i1, g * az.f * ay.f * ax.f);
        }
      }
    }
  }
  return gx;
}

}  // namespace cunet::nn
