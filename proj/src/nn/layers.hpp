#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "common/rng.hpp"
#include "nn/tensor.hpp"

namespace cunet::nn {

// Row-major GEMM on top of single-threaded OpenBLAS. Work is parallelized
// above BLAS (per group / per row block) so results are run-to-run
// deterministic.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc);

// 3D convolution, kernel k in {1,3}, optional stride 2 and channel groups.
// Grouped mode keeps channel blocks independent, one per input modality.
class Conv3d {
 public:
  Conv3d(std::string name, int c_in, int c_out, int kernel, int stride, int pad, int groups, bool with_bias);

  Tensor forward(const Tensor& x, bool cache);
  // Accumulates parameter gradients and returns the gradient w.r.t. input.
  Tensor backward(const Tensor& gy);

  void init(Rng& rng);
  void collect(std::vector<Param*>& out);
  std::array<int, 3> output_spatial(int d, int h, int w) const;

  int c_in() const { return c_in_; }
  int c_out() const { return c_out_; }
  Param& weight() { return weight_; }

 private:
  void check_input(const Tensor& x) const;

  std::string name_;
  int c_in_, c_out_, kernel_, stride_, pad_, groups_;
  bool with_bias_;
  Param weight_;  // (c_out, c_in/groups, k, k, k)
  Param bias_;    // (c_out)
  Tensor cached_input_;
  bool has_cache_ = false;
};

// Transposed convolution, kernel 2 stride 2: exact 2x upsampling where each
// output voxel receives exactly one input voxel per channel.
class ConvTranspose3d {
 public:
  ConvTranspose3d(std::string name, int c_in, int c_out, bool with_bias = true);

  Tensor forward(const Tensor& x, bool cache);
  Tensor backward(const Tensor& gy);

  void init(Rng& rng);
  void collect(std::vector<Param*>& out);

 private:
  std::string name_;
  int c_in_, c_out_;
  bool with_bias_;
  Param weight_;  // (c_in, c_out, 2, 2, 2)
  Param bias_;
  Tensor cached_input_;
  bool has_cache_ = false;
};

// Per-channel normalization over the spatial volume with learned scale/shift.
class InstanceNorm {
 public:
  InstanceNorm(std::string name, int channels, double eps = 1e-5);

  Tensor forward(const Tensor& x, bool cache);
  Tensor backward(const Tensor& gy);

  void init(Rng& rng);
  void collect(std::vector<Param*>& out);

 private:
  std::string name_;
  int channels_;
  double eps_;
  Param scale_, shift_;
  Tensor cached_hat_;                 // normalized input
  std::vector<double> cached_inv_std_;
  bool has_cache_ = false;
};

class ReLU {
 public:
  Tensor forward(const Tensor& x, bool cache);
  Tensor backward(const Tensor& gy);

 private:
  std::vector<std::uint8_t> cached_positive_;
  bool has_cache_ = false;
};

// Elementwise maximum across the four modality blocks of a grouped feature
// map: (groups*F, ...) -> (F, ...).
class MaxMerge {
 public:
  explicit MaxMerge(int groups) : groups_(groups) {}

  Tensor forward(const Tensor& x, bool cache);
  Tensor backward(const Tensor& gy);

 private:
  int groups_;
  std::vector<std::uint8_t> cached_argmax_;
  int in_channels_ = 0;
  std::array<int, 3> in_spatial_{};
  bool has_cache_ = false;
};

// Channel softmax per voxel.
class Softmax {
 public:
  Tensor forward(const Tensor& x, bool cache);
  Tensor backward(const Tensor& gy);

 private:
  Tensor cached_output_;
  bool has_cache_ = false;
};

// Trilinear resampling between spatial grids (matching corner-extent index
// mapping used by the volume pipeline). Linear, so its adjoint is the exact
// transpose scatter of the interpolation weights.
Tensor resample_trilinear(const Tensor& x, int d, int h, int w);
Tensor resample_trilinear_adjoint(const Tensor& gy, int in_d, int in_h, int in_w);

}  // namespace cunet::nn
