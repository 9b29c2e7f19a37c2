#pragma once

#include <memory>
#include <optional>
#include <string>

#include "nn/layers.hpp"

namespace cunet::nn {

// Pre-activation residual unit: norm -> relu -> conv -> norm -> relu -> conv,
// added to the identity path. The first convolution feeds a normalization
// layer, so it carries no bias. A channel change routes the identity through
// a pointwise projection when allowed, otherwise construction fails.
class ResidualBlock {
 public:
  ResidualBlock(const std::string& name, int c_in, int c_out, int groups, bool allow_projection = true);

  Tensor forward(const Tensor& x, bool cache);
  Tensor backward(const Tensor& gy);

  void init(Rng& rng);
  void collect(std::vector<Param*>& out);

 private:
  InstanceNorm in1_;
  ReLU relu1_;
  Conv3d conv_a_;
  InstanceNorm in2_;
  ReLU relu2_;
  Conv3d conv_b_;
  std::optional<Conv3d> projection_;
  bool has_cache_ = false;
};

}  // namespace cunet::nn
