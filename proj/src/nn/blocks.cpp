#include "nn/blocks.hpp"

namespace cunet::nn {

ResidualBlock::ResidualBlock(const std::string& name, int c_in, int c_out, int groups,
                             bool allow_projection)
    : in1_(name + ".in1", c_in),
      conv_a_(name + ".conv_a", c_in, c_out, 3, 1, 1, groups, /*with_bias=*/false),
      in2_(name + ".in2", c_out),
      conv_b_(name + ".conv_b", c_out, c_out, 3, 1, 1, groups, /*with_bias=*/true) {
  if (c_in != c_out) {
    if (!allow_projection)
      throw_internal(name + ": channel mismatch " + std::to_string(c_in) + " -> " + std::to_string(c_out) +
                     " without projection");
    projection_.emplace(name + ".proj", c_in, c_out, 1, 1, 0, groups, /*with_bias=*/false);
  }
}

Tensor ResidualBlock::forward(const Tensor& x, bool cache) {
  Tensor t = in1_.forward(x, cache);
  t = relu1_.forward(t, cache);
  t = conv_a_.forward(t, cache);
  t = in2_.forward(t, cache);
  t = relu2_.forward(t, cache);
  t = conv_b_.forward(t, cache);
  if (projection_) {
    t.add_(projection_->forward(x, cache));
  } else {
    t.add_(x);
  }
  if (cache) {
    has_cache_ = true;
  }
  return t;
}

Tensor ResidualBlock::backward(const Tensor& gy) {
  if (!has_cache_) throw_internal("residual block: backward without cached forward");
  Tensor g = conv_b_.backward(gy);
  g = relu2_.backward(g);
  g = in2_.backward(g);
  g = conv_a_.backward(g);
  g = relu1_.backward(g);
  g = in1_.backward(g);
  if (projection_) {
    g.add_(projection_->backward(gy));
  } else {
    g.add_(gy);
  }
  has_cache_ = false;
  return g;
}

void ResidualBlock::init(Rng& rng) {
  in1_.init(rng);
  conv_a_.init(rng);
  in2_.init(rng);
  conv_b_.init(rng);
  if (projection_) projection_->init(rng);
}

void ResidualBlock::collect(std::vector<Param*>& out) {
  in1_.collect(out);
  conv_a_.collect(out);
  in2_.collect(out);
  conv_b_.collect(out);
  if (projection_) projection_->collect(out);
}

}  // namespace cunet::nn
