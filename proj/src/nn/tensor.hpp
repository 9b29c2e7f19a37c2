#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "common/error.hpp"

namespace cunet::nn {

// Dense (channels, depth, height, width) tensor of doubles, w fastest.
// Network layers run per sample; the batch dimension lives in the trainer.
struct Tensor {
  int c = 0, d = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int d_, int h_, int w_)
      : c(c_), d(d_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * d_ * h_ * w_, 0.0) {}

  std::int64_t numel() const { return static_cast<std::int64_t>(c) * d * h * w; }
  std::int64_t spatial() const { return static_cast<std::int64_t>(d) * h * w; }

  double& at(int ci, int z, int y, int x) {
    return v[((static_cast<std::size_t>(ci) * d + z) * h + y) * w + x];
  }
  double at(int ci, int z, int y, int x) const {
    return v[((static_cast<std::size_t>(ci) * d + z) * h + y) * w + x];
  }

  double* channel(int ci) { return v.data() + static_cast<std::size_t>(ci) * spatial(); }
  const double* channel(int ci) const { return v.data() + static_cast<std::size_t>(ci) * spatial(); }

  bool same_shape(const Tensor& o) const { return c == o.c && d == o.d && h == o.h && w == o.w; }

  std::string shape_string() const {
    return std::to_string(c) + "x" + std::to_string(d) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.c, t.d, t.h, t.w); }

  void add_(const Tensor& o) {
    if (!same_shape(o)) throw_internal("tensor add: shape mismatch " + shape_string() + " vs " + o.shape_string());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
  }
  void scale_(double a) {
    for (auto& x : v) x *= a;
  }
};

enum class ParamKind { KernelWeight, Bias, NormScale, NormShift };

struct Param {
  std::string name;
  ParamKind kind = ParamKind::KernelWeight;
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;

  void resize(std::vector<int> s) {
    shape = std::move(s);
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    value.assign(n, 0.0);
    grad.assign(n, 0.0);
  }
  std::int64_t count() const { return static_cast<std::int64_t>(value.size()); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

}  // namespace cunet::nn
