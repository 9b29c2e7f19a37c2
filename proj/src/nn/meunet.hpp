#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nn/blocks.hpp"

namespace cunet::nn {

// Topology of one segmentation network: four grouped encoders (one per
// modality), max+pointwise fusion at every scale, a fused decoder, and a
// softmax head. context_channels > 0 adds a third input to every decoder
// combine, fed from a coarser network's pre-head feature map.
struct StageSpec {
  int levels = 4;         // number of downsamplings
  int base_filters = 8;   // filters per modality at full stage resolution
  int context_filters = 8;
  int num_classes = 4;
  int groups = 4;          // one encoder per input modality
  int context_channels = 0;  // 0: no context input (coarsest stage)

  int encoder_channels(int level) const { return groups * base_filters * (1 << level); }
  int merged_channels(int level) const { return base_filters * (1 << level); }
  int decoder_channels(int level) const {
    return level == 0 ? context_filters : merged_channels(level);
  }

  void validate() const {
    if (levels < 1) throw_config("network: levels must be >= 1");
    if (base_filters < 2) throw_config("network: base_filters must be >= 2");
    if (context_filters < 1) throw_config("network: context_filters must be >= 1");
    if (num_classes < 2) throw_config("network: num_classes must be >= 2");
  }
};

// Decoder combine: d_i = conv_e(e_i) + conv_d(up(d_{i+1})) + conv_y(ctx_i),
// the linear fusion of skip, upsampled decoder state and resampled context.
// Keeping three separate convolutions makes the context term an exact
// elementwise addend: with zero context weights the sum is bit-identical to
// the two-term network.
class DecoderCombine {
 public:
  DecoderCombine(const std::string& name, int c_skip, int c_up, int c_context, int c_out);

  Tensor forward(const Tensor& skip, const Tensor& up, const Tensor* context, bool cache);
  struct Grads {
    Tensor skip;
    Tensor up;
    Tensor context;  // empty when the combine has no context input
  };
  Grads backward(const Tensor& gy);

  void init(Rng& rng);
  void collect(std::vector<Param*>& out);
  Param& context_weight();

 private:
  Conv3d conv_skip_;
  Conv3d conv_up_;
  std::optional<Conv3d> conv_context_;
};

class MEUNet {
 public:
  MEUNet(std::string name, const StageSpec& spec);

  struct Output {
    Tensor probs;    // per-voxel class distribution at the stage resolution
    Tensor context;  // pre-head feature map (context_filters channels)
  };

  // x: (4, D, H, W); context: coarser-stage feature map at any resolution
  // (resampled internally per decoder level). Must be non-null iff the spec
  // declares context_channels > 0.
  Output forward(const Tensor& x, const Tensor* context, bool cache);

  // gprobs: loss gradient on probs; gcontext_export: gradient flowing back
  // into the exported context map (null if unused). Returns the gradient
  // w.r.t. the consumed context input (empty tensor when none).
  Tensor backward(const Tensor& gprobs, const Tensor* gcontext_export);

  void init(Rng& rng);
  std::vector<Param*> params();
  std::int64_t param_count();
  const StageSpec& spec() const { return spec_; }

  // Forward only through the grouped encoders: per-level feature maps before
  // any cross-modality fusion.
  std::vector<Tensor> encoder_features(const Tensor& x);

  void check_input(const Tensor& x) const;

 private:
  std::string name_;
  StageSpec spec_;

  Conv3d stem_;
  std::vector<ResidualBlock> enc_blocks_;  // levels+1
  std::vector<Conv3d> downs_;              // levels
  std::vector<MaxMerge> merges_;           // levels+1
  std::vector<Conv3d> merge_convs_;        // levels+1 pointwise
  ResidualBlock bottleneck_;
  std::vector<ConvTranspose3d> ups_;       // levels (index = target level)
  std::vector<DecoderCombine> combines_;   // levels
  std::vector<ResidualBlock> dec_blocks_;  // levels
  Conv3d head_;
  Softmax softmax_;

  // Per-forward state for the backward pass.
  std::vector<std::array<int, 3>> level_dims_;
  std::array<int, 4> context_in_shape_{};
  bool has_cache_ = false;
};

}  // namespace cunet::nn
