#pragma once

#include <memory>
#include <vector>

#include "nn/meunet.hpp"
#include "vol/volume.hpp"

namespace cunet::cascade {

// Class channel order of every stage head. Channel index <-> label value.
constexpr std::array<int, 4> kClassLabels{0, 1, 2, 4};
constexpr int kNumClasses = 4;

inline int label_to_class(int label) {
  switch (label) {
    case 0: return 0;
    case 1: return 1;
    case 2: return 2;
    case 4: return 3;
  }
  throw_data("unexpected label value " + std::to_string(label));
}

struct CascadeConfig {
  std::vector<int> scales{4, 2, 1};  // input downsampling factor per stage, coarse to fine
  int levels = 4;
  int base_filters = 8;
  int context_filters = 8;
  vol::Shape3 input_grid{128, 128, 128};

  void validate() const;
  nn::StageSpec stage_spec(std::size_t stage) const;
  vol::Shape3 stage_grid(std::size_t stage) const;
  std::size_t num_stages() const { return scales.size(); }
};

struct StageOutputs {
  nn::Tensor probs;    // (classes, D, H, W) at the stage resolution
  nn::Tensor context;  // (context_filters, D, H, W)
};

// Chain of identically shaped networks over a coarse-to-fine scale ladder;
// each network consumes the input at its scale plus the previous network's
// context map.
class CascadeModel {
 public:
  explicit CascadeModel(const CascadeConfig& config);

  const CascadeConfig& config() const { return config_; }
  std::size_t num_stages() const { return stages_.size(); }
  nn::MEUNet& stage(std::size_t s) { return *stages_[s]; }

  // Downsampled copies of the preprocessed input, one per stage.
  std::vector<nn::Tensor> stage_inputs(const nn::Tensor& input) const;

  std::vector<StageOutputs> forward(const nn::Tensor& input, bool cache);

  // gprobs: per-stage loss gradients on probs. Parameter gradients accumulate.
  void backward(const std::vector<nn::Tensor>& gprobs);

  void init(Rng& rng);
  std::vector<nn::Param*> params();
  std::int64_t param_count();
  void zero_grad();

  // Clears every context-path kernel (the W_y of each decoder combine).
  void zero_context_weights();

 private:
  CascadeConfig config_;
  std::vector<std::unique_ptr<nn::MEUNet>> stages_;
};

}  // namespace cunet::cascade
