#pragma once

#include <string>

#include "nn/tensor.hpp"

namespace cunet::metrics {

// Two forms of the soft Dice overlap term per class c over voxels i:
//   PaperExact:  (sum p*g + eps/2) / (sum (p+g) + eps)   -> 0.5 when p == g
//   Standard:    (2*sum p*g + eps) / (sum (p+g) + eps)   -> 1.0 when p == g
// The loss is 1 minus the class mean. The matched numerator smoothing keeps
// an absent class at its perfect-prediction value instead of zero.
enum class DiceVariant { PaperExact, Standard };

// Average over raw classes or over the nested evaluation regions (composed
// by summing class probabilities).
enum class LossSpace { Classes, Regions };

DiceVariant dice_variant_from_string(const std::string& s);
LossSpace loss_space_from_string(const std::string& s);

struct LossResult {
  double value = 0.0;
  nn::Tensor grad;  // d(loss)/d(probs)
};

constexpr double kDiceEps = 1e-5;

LossResult mean_dice_loss(const nn::Tensor& probs, const nn::Tensor& onehot, DiceVariant variant,
                          double eps = kDiceEps);

// Region-space loss over WT/TC/ET probabilities. Channel order must follow
// cascade::kClassLabels (background, 1, 2, 4).
LossResult mean_dice_loss_regions(const nn::Tensor& probs, const nn::Tensor& onehot, DiceVariant variant,
                                  double eps = kDiceEps);

LossResult dice_loss(const nn::Tensor& probs, const nn::Tensor& onehot, DiceVariant variant, LossSpace space,
                     double eps = kDiceEps);

}  // namespace cunet::metrics
