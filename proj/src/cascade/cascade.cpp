#include "cascade/cascade.hpp"

#include <algorithm>

namespace cunet::cascade {

void CascadeConfig::validate() const {
  if (scales.empty()) throw_config("cascade: scales must not be empty");
  for (std::size_t s = 0; s < scales.size(); ++s) {
    if (scales[s] < 1) throw_config("cascade: scales must be >= 1");
    if (s > 0 && scales[s] >= scales[s - 1]) throw_config("cascade: scales must be strictly decreasing");
  }
  if (scales.back() != 1) throw_config("cascade: the finest scale must be 1");
  nn::StageSpec probe = stage_spec(0);
  probe.validate();
  const int div = scales.front() * (1 << levels);
  for (int a = 0; a < 3; ++a) {
    if (input_grid[a] <= 0) throw_config("cascade: input_grid must be positive");
    if (input_grid[a] % div != 0)
      throw_config("cascade: input_grid " + vol::shape_string(input_grid) +
                   " must be divisible by coarsest scale * 2^levels = " + std::to_string(div));
  }
}

nn::StageSpec CascadeConfig::stage_spec(std::size_t stage) const {
  nn::StageSpec spec;
  spec.levels = levels;
  spec.base_filters = base_filters;
  spec.context_filters = context_filters;
  spec.num_classes = kNumClasses;
  spec.groups = 4;
  spec.context_channels = stage == 0 ? 0 : context_filters;
  return spec;
}

vol::Shape3 CascadeConfig::stage_grid(std::size_t stage) const {
  const int f = scales[stage];
  return {input_grid[0] / f, input_grid[1] / f, input_grid[2] / f};
}

CascadeModel::CascadeModel(const CascadeConfig& config) : config_(config) {
  config_.validate();
  for (std::size_t s = 0; s < config_.num_stages(); ++s)
    stages_.push_back(std::make_unique<nn::MEUNet>("stage" + std::to_string(s), config_.stage_spec(s)));
}

std::vector<nn::Tensor> CascadeModel::stage_inputs(const nn::Tensor& input) const {
  if (input.c != 4) throw_data("cascade input must have 4 channels, got " + std::to_string(input.c));
  if (input.w != config_.input_grid[0] || input.h != config_.input_grid[1] || input.d != config_.input_grid[2])
    throw_data("cascade input grid " + input.shape_string() + " does not match configured grid " +
               vol::shape_string(config_.input_grid));
  std::vector<nn::Tensor> inputs;
  inputs.reserve(stages_.size());
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const vol::Shape3 g = config_.stage_grid(s);
    inputs.push_back(nn::resample_trilinear(input, g[2], g[1], g[0]));
  }
  return inputs;
}

std::vector<StageOutputs> CascadeModel::forward(const nn::Tensor& input, bool cache) {
  const std::vector<nn::Tensor> inputs = stage_inputs(input);
  std::vector<StageOutputs> outputs;
  outputs.reserve(stages_.size());
  const nn::Tensor* context = nullptr;
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    nn::MEUNet::Output o = stages_[s]->forward(inputs[s], context, cache);
    outputs.push_back({std::move(o.probs), std::move(o.context)});
    context = &outputs.back().context;
  }
  return outputs;
}

void CascadeModel::backward(const std::vector<nn::Tensor>& gprobs) {
  if (gprobs.size() != stages_.size()) throw_internal("cascade backward: wrong gradient count");
  // Finest stage first; each stage hands its consumed-context gradient to the
  // stage below, which adds it to the gradient on its exported feature map.
  nn::Tensor gcontext;
  for (std::size_t i = stages_.size(); i-- > 0;) {
    const nn::Tensor* gexport = (i + 1 < stages_.size()) ? &gcontext : nullptr;
    gcontext = stages_[i]->backward(gprobs[i], gexport);
  }
}

void CascadeModel::init(Rng& rng) {
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    Rng stage_rng = rng.derive("stage", s);
    stages_[s]->init(stage_rng);
  }
}

std::vector<nn::Param*> CascadeModel::params() {
  std::vector<nn::Param*> out;
  for (auto& st : stages_) {
    auto p = st->params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::int64_t CascadeModel::param_count() {
  std::int64_t n = 0;
  for (const nn::Param* p : params()) n += p->count();
  return n;
}

void CascadeModel::zero_grad() {
  for (nn::Param* p : params()) p->zero_grad();
}

void CascadeModel::zero_context_weights() {
  for (nn::Param* p : params())
    if (p->name.find(".combine.y.") != std::string::npos)
      std::fill(p->value.begin(), p->value.end(), 0.0);
}

}  // namespace cunet::cascade
