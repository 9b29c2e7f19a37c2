#include "nn/meunet.hpp"

namespace cunet::nn {

// ---------------------------------------------------------------------------
// DecoderCombine
// ---------------------------------------------------------------------------

DecoderCombine::DecoderCombine(const std::string& name, int c_skip, int c_up, int c_context, int c_out)
    : conv_skip_(name + ".e", c_skip, c_out, 3, 1, 1, 1, /*with_bias=*/true),
      conv_up_(name + ".d", c_up, c_out, 3, 1, 1, 1, /*with_bias=*/false) {
  if (c_context > 0)
    conv_context_.emplace(name + ".y", c_context, c_out, 3, 1, 1, 1, /*with_bias=*/false);
}

Tensor DecoderCombine::forward(const Tensor& skip, const Tensor& up, const Tensor* context, bool cache) {
  if (skip.d != up.d || skip.h != up.h || skip.w != up.w)
    throw_internal("decoder combine: skip and upsampled grids differ (" + skip.shape_string() + " vs " +
                   up.shape_string() + ")");
  Tensor out = conv_skip_.forward(skip, cache);
  out.add_(conv_up_.forward(up, cache));
  if (conv_context_) {
    if (!context) throw_internal("decoder combine: context input missing");
    if (context->d != skip.d || context->h != skip.h || context->w != skip.w)
      throw_internal("decoder combine: context grid differs from decoder grid");
    out.add_(conv_context_->forward(*context, cache));
  }
  return out;
}

DecoderCombine::Grads DecoderCombine::backward(const Tensor& gy) {
  Grads g;
  g.skip = conv_skip_.backward(gy);
  g.up = conv_up_.backward(gy);
  if (conv_context_) g.context = conv_context_->backward(gy);
  return g;
}

void DecoderCombine::init(Rng& rng) {
  conv_skip_.init(rng);
  conv_up_.init(rng);
  if (conv_context_) conv_context_->init(rng);
}

void DecoderCombine::collect(std::vector<Param*>& out) {
  conv_skip_.collect(out);
  conv_up_.collect(out);
  if (conv_context_) conv_context_->collect(out);
}

Param& DecoderCombine::context_weight() {
  if (!conv_context_) throw_internal("decoder combine: no context path");
  return conv_context_->weight();
}

// ---------------------------------------------------------------------------
// MEUNet
// ---------------------------------------------------------------------------

MEUNet::MEUNet(std::string name, const StageSpec& spec)
    : name_(std::move(name)),
      spec_(spec),
      stem_(name_ + ".enc.stem", spec.groups, spec.encoder_channels(0), 3, 1, 1, spec.groups, true),
      bottleneck_(name_ + ".bottleneck", spec.merged_channels(spec.levels), spec.merged_channels(spec.levels), 1),
      head_(name_ + ".head", spec.context_filters, spec.num_classes, 1, 1, 0, 1, true) {
  spec_.validate();
  const int levels = spec.levels;

  enc_blocks_.reserve(levels + 1);
  downs_.reserve(levels);
  merges_.reserve(levels + 1);
  merge_convs_.reserve(levels + 1);
  for (int l = 0; l <= levels; ++l) {
    enc_blocks_.emplace_back(name_ + ".enc.l" + std::to_string(l) + ".block", spec.encoder_channels(l),
                             spec.encoder_channels(l), spec.groups);
    if (l < levels)
      downs_.emplace_back(name_ + ".enc.l" + std::to_string(l + 1) + ".down", spec.encoder_channels(l),
                          spec.encoder_channels(l + 1), 3, 2, 1, spec.groups, true);
    merges_.emplace_back(spec.groups);
    merge_convs_.emplace_back(name_ + ".merge.l" + std::to_string(l), spec.merged_channels(l),
                              spec.merged_channels(l), 1, 1, 0, 1, true);
  }

  ups_.reserve(levels);
  combines_.reserve(levels);
  dec_blocks_.reserve(levels);
  for (int l = 0; l < levels; ++l) {
    const std::string dn = name_ + ".dec.l" + std::to_string(l);
    ups_.emplace_back(dn + ".up", spec.decoder_channels(l + 1), spec.merged_channels(l));
    combines_.emplace_back(dn + ".combine", spec.merged_channels(l), spec.merged_channels(l),
                           spec.context_channels, spec.decoder_channels(l));
    dec_blocks_.emplace_back(dn + ".block", spec.decoder_channels(l), spec.decoder_channels(l), 1);
  }
}

void MEUNet::check_input(const Tensor& x) const {
  if (x.c != spec_.groups)
    throw_data("network input must have " + std::to_string(spec_.groups) + " channels, got " +
               std::to_string(x.c));
  const int div = 1 << spec_.levels;
  if (x.d % div != 0 || x.h % div != 0 || x.w % div != 0)
    throw_data("network input " + x.shape_string() + " is not divisible by 2^levels = " + std::to_string(div));
}

MEUNet::Output MEUNet::forward(const Tensor& x, const Tensor* context, bool cache) {
  check_input(x);
  if ((spec_.context_channels > 0) != (context != nullptr))
    throw_internal(name_ + ": context input presence does not match the topology");
  const int levels = spec_.levels;

  level_dims_.assign(levels + 1, {0, 0, 0});
  for (int l = 0; l <= levels; ++l) level_dims_[l] = {x.d >> l, x.h >> l, x.w >> l};
  if (context) context_in_shape_ = {context->c, context->d, context->h, context->w};

  // Grouped encoder column.
  std::vector<Tensor> merged(levels + 1);
  Tensor enc = enc_blocks_[0].forward(stem_.forward(x, cache), cache);
  merged[0] = merge_convs_[0].forward(merges_[0].forward(enc, cache), cache);
  for (int l = 1; l <= levels; ++l) {
    enc = enc_blocks_[l].forward(downs_[l - 1].forward(enc, cache), cache);
    merged[l] = merge_convs_[l].forward(merges_[l].forward(enc, cache), cache);
  }
  enc = Tensor();

  // Fused decoder with optional per-level context injection.
  Tensor d = bottleneck_.forward(merged[levels], cache);
  for (int l = levels - 1; l >= 0; --l) {
    Tensor up = ups_[l].forward(d, cache);
    if (context) {
      Tensor ctx = resample_trilinear(*context, level_dims_[l][0], level_dims_[l][1], level_dims_[l][2]);
      d = combines_[l].forward(merged[l], up, &ctx, cache);
    } else {
      d = combines_[l].forward(merged[l], up, nullptr, cache);
    }
    merged[l] = Tensor();
    d = dec_blocks_[l].forward(d, cache);
  }

  Output out;
  out.context = d;
  out.probs = softmax_.forward(head_.forward(d, cache), cache);
  has_cache_ = cache;
  return out;
}

Tensor MEUNet::backward(const Tensor& gprobs, const Tensor* gcontext_export) {
  if (!has_cache_) throw_internal(name_ + ": backward without cached forward");
  const int levels = spec_.levels;

  Tensor gy = head_.backward(softmax_.backward(gprobs));
  if (gcontext_export) gy.add_(*gcontext_export);

  // Decoder, fine to coarse in reverse of the forward loop.
  Tensor gctx_total;
  if (spec_.context_channels > 0)
    gctx_total = Tensor(context_in_shape_[0], context_in_shape_[1], context_in_shape_[2], context_in_shape_[3]);

  std::vector<Tensor> gmerged(levels + 1);
  Tensor gd = std::move(gy);
  for (int l = 0; l < levels; ++l) {
    gd = dec_blocks_[l].backward(gd);
    DecoderCombine::Grads cg = combines_[l].backward(gd);
    gmerged[l] = std::move(cg.skip);
    if (spec_.context_channels > 0)
      gctx_total.add_(resample_trilinear_adjoint(cg.context, context_in_shape_[1], context_in_shape_[2],
                                                 context_in_shape_[3]));
    gd = ups_[l].backward(cg.up);
  }
  gmerged[levels] = bottleneck_.backward(gd);

  // Encoder column, deepest level first; each level accumulates the merge
  // branch with what flows down from the level below.
  Tensor genc;
  for (int l = levels; l >= 0; --l) {
    Tensor gm = merges_[l].backward(merge_convs_[l].backward(gmerged[l]));
    gmerged[l] = Tensor();
    if (l == levels) {
      genc = std::move(gm);
    } else {
      genc.add_(gm);
    }
    genc = enc_blocks_[l].backward(genc);
    if (l > 0) genc = downs_[l - 1].backward(genc);
  }
  stem_.backward(genc);  // input is a leaf; gradient discarded

  has_cache_ = false;
  return gctx_total;
}

void MEUNet::init(Rng& rng) {
  stem_.init(rng);
  for (auto& b : enc_blocks_) b.init(rng);
  for (auto& c : downs_) c.init(rng);
  for (auto& c : merge_convs_) c.init(rng);
  bottleneck_.init(rng);
  for (auto& u : ups_) u.init(rng);
  for (auto& c : combines_) c.init(rng);
  for (auto& b : dec_blocks_) b.init(rng);
  head_.init(rng);
}

std::vector<Param*> MEUNet::params() {
  std::vector<Param*> out;
  stem_.collect(out);
  for (auto& b : enc_blocks_) b.collect(out);
  for (auto& c : downs_) c.collect(out);
  for (auto& c : merge_convs_) c.collect(out);
  bottleneck_.collect(out);
  for (auto& u : ups_) u.collect(out);
  for (auto& c : combines_) c.collect(out);
  for (auto& b : dec_blocks_) b.collect(out);
  head_.collect(out);
  return out;
}

std::int64_t MEUNet::param_count() {
  std::int64_t n = 0;
  for (const Param* p : params()) n += p->count();
  return n;
}

std::vector<Tensor> MEUNet::encoder_features(const Tensor& x) {
  check_input(x);
  std::vector<Tensor> feats;
  feats.reserve(spec_.levels + 1);
  Tensor enc = enc_blocks_[0].forward(stem_.forward(x, false), false);
  feats.push_back(enc);
  for (int l = 1; l <= spec_.levels; ++l) {
    enc = enc_blocks_[l].forward(downs_[l - 1].forward(enc, false), false);
    feats.push_back(enc);
  }
  return feats;
}

}  // namespace cunet::nn
