#include "dvsci/nn/layers.hpp"

#include <cmath>

namespace dvsci::nn {

Tensor init_conv_weight(const ConvDims& dims, Rng& rng) {
  Tensor w(dims.cout, dims.cin, dims.kh * dims.kw);
  // Unit-variance fan-in scale: keeps signals and gradients from decaying
  // through the deep stacks (the recurrent path is over twenty layers).
  const double bound =
      std::sqrt(3.0 / (static_cast<double>(dims.cin) * dims.kh * dims.kw));
  for (float& x : w.v) x = static_cast<float>(rng.uniform(-bound, bound));
  return w;
}

Conv2dLayer::Conv2dLayer(ParamStore& store, const std::string& name, int cin,
                         const ConvSpec& spec, Rng& rng)
    : dims_{spec.cout, cin, spec.kh, spec.kw},
      stride_(spec.stride),
      activated_(spec.activated) {
  w_ = store.create(name + ".weight", init_conv_weight(dims_, rng));
  b_ = store.create(name + ".bias", Tensor(dims_.cout, 1, 1));
}

NodePtr Conv2dLayer::apply(const NodePtr& x) const {
  NodePtr y = conv2d(x, w_, b_, dims_, stride_);
  return activated_ ? leaky_relu(y) : y;
}

Deconv2dLayer::Deconv2dLayer(ParamStore& store, const std::string& name,
                             int cin, int cout, bool activated, Rng& rng)
    : dims_{cout, cin, 3, 3}, activated_(activated) {
  w_ = store.create(name + ".weight", init_conv_weight(dims_, rng));
  b_ = store.create(name + ".bias", Tensor(cout, 1, 1));
}

NodePtr Deconv2dLayer::apply(const NodePtr& x) const {
  NodePtr y = conv2d_transpose(x, w_, b_, dims_);
  return activated_ ? leaky_relu(y) : y;
}

ResBlock::ResBlock(ParamStore& store, const std::string& name, int cin,
                   int width, Rng& rng)
    : width_(width),
      c1_(store, name + ".conv0", cin, ConvSpec{3, 3, width, 1, true}, rng),
      c2_(store, name + ".conv1", width, ConvSpec{1, 1, width, 1, true}, rng),
      c3_(store, name + ".conv2", width, ConvSpec{3, 3, width, 1, false}, rng) {
  if (cin != width)
    proj_.emplace(store, name + ".proj", cin, ConvSpec{1, 1, width, 1, false},
                  rng);
}

NodePtr ResBlock::apply(const NodePtr& x) const {
  NodePtr y = c3_.apply(c2_.apply(c1_.apply(x)));
  NodePtr skip = proj_ ? proj_->apply(x) : x;
  return leaky_relu(add(y, skip));
}

std::size_t ResBlock::param_count() const {
  std::size_t n = c1_.param_count() + c2_.param_count() + c3_.param_count();
  if (proj_) n += proj_->param_count();
  return n;
}

ConvStack::ConvStack(ParamStore& store, const std::string& prefix, int cin,
                     const std::vector<ConvSpec>& specs, Rng& rng) {
  int chans = cin;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    layers_.emplace_back(store, prefix + ".conv" + std::to_string(i), chans,
                         specs[i], rng);
    chans = specs[i].cout;
  }
}

NodePtr ConvStack::apply(const NodePtr& x) const {
  NodePtr y = x;
  for (const Conv2dLayer& layer : layers_) y = layer.apply(y);
  return y;
}

std::size_t ConvStack::param_count() const {
  std::size_t n = 0;
  for (const Conv2dLayer& layer : layers_) n += layer.param_count();
  return n;
}

}  // namespace dvsci::nn
