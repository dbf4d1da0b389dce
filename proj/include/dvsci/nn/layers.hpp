#ifndef DVSCI_NN_LAYERS_HPP
#define DVSCI_NN_LAYERS_HPP

#include <optional>
#include <string>
#include <vector>

#include "dvsci/nn/graph.hpp"
#include "dvsci/rng.hpp"

namespace dvsci::nn {

struct ConvSpec {
  int kh = 3;
  int kw = 3;
  int cout = 1;
  int stride = 1;
  bool activated = true;  // leaky rectifier after the convolution
};

// Fan-in scaled uniform init; biases start at zero.
Tensor init_conv_weight(const ConvDims& dims, Rng& rng);

class Conv2dLayer {
 public:
  Conv2dLayer(ParamStore& store, const std::string& name, int cin,
              const ConvSpec& spec, Rng& rng);
  NodePtr apply(const NodePtr& x) const;
  int out_channels() const { return dims_.cout; }
  const ConvDims& dims() const { return dims_; }
  std::size_t param_count() const { return dims_.weight_count() + dims_.cout; }

 private:
  ConvDims dims_;
  int stride_;
  bool activated_;
  NodePtr w_, b_;
};

// Transposed 3x3 stride-2 convolution (doubles the spatial size).
class Deconv2dLayer {
 public:
  Deconv2dLayer(ParamStore& store, const std::string& name, int cin, int cout,
                bool activated, Rng& rng);
  NodePtr apply(const NodePtr& x) const;
  int out_channels() const { return dims_.cout; }
  std::size_t param_count() const { return dims_.weight_count() + dims_.cout; }

 private:
  ConvDims dims_;
  bool activated_;
  NodePtr w_, b_;
};

// conv3x3 -> conv1x1 -> conv3x3 with a skip around the stack; the skip is the
// identity when the channel count is unchanged and a learned 1x1 projection
// otherwise.
class ResBlock {
 public:
  ResBlock(ParamStore& store, const std::string& name, int cin, int width,
           Rng& rng);
  NodePtr apply(const NodePtr& x) const;
  int out_channels() const { return width_; }
  std::size_t param_count() const;

 private:
  int width_;
  Conv2dLayer c1_, c2_, c3_;
  std::optional<Conv2dLayer> proj_;
};

// Sequential convolutions with rectifier activations configured per layer.
class ConvStack {
 public:
  ConvStack(ParamStore& store, const std::string& prefix, int cin,
            const std::vector<ConvSpec>& specs, Rng& rng);
  NodePtr apply(const NodePtr& x) const;
  int out_channels() const { return layers_.back().out_channels(); }
  std::size_t param_count() const;

 private:
  std::vector<Conv2dLayer> layers_;
};

}  // namespace dvsci::nn

#endif
