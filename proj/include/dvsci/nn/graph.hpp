#ifndef DVSCI_NN_GRAPH_HPP
#define DVSCI_NN_GRAPH_HPP

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dvsci/tensor.hpp"

namespace dvsci::io {
class Container;
}

namespace dvsci::nn {

// Define-by-run autograd over planar float tensors. Nodes form a DAG through
// parent links; backward() walks reverse topological order and accumulates
// into parent grads, so shared subgraphs (skip connections, recurrent weight
// reuse) sum their contributions.
class Node {
 public:
  Tensor value;
  Tensor grad;  // allocated on first touch, same shape as value
  bool requires_grad = false;
  bool is_param = false;
  std::string name;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (grad.empty())
      grad = Tensor(value.chans, value.rows, value.cols);
    return grad;
  }
};

using NodePtr = std::shared_ptr<Node>;

NodePtr constant(Tensor v);
NodePtr make_param(Tensor v, std::string name);

// Weight blob layout for convolutions: element (oc, ic, ky, kx) lives at
// ((oc*cin + ic)*kh + ky)*kw + kx, carried in a tensor shaped
// (cout, cin, kh*kw).
struct ConvDims {
  int cout = 0, cin = 0, kh = 0, kw = 0;
  std::size_t weight_count() const {
    return static_cast<std::size_t>(cout) * cin * kh * kw;
  }
};

// Same-padded convolution, stride 1 or 2 (stride 2 requires even input size).
NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& b,
               ConvDims dims, int stride);

// Transposed 3x3 convolution, stride 2: output is exactly twice the input
// size (pad 1, output padding 1).
NodePtr conv2d_transpose(const NodePtr& x, const NodePtr& w, const NodePtr& b,
                         ConvDims dims);

NodePtr leaky_relu(const NodePtr& x, float slope = 0.01f);
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr concat(const std::vector<NodePtr>& parts);
NodePtr slice_chans(const NodePtr& x, int first, int count);

// Scalar (1x1x1) node: sum of squared differences against a fixed target.
NodePtr sum_sq_diff(const NodePtr& x, Tensor target);

// Scalar node: sum of coeff * scalar-node terms.
NodePtr scalar_combine(const std::vector<std::pair<float, NodePtr>>& terms);

void backward(const NodePtr& root);

// Named parameter registry; registration order is the checkpoint order.
class ParamStore {
 public:
  NodePtr create(const std::string& name, Tensor init);
  NodePtr get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<NodePtr>& all() const { return params_; }
  std::size_t scalar_count() const;
  void zero_grads();
  void save_into(io::Container& c) const;
  // Loads every registered parameter by name; shape mismatches and missing
  // tensors are errors.
  void load_from(const io::Container& c);

 private:
  std::vector<NodePtr> params_;
  std::map<std::string, NodePtr> by_name_;
};

}  // namespace dvsci::nn

#endif
