#include "dvsci/nn/graph.hpp"

#include <algorithm>
#include <unordered_set>

#include "dvsci/io/container.hpp"

namespace dvsci::nn {

namespace {

NodePtr make_node(Tensor value, std::vector<NodePtr> parents) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const NodePtr& p : n->parents) n->requires_grad |= p->requires_grad;
  return n;
}

struct ConvGeom {
  int stride, ph, pw, h_in, w_in, h_out, w_out;
};

ConvGeom conv_geometry(const Tensor& x, const ConvDims& d, int stride) {
  if (stride != 1 && stride != 2)
    throw std::invalid_argument("conv2d: stride must be 1 or 2");
  if (x.chans != d.cin)
    throw std::invalid_argument("conv2d: input has " + std::to_string(x.chans) +
                                " channels, weights expect " +
                                std::to_string(d.cin));
  ConvGeom g;
  g.stride = stride;
  g.ph = d.kh / 2;
  g.pw = d.kw / 2;
  g.h_in = x.rows;
  g.w_in = x.cols;
  if (stride == 2 && (x.rows % 2 != 0 || x.cols % 2 != 0))
    throw std::invalid_argument("conv2d: stride-2 input size must be even");
  g.h_out = (x.rows + 2 * g.ph - d.kh) / stride + 1;
  g.w_out = (x.cols + 2 * g.pw - d.kw) / stride + 1;
  return g;
}

inline float wat(const Tensor& w, const ConvDims& d, int oc, int ic, int ky,
                 int kx) {
  return w.v[((static_cast<std::size_t>(oc) * d.cin + ic) * d.kh + ky) * d.kw +
             kx];
}

inline float& wat(Tensor& w, const ConvDims& d, int oc, int ic, int ky,
                  int kx) {
  return w.v[((static_cast<std::size_t>(oc) * d.cin + ic) * d.kh + ky) * d.kw +
             kx];
}

// Output-index range [lo, hi] for which idx*stride - pad + k stays inside
// [0, extent); keeps the hot loops branch-free.
struct TapRange {
  int lo, hi;
};

inline TapRange tap_range(int out_extent, int in_extent, int stride, int pad,
                          int k) {
  const int a = pad - k;  // idx*stride >= a
  int lo = a > 0 ? (a + stride - 1) / stride : 0;
  int hi = (in_extent - 1 + pad - k) / stride;  // idx*stride <= in-1+pad-k
  if (in_extent - 1 + pad - k < 0) hi = -1;
  return {lo, std::min(hi, out_extent - 1)};
}

void conv_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                  const ConvDims& d, const ConvGeom& g, Tensor& out) {
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < d.cout; ++oc) {
    float* op = out.plane(oc);
    const float bias = b.v[oc];
    for (int i = 0; i < g.h_out * g.w_out; ++i) op[i] = bias;
    for (int ic = 0; ic < d.cin; ++ic) {
      const float* xp = x.plane(ic);
      for (int ky = 0; ky < d.kh; ++ky) {
        const TapRange rows = tap_range(g.h_out, g.h_in, g.stride, g.ph, ky);
        for (int kx = 0; kx < d.kw; ++kx) {
          const float wv = wat(w, d, oc, ic, ky, kx);
          const TapRange cols = tap_range(g.w_out, g.w_in, g.stride, g.pw, kx);
          for (int r = rows.lo; r <= rows.hi; ++r) {
            const float* xrow =
                xp + static_cast<std::size_t>(r * g.stride - g.ph + ky) * g.w_in;
            float* __restrict orow = op + static_cast<std::size_t>(r) * g.w_out;
            if (g.stride == 1) {
              const float* __restrict xs = xrow + kx - g.pw;
              for (int c = cols.lo; c <= cols.hi; ++c) orow[c] += wv * xs[c];
            } else {
              for (int c = cols.lo; c <= cols.hi; ++c)
                orow[c] += wv * xrow[c * g.stride - g.pw + kx];
            }
          }
        }
      }
    }
  }
}

void conv_backward(Node& self, const ConvDims d, const ConvGeom g) {
  const NodePtr& x = self.parents[0];
  const NodePtr& w = self.parents[1];
  const NodePtr& b = self.parents[2];
  const Tensor& gout = self.grad;

  if (x->requires_grad) {
    Tensor& gx = x->ensure_grad();
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < d.cin; ++ic) {
      float* gxp = gx.plane(ic);
      for (int oc = 0; oc < d.cout; ++oc) {
        const float* gop = gout.plane(oc);
        for (int ky = 0; ky < d.kh; ++ky) {
          const TapRange rows = tap_range(g.h_out, g.h_in, g.stride, g.ph, ky);
          for (int kx = 0; kx < d.kw; ++kx) {
            const float wv = wat(w->value, d, oc, ic, ky, kx);
            const TapRange cols = tap_range(g.w_out, g.w_in, g.stride, g.pw, kx);
            for (int r = rows.lo; r <= rows.hi; ++r) {
              const float* __restrict grow =
                  gop + static_cast<std::size_t>(r) * g.w_out;
              float* gxrow =
                  gxp +
                  static_cast<std::size_t>(r * g.stride - g.ph + ky) * g.w_in;
              if (g.stride == 1) {
                float* __restrict gs = gxrow + kx - g.pw;
                for (int c = cols.lo; c <= cols.hi; ++c) gs[c] += wv * grow[c];
              } else {
                for (int c = cols.lo; c <= cols.hi; ++c)
                  gxrow[c * g.stride - g.pw + kx] += wv * grow[c];
              }
            }
          }
        }
      }
    }
  }
  if (w->requires_grad) {
    Tensor& gw = w->ensure_grad();
    Tensor& gb = b->ensure_grad();
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < d.cout; ++oc) {
      const float* gop = gout.plane(oc);
      double bacc = 0.0;
      for (int i = 0; i < g.h_out * g.w_out; ++i) bacc += gop[i];
      gb.v[oc] += static_cast<float>(bacc);
      for (int ic = 0; ic < d.cin; ++ic) {
        const float* xp = x->value.plane(ic);
        for (int ky = 0; ky < d.kh; ++ky) {
          const TapRange rows = tap_range(g.h_out, g.h_in, g.stride, g.ph, ky);
          for (int kx = 0; kx < d.kw; ++kx) {
            const TapRange cols = tap_range(g.w_out, g.w_in, g.stride, g.pw, kx);
            // Row partials in float (vectorizable), combined in double.
            double acc = 0.0;
            for (int r = rows.lo; r <= rows.hi; ++r) {
              const float* xrow =
                  xp + static_cast<std::size_t>(r * g.stride - g.ph + ky) * g.w_in;
              const float* __restrict grow =
                  gop + static_cast<std::size_t>(r) * g.w_out;
              float row_acc = 0.0f;
              if (g.stride == 1) {
                const float* __restrict xs = xrow + kx - g.pw;
                for (int c = cols.lo; c <= cols.hi; ++c)
                  row_acc += grow[c] * xs[c];
              } else {
                for (int c = cols.lo; c <= cols.hi; ++c)
                  row_acc += grow[c] * xrow[c * g.stride - g.pw + kx];
              }
              acc += row_acc;
            }
            wat(gw, d, oc, ic, ky, kx) += static_cast<float>(acc);
          }
        }
      }
    }
  }
}

}  // namespace

NodePtr constant(Tensor v) { return make_node(std::move(v), {}); }

NodePtr make_param(Tensor v, std::string name) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = true;
  n->is_param = true;
  n->name = std::move(name);
  return n;
}

NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& b,
               ConvDims dims, int stride) {
  if (w->value.size() != dims.weight_count())
    throw std::invalid_argument("conv2d: weight size inconsistent with dims");
  if (b->value.size() != static_cast<std::size_t>(dims.cout))
    throw std::invalid_argument("conv2d: bias size inconsistent with dims");
  const ConvGeom g = conv_geometry(x->value, dims, stride);
  Tensor out(dims.cout, g.h_out, g.w_out);
  conv_forward(x->value, w->value, b->value, dims, g, out);
  NodePtr n = make_node(std::move(out), {x, w, b});
  n->backward_fn = [dims, g](Node& self) { conv_backward(self, dims, g); };
  return n;
}

NodePtr conv2d_transpose(const NodePtr& x, const NodePtr& w, const NodePtr& b,
                         ConvDims dims) {
  if (dims.kh != 3 || dims.kw != 3)
    throw std::invalid_argument("conv2d_transpose: 3x3 kernels only");
  if (x->value.chans != dims.cin)
    throw std::invalid_argument("conv2d_transpose: channel mismatch");
  if (w->value.size() != dims.weight_count())
    throw std::invalid_argument("conv2d_transpose: weight size mismatch");
  const int h_in = x->value.rows, w_in = x->value.cols;
  const int h_out = 2 * h_in, w_out = 2 * w_in;
  // Input-index range [lo, hi] keeping 2*idx + k - 1 inside [0, extent).
  const auto up_range = [](int in_extent, int out_extent, int k) {
    return TapRange{k == 0 ? 1 : 0,
                    std::min(in_extent - 1, (out_extent - k) / 2)};
  };
  Tensor out(dims.cout, h_out, w_out);
  const Tensor& xv = x->value;
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < dims.cout; ++oc) {
    float* op = out.plane(oc);
    const float bias = b->value.v[oc];
    for (int i = 0; i < h_out * w_out; ++i) op[i] = bias;
    for (int ic = 0; ic < dims.cin; ++ic) {
      const float* xp = xv.plane(ic);
      for (int ky = 0; ky < 3; ++ky) {
        const TapRange rows = up_range(h_in, h_out, ky);
        for (int kx = 0; kx < 3; ++kx) {
          const float wv = wat(w->value, dims, oc, ic, ky, kx);
          const TapRange cols = up_range(w_in, w_out, kx);
          for (int r = rows.lo; r <= rows.hi; ++r) {
            const float* __restrict xrow = xp + static_cast<std::size_t>(r) * w_in;
            float* __restrict orow =
                op + static_cast<std::size_t>(2 * r + ky - 1) * w_out + kx - 1;
            for (int c = cols.lo; c <= cols.hi; ++c) orow[2 * c] += wv * xrow[c];
          }
        }
      }
    }
  }
  NodePtr n = make_node(std::move(out), {x, w, b});
  n->backward_fn = [dims, h_in, w_in, h_out, w_out, up_range](Node& self) {
    const NodePtr& xn = self.parents[0];
    const NodePtr& wn = self.parents[1];
    const NodePtr& bn = self.parents[2];
    const Tensor& gout = self.grad;
    if (xn->requires_grad) {
      Tensor& gx = xn->ensure_grad();
#pragma omp parallel for schedule(static)
      for (int ic = 0; ic < dims.cin; ++ic) {
        float* gxp = gx.plane(ic);
        for (int oc = 0; oc < dims.cout; ++oc) {
          const float* gop = gout.plane(oc);
          for (int ky = 0; ky < 3; ++ky) {
            const TapRange rows = up_range(h_in, h_out, ky);
            for (int kx = 0; kx < 3; ++kx) {
              const float wv = wat(wn->value, dims, oc, ic, ky, kx);
              const TapRange cols = up_range(w_in, w_out, kx);
              for (int r = rows.lo; r <= rows.hi; ++r) {
                const float* __restrict grow =
                    gop + static_cast<std::size_t>(2 * r + ky - 1) * w_out +
                    kx - 1;
                float* __restrict gxrow = gxp + static_cast<std::size_t>(r) * w_in;
                for (int c = cols.lo; c <= cols.hi; ++c)
                  gxrow[c] += wv * grow[2 * c];
              }
            }
          }
        }
      }
    }
    if (wn->requires_grad) {
      Tensor& gw = wn->ensure_grad();
      Tensor& gb = bn->ensure_grad();
#pragma omp parallel for schedule(static)
      for (int oc = 0; oc < dims.cout; ++oc) {
        const float* gop = gout.plane(oc);
        double bacc = 0.0;
        for (int i = 0; i < h_out * w_out; ++i) bacc += gop[i];
        gb.v[oc] += static_cast<float>(bacc);
        for (int ic = 0; ic < dims.cin; ++ic) {
          const float* xp = xn->value.plane(ic);
          for (int ky = 0; ky < 3; ++ky) {
            const TapRange rows = up_range(h_in, h_out, ky);
            for (int kx = 0; kx < 3; ++kx) {
              const TapRange cols = up_range(w_in, w_out, kx);
              double acc = 0.0;
              for (int r = rows.lo; r <= rows.hi; ++r) {
                const float* xrow = xp + static_cast<std::size_t>(r) * w_in;
                const float* grow =
                    gop + static_cast<std::size_t>(2 * r + ky - 1) * w_out +
                    kx - 1;
                for (int c = cols.lo; c <= cols.hi; ++c)
                  acc += static_cast<double>(xrow[c]) * grow[2 * c];
              }
              wat(gw, dims, oc, ic, ky, kx) += static_cast<float>(acc);
            }
          }
        }
      }
    }
  };
  return n;
}

NodePtr leaky_relu(const NodePtr& x, float slope) {
  Tensor out = x->value;
  for (float& v : out.v)
    if (v < 0.0f) v *= slope;
  NodePtr n = make_node(std::move(out), {x});
  n->backward_fn = [slope](Node& self) {
    const NodePtr& xn = self.parents[0];
    if (!xn->requires_grad) return;
    Tensor& gx = xn->ensure_grad();
    for (std::size_t i = 0; i < gx.v.size(); ++i)
      gx.v[i] += self.grad.v[i] * (xn->value.v[i] > 0.0f ? 1.0f : slope);
  };
  return n;
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
  require_same_shape(a->value, b->value, "add");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b->value.v[i];
  NodePtr n = make_node(std::move(out), {a, b});
  n->backward_fn = [](Node& self) {
    for (const NodePtr& p : self.parents) {
      if (!p->requires_grad) continue;
      Tensor& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += self.grad.v[i];
    }
  };
  return n;
}

NodePtr concat(const std::vector<NodePtr>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: empty input");
  std::vector<const Tensor*> vals;
  for (const NodePtr& p : parts) vals.push_back(&p->value);
  Tensor out = concat_chans<float>(vals);
  NodePtr n = make_node(std::move(out), parts);
  n->backward_fn = [](Node& self) {
    std::size_t off = 0;
    for (const NodePtr& p : self.parents) {
      const std::size_t count = p->value.size();
      if (p->requires_grad) {
        Tensor& g = p->ensure_grad();
        for (std::size_t i = 0; i < count; ++i)
          g.v[i] += self.grad.v[off + i];
      }
      off += count;
    }
  };
  return n;
}

NodePtr slice_chans(const NodePtr& x, int first, int count) {
  Tensor out = x->value.slice(first, count);
  NodePtr n = make_node(std::move(out), {x});
  n->backward_fn = [first](Node& self) {
    const NodePtr& xn = self.parents[0];
    if (!xn->requires_grad) return;
    Tensor& g = xn->ensure_grad();
    const std::size_t off = g.plane_size() * first;
    for (std::size_t i = 0; i < self.grad.v.size(); ++i)
      g.v[off + i] += self.grad.v[i];
  };
  return n;
}

NodePtr sum_sq_diff(const NodePtr& x, Tensor target) {
  require_same_shape(x->value, target, "sum_sq_diff");
  double acc = 0.0;
  for (std::size_t i = 0; i < target.v.size(); ++i) {
    const double d = static_cast<double>(x->value.v[i]) -
                     static_cast<double>(target.v[i]);
    acc += d * d;
  }
  Tensor out(1, 1, 1);
  out.v[0] = static_cast<float>(acc);
  NodePtr n = make_node(std::move(out), {x});
  auto t = std::make_shared<Tensor>(std::move(target));
  n->backward_fn = [t](Node& self) {
    const NodePtr& xn = self.parents[0];
    if (!xn->requires_grad) return;
    Tensor& g = xn->ensure_grad();
    const float g0 = self.grad.v[0];
    for (std::size_t i = 0; i < g.v.size(); ++i)
      g.v[i] += g0 * 2.0f * (xn->value.v[i] - t->v[i]);
  };
  return n;
}

NodePtr scalar_combine(const std::vector<std::pair<float, NodePtr>>& terms) {
  if (terms.empty()) throw std::invalid_argument("scalar_combine: empty");
  double acc = 0.0;
  std::vector<NodePtr> parents;
  std::vector<float> coeffs;
  for (const auto& [coeff, node] : terms) {
    if (node->value.size() != 1)
      throw std::invalid_argument("scalar_combine: inputs must be scalars");
    acc += static_cast<double>(coeff) * node->value.v[0];
    parents.push_back(node);
    coeffs.push_back(coeff);
  }
  Tensor out(1, 1, 1);
  out.v[0] = static_cast<float>(acc);
  NodePtr n = make_node(std::move(out), std::move(parents));
  n->backward_fn = [coeffs](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      const NodePtr& p = self.parents[k];
      if (!p->requires_grad) continue;
      p->ensure_grad().v[0] += coeffs[k] * self.grad.v[0];
    }
  };
  return n;
}

void backward(const NodePtr& root) {
  if (root->value.size() != 1)
    throw std::invalid_argument("backward: root must be a scalar node");
  // Iterative post-order DFS.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next].get();
      ++next;
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad().v[0] = 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->requires_grad && node->backward_fn && !node->grad.empty())
      node->backward_fn(*node);
  }
}

NodePtr ParamStore::create(const std::string& name, Tensor init) {
  if (by_name_.count(name))
    throw std::invalid_argument("parameter '" + name + "' already registered");
  NodePtr p = make_param(std::move(init), name);
  params_.push_back(p);
  by_name_[name] = p;
  return p;
}

NodePtr ParamStore::get(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end())
    throw std::invalid_argument("no parameter named '" + name + "'");
  return it->second;
}

bool ParamStore::has(const std::string& name) const {
  return by_name_.count(name) != 0;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const NodePtr& p : params_) n += p->value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (const NodePtr& p : params_)
    if (!p->grad.empty()) p->grad.fill(0.0f);
}

void ParamStore::save_into(io::Container& c) const {
  for (const NodePtr& p : params_) c.put(p->name, p->value);
}

void ParamStore::load_from(const io::Container& c) {
  for (const NodePtr& p : params_) {
    const Tensor& t = c.get_f32(p->name);
    if (!t.same_shape(p->value))
      throw std::invalid_argument("checkpoint: parameter '" + p->name +
                                  "' has shape " + t.shape_str() +
                                  ", expected " + p->value.shape_str());
    p->value = t;
  }
}

}  // namespace dvsci::nn
