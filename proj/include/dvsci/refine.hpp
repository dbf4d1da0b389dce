#ifndef DVSCI_REFINE_HPP
#define DVSCI_REFINE_HPP

#include <string>
#include <utility>
#include <vector>

#include "dvsci/nn/layers.hpp"

namespace dvsci::net {

struct RefineConfig {
  int frames = 10;  // per view
  double width_scale = 1.0;

  int scaled(int w) const {
    return std::max(1, static_cast<int>(std::lround(w * width_scale)));
  }
  int hidden_width() const { return scaled(10); }
  void validate() const;
};

struct AblationFlags {
  bool no_flow = false;       // zero both flow embeddings' inputs
  bool no_backward = false;   // zero only the backward-flow input
  bool no_diversity = false;  // zero the diversity embedding input and drop
                              // the diversity planes from the separator stack
  bool no_refine = false;     // bypass refinement entirely

  void validate() const;
  static AblationFlags parse(const std::string& csv);
  std::string describe() const;
};

// Recurrent refinement cell: five embeddings (previous frame, forward flow,
// backward flow, diversity stack, identity on the hidden state) fused by two
// residual blocks and a conv tail into the next hidden state, plus a conv
// head mapping hidden state to the output frame. One parameter set serves
// both views.
class RefineCell {
 public:
  RefineCell(nn::ParamStore& store, const RefineConfig& cfg, Rng& rng);

  struct Step {
    nn::NodePtr frame;   // 1 plane
    nn::NodePtr hidden;  // hidden_width planes
  };

  // diversity is the 4-plane [d1,d2,d3,d4] stack; flow inputs are 2-plane
  // displacement fields and may be zero tensors when ablated.
  Step step(const nn::NodePtr& x_prev, const nn::NodePtr& f_fwd,
            const nn::NodePtr& f_bwd, const nn::NodePtr& diversity,
            const nn::NodePtr& h_prev) const;

  // The diversity embedding does not depend on the time step, so callers may
  // embed once and reuse the node across steps and views.
  nn::NodePtr embed_diversity(const nn::NodePtr& diversity) const;
  Step step_embedded(const nn::NodePtr& x_prev, const nn::NodePtr& f_fwd,
                     const nn::NodePtr& f_bwd, const nn::NodePtr& d_embed,
                     const nn::NodePtr& h_prev) const;

  const RefineConfig& config() const { return cfg_; }
  int hidden_width() const { return cfg_.hidden_width(); }

  static std::size_t param_count(const RefineConfig& cfg);

 private:
  RefineConfig cfg_;
  nn::ConvStack frame_embed_;
  nn::ConvStack fwd_flow_embed_;
  nn::ConvStack bwd_flow_embed_;
  nn::ConvStack diversity_embed_;
  nn::ResBlock fuse1_;
  nn::ResBlock fuse2_;
  nn::ConvStack fuse_tail_;
  nn::ConvStack frame_head_;
};

// Per-view flow nodes between adjacent coarse frames: fwd[t] maps frame t to
// t+1, bwd[t] maps frame t+1 to t.
struct ViewFlowNodes {
  std::vector<nn::NodePtr> fwd;
  std::vector<nn::NodePtr> bwd;
};

// Sequential refinement of one view's coarse cube. Frame 1 comes from a
// dedicated step fed with zero forward flow and the first backward flow;
// frames 2..B follow the recurrence with the hidden state threaded through.
nn::NodePtr refine_view(const RefineCell& cell, const nn::NodePtr& coarse,
                        const ViewFlowNodes& flows,
                        const nn::NodePtr& d_embed, const AblationFlags& flags);

std::pair<nn::NodePtr, nn::NodePtr> refine(
    const RefineCell& cell, const nn::NodePtr& coarse1,
    const nn::NodePtr& coarse2, const ViewFlowNodes& flows1,
    const ViewFlowNodes& flows2, const Tensor& diversity4,
    const AblationFlags& flags);

}  // namespace dvsci::net

#endif
