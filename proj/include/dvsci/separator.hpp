#ifndef DVSCI_SEPARATOR_HPP
#define DVSCI_SEPARATOR_HPP

#include <utility>
#include <vector>

#include "dvsci/amplifier.hpp"
#include "dvsci/nn/layers.hpp"
#include "dvsci/sci_core.hpp"

namespace dvsci::net {

// Coarse-reconstruction network. Reference widths follow the published
// architecture table and shrink uniformly with width_scale; frame counts are
// never scaled. Spatial size must be even (one stride-2 stage).
struct SeparatorConfig {
  enum class Mode {
    kDualBranch,    // two branches, one per view, shared architecture with
                    // separate parameters
    kSingleBranch,  // one branch emitting both views as a stacked cube
    kSingleView     // one branch, one view, amplifier disabled
  };

  int frames = 10;  // per view
  double width_scale = 1.0;
  bool include_diversity = true;
  Mode mode = Mode::kDualBranch;

  int scaled(int w) const {
    return std::max(1, static_cast<int>(std::lround(w * width_scale)));
  }
  int branch_count() const { return mode == Mode::kDualBranch ? 2 : 1; }
  int input_channels() const;
  int output_channels() const;
  void validate() const;
};

// Input stack for one view, fixed channel order:
// [ybar, d1, d2, d3, d4, ybar*c^1, ..., ybar*c^B] (diversity planes dropped
// when disabled).
std::pair<Tensor, Tensor> assemble_inputs(const amp::DiversityBundle& bundle,
                                          const core::MaskSet& masks,
                                          bool include_diversity = true);

// Stack for the single-branch variant: both views' modulated planes after the
// shared prefix.
Tensor assemble_single_branch_input(const amp::DiversityBundle& bundle,
                                    const core::MaskSet& masks,
                                    bool include_diversity = true);

// Single-view stack: [ybar, ybar*c^1, ..., ybar*c^B].
Tensor assemble_single_view_input(const Tensor& ybar, const TensorU8& patterns);

class SeparatorNet {
 public:
  SeparatorNet(nn::ParamStore& store, const SeparatorConfig& cfg, Rng& rng);

  // Dual-branch forward: per-view cubes of `frames` planes each.
  std::pair<nn::NodePtr, nn::NodePtr> separate(const Tensor& in1,
                                               const Tensor& in2) const;

  // Single-branch forward: one stacked cube of 2*frames planes.
  nn::NodePtr separate_single_branch(const Tensor& in) const;

  // Single-view forward.
  nn::NodePtr separate_single_view(const Tensor& in) const;

  nn::NodePtr apply_branch(std::size_t branch, const nn::NodePtr& input) const;

  const SeparatorConfig& config() const { return cfg_; }

  // Parameter scalar count implied by a config, computed without allocation.
  static std::size_t param_count(const SeparatorConfig& cfg);

 private:
  struct Branch {
    nn::ConvStack stage1;             // fine features, ends with stride 2
    std::vector<nn::ResBlock> stage2; // global features at half resolution
    nn::Deconv2dLayer up;             // consumes [stage2, stage1] concat
    nn::ConvStack stage3;             // final conv linear, `out` planes
  };
  Branch make_branch(nn::ParamStore& store, const std::string& prefix,
                     Rng& rng) const;

  SeparatorConfig cfg_;
  std::vector<Branch> branches_;
};

}  // namespace dvsci::net

#endif
