#ifndef DVSCI_PIPELINE_HPP
#define DVSCI_PIPELINE_HPP

#include <memory>
#include <optional>

#include "dvsci/amplifier.hpp"
#include "dvsci/flow.hpp"
#include "dvsci/refine.hpp"
#include "dvsci/sci_core.hpp"
#include "dvsci/separator.hpp"

namespace dvsci::net {

enum class ViewMode { kDual, kSingle };

struct ModelConfig {
  ViewMode mode = ViewMode::kDual;
  int frames = 10;  // per view
  double width_scale = 1.0;
  SeparatorConfig::Mode branch_mode = SeparatorConfig::Mode::kDualBranch;
  AblationFlags flags;
  amp::AmplifierConfig amplifier;
  flow::EstimatorSpec flow;
  std::uint64_t init_seed = 1;

  SeparatorConfig separator_config() const;
  RefineConfig refine_config() const;
  void validate() const;
};

// Frozen displacement fields, used to re-evaluate the forward pass at fixed
// flows (finite-difference checks differentiate the graph as built, where
// classical flow enters as a constant).
struct FlowValues {
  std::vector<Tensor> fwd1, bwd1, fwd2, bwd2;
};

// Full reconstruction network: diversity amplification, coarse separation,
// bidirectional motion extraction, recurrent refinement.
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  const ModelConfig& config() const { return cfg_; }
  const flow::Estimator& flow_estimator() const { return *flow_; }
  const SeparatorNet& separator() const { return *separator_; }
  const RefineCell& refine_cell() const { return *cell_; }

  // Parameters updated by training (frozen adapter weights excluded).
  std::vector<nn::NodePtr> trainable() const;

  struct Forward {
    nn::NodePtr coarse1, coarse2;    // coarse2 null in single-view mode
    nn::NodePtr refined1, refined2;  // equal to coarse when refinement is off
    Tensor ybar;
    Tensor diversity4;  // empty in single-view mode
    FlowValues flows;   // the displacement fields this pass used
  };

  Forward forward_dual(const core::Measurement& m, const core::MaskSet& masks,
                       const FlowValues* frozen_flows = nullptr) const;
  Forward forward_single(const core::Measurement& m, const TensorU8& patterns,
                         const FlowValues* frozen_flows = nullptr) const;

  std::pair<Tensor, Tensor> reconstruct(const core::Measurement& m,
                                        const core::MaskSet& masks) const;
  Tensor reconstruct_single(const core::Measurement& m,
                            const TensorU8& patterns) const;

 private:
  ViewFlowNodes flow_nodes(const nn::NodePtr& coarse,
                           const std::vector<Tensor>* frozen_fwd,
                           const std::vector<Tensor>* frozen_bwd,
                           std::vector<Tensor>* used_fwd,
                           std::vector<Tensor>* used_bwd) const;

  ModelConfig cfg_;
  nn::ParamStore store_;
  std::unique_ptr<SeparatorNet> separator_;
  std::unique_ptr<RefineCell> cell_;
  std::unique_ptr<flow::Estimator> flow_;
};

}  // namespace dvsci::net

#endif
