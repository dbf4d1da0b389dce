#ifndef DVSCI_FLOW_HPP
#define DVSCI_FLOW_HPP

#include <string>
#include <utility>
#include <vector>

#include "dvsci/nn/graph.hpp"
#include "dvsci/rng.hpp"
#include "dvsci/sci_core.hpp"
#include "dvsci/tensor.hpp"

namespace dvsci::flow {

enum class Kind { kClassical, kLearnedAdapter };

struct EstimatorSpec {
  Kind kind = Kind::kClassical;
  // Classical (pyramidal Horn-Schunck) parameters.
  int pyramid_levels = 3;
  int iterations_per_level = 50;
  double regularization = 0.1;
  double max_displacement = 32.0;
  // Learned-adapter parameters.
  std::string weight_file;  // container directory; empty keeps random init
  bool fine_tunable = false;

  void validate() const;
};

struct FlowField {
  enum class Direction { kForward, kBackward };
  // Plane 0: horizontal displacement u, plane 1: vertical displacement v,
  // in pixels per inter-frame interval.
  Tensor uv;
  Direction direction = Direction::kForward;
  int pair_index = 0;
};

// Motion estimator behind a pluggable interface. The classical kind is a
// deterministic pyramidal Horn-Schunck solver with no trainable state; the
// learned adapter is a small convolutional estimator whose weights come from
// a checkpoint container and may join the trainable set.
class Estimator {
 public:
  // The adapter kind registers its parameters into `store` (required) and
  // loads spec.weight_file when set; a missing file is an error.
  Estimator(const EstimatorSpec& spec, nn::ParamStore* store = nullptr,
            Rng* init_rng = nullptr);

  const EstimatorSpec& spec() const { return spec_; }

  // Displacement field mapping frame_a toward frame_b.
  FlowField estimate(const Tensor& frame_a, const Tensor& frame_b,
                     FlowField::Direction direction = FlowField::Direction::kForward,
                     int pair_index = 0) const;

  // Graph-path estimate: a constant node for the classical kind (gradients
  // do not flow through it), a differentiable subgraph for the adapter.
  nn::NodePtr estimate_node(const nn::NodePtr& frame_a,
                            const nn::NodePtr& frame_b) const;

  // Parameters contributed to the global trainable set: empty for the
  // classical kind and for a frozen adapter.
  std::vector<nn::NodePtr> trainable_params() const;

  // Fine-tuning contract: throws for the classical kind, which exposes no
  // parameters.
  void require_fine_tunable() const;

 private:
  EstimatorSpec spec_;
  std::vector<nn::NodePtr> adapter_params_;  // conv weights/biases in order
};

// B-1 forward and B-1 backward fields over adjacent frames of one view.
std::pair<std::vector<FlowField>, std::vector<FlowField>> extract_bidirectional(
    const Estimator& estimator, const core::VideoCube& video);

// Flow-vector color rendering (hue by angle, saturation by magnitude),
// 3 x rows x cols in [0,1].
Tensor flow_color(const Tensor& uv);

}  // namespace dvsci::flow

#endif
