#include "dvsci/pipeline.hpp"

namespace dvsci::net {

namespace {

// Reconstruction always runs on the original-scale measurement; a normalized
// measurement is rescaled back before the amplifier sees it.
core::Measurement working_measurement(const core::Measurement& m) {
  if (!m.meta.normalized) return m;
  core::Measurement out = m;
  for (float& x : out.y.v)
    x = static_cast<float>(static_cast<double>(x) * m.meta.scale);
  out.meta.normalized = false;
  return out;
}

}  // namespace

SeparatorConfig ModelConfig::separator_config() const {
  SeparatorConfig s;
  s.frames = frames;
  s.width_scale = width_scale;
  if (mode == ViewMode::kSingle) {
    s.mode = SeparatorConfig::Mode::kSingleView;
    s.include_diversity = false;
  } else {
    s.mode = branch_mode;
    s.include_diversity = !flags.no_diversity;
  }
  return s;
}

RefineConfig ModelConfig::refine_config() const {
  RefineConfig r;
  r.frames = frames;
  r.width_scale = width_scale;
  return r;
}

void ModelConfig::validate() const {
  flags.validate();
  separator_config().validate();
  refine_config().validate();
  flow.validate();
  if (mode == ViewMode::kSingle &&
      branch_mode == SeparatorConfig::Mode::kSingleBranch)
    throw std::invalid_argument(
        "model: the single-branch variant applies to dual-view mode only");
  if (frames < 2)
    throw std::invalid_argument("model: needs at least 2 frames per view");
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.init_seed);
  separator_ = std::make_unique<SeparatorNet>(store_, cfg_.separator_config(), rng);
  cell_ = std::make_unique<RefineCell>(store_, cfg_.refine_config(), rng);
  flow_ = std::make_unique<flow::Estimator>(cfg_.flow, &store_, &rng);
}

std::vector<nn::NodePtr> Model::trainable() const {
  std::vector<nn::NodePtr> out;
  for (const nn::NodePtr& p : store_.all())
    if (p->requires_grad) out.push_back(p);
  return out;
}

ViewFlowNodes Model::flow_nodes(const nn::NodePtr& coarse,
                                const std::vector<Tensor>* frozen_fwd,
                                const std::vector<Tensor>* frozen_bwd,
                                std::vector<Tensor>* used_fwd,
                                std::vector<Tensor>* used_bwd) const {
  ViewFlowNodes nodes;
  if (cfg_.flags.no_flow || cfg_.flags.no_refine) return nodes;
  const int frames = coarse->value.chans;
  const bool graph_path = cfg_.flow.kind == flow::Kind::kLearnedAdapter;
  for (int t = 0; t + 1 < frames; ++t) {
    if (frozen_fwd) {
      nodes.fwd.push_back(nn::constant(frozen_fwd->at(t)));
      nodes.bwd.push_back(nn::constant(frozen_bwd->at(t)));
    } else if (graph_path) {
      nn::NodePtr a = nn::slice_chans(coarse, t, 1);
      nn::NodePtr b = nn::slice_chans(coarse, t + 1, 1);
      nodes.fwd.push_back(flow_->estimate_node(a, b));
      nodes.bwd.push_back(flow_->estimate_node(b, a));
    } else {
      Tensor a = coarse->value.slice(t, 1);
      Tensor b = coarse->value.slice(t + 1, 1);
      nodes.fwd.push_back(nn::constant(
          flow_->estimate(a, b, flow::FlowField::Direction::kForward, t).uv));
      nodes.bwd.push_back(nn::constant(
          flow_->estimate(b, a, flow::FlowField::Direction::kBackward, t).uv));
    }
    if (used_fwd) {
      used_fwd->push_back(nodes.fwd.back()->value);
      used_bwd->push_back(nodes.bwd.back()->value);
    }
  }
  return nodes;
}

Model::Forward Model::forward_dual(const core::Measurement& m,
                                   const core::MaskSet& masks,
                                   const FlowValues* frozen_flows) const {
  if (cfg_.mode != ViewMode::kDual)
    throw std::invalid_argument("model: configured for single-view input");
  if (masks.frames() != cfg_.frames)
    throw std::invalid_argument("model: mask frame count mismatch");
  const core::Measurement work = working_measurement(m);

  Forward out;
  amp::DiversityBundle bundle = amp::build_bundle(work, masks, cfg_.amplifier);
  out.ybar = bundle.ybar;
  out.diversity4 = concat_chans<float>(
      {&bundle.d1, &bundle.d2, &bundle.d3, &bundle.d4});

  const bool with_div = !cfg_.flags.no_diversity;
  if (cfg_.branch_mode == SeparatorConfig::Mode::kSingleBranch) {
    Tensor in = assemble_single_branch_input(bundle, masks, with_div);
    nn::NodePtr stacked = separator_->separate_single_branch(in);
    out.coarse1 = nn::slice_chans(stacked, 0, cfg_.frames);
    out.coarse2 = nn::slice_chans(stacked, cfg_.frames, cfg_.frames);
  } else {
    auto [in1, in2] = assemble_inputs(bundle, masks, with_div);
    auto [c1, c2] = separator_->separate(in1, in2);
    out.coarse1 = c1;
    out.coarse2 = c2;
  }

  if (cfg_.flags.no_refine) {
    out.refined1 = out.coarse1;
    out.refined2 = out.coarse2;
    return out;
  }
  ViewFlowNodes f1 = flow_nodes(out.coarse1,
                                frozen_flows ? &frozen_flows->fwd1 : nullptr,
                                frozen_flows ? &frozen_flows->bwd1 : nullptr,
                                &out.flows.fwd1, &out.flows.bwd1);
  ViewFlowNodes f2 = flow_nodes(out.coarse2,
                                frozen_flows ? &frozen_flows->fwd2 : nullptr,
                                frozen_flows ? &frozen_flows->bwd2 : nullptr,
                                &out.flows.fwd2, &out.flows.bwd2);
  auto [r1, r2] = refine(*cell_, out.coarse1, out.coarse2, f1, f2,
                         out.diversity4, cfg_.flags);
  out.refined1 = r1;
  out.refined2 = r2;
  return out;
}

Model::Forward Model::forward_single(const core::Measurement& m,
                                     const TensorU8& patterns,
                                     const FlowValues* frozen_flows) const {
  if (cfg_.mode != ViewMode::kSingle)
    throw std::invalid_argument("model: configured for dual-view input");
  if (patterns.chans != cfg_.frames)
    throw std::invalid_argument("model: pattern frame count mismatch");
  const core::Measurement work = working_measurement(m);

  Forward out;
  out.ybar = amp::normalize_measurement_single(work, patterns,
                                               cfg_.amplifier.normalize_by_sum);
  Tensor in = assemble_single_view_input(out.ybar, patterns);
  out.coarse1 = separator_->separate_single_view(in);

  if (cfg_.flags.no_refine) {
    out.refined1 = out.coarse1;
    return out;
  }
  ViewFlowNodes f1 = flow_nodes(out.coarse1,
                                frozen_flows ? &frozen_flows->fwd1 : nullptr,
                                frozen_flows ? &frozen_flows->bwd1 : nullptr,
                                &out.flows.fwd1, &out.flows.bwd1);
  // Single-view runs keep the cell's diversity input at zero.
  Tensor d4(4, out.ybar.rows, out.ybar.cols);
  nn::NodePtr d_embed = cell_->embed_diversity(nn::constant(std::move(d4)));
  out.refined1 = refine_view(*cell_, out.coarse1, f1, d_embed, cfg_.flags);
  return out;
}

std::pair<Tensor, Tensor> Model::reconstruct(const core::Measurement& m,
                                             const core::MaskSet& masks) const {
  Forward f = forward_dual(m, masks);
  return {f.refined1->value, f.refined2->value};
}

Tensor Model::reconstruct_single(const core::Measurement& m,
                                 const TensorU8& patterns) const {
  Forward f = forward_single(m, patterns);
  return f.refined1->value;
}

}  // namespace dvsci::net
