#include "dvsci/refine.hpp"

#include <sstream>

namespace dvsci::net {

void RefineConfig::validate() const {
  if (frames < 1) throw std::invalid_argument("refine: frames must be >= 1");
  if (width_scale <= 0.0)
    throw std::invalid_argument("refine: width scale must be > 0");
}

void AblationFlags::validate() const {
  if (no_refine && (no_flow || no_backward || no_diversity))
    throw std::invalid_argument(
        "ablation: no_refine bypasses the module and cannot combine with "
        "other flags");
}

AblationFlags AblationFlags::parse(const std::string& csv) {
  AblationFlags f;
  std::istringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "no_flow") f.no_flow = true;
    else if (item == "no_backward") f.no_backward = true;
    else if (item == "no_diversity") f.no_diversity = true;
    else if (item == "no_refine") f.no_refine = true;
    else if (item == "none") continue;
    else throw std::invalid_argument("ablation: unknown flag '" + item + "'");
  }
  f.validate();
  return f;
}

std::string AblationFlags::describe() const {
  std::string s;
  auto append = [&s](const char* name) {
    if (!s.empty()) s += ",";
    s += name;
  };
  if (no_flow) append("no_flow");
  if (no_backward) append("no_backward");
  if (no_diversity) append("no_diversity");
  if (no_refine) append("no_refine");
  return s.empty() ? "none" : s;
}

RefineCell::RefineCell(nn::ParamStore& store, const RefineConfig& cfg, Rng& rng)
    : cfg_(cfg),
      frame_embed_(store, "refine.frame_embed", 1,
                   {{5, 5, cfg.scaled(20), 1, true},
                    {1, 1, cfg.scaled(20), 1, true},
                    {3, 3, cfg.scaled(20), 1, true},
                    {1, 1, cfg.scaled(20), 1, true},
                    {3, 3, cfg.scaled(20), 1, true}},
                   rng),
      fwd_flow_embed_(store, "refine.fwd_flow_embed", 2,
                      {{5, 5, cfg.scaled(40), 1, true},
                       {3, 3, cfg.scaled(40), 1, true},
                       {1, 1, cfg.scaled(40), 1, true}},
                      rng),
      bwd_flow_embed_(store, "refine.bwd_flow_embed", 2,
                      {{5, 5, cfg.scaled(40), 1, true},
                       {3, 3, cfg.scaled(40), 1, true},
                       {1, 1, cfg.scaled(40), 1, true}},
                      rng),
      diversity_embed_(store, "refine.diversity_embed", 4,
                       {{5, 5, cfg.scaled(20), 1, true},
                        {1, 1, cfg.scaled(20), 1, true},
                        {3, 3, cfg.scaled(20), 1, true},
                        {1, 1, cfg.scaled(20), 1, true},
                        {3, 3, cfg.scaled(20), 1, true}},
                       rng),
      fuse1_(store, "refine.fusion.res0",
             2 * cfg.scaled(20) + 2 * cfg.scaled(40) + cfg.hidden_width(),
             cfg.scaled(40), rng),
      fuse2_(store, "refine.fusion.res1", cfg.scaled(40), cfg.scaled(40), rng),
      fuse_tail_(store, "refine.fusion", cfg.scaled(40),
                 {{1, 3, cfg.scaled(20), 1, true},
                  {3, 1, cfg.scaled(20), 1, true},
                  {1, 3, cfg.hidden_width(), 1, true}},
                 rng),
      frame_head_(store, "refine.frame_head", cfg.hidden_width(),
                  {{3, 3, cfg.scaled(40), 1, true},
                   {1, 1, cfg.scaled(30), 1, true},
                   {3, 3, cfg.scaled(20), 1, true},
                   {1, 1, cfg.scaled(20), 1, true},
                   {3, 3, cfg.scaled(20), 1, true},
                   {1, 1, 1, 1, false}},
                  rng) {
  cfg_.validate();
}

nn::NodePtr RefineCell::embed_diversity(const nn::NodePtr& diversity) const {
  return diversity_embed_.apply(diversity);
}

RefineCell::Step RefineCell::step_embedded(const nn::NodePtr& x_prev,
                                           const nn::NodePtr& f_fwd,
                                           const nn::NodePtr& f_bwd,
                                           const nn::NodePtr& d_embed,
                                           const nn::NodePtr& h_prev) const {
  nn::NodePtr fused = nn::concat({frame_embed_.apply(x_prev),
                                  fwd_flow_embed_.apply(f_fwd),
                                  bwd_flow_embed_.apply(f_bwd), d_embed,
                                  h_prev});
  nn::NodePtr hidden = fuse_tail_.apply(fuse2_.apply(fuse1_.apply(fused)));
  return {frame_head_.apply(hidden), hidden};
}

RefineCell::Step RefineCell::step(const nn::NodePtr& x_prev,
                                  const nn::NodePtr& f_fwd,
                                  const nn::NodePtr& f_bwd,
                                  const nn::NodePtr& diversity,
                                  const nn::NodePtr& h_prev) const {
  return step_embedded(x_prev, f_fwd, f_bwd, embed_diversity(diversity),
                       h_prev);
}

std::size_t RefineCell::param_count(const RefineConfig& cfg) {
  cfg.validate();
  const auto conv = [](int cin, int cout, int kh, int kw) {
    return static_cast<std::size_t>(cout) *
           (static_cast<std::size_t>(cin) * kh * kw + 1);
  };
  const int e20 = cfg.scaled(20), e40 = cfg.scaled(40), e30 = cfg.scaled(30);
  const int hid = cfg.hidden_width();
  std::size_t n = 0;
  n += conv(1, e20, 5, 5) + conv(e20, e20, 1, 1) + conv(e20, e20, 3, 3) +
       conv(e20, e20, 1, 1) + conv(e20, e20, 3, 3);
  n += 2 * (conv(2, e40, 5, 5) + conv(e40, e40, 3, 3) + conv(e40, e40, 1, 1));
  n += conv(4, e20, 5, 5) + conv(e20, e20, 1, 1) + conv(e20, e20, 3, 3) +
       conv(e20, e20, 1, 1) + conv(e20, e20, 3, 3);
  const int fused = 2 * e20 + 2 * e40 + hid;
  n += conv(fused, e40, 3, 3) + conv(e40, e40, 1, 1) + conv(e40, e40, 3, 3) +
       conv(fused, e40, 1, 1);  // first fusion block projects its skip
  n += conv(e40, e40, 3, 3) + conv(e40, e40, 1, 1) + conv(e40, e40, 3, 3);
  n += conv(e40, e20, 1, 3) + conv(e20, e20, 3, 1) + conv(e20, hid, 1, 3);
  n += conv(hid, e40, 3, 3) + conv(e40, e30, 1, 1) + conv(e30, e20, 3, 3) +
       conv(e20, e20, 1, 1) + conv(e20, e20, 3, 3) + conv(e20, 1, 1, 1);
  return n;
}

nn::NodePtr refine_view(const RefineCell& cell, const nn::NodePtr& coarse,
                        const ViewFlowNodes& flows,
                        const nn::NodePtr& d_embed,
                        const AblationFlags& flags) {
  const int frames = coarse->value.chans;
  if (frames < 2)
    throw std::invalid_argument("refine: needs at least 2 frames");
  const int rows = coarse->value.rows, cols = coarse->value.cols;
  nn::NodePtr zero_flow = nn::constant(Tensor(2, rows, cols));
  nn::NodePtr h0 = nn::constant(Tensor(cell.hidden_width(), rows, cols));

  auto fwd_at = [&](int t) -> nn::NodePtr {
    if (flags.no_flow) return zero_flow;
    return flows.fwd.at(t);
  };
  auto bwd_at = [&](int t) -> nn::NodePtr {
    if (flags.no_flow || flags.no_backward) return zero_flow;
    return flows.bwd.at(t);
  };

  std::vector<nn::NodePtr> out_frames;
  // Dedicated first step: no forward motion exists yet, the first backward
  // field supplies the available motion cue.
  out_frames.push_back(cell.step_embedded(nn::slice_chans(coarse, 0, 1),
                                          zero_flow, bwd_at(0), d_embed, h0)
                           .frame);
  nn::NodePtr h = h0;
  for (int t = 0; t + 1 < frames; ++t) {
    RefineCell::Step s = cell.step_embedded(nn::slice_chans(coarse, t, 1),
                                            fwd_at(t), bwd_at(t), d_embed, h);
    out_frames.push_back(s.frame);
    h = s.hidden;
  }
  return nn::concat(out_frames);
}

std::pair<nn::NodePtr, nn::NodePtr> refine(
    const RefineCell& cell, const nn::NodePtr& coarse1,
    const nn::NodePtr& coarse2, const ViewFlowNodes& flows1,
    const ViewFlowNodes& flows2, const Tensor& diversity4,
    const AblationFlags& flags) {
  flags.validate();
  if (flags.no_refine) return {coarse1, coarse2};
  Tensor d = diversity4;
  if (flags.no_diversity) d.fill(0.0f);
  nn::NodePtr d_embed = cell.embed_diversity(nn::constant(std::move(d)));
  return {refine_view(cell, coarse1, flows1, d_embed, flags),
          refine_view(cell, coarse2, flows2, d_embed, flags)};
}

}  // namespace dvsci::net
