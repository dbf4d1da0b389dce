#include "dvsci/separator.hpp"

namespace dvsci::net {

namespace {

Tensor modulated_planes(const Tensor& ybar, const TensorU8& patterns) {
  Tensor out(patterns.chans, ybar.rows, ybar.cols);
  const std::size_t plane = ybar.plane_size();
  for (int b = 0; b < patterns.chans; ++b)
    for (std::size_t p = 0; p < plane; ++p)
      out.v[b * plane + p] = ybar.v[p] * patterns.v[b * plane + p];
  return out;
}

Tensor view_stack(const amp::DiversityBundle& bundle, const TensorU8& patterns,
                  bool include_diversity) {
  Tensor mod = modulated_planes(bundle.ybar, patterns);
  std::vector<const Tensor*> parts;
  parts.push_back(&bundle.ybar);
  if (include_diversity) {
    parts.push_back(&bundle.d1);
    parts.push_back(&bundle.d2);
    parts.push_back(&bundle.d3);
    parts.push_back(&bundle.d4);
  }
  parts.push_back(&mod);
  return concat_chans<float>(parts);
}

}  // namespace

int SeparatorConfig::input_channels() const {
  const int extra = mode == Mode::kSingleView ? 1 : (include_diversity ? 5 : 1);
  const int mod = mode == Mode::kSingleBranch ? 2 * frames : frames;
  return mod + extra;
}

int SeparatorConfig::output_channels() const {
  return mode == Mode::kSingleBranch ? 2 * frames : frames;
}

void SeparatorConfig::validate() const {
  if (frames < 1)
    throw std::invalid_argument("separator: frames must be >= 1");
  if (width_scale <= 0.0)
    throw std::invalid_argument("separator: width scale must be > 0");
  if (mode == Mode::kSingleView && include_diversity)
    throw std::invalid_argument(
        "separator: single-view mode runs without the diversity planes");
}

std::pair<Tensor, Tensor> assemble_inputs(const amp::DiversityBundle& bundle,
                                          const core::MaskSet& masks,
                                          bool include_diversity) {
  if (bundle.ybar.rows != masks.rows() || bundle.ybar.cols != masks.cols())
    throw std::invalid_argument("assemble_inputs: shape mismatch");
  return {view_stack(bundle, masks.c1, include_diversity),
          view_stack(bundle, masks.c2, include_diversity)};
}

Tensor assemble_single_branch_input(const amp::DiversityBundle& bundle,
                                    const core::MaskSet& masks,
                                    bool include_diversity) {
  if (bundle.ybar.rows != masks.rows() || bundle.ybar.cols != masks.cols())
    throw std::invalid_argument("assemble_single_branch_input: shape mismatch");
  Tensor mod1 = modulated_planes(bundle.ybar, masks.c1);
  Tensor mod2 = modulated_planes(bundle.ybar, masks.c2);
  std::vector<const Tensor*> parts;
  parts.push_back(&bundle.ybar);
  if (include_diversity) {
    parts.push_back(&bundle.d1);
    parts.push_back(&bundle.d2);
    parts.push_back(&bundle.d3);
    parts.push_back(&bundle.d4);
  }
  parts.push_back(&mod1);
  parts.push_back(&mod2);
  return concat_chans<float>(parts);
}

Tensor assemble_single_view_input(const Tensor& ybar,
                                  const TensorU8& patterns) {
  if (ybar.rows != patterns.rows || ybar.cols != patterns.cols)
    throw std::invalid_argument("assemble_single_view_input: shape mismatch");
  Tensor mod = modulated_planes(ybar, patterns);
  return concat_chans<float>({&ybar, &mod});
}

SeparatorNet::Branch SeparatorNet::make_branch(nn::ParamStore& store,
                                               const std::string& prefix,
                                               Rng& rng) const {
  const int w32 = cfg_.scaled(32);
  const int w64 = cfg_.scaled(64);
  const int out = cfg_.output_channels();
  Branch br{
      nn::ConvStack(store, prefix + ".stage1", cfg_.input_channels(),
                    {{5, 5, w32, 1, true},
                     {3, 3, w64, 1, true},
                     {1, 1, w64, 1, true},
                     {3, 3, w64, 2, true}},
                    rng),
      {},
      nn::Deconv2dLayer(store, prefix + ".stage3.up", 2 * w64, w64, true, rng),
      nn::ConvStack(store, prefix + ".stage3", w64,
                    {{1, 1, w64, 1, true},
                     {3, 3, w32, 1, true},
                     {1, 1, out, 1, false}},
                    rng)};
  for (int i = 0; i < 3; ++i)
    br.stage2.emplace_back(store, prefix + ".stage2.res" + std::to_string(i),
                           w64, w64, rng);
  return br;
}

SeparatorNet::SeparatorNet(nn::ParamStore& store, const SeparatorConfig& cfg,
                           Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  for (int b = 0; b < cfg_.branch_count(); ++b)
    branches_.push_back(
        make_branch(store, "separator.branch" + std::to_string(b + 1), rng));
}

nn::NodePtr SeparatorNet::apply_branch(std::size_t branch,
                                       const nn::NodePtr& input) const {
  const Branch& br = branches_.at(branch);
  nn::NodePtr fine = br.stage1.apply(input);
  nn::NodePtr deep = fine;
  for (const nn::ResBlock& res : br.stage2) deep = res.apply(deep);
  nn::NodePtr up = br.up.apply(nn::concat({deep, fine}));
  return br.stage3.apply(up);
}

std::pair<nn::NodePtr, nn::NodePtr> SeparatorNet::separate(
    const Tensor& in1, const Tensor& in2) const {
  if (cfg_.mode != SeparatorConfig::Mode::kDualBranch)
    throw std::invalid_argument("separator: not configured for dual branches");
  if (in1.chans != cfg_.input_channels() || in2.chans != cfg_.input_channels())
    throw std::invalid_argument("separator: input channel count mismatch");
  return {apply_branch(0, nn::constant(in1)),
          apply_branch(1, nn::constant(in2))};
}

nn::NodePtr SeparatorNet::separate_single_branch(const Tensor& in) const {
  if (cfg_.mode != SeparatorConfig::Mode::kSingleBranch)
    throw std::invalid_argument("separator: not configured as single branch");
  if (in.chans != cfg_.input_channels())
    throw std::invalid_argument("separator: input channel count mismatch");
  return apply_branch(0, nn::constant(in));
}

nn::NodePtr SeparatorNet::separate_single_view(const Tensor& in) const {
  if (cfg_.mode != SeparatorConfig::Mode::kSingleView)
    throw std::invalid_argument("separator: not configured for single view");
  if (in.chans != cfg_.input_channels())
    throw std::invalid_argument("separator: input channel count mismatch");
  return apply_branch(0, nn::constant(in));
}

std::size_t SeparatorNet::param_count(const SeparatorConfig& cfg) {
  cfg.validate();
  const auto conv = [](int cin, int cout, int kh, int kw) {
    return static_cast<std::size_t>(cout) * (static_cast<std::size_t>(cin) * kh * kw + 1);
  };
  const int w32 = cfg.scaled(32);
  const int w64 = cfg.scaled(64);
  const int cin = cfg.input_channels();
  const int out = cfg.output_channels();
  std::size_t per_branch = 0;
  per_branch += conv(cin, w32, 5, 5) + conv(w32, w64, 3, 3) +
                conv(w64, w64, 1, 1) + conv(w64, w64, 3, 3);
  per_branch += 3 * (conv(w64, w64, 3, 3) + conv(w64, w64, 1, 1) +
                     conv(w64, w64, 3, 3));
  per_branch += conv(2 * w64, w64, 3, 3);  // transposed stage
  per_branch += conv(w64, w64, 1, 1) + conv(w64, w32, 3, 3) + conv(w32, out, 1, 1);
  return per_branch * cfg.branch_count();
}

}  // namespace dvsci::net
