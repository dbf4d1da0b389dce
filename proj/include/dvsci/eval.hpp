#ifndef DVSCI_EVAL_HPP
#define DVSCI_EVAL_HPP

#include <functional>
#include <string>
#include <vector>

#include "dvsci/sci_core.hpp"
#include "dvsci/tensor.hpp"

namespace dvsci::eval {

// Peak signal-to-noise ratio in dB over all entries; +inf when the tensors
// are identical.
double psnr(const Tensor& ref, const Tensor& est, double peak = 1.0);

// Mean local structural similarity over an 11x11 Gaussian window (sigma 1.5,
// K1 = 0.01, K2 = 0.03, dynamic range 1), windows fully inside the image.
double ssim(const Tensor& ref, const Tensor& est);

struct FrameScore {
  int frame = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct ViewScores {
  std::vector<FrameScore> frames;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

struct EvalReport {
  std::vector<ViewScores> views;
  double avg_psnr = 0.0;  // mean of per-view means
  double avg_ssim = 0.0;
  double seconds = 0.0;  // wall time per measurement, when measured
  std::string config_hash;
};

// Per-frame scores for one view; estimates are clamped to [0,1] first.
ViewScores framewise_report(const Tensor& ref_cube, const Tensor& est_cube);

EvalReport evaluate_pair(const Tensor& ref1, const Tensor& est1,
                         const Tensor& ref2, const Tensor& est2);

std::string report_table(const EvalReport& report);
std::string report_csv(const EvalReport& report);

// A reconstruction routine under test: measurement + masks -> per-view cubes.
using Reconstructor = std::function<std::pair<Tensor, Tensor>(
    const core::Measurement&, const core::MaskSet&)>;

struct ScenePair {
  core::VideoCube x1, x2;
};

struct SweepRow {
  double param = 0.0;  // sigma or frame count
  double avg_psnr = 0.0;
  double avg_ssim = 0.0;
  double psnr_view1 = 0.0, psnr_view2 = 0.0;
  double ssim_view1 = 0.0, ssim_view2 = 0.0;
  double seconds = 0.0;
  // Diagnostic: this row beat a row with less noise (not asserted).
  bool beats_cleaner_row = false;
};

std::vector<SweepRow> noise_sweep(const Reconstructor& algo,
                                  const std::vector<ScenePair>& scenes,
                                  const core::MaskSet& masks,
                                  const std::vector<double>& sigmas,
                                  std::uint64_t seed);

struct RateSweepInputs {
  // May throw when no model exists for a frame count.
  std::function<Reconstructor(int frames)> make_reconstructor;
  std::function<core::MaskSet(int frames)> make_masks;
  std::vector<ScenePair> scenes;  // each with at least max(frame list) frames
};

std::vector<SweepRow> rate_sweep(const RateSweepInputs& inputs,
                                 const std::vector<int>& frame_counts);

std::string sweep_table(const std::vector<SweepRow>& rows, const char* param_name);

// Median wall time of repeated reconstructions, seconds. Model loading is the
// caller's responsibility and is excluded by construction.
double time_reconstruction(const Reconstructor& algo,
                           const core::Measurement& m,
                           const core::MaskSet& masks, int repetitions);

}  // namespace dvsci::eval

#endif
