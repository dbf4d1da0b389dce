#ifndef DVSCI_AMPLIFIER_HPP
#define DVSCI_AMPLIFIER_HPP

#include <utility>

#include "dvsci/sci_core.hpp"
#include "dvsci/tensor.hpp"

namespace dvsci::amp {

struct SmoothingConfig {
  double sigma = 5.0;  // pixels
  int radius = 15;     // pixels, kernel truncation half-width
  void validate() const;
};

struct AmplifierConfig {
  SmoothingConfig smoothing;
  // Divide by the summed patterns instead of the per-frame mean (a true
  // weighted average of the frames rather than the printed scaling).
  bool normalize_by_sum = false;
};

// Normalized measurement plus the four diversity-amplified images. The
// contrast pair satisfies d3 = d1 - smooth(d1), d4 = d2 - smooth(d2) by
// construction. Degenerate pixels (no pattern coverage) are zeroed and
// counted per image.
struct DiversityBundle {
  Tensor ybar;
  Tensor d1, d2, d3, d4;
  SmoothingConfig smoothing;
  int clamped_ybar = 0;
  int clamped_d1 = 0;
  int clamped_d2 = 0;
};

// Ybar: divide each pixel by the mean of all 2B patterns (or their sum when
// by_sum). Pixels whose mean pattern is below 1e-6 are set to 0.
Tensor normalize_measurement(const core::Measurement& m,
                             const core::MaskSet& masks, bool by_sum = false,
                             int* clamped = nullptr);

// Same normalization against a single pattern stack (single-view mode).
Tensor normalize_measurement_single(const core::Measurement& m,
                                    const TensorU8& c, bool by_sum = false,
                                    int* clamped = nullptr);

// D1, D2: divide by each view's own mean pattern.
std::pair<Tensor, Tensor> compute_view_normalizations(
    const core::Measurement& m, const core::MaskSet& masks,
    int* clamped1 = nullptr, int* clamped2 = nullptr);

// Separable Gaussian blur with reflective boundary; preserves constants
// exactly.
Tensor gaussian_smooth(const Tensor& img, const SmoothingConfig& cfg);

// D3 = D1 - smooth(D1), D4 = D2 - smooth(D2).
std::pair<Tensor, Tensor> compute_contrast_images(const Tensor& d1,
                                                  const Tensor& d2,
                                                  const SmoothingConfig& cfg);

DiversityBundle build_bundle(const core::Measurement& m,
                             const core::MaskSet& masks,
                             const AmplifierConfig& cfg = {});

}  // namespace dvsci::amp

#endif
