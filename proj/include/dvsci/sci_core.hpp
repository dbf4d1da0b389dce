#ifndef DVSCI_SCI_CORE_HPP
#define DVSCI_SCI_CORE_HPP

#include <array>
#include <cstdint>
#include <string>

#include "dvsci/tensor.hpp"

namespace dvsci::core {

enum class ViewId { kSingle = 0, kView1 = 1, kView2 = 2 };

// One view's frame stack, intensities in [0,1], plane b = frame b.
struct VideoCube {
  Tensor data;
  ViewId view = ViewId::kSingle;

  int frames() const { return data.chans; }
  int rows() const { return data.rows; }
  int cols() const { return data.cols; }
  void validate() const;
};

// Paired binary coding-pattern stacks; c2 is a circular spatial shift of c1.
struct MaskSet {
  TensorU8 c1;
  TensorU8 c2;
  std::array<int, 2> shift{0, 10};  // (row, col) pixels
  double density = 0.5;
  std::uint64_t seed = 0;

  int frames() const { return c1.chans; }
  int rows() const { return c1.rows; }
  int cols() const { return c1.cols; }
  std::string id() const;
  void validate() const;
};

struct MeasurementMeta {
  int frames_per_view = 0;
  std::string mask_ref;
  float noise_sigma = 0.0f;
  bool normalized = false;
  float scale = 1.0f;  // peak used when normalizing to [0,1]
};

// Single snapshot matrix (one plane) plus provenance.
struct Measurement {
  Tensor y;
  MeasurementMeta meta;

  int rows() const { return y.rows; }
  int cols() const { return y.cols; }
  void validate() const;
};

MaskSet generate_masks(int rows, int cols, int frames, double density,
                       std::array<int, 2> shift, std::uint64_t seed);

// Float [c1, c2] stack of 2B planes, the concatenated pattern cube.
Tensor stack_masks(const MaskSet& masks);
Tensor mask_to_float(const TensorU8& m);

Measurement encode(const VideoCube& x1, const VideoCube& x2,
                   const MaskSet& masks, float noise_sigma,
                   std::uint64_t seed);

// Generic stacked form: x and c hold both views back to back (even plane
// count). Noiseless.
Measurement encode_stacked(const Tensor& x, const Tensor& c);

// Single-view variant: one scene, one pattern stack.
Measurement encode_single(const VideoCube& x, const TensorU8& c,
                          float noise_sigma, std::uint64_t seed);

// Matrix-free sensing operator built from a stacked pattern cube. The dense
// matrix form is never materialized; its Gram matrix is diagonal with the
// per-pixel active-pattern count on the diagonal.
class SensingOperator {
 public:
  explicit SensingOperator(Tensor mask_stack);
  static SensingOperator from_masks(const MaskSet& masks);
  static SensingOperator from_single(const TensorU8& c);

  Tensor forward(const Tensor& x) const;   // 1 x rows x cols
  Tensor adjoint(const Tensor& r) const;   // n x rows x cols
  Tensor phi_phit_diag() const;            // 1 x rows x cols
  double sampling_ratio() const { return 1.0 / masks_.chans; }
  int stack_frames() const { return masks_.chans; }
  const Tensor& masks() const { return masks_; }

 private:
  Tensor masks_;
};

// Scale to [0,1] by the measurement's own peak, then add zero-mean Gaussian
// noise of standard deviation sigma (in normalized units).
Measurement normalize_and_add_noise(const Measurement& m, float sigma,
                                    std::uint64_t seed);

}  // namespace dvsci::core

#endif
