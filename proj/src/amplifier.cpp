#include "dvsci/amplifier.hpp"

#include <vector>

namespace dvsci::amp {

namespace {

constexpr double kDegenerateEps = 1e-6;

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

// Normalized 1-D kernel with the center weight adjusted so the weights sum
// to 1 in double precision.
std::vector<double> gaussian_kernel(const SmoothingConfig& cfg) {
  std::vector<double> k(2 * cfg.radius + 1);
  double sum = 0.0;
  for (int i = -cfg.radius; i <= cfg.radius; ++i) {
    k[i + cfg.radius] = std::exp(-0.5 * (i * i) / (cfg.sigma * cfg.sigma));
    sum += k[i + cfg.radius];
  }
  for (double& w : k) w /= sum;
  double resid = -1.0;
  for (double w : k) resid += w;
  k[cfg.radius] -= resid;
  return k;
}

// Divide the measurement by a per-pixel pattern average; zero out pixels the
// patterns never sample.
Tensor divide_by_mean_pattern(const Tensor& y, const TensorU8* stacks[],
                              int n_stacks, double denom_scale, int* clamped) {
  Tensor out(1, y.rows, y.cols);
  const std::size_t plane = y.plane_size();
  int n_clamped = 0;
  for (std::size_t p = 0; p < plane; ++p) {
    double cover = 0.0;
    for (int s = 0; s < n_stacks; ++s) {
      const TensorU8& c = *stacks[s];
      for (int b = 0; b < c.chans; ++b) cover += c.v[b * plane + p];
    }
    const double denom = cover / denom_scale;
    if (denom <= kDegenerateEps) {
      out.v[p] = 0.0f;
      ++n_clamped;
    } else {
      out.v[p] = static_cast<float>(static_cast<double>(y.v[p]) / denom);
    }
  }
  if (clamped) *clamped = n_clamped;
  return out;
}

}  // namespace

void SmoothingConfig::validate() const {
  if (sigma <= 0.0) throw std::invalid_argument("smoothing: sigma must be > 0");
  if (radius < 3.0 * sigma)
    throw std::invalid_argument("smoothing: radius must be >= 3*sigma");
}

Tensor normalize_measurement(const core::Measurement& m,
                             const core::MaskSet& masks, bool by_sum,
                             int* clamped) {
  if (m.y.rows != masks.rows() || m.y.cols != masks.cols())
    throw std::invalid_argument("normalize_measurement: shape mismatch");
  const TensorU8* stacks[2] = {&masks.c1, &masks.c2};
  const double scale = by_sum ? 1.0 : 2.0 * masks.frames();
  return divide_by_mean_pattern(m.y, stacks, 2, scale, clamped);
}

Tensor normalize_measurement_single(const core::Measurement& m,
                                    const TensorU8& c, bool by_sum,
                                    int* clamped) {
  if (m.y.rows != c.rows || m.y.cols != c.cols)
    throw std::invalid_argument("normalize_measurement: shape mismatch");
  const TensorU8* stacks[1] = {&c};
  const double scale = by_sum ? 1.0 : static_cast<double>(c.chans);
  return divide_by_mean_pattern(m.y, stacks, 1, scale, clamped);
}

std::pair<Tensor, Tensor> compute_view_normalizations(
    const core::Measurement& m, const core::MaskSet& masks, int* clamped1,
    int* clamped2) {
  if (m.y.rows != masks.rows() || m.y.cols != masks.cols())
    throw std::invalid_argument("compute_view_normalizations: shape mismatch");
  const TensorU8* s1[1] = {&masks.c1};
  const TensorU8* s2[1] = {&masks.c2};
  const double scale = static_cast<double>(masks.frames());
  return {divide_by_mean_pattern(m.y, s1, 1, scale, clamped1),
          divide_by_mean_pattern(m.y, s2, 1, scale, clamped2)};
}

Tensor gaussian_smooth(const Tensor& img, const SmoothingConfig& cfg) {
  cfg.validate();
  const std::vector<double> kernel = gaussian_kernel(cfg);
  const int radius = cfg.radius;

  // Difference form out = x + sum_i w_i * (x_i - x): a constant input passes
  // through bit-exactly regardless of kernel rounding.
  Tensor tmp(img.chans, img.rows, img.cols);
  for (int ch = 0; ch < img.chans; ++ch) {
    for (int r = 0; r < img.rows; ++r) {
      const float* row = img.plane(ch) + static_cast<std::size_t>(r) * img.cols;
      float* out = tmp.plane(ch) + static_cast<std::size_t>(r) * img.cols;
      for (int c = 0; c < img.cols; ++c) {
        const double center = row[c];
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * (row[reflect_index(c + i, img.cols)] - center);
        out[c] = static_cast<float>(center + acc);
      }
    }
  }
  Tensor out(img.chans, img.rows, img.cols);
  for (int ch = 0; ch < img.chans; ++ch) {
    for (int c = 0; c < img.cols; ++c) {
      for (int r = 0; r < img.rows; ++r) {
        const double center = tmp.at(ch, r, c);
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] *
                 (tmp.at(ch, reflect_index(r + i, img.rows), c) - center);
        out.at(ch, r, c) = static_cast<float>(center + acc);
      }
    }
  }
  return out;
}

std::pair<Tensor, Tensor> compute_contrast_images(const Tensor& d1,
                                                  const Tensor& d2,
                                                  const SmoothingConfig& cfg) {
  require_same_shape(d1, d2, "compute_contrast_images");
  Tensor g1 = gaussian_smooth(d1, cfg);
  Tensor g2 = gaussian_smooth(d2, cfg);
  Tensor d3(d1.chans, d1.rows, d1.cols);
  Tensor d4(d1.chans, d1.rows, d1.cols);
  for (std::size_t i = 0; i < d1.v.size(); ++i) {
    d3.v[i] = d1.v[i] - g1.v[i];
    d4.v[i] = d2.v[i] - g2.v[i];
  }
  return {std::move(d3), std::move(d4)};
}

DiversityBundle build_bundle(const core::Measurement& m,
                             const core::MaskSet& masks,
                             const AmplifierConfig& cfg) {
  cfg.smoothing.validate();
  DiversityBundle b;
  b.smoothing = cfg.smoothing;
  b.ybar = normalize_measurement(m, masks, cfg.normalize_by_sum, &b.clamped_ybar);
  auto [d1, d2] = compute_view_normalizations(m, masks, &b.clamped_d1, &b.clamped_d2);
  b.d1 = std::move(d1);
  b.d2 = std::move(d2);
  auto [d3, d4] = compute_contrast_images(b.d1, b.d2, cfg.smoothing);
  b.d3 = std::move(d3);
  b.d4 = std::move(d4);
  return b;
}

}  // namespace dvsci::amp
