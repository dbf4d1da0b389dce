#include "dvsci/sci_core.hpp"

#include <algorithm>
#include <sstream>

#include "dvsci/rng.hpp"

namespace dvsci::core {

namespace {

int wrap(int i, int n) {
  int r = i % n;
  return r < 0 ? r + n : r;
}

void add_gaussian(Tensor& t, float sigma, std::uint64_t seed) {
  if (sigma < 0.0f) throw std::invalid_argument("noise sigma must be >= 0");
  if (sigma == 0.0f) return;
  Rng rng(seed);
  for (float& x : t.v) x = static_cast<float>(x + sigma * rng.gaussian());
}

}  // namespace

void VideoCube::validate() const {
  if (data.chans < 1 || data.rows < 1 || data.cols < 1)
    throw std::invalid_argument("video cube: empty dimensions");
  for (float x : data.v) {
    if (!std::isfinite(x) || x < 0.0f || x > 1.0f)
      throw std::invalid_argument("video cube: entries must be finite in [0,1]");
  }
}

std::string MaskSet::id() const {
  std::ostringstream ss;
  ss << "mask-" << seed << "-" << c1.shape_str() << "-d" << density << "-s"
     << shift[0] << "," << shift[1];
  return ss.str();
}

void MaskSet::validate() const {
  require_same_shape(c1, c2, "mask set");
  if (c1.chans < 1 || c1.rows < 1 || c1.cols < 1)
    throw std::invalid_argument("mask set: empty dimensions");
  for (std::uint8_t x : c1.v)
    if (x > 1) throw std::invalid_argument("mask set: entries must be 0/1");
  for (std::uint8_t x : c2.v)
    if (x > 1) throw std::invalid_argument("mask set: entries must be 0/1");
  if (std::max(std::abs(shift[0]), std::abs(shift[1])) < 2)
    throw std::invalid_argument(
        "mask set: shift magnitude below 2 px leaves the views correlated");
  for (int b = 0; b < c1.chans; ++b)
    for (int r = 0; r < c1.rows; ++r)
      for (int c = 0; c < c1.cols; ++c)
        if (c2.at(b, r, c) !=
            c1.at(b, wrap(r - shift[0], c1.rows), wrap(c - shift[1], c1.cols)))
          throw std::invalid_argument("mask set: shift relation violated");
}

void Measurement::validate() const {
  if (y.chans != 1 || y.rows < 1 || y.cols < 1)
    throw std::invalid_argument("measurement: expected one plane");
  if (!all_finite(y))
    throw std::invalid_argument("measurement: non-finite entries");
}

MaskSet generate_masks(int rows, int cols, int frames, double density,
                       std::array<int, 2> shift, std::uint64_t seed) {
  if (rows < 1 || cols < 1 || frames < 1)
    throw std::invalid_argument("generate_masks: empty dimensions");
  if (!(density > 0.0 && density <= 1.0))
    throw std::invalid_argument("generate_masks: density must be in (0,1]");
  if (std::max(std::abs(shift[0]), std::abs(shift[1])) < 2)
    throw std::invalid_argument(
        "generate_masks: shift of (0,0) or magnitude 1 rejected, views would "
        "be correlated");
  // A shift that wraps close to the identity would also correlate the views.
  const int eff_r = wrap(shift[0], rows);
  const int eff_c = wrap(shift[1], cols);
  const int eff_r_mag = std::min(eff_r, rows - eff_r);
  const int eff_c_mag = std::min(eff_c, cols - eff_c);
  if (std::max(eff_r_mag, eff_c_mag) < 2)
    throw std::invalid_argument(
        "generate_masks: shift wraps to magnitude below 2 px on this geometry");

  MaskSet m;
  m.shift = shift;
  m.density = density;
  m.seed = seed;
  m.c1 = TensorU8(frames, rows, cols);
  m.c2 = TensorU8(frames, rows, cols);
  Rng rng(seed);
  for (int b = 0; b < frames; ++b)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        m.c1.at(b, r, c) = rng.bernoulli(density) ? 1 : 0;
  for (int b = 0; b < frames; ++b)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        m.c2.at(b, r, c) =
            m.c1.at(b, wrap(r - shift[0], rows), wrap(c - shift[1], cols));
  return m;
}

Tensor mask_to_float(const TensorU8& m) {
  Tensor out(m.chans, m.rows, m.cols);
  for (std::size_t i = 0; i < m.v.size(); ++i)
    out.v[i] = static_cast<float>(m.v[i]);
  return out;
}

Tensor stack_masks(const MaskSet& masks) {
  Tensor f1 = mask_to_float(masks.c1);
  Tensor f2 = mask_to_float(masks.c2);
  return concat_chans<float>({&f1, &f2});
}

Measurement encode_stacked(const Tensor& x, const Tensor& c) {
  require_same_shape(x, c, "encode_stacked");
  if (x.chans % 2 != 0)
    throw std::invalid_argument("encode_stacked: odd temporal length");
  Measurement m;
  m.y = Tensor(1, x.rows, x.cols);
  const std::size_t plane = x.plane_size();
  for (std::size_t p = 0; p < plane; ++p) {
    double acc = 0.0;  // summed over planes in ascending order
    for (int b = 0; b < x.chans; ++b)
      acc += static_cast<double>(x.v[b * plane + p]) *
             static_cast<double>(c.v[b * plane + p]);
    m.y.v[p] = static_cast<float>(acc);
  }
  m.meta.frames_per_view = x.chans / 2;
  return m;
}

Measurement encode(const VideoCube& x1, const VideoCube& x2,
                   const MaskSet& masks, float noise_sigma,
                   std::uint64_t seed) {
  require_same_shape(x1.data, x2.data, "encode");
  if (x1.data.chans != masks.frames() || x1.data.rows != masks.rows() ||
      x1.data.cols != masks.cols())
    throw std::invalid_argument("encode: scene and mask shapes disagree");
  const Tensor x = concat_chans<float>({&x1.data, &x2.data});
  Measurement m = encode_stacked(x, stack_masks(masks));
  add_gaussian(m.y, noise_sigma, seed);
  m.meta.mask_ref = masks.id();
  m.meta.noise_sigma = noise_sigma;
  return m;
}

Measurement encode_single(const VideoCube& x, const TensorU8& c,
                          float noise_sigma, std::uint64_t seed) {
  if (x.data.chans != c.chans || x.data.rows != c.rows ||
      x.data.cols != c.cols)
    throw std::invalid_argument("encode_single: scene and mask shapes disagree");
  Measurement m;
  m.y = Tensor(1, x.data.rows, x.data.cols);
  const Tensor cf = mask_to_float(c);
  const std::size_t plane = x.data.plane_size();
  for (std::size_t p = 0; p < plane; ++p) {
    double acc = 0.0;
    for (int b = 0; b < x.data.chans; ++b)
      acc += static_cast<double>(x.data.v[b * plane + p]) *
             static_cast<double>(cf.v[b * plane + p]);
    m.y.v[p] = static_cast<float>(acc);
  }
  add_gaussian(m.y, noise_sigma, seed);
  m.meta.frames_per_view = x.data.chans;
  m.meta.noise_sigma = noise_sigma;
  return m;
}

SensingOperator::SensingOperator(Tensor mask_stack)
    : masks_(std::move(mask_stack)) {
  if (masks_.chans < 1)
    throw std::invalid_argument("sensing operator: empty mask stack");
}

SensingOperator SensingOperator::from_masks(const MaskSet& masks) {
  return SensingOperator(stack_masks(masks));
}

SensingOperator SensingOperator::from_single(const TensorU8& c) {
  return SensingOperator(mask_to_float(c));
}

Tensor SensingOperator::forward(const Tensor& x) const {
  require_same_shape(x, masks_, "sensing forward");
  Tensor y(1, x.rows, x.cols);
  const std::size_t plane = x.plane_size();
  for (std::size_t p = 0; p < plane; ++p) {
    double acc = 0.0;
    for (int b = 0; b < x.chans; ++b)
      acc += static_cast<double>(x.v[b * plane + p]) *
             static_cast<double>(masks_.v[b * plane + p]);
    y.v[p] = static_cast<float>(acc);
  }
  return y;
}

Tensor SensingOperator::adjoint(const Tensor& r) const {
  if (r.chans != 1 || r.rows != masks_.rows || r.cols != masks_.cols)
    throw std::invalid_argument("sensing adjoint: shape mismatch");
  Tensor x(masks_.chans, masks_.rows, masks_.cols);
  const std::size_t plane = r.plane_size();
  for (int b = 0; b < masks_.chans; ++b)
    for (std::size_t p = 0; p < plane; ++p)
      x.v[b * plane + p] = r.v[p] * masks_.v[b * plane + p];
  return x;
}

Tensor SensingOperator::phi_phit_diag() const {
  Tensor d(1, masks_.rows, masks_.cols);
  const std::size_t plane = d.plane_size();
  for (std::size_t p = 0; p < plane; ++p) {
    double acc = 0.0;
    for (int b = 0; b < masks_.chans; ++b) {
      const double m = masks_.v[b * plane + p];
      acc += m * m;
    }
    d.v[p] = static_cast<float>(acc);
  }
  return d;
}

Measurement normalize_and_add_noise(const Measurement& m, float sigma,
                                    std::uint64_t seed) {
  if (sigma < 0.0f) throw std::invalid_argument("noise sigma must be >= 0");
  float peak = 0.0f;
  for (float x : m.y.v) peak = std::max(peak, x);
  if (peak <= 0.0f)
    throw std::invalid_argument(
        "normalize_and_add_noise: all-zero measurement cannot be normalized");
  Measurement out = m;
  for (float& x : out.y.v)
    x = static_cast<float>(static_cast<double>(x) / peak);
  add_gaussian(out.y, sigma, seed);
  out.meta.normalized = true;
  out.meta.scale = peak;
  out.meta.noise_sigma = sigma;
  return out;
}

}  // namespace dvsci::core
