#include "dvsci/flow.hpp"

#include <algorithm>
#include <cmath>

#include "dvsci/io/container.hpp"
#include "dvsci/nn/layers.hpp"

namespace dvsci::flow {

namespace {

struct Image {
  int rows = 0, cols = 0;
  std::vector<float> v;
  Image() = default;
  Image(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0f) {}
  float& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  float at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

Image from_plane(const Tensor& t, int plane, bool clamp01) {
  Image img(t.rows, t.cols);
  const float* p = t.plane(plane);
  for (std::size_t i = 0; i < img.v.size(); ++i)
    img.v[i] = clamp01 ? std::min(1.0f, std::max(0.0f, p[i])) : p[i];
  return img;
}

int clampi(int x, int lo, int hi) { return x < lo ? lo : (x > hi ? hi : x); }

// Binomial anti-alias blur, then decimate by 2.
Image downsample2(const Image& in) {
  Image blur_h(in.rows, in.cols);
  for (int r = 0; r < in.rows; ++r)
    for (int c = 0; c < in.cols; ++c) {
      const int cm = clampi(c - 1, 0, in.cols - 1);
      const int cp = clampi(c + 1, 0, in.cols - 1);
      blur_h.at(r, c) = 0.25f * in.at(r, cm) + 0.5f * in.at(r, c) +
                        0.25f * in.at(r, cp);
    }
  Image blur(in.rows, in.cols);
  for (int r = 0; r < in.rows; ++r)
    for (int c = 0; c < in.cols; ++c) {
      const int rm = clampi(r - 1, 0, in.rows - 1);
      const int rp = clampi(r + 1, 0, in.rows - 1);
      blur.at(r, c) = 0.25f * blur_h.at(rm, c) + 0.5f * blur_h.at(r, c) +
                      0.25f * blur_h.at(rp, c);
    }
  Image out((in.rows + 1) / 2, (in.cols + 1) / 2);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) = blur.at(2 * r, 2 * c);
  return out;
}

float bilinear(const Image& img, float r, float c) {
  const int r0 = clampi(static_cast<int>(std::floor(r)), 0, img.rows - 1);
  const int c0 = clampi(static_cast<int>(std::floor(c)), 0, img.cols - 1);
  const int r1 = clampi(r0 + 1, 0, img.rows - 1);
  const int c1 = clampi(c0 + 1, 0, img.cols - 1);
  const float fr = std::min(1.0f, std::max(0.0f, r - static_cast<float>(r0)));
  const float fc = std::min(1.0f, std::max(0.0f, c - static_cast<float>(c0)));
  return (1.0f - fr) * ((1.0f - fc) * img.at(r0, c0) + fc * img.at(r0, c1)) +
         fr * ((1.0f - fc) * img.at(r1, c0) + fc * img.at(r1, c1));
}

Image upsample2_scaled(const Image& in, int rows, int cols) {
  Image out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out.at(r, c) = 2.0f * bilinear(in, 0.5f * r, 0.5f * c);
  return out;
}

// 3x3 median, the standard stabilizer between warp increments.
void median3x3(Image& f) {
  Image out(f.rows, f.cols);
  float window[9];
  for (int r = 0; r < f.rows; ++r) {
    for (int c = 0; c < f.cols; ++c) {
      int n = 0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc)
          window[n++] = f.at(clampi(r + dr, 0, f.rows - 1),
                             clampi(c + dc, 0, f.cols - 1));
      std::nth_element(window, window + 4, window + 9);
      out.at(r, c) = window[4];
    }
  }
  f = std::move(out);
}

// Horn-Schunck neighborhood average.
float local_avg(const Image& f, int r, int c) {
  const int rm = clampi(r - 1, 0, f.rows - 1), rp = clampi(r + 1, 0, f.rows - 1);
  const int cm = clampi(c - 1, 0, f.cols - 1), cp = clampi(c + 1, 0, f.cols - 1);
  return (f.at(rm, c) + f.at(rp, c) + f.at(r, cm) + f.at(r, cp)) / 6.0f +
         (f.at(rm, cm) + f.at(rm, cp) + f.at(rp, cm) + f.at(rp, cp)) / 12.0f;
}

// Relaxation on the linearized brightness-constancy model between a and the
// warped b; the model is re-linearized (b re-warped) every few sweeps so
// larger residual motions stay inside the linear range. u, v accumulate the
// total flow.
void horn_schunck_level(const Image& a, const Image& b, Image& u, Image& v,
                        int iterations, double alpha) {
  const int rows = a.rows, cols = a.cols;
  constexpr int kSweepsPerWarp = 10;
  const float alpha2 = static_cast<float>(alpha * alpha);
  Image bw(rows, cols), ix(rows, cols), iy(rows, cols), it(rows, cols);
  Image du(rows, cols), dv(rows, cols), du2(rows, cols), dv2(rows, cols);
  std::vector<char> valid(static_cast<std::size_t>(rows) * cols, 1);
  int done = 0;
  while (done < iterations) {
    const int sweeps = std::min(kSweepsPerWarp, iterations - done);
    done += sweeps;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const float wr = r + v.at(r, c), wc = c + u.at(r, c);
        bw.at(r, c) = bilinear(b, wr, wc);
        valid[static_cast<std::size_t>(r) * cols + c] =
            wr >= 0.0f && wr <= rows - 1.0f && wc >= 0.0f && wc <= cols - 1.0f;
      }
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const int cm = clampi(c - 1, 0, cols - 1), cp = clampi(c + 1, 0, cols - 1);
        const int rm = clampi(r - 1, 0, rows - 1), rp = clampi(r + 1, 0, rows - 1);
        ix.at(r, c) = 0.25f * ((a.at(r, cp) - a.at(r, cm)) +
                               (bw.at(r, cp) - bw.at(r, cm)));
        iy.at(r, c) = 0.25f * ((a.at(rp, c) - a.at(rm, c)) +
                               (bw.at(rp, c) - bw.at(rm, c)));
        // No data term where the warp leaves the frame.
        it.at(r, c) = valid[static_cast<std::size_t>(r) * cols + c]
                          ? bw.at(r, c) - a.at(r, c)
                          : 0.0f;
      }
    }
    du.v.assign(du.v.size(), 0.0f);
    dv.v.assign(dv.v.size(), 0.0f);
    for (int iter = 0; iter < sweeps; ++iter) {
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          const float ubar = local_avg(du, r, c);
          const float vbar = local_avg(dv, r, c);
          const float gx = ix.at(r, c), gy = iy.at(r, c);
          const float t = (gx * ubar + gy * vbar + it.at(r, c)) /
                          (alpha2 + gx * gx + gy * gy);
          du2.at(r, c) = ubar - gx * t;
          dv2.at(r, c) = vbar - gy * t;
        }
      }
      std::swap(du, du2);
      std::swap(dv, dv2);
    }
    // The linearization is only trustworthy within about a pixel; cap each
    // increment so weak-gradient regions cannot overshoot, and median-filter
    // the field so rough increments cannot feed back through the next warp.
    for (std::size_t i = 0; i < u.v.size(); ++i) {
      u.v[i] += std::min(1.0f, std::max(-1.0f, du.v[i]));
      v.v[i] += std::min(1.0f, std::max(-1.0f, dv.v[i]));
    }
    median3x3(u);
    median3x3(v);
  }
}

FlowField classical_estimate(const EstimatorSpec& spec, const Tensor& fa,
                             const Tensor& fb) {
  std::vector<Image> pa, pb;
  pa.push_back(from_plane(fa, 0, true));
  pb.push_back(from_plane(fb, 0, true));
  for (int l = 1; l < spec.pyramid_levels; ++l) {
    if (pa.back().rows < 8 || pa.back().cols < 8) break;
    pa.push_back(downsample2(pa.back()));
    pb.push_back(downsample2(pb.back()));
  }
  Image u(pa.back().rows, pa.back().cols);
  Image v(pa.back().rows, pa.back().cols);
  for (int l = static_cast<int>(pa.size()) - 1; l >= 0; --l) {
    if (u.rows != pa[l].rows || u.cols != pa[l].cols) {
      u = upsample2_scaled(u, pa[l].rows, pa[l].cols);
      v = upsample2_scaled(v, pa[l].rows, pa[l].cols);
    }
    horn_schunck_level(pa[l], pb[l], u, v, spec.iterations_per_level,
                       spec.regularization);
  }
  FlowField f;
  f.uv = Tensor(2, fa.rows, fa.cols);
  const float cap = static_cast<float>(spec.max_displacement);
  for (std::size_t i = 0; i < u.v.size(); ++i) {
    f.uv.v[i] = std::min(cap, std::max(-cap, u.v[i]));
    f.uv.v[u.v.size() + i] = std::min(cap, std::max(-cap, v.v[i]));
  }
  return f;
}

const std::vector<nn::ConvSpec>& adapter_arch() {
  static const std::vector<nn::ConvSpec> arch = {
      {5, 5, 16, 1, true}, {3, 3, 16, 1, true}, {3, 3, 2, 1, false}};
  return arch;
}

}  // namespace

void EstimatorSpec::validate() const {
  if (pyramid_levels < 1)
    throw std::invalid_argument("flow: pyramid levels must be >= 1");
  if (iterations_per_level < 1)
    throw std::invalid_argument("flow: iterations must be >= 1");
  if (regularization <= 0.0)
    throw std::invalid_argument("flow: regularization must be > 0");
  if (max_displacement <= 0.0)
    throw std::invalid_argument("flow: max displacement must be > 0");
}

Estimator::Estimator(const EstimatorSpec& spec, nn::ParamStore* store,
                     Rng* init_rng)
    : spec_(spec) {
  spec_.validate();
  if (spec_.kind == Kind::kLearnedAdapter) {
    if (!store)
      throw std::invalid_argument(
          "flow: learned adapter needs a parameter store");
    Rng fallback(7);
    Rng& rng = init_rng ? *init_rng : fallback;
    int cin = 2;
    for (std::size_t i = 0; i < adapter_arch().size(); ++i) {
      const nn::ConvSpec& cs = adapter_arch()[i];
      const nn::ConvDims dims{cs.cout, cin, cs.kh, cs.kw};
      nn::NodePtr w = store->create(
          "flow_adapter.conv" + std::to_string(i) + ".weight",
          nn::init_conv_weight(dims, rng));
      nn::NodePtr b = store->create(
          "flow_adapter.conv" + std::to_string(i) + ".bias",
          Tensor(cs.cout, 1, 1));
      adapter_params_.push_back(w);
      adapter_params_.push_back(b);
      cin = cs.cout;
    }
    if (!spec_.weight_file.empty()) {
      if (!std::filesystem::exists(std::filesystem::path(spec_.weight_file) /
                                   "manifest.txt"))
        throw std::runtime_error("flow: adapter weight file missing: " +
                                 spec_.weight_file);
      io::Container c = io::Container::load(spec_.weight_file);
      for (const nn::NodePtr& p : adapter_params_) {
        const Tensor& t = c.get_f32(p->name);
        if (!t.same_shape(p->value))
          throw std::runtime_error("flow: adapter weight shape mismatch for " +
                                   p->name);
        p->value = t;
      }
    }
    if (!spec_.fine_tunable)
      for (const nn::NodePtr& p : adapter_params_) p->requires_grad = false;
  }
}

FlowField Estimator::estimate(const Tensor& frame_a, const Tensor& frame_b,
                              FlowField::Direction direction,
                              int pair_index) const {
  if (frame_a.chans != 1 || frame_b.chans != 1)
    throw std::invalid_argument("flow: frames must be single-plane");
  require_same_shape(frame_a, frame_b, "flow estimate");
  FlowField f;
  if (spec_.kind == Kind::kClassical) {
    f = classical_estimate(spec_, frame_a, frame_b);
  } else {
    nn::NodePtr out = estimate_node(nn::constant(frame_a), nn::constant(frame_b));
    f.uv = out->value;
    const float cap = static_cast<float>(spec_.max_displacement);
    for (float& x : f.uv.v) x = std::min(cap, std::max(-cap, x));
  }
  f.direction = direction;
  f.pair_index = pair_index;
  return f;
}

nn::NodePtr Estimator::estimate_node(const nn::NodePtr& frame_a,
                                     const nn::NodePtr& frame_b) const {
  if (spec_.kind == Kind::kClassical) {
    FlowField f = estimate(frame_a->value, frame_b->value);
    return nn::constant(std::move(f.uv));
  }
  nn::NodePtr x = nn::concat({frame_a, frame_b});
  int cin = 2;
  for (std::size_t i = 0; i < adapter_arch().size(); ++i) {
    const nn::ConvSpec& cs = adapter_arch()[i];
    const nn::ConvDims dims{cs.cout, cin, cs.kh, cs.kw};
    x = nn::conv2d(x, adapter_params_[2 * i], adapter_params_[2 * i + 1], dims,
                   1);
    if (cs.activated) x = nn::leaky_relu(x);
    cin = cs.cout;
  }
  return x;
}

std::vector<nn::NodePtr> Estimator::trainable_params() const {
  if (spec_.kind == Kind::kLearnedAdapter && spec_.fine_tunable)
    return adapter_params_;
  return {};
}

void Estimator::require_fine_tunable() const {
  if (spec_.kind == Kind::kClassical)
    throw std::invalid_argument(
        "flow: the classical estimator exposes no parameters to fine-tune");
  if (!spec_.fine_tunable)
    throw std::invalid_argument("flow: adapter was loaded frozen");
}

std::pair<std::vector<FlowField>, std::vector<FlowField>> extract_bidirectional(
    const Estimator& estimator, const core::VideoCube& video) {
  const int frames = video.frames();
  if (frames < 2)
    throw std::invalid_argument("extract_bidirectional: needs at least 2 frames");
  std::vector<FlowField> fwd, bwd;
  for (int t = 0; t + 1 < frames; ++t) {
    Tensor a = video.data.slice(t, 1);
    Tensor b = video.data.slice(t + 1, 1);
    fwd.push_back(estimator.estimate(a, b, FlowField::Direction::kForward, t));
    bwd.push_back(estimator.estimate(b, a, FlowField::Direction::kBackward, t));
  }
  return {std::move(fwd), std::move(bwd)};
}

Tensor flow_color(const Tensor& uv) {
  if (uv.chans != 2) throw std::invalid_argument("flow_color: expected 2 planes");
  float maxmag = 1e-9f;
  const std::size_t n = uv.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    const float u = uv.v[i], v = uv.v[n + i];
    maxmag = std::max(maxmag, std::sqrt(u * u + v * v));
  }
  Tensor rgb(3, uv.rows, uv.cols);
  for (std::size_t i = 0; i < n; ++i) {
    const float u = uv.v[i], v = uv.v[n + i];
    const float mag = std::sqrt(u * u + v * v) / maxmag;
    const float ang = std::atan2(v, u);  // [-pi, pi]
    const float hue = (ang + 3.14159265f) / (2.0f * 3.14159265f) * 6.0f;
    const int sector = std::min(5, static_cast<int>(hue));
    const float frac = hue - sector;
    float r = 0, g = 0, b = 0;
    const float q = 1.0f - frac;
    switch (sector) {
      case 0: r = 1; g = frac; break;
      case 1: r = q; g = 1; break;
      case 2: g = 1; b = frac; break;
      case 3: g = q; b = 1; break;
      case 4: r = frac; b = 1; break;
      default: r = 1; b = q; break;
    }
    rgb.v[i] = 1.0f - mag * (1.0f - r);
    rgb.v[n + i] = 1.0f - mag * (1.0f - g);
    rgb.v[2 * n + i] = 1.0f - mag * (1.0f - b);
  }
  return rgb;
}

}  // namespace dvsci::flow
