#include "dvsci/solvers.hpp"

#include <cmath>
#include <sstream>

namespace dvsci::solver {

namespace {

TensorD forward_d(const TensorD& masks, const TensorD& x) {
  TensorD y(1, x.rows, x.cols);
  const std::size_t plane = x.plane_size();
  for (std::size_t p = 0; p < plane; ++p) {
    double acc = 0.0;
    for (int b = 0; b < x.chans; ++b)
      acc += x.v[b * plane + p] * masks.v[b * plane + p];
    y.v[p] = acc;
  }
  return y;
}

TensorD adjoint_d(const TensorD& masks, const TensorD& r) {
  TensorD x(masks.chans, masks.rows, masks.cols);
  const std::size_t plane = r.plane_size();
  for (int b = 0; b < masks.chans; ++b)
    for (std::size_t p = 0; p < plane; ++p)
      x.v[b * plane + p] = r.v[p] * masks.v[b * plane + p];
  return x;
}

double covered_residual_norm(const TensorD& y, const TensorD& yhat,
                             const TensorD& diag) {
  double s = 0.0;
  for (std::size_t p = 0; p < y.v.size(); ++p) {
    if (diag.v[p] <= 0.0) continue;
    const double d = y.v[p] - yhat.v[p];
    s += d * d;
  }
  return std::sqrt(s);
}

double full_residual_norm(const TensorD& y, const TensorD& yhat) {
  double s = 0.0;
  for (std::size_t p = 0; p < y.v.size(); ++p) {
    const double d = y.v[p] - yhat.v[p];
    s += d * d;
  }
  return std::sqrt(s);
}

// One frame of anisotropic TV: dual variables clamped to [-1,1], forward
// differences with Neumann boundary.
void tv_denoise_frame(const double* x, double* z, int rows, int cols,
                      double lambda, int iterations) {
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  std::vector<double> ph(n, 0.0), pv(n, 0.0), div(n, 0.0);
  const double tau = 0.125;
  auto idx = [cols](int r, int c) { return static_cast<std::size_t>(r) * cols + c; };
  for (int it = 0; it < iterations; ++it) {
    // div p
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        double d = 0.0;
        if (c < cols - 1) d += ph[idx(r, c)];
        if (c > 0) d -= ph[idx(r, c - 1)];
        if (r < rows - 1) d += pv[idx(r, c)];
        if (r > 0) d -= pv[idx(r - 1, c)];
        div[idx(r, c)] = d;
      }
    }
    // p += tau * grad(div p - x / lambda), then clamp componentwise
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const double u = div[idx(r, c)] - x[idx(r, c)] / lambda;
        if (c < cols - 1) {
          const double gx = (div[idx(r, c + 1)] - x[idx(r, c + 1)] / lambda) - u;
          ph[idx(r, c)] = std::min(1.0, std::max(-1.0, ph[idx(r, c)] + tau * gx));
        }
        if (r < rows - 1) {
          const double gy = (div[idx(r + 1, c)] - x[idx(r + 1, c)] / lambda) - u;
          pv[idx(r, c)] = std::min(1.0, std::max(-1.0, pv[idx(r, c)] + tau * gy));
        }
      }
    }
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double d = 0.0;
      if (c < cols - 1) d += ph[idx(r, c)];
      if (c > 0) d -= ph[idx(r, c - 1)];
      if (r < rows - 1) d += pv[idx(r, c)];
      if (r > 0) d -= pv[idx(r - 1, c)];
      z[idx(r, c)] = x[idx(r, c)] - lambda * d;
    }
  }
}

}  // namespace

void GapTvConfig::validate() const {
  if (iterations < 1)
    throw std::invalid_argument("solver: iterations must be >= 1");
  if (tv_lambda <= 0.0)
    throw std::invalid_argument("solver: tv lambda must be > 0");
  if (tv_inner_iterations < 1)
    throw std::invalid_argument("solver: tv inner iterations must be >= 1");
}

TensorD tv_denoise(const TensorD& cube, double lambda, int inner_iterations) {
  if (lambda <= 0.0) throw std::invalid_argument("tv_denoise: lambda must be > 0");
  TensorD out(cube.chans, cube.rows, cube.cols);
#pragma omp parallel for schedule(static)
  for (int b = 0; b < cube.chans; ++b)
    tv_denoise_frame(cube.plane(b), out.plane(b), cube.rows, cube.cols, lambda,
                     inner_iterations);
  return out;
}

Denoiser make_tv_denoiser(double lambda, int inner_iterations) {
  return [lambda, inner_iterations](const TensorD& cube) {
    return tv_denoise(cube, lambda, inner_iterations);
  };
}

std::pair<TensorD, SolverState> solve_stacked(const core::SensingOperator& op,
                                              const Tensor& y,
                                              const Denoiser& denoiser,
                                              int iterations,
                                              bool accelerated) {
  if (y.chans != 1 || y.rows != op.masks().rows || y.cols != op.masks().cols)
    throw std::invalid_argument("solve_stacked: measurement shape mismatch");
  const TensorD masks = op.masks().cast<double>();
  const TensorD yd = y.cast<double>();
  TensorD diag(1, y.rows, y.cols);
  {
    Tensor df = op.phi_phit_diag();
    diag = df.cast<double>();
  }
  bool any_cover = false;
  for (double d : diag.v) any_cover |= d > 0.0;
  if (!any_cover)
    throw std::invalid_argument("solve_stacked: all-zero masks");

  SolverState state;
  // Scale-consistent start from the normalized adjoint.
  TensorD x(masks.chans, masks.rows, masks.cols);
  {
    TensorD r0(1, y.rows, y.cols);
    for (std::size_t p = 0; p < r0.v.size(); ++p)
      r0.v[p] = diag.v[p] > 0.0 ? yd.v[p] / diag.v[p] : 0.0;
    x = adjoint_d(masks, r0);
  }
  TensorD z = yd;  // accelerated target; equals y in plain mode
  for (int it = 0; it < iterations; ++it) {
    TensorD yhat = forward_d(masks, x);
    TensorD corr(1, y.rows, y.cols);
    for (std::size_t p = 0; p < corr.v.size(); ++p)
      corr.v[p] = diag.v[p] > 0.0 ? (z.v[p] - yhat.v[p]) / diag.v[p] : 0.0;
    TensorD step = adjoint_d(masks, corr);
    for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] += step.v[i];

    yhat = forward_d(masks, x);
    state.projection_residuals.push_back(covered_residual_norm(yd, yhat, diag));

    x = denoiser(x);
    if (!all_finite(x))
      throw std::runtime_error("solve_stacked: denoiser produced non-finite values");
    yhat = forward_d(masks, x);
    state.end_residuals.push_back(full_residual_norm(yd, yhat));
    if (accelerated)
      for (std::size_t p = 0; p < z.v.size(); ++p)
        z.v[p] += yd.v[p] - yhat.v[p];
    ++state.iterations;
  }
  return {std::move(x), std::move(state)};
}

DualViewResult pnp_solve(const core::Measurement& m, const core::MaskSet& masks,
                         const Denoiser& denoiser, const GapTvConfig& cfg) {
  cfg.validate();
  const core::SensingOperator op = core::SensingOperator::from_masks(masks);
  auto [x, state] = solve_stacked(op, m.y, denoiser, cfg.iterations,
                                  cfg.accelerated);
  const int frames = masks.frames();
  const float scale = m.meta.normalized ? m.meta.scale : 1.0f;
  DualViewResult out;
  out.x1 = Tensor(frames, x.rows, x.cols);
  out.x2 = Tensor(frames, x.rows, x.cols);
  const std::size_t half = out.x1.v.size();
  for (std::size_t i = 0; i < half; ++i) {
    out.x1.v[i] = static_cast<float>(x.v[i] * scale);
    out.x2.v[i] = static_cast<float>(x.v[half + i] * scale);
  }
  out.state = std::move(state);
  return out;
}

DualViewResult gap_tv(const core::Measurement& m, const core::MaskSet& masks,
                      const GapTvConfig& cfg) {
  return pnp_solve(m, masks,
                   make_tv_denoiser(cfg.tv_lambda, cfg.tv_inner_iterations),
                   cfg);
}

std::pair<Tensor, SolverState> gap_tv_single(const core::Measurement& m,
                                             const TensorU8& c,
                                             const GapTvConfig& cfg) {
  cfg.validate();
  const core::SensingOperator op = core::SensingOperator::from_single(c);
  auto [x, state] = solve_stacked(
      op, m.y, make_tv_denoiser(cfg.tv_lambda, cfg.tv_inner_iterations),
      cfg.iterations, cfg.accelerated);
  const float scale = m.meta.normalized ? m.meta.scale : 1.0f;
  Tensor xf(x.chans, x.rows, x.cols);
  for (std::size_t i = 0; i < x.v.size(); ++i)
    xf.v[i] = static_cast<float>(x.v[i] * scale);
  return {std::move(xf), std::move(state)};
}

std::string residual_table(const SolverState& state) {
  std::ostringstream ss;
  ss << "iteration,projection_residual,end_residual\n";
  ss.precision(12);
  for (int i = 0; i < state.iterations; ++i)
    ss << (i + 1) << "," << state.projection_residuals[i] << ","
       << state.end_residuals[i] << "\n";
  return ss.str();
}

}  // namespace dvsci::solver
