#ifndef DVSCI_SOLVERS_HPP
#define DVSCI_SOLVERS_HPP

#include <functional>
#include <utility>
#include <vector>

#include "dvsci/sci_core.hpp"
#include "dvsci/tensor.hpp"

namespace dvsci::solver {

struct GapTvConfig {
  int iterations = 100;
  double tv_lambda = 0.07;
  int tv_inner_iterations = 5;
  bool accelerated = false;

  void validate() const;
};

struct SolverState {
  // Data-fit residual restricted to covered pixels (nonzero Gram diagonal),
  // recorded after each projection step.
  std::vector<double> projection_residuals;
  // Full residual at the end of each iteration (after denoising).
  std::vector<double> end_residuals;
  int iterations = 0;
};

using Denoiser = std::function<TensorD(const TensorD&)>;

// Anisotropic total-variation proximal, approximated frame-by-frame with a
// dual projection scheme and a fixed number of inner iterations.
TensorD tv_denoise(const TensorD& cube, double lambda, int inner_iterations);

Denoiser make_tv_denoiser(double lambda, int inner_iterations);

struct DualViewResult {
  Tensor x1;
  Tensor x2;
  SolverState state;
};

// Alternating projection on the stacked cube: exact data projection through
// the diagonal Gram matrix, then the supplied denoiser. Pixels with no
// pattern coverage skip the correction and are left to the denoiser.
std::pair<TensorD, SolverState> solve_stacked(const core::SensingOperator& op,
                                              const Tensor& y,
                                              const Denoiser& denoiser,
                                              int iterations,
                                              bool accelerated = false);

DualViewResult gap_tv(const core::Measurement& m, const core::MaskSet& masks,
                      const GapTvConfig& cfg);

DualViewResult pnp_solve(const core::Measurement& m,
                         const core::MaskSet& masks, const Denoiser& denoiser,
                         const GapTvConfig& cfg);

// Single-view counterpart used when only one pattern stack applies.
std::pair<Tensor, SolverState> gap_tv_single(const core::Measurement& m,
                                             const TensorU8& c,
                                             const GapTvConfig& cfg);

std::string residual_table(const SolverState& state);

}  // namespace dvsci::solver

#endif
