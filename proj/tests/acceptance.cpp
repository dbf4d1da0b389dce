// Acceptance suite: one criterion per function, each printing its own
// pass/fail line. Run all with no arguments or a single criterion by number.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dvsci/cli.hpp"
#include "dvsci/eval.hpp"
#include "dvsci/flow.hpp"
#include "dvsci/io/artifacts.hpp"
#include "dvsci/pipeline.hpp"
#include "dvsci/solvers.hpp"
#include "dvsci/train.hpp"
#include "oracles.hpp"
#include "thresholds.hpp"

using namespace dvsci;
namespace fs = std::filesystem;

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Check {
  bool ok = true;
  std::ostringstream detail;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << (detail.str().empty() ? "" : "; ") << what;
    }
  }
  void note(const std::string& what) {
    detail << (detail.str().empty() ? "" : "; ") << what;
  }
};

core::VideoCube rand_cube(int frames, int rows, int cols, Rng& rng,
                          core::ViewId view) {
  return {oracle::random_tensor(frames, rows, cols, rng), view};
}

// ---- criterion 1: forward-model oracle equivalence -------------------------

void criterion_1(Check& c) {
  Rng rng(1001);
  const int frame_choices[3] = {1, 2, 6};
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const int rows = 5 + inst % 12;
    const int cols = 5 + (inst / 3) % 12;
    const int frames = frame_choices[inst % 3];
    core::MaskSet m =
        core::generate_masks(rows, cols, frames, 0.5, {0, 2}, 2000 + inst);
    core::VideoCube x1 = rand_cube(frames, rows, cols, rng, core::ViewId::kView1);
    core::VideoCube x2 = rand_cube(frames, rows, cols, rng, core::ViewId::kView2);
    const Tensor stack = core::stack_masks(m);
    const Tensor x = concat_chans<float>({&x1.data, &x2.data});

    core::Measurement enc = core::encode(x1, x2, m, 0.0f, 0);
    worst = std::max(worst, max_abs_diff(enc.y, oracle::encode_stacked(x, stack)));

    core::SensingOperator op = core::SensingOperator::from_masks(m);
    worst = std::max(worst,
                     max_abs_diff(op.forward(x), oracle::encode_stacked(x, stack)));
    Tensor r = oracle::random_tensor(1, rows, cols, rng, -1.0, 1.0);
    worst = std::max(worst, max_abs_diff(op.adjoint(r), oracle::adjoint(stack, r)));
    worst = std::max(worst,
                     max_abs_diff(op.phi_phit_diag(), oracle::gram_diagonal(stack)));
  }
  c.require(worst < 1e-6, "max abs deviation from scalar oracles " +
                              std::to_string(worst));
  c.note("100 instances, max abs diff " + std::to_string(worst));
}

// ---- criterion 2: adjoint identity ------------------------------------------

void criterion_2(Check& c) {
  Rng rng(1002);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const int rows = 5 + inst % 12, cols = 5 + (inst / 2) % 12;
    const int frames = 1 + inst % 6;
    core::MaskSet m =
        core::generate_masks(rows, cols, frames, 0.5, {0, 2}, 3000 + inst);
    core::SensingOperator op = core::SensingOperator::from_masks(m);
    Tensor x = oracle::random_tensor(2 * frames, rows, cols, rng);
    Tensor y = oracle::random_tensor(1, rows, cols, rng);
    const double lhs = dot(op.forward(x), y);
    const double rhs = dot(x, op.adjoint(y));
    worst = std::max(worst, std::abs(lhs - rhs) / (std::abs(lhs) + 1e-12));
  }
  c.require(worst < 1e-6, "adjoint identity relative error " + std::to_string(worst));
  c.note("100 instances, max relative error " + std::to_string(worst));
}

// ---- criterion 3: amplifier identities --------------------------------------

void criterion_3(Check& c) {
  Rng rng(1003);
  amp::AmplifierConfig cfg;  // default smoothing (sigma 5, radius 15)

  core::MaskSet ones;
  ones.c1 = TensorU8(3, 48, 48, 1);
  ones.c2 = TensorU8(3, 48, 48, 1);
  ones.shift = {0, 2};
  core::Measurement y;
  y.y = oracle::random_tensor(1, 48, 48, rng, 0.0, 6.0);
  amp::DiversityBundle b = amp::build_bundle(y, ones, cfg);
  c.require(b.ybar.v == y.y.v && b.d1.v == y.y.v && b.d2.v == y.y.v,
            "all-ones masks must reproduce the measurement exactly");

  core::Measurement constant;
  constant.y = Tensor(1, 48, 48, 0.7f);
  amp::DiversityBundle bc = amp::build_bundle(constant, ones, cfg);
  c.require(max_abs(bc.d3) == 0.0 && max_abs(bc.d4) == 0.0,
            "constant input must give exactly zero contrast images");

  core::MaskSet m = core::generate_masks(48, 48, 3, 0.5, {0, 7}, 1004);
  core::Measurement yr;
  yr.y = oracle::random_tensor(1, 48, 48, rng, 0.0, 5.0);
  core::Measurement ys = yr;
  const float a = 2.5f;
  for (float& v : ys.y.v) v *= a;
  amp::DiversityBundle b1 = amp::build_bundle(yr, m, cfg);
  amp::DiversityBundle b2 = amp::build_bundle(ys, m, cfg);
  double worst = 0.0;
  // The contrast images are differences of like-sized terms, so their error
  // scales with the images they are built from, not with their own (small)
  // values.
  auto homog = [&](const Tensor& scaled, const Tensor& base, double src_scale) {
    for (std::size_t i = 0; i < base.v.size(); ++i) {
      const double want = a * static_cast<double>(base.v[i]);
      const double scale = 1.0 + std::max(std::abs(want), a * src_scale);
      worst = std::max(worst, std::abs(scaled.v[i] - want) / scale);
    }
  };
  homog(b2.ybar, b1.ybar, 0.0);
  homog(b2.d1, b1.d1, 0.0);
  homog(b2.d2, b1.d2, 0.0);
  homog(b2.d3, b1.d3, max_abs(b1.d1));
  homog(b2.d4, b1.d4, max_abs(b1.d2));
  c.require(worst < 1e-6, "homogeneity deviation " + std::to_string(worst));
  c.note("homogeneity deviation " + std::to_string(worst));
}

// ---- criterion 4: GAP-TV exactness and desk-scale quality --------------------

void criterion_4(Check& c) {
  {
    core::MaskSet m;
    m.c1 = TensorU8(1, 16, 16, 1);
    m.c2 = TensorU8(1, 16, 16, 0);
    m.shift = {0, 2};
    Rng rng(1005);
    core::VideoCube x1 = rand_cube(1, 16, 16, rng, core::ViewId::kView1);
    core::VideoCube x2 = rand_cube(1, 16, 16, rng, core::ViewId::kView2);
    core::Measurement y = core::encode(x1, x2, m, 0.0f, 0);
    solver::GapTvConfig cfg;
    cfg.iterations = 1;
    cfg.tv_lambda = 1e-12;
    solver::DualViewResult r = solver::gap_tv(y, m, cfg);
    c.require(max_abs_diff(r.x1, x1.data) < 1e-6,
              "disjoint-mask view 1 not recovered");
    c.require(max_abs(r.x2) == 0.0, "disjoint-mask view 2 must stay zero");
  }
  {
    train::SynthOptions opts;
    opts.hard_edges = true;
    opts.texture_amplitude = 0.0;
    auto pairs = train::synth_corpus(64, 64, 4, 1, 424242, opts);
    core::MaskSet m = core::generate_masks(64, 64, 4, 0.5, {0, 10}, 424242);
    core::Measurement y = core::encode(pairs[0].x1, pairs[0].x2, m, 0.0f, 0);
    solver::GapTvConfig cfg;  // 100 iterations
    solver::DualViewResult r = solver::gap_tv(y, m, cfg);
    const double ynorm = norm2(y.y.cast<double>());
    double worst_res = 0.0;
    for (double res : r.state.projection_residuals)
      worst_res = std::max(worst_res, res / ynorm);
    c.require(worst_res < 1e-8, "projection residual " + std::to_string(worst_res));
    eval::EvalReport rep =
        eval::evaluate_pair(pairs[0].x1.data, r.x1, pairs[0].x2.data, r.x2);
    c.require(rep.avg_psnr >= kGapTvReferencePsnrDb,
              "desk-scale quality " + std::to_string(rep.avg_psnr) +
                  " dB below the pinned threshold");
    std::ostringstream ss;
    ss.precision(4);
    ss << std::fixed << "desk-scale " << rep.avg_psnr << " dB (threshold "
       << kGapTvReferencePsnrDb << "), worst projection residual " << worst_res;
    c.note(ss.str());
  }
}

// ---- criterion 5: classical flow ---------------------------------------------

float flow_texture(double r, double col) {
  return static_cast<float>(
      0.5 + 0.15 * std::sin(2 * 3.14159265 * (0.040 * r + 0.060 * col)) +
      0.10 * std::sin(2 * 3.14159265 * (0.090 * r - 0.050 * col)) +
      0.08 * std::cos(2 * 3.14159265 * (0.030 * r + 0.110 * col)));
}

void criterion_5(Check& c) {
  flow::Estimator est(flow::EstimatorSpec{});
  Tensor frame(1, 64, 64);
  for (int r = 0; r < 64; ++r)
    for (int col = 0; col < 64; ++col) frame.at(0, r, col) = flow_texture(r, col);
  flow::FlowField zero = est.estimate(frame, frame);
  c.require(max_abs(zero.uv) < 1e-8, "identical frames must give a zero field");

  // Integer translations along both axes.
  for (const auto& [dr, dc] : std::vector<std::pair<int, int>>{{0, 2}, {2, 0}}) {
    Tensor moved(1, 64, 64);
    for (int r = 0; r < 64; ++r)
      for (int col = 0; col < 64; ++col)
        moved.at(0, r, col) = flow_texture(r - dr, col - dc);
    flow::FlowField f = est.estimate(frame, moved);
    double max_epe = 0.0;
    const std::size_t plane = f.uv.plane_size();
    for (int r = 12; r < 52; ++r)
      for (int col = 12; col < 52; ++col) {
        const std::size_t i = static_cast<std::size_t>(r) * 64 + col;
        max_epe = std::max(
            max_epe, std::hypot(static_cast<double>(f.uv.v[i]) - dc,
                                static_cast<double>(f.uv.v[plane + i]) - dr));
      }
    c.require(max_epe < 0.5, "interior endpoint error " + std::to_string(max_epe));
    c.note("translation (" + std::to_string(dr) + "," + std::to_string(dc) +
           ") max interior endpoint error " + std::to_string(max_epe));
  }
}

// ---- criterion 6: network correctness -----------------------------------------

void criterion_6(Check& c) {
  // Shape contracts across a config sweep.
  struct Geometry {
    int rows, cols, frames;
    double scale;
    net::SeparatorConfig::Mode mode;
  };
  const Geometry sweep[] = {
      {8, 8, 2, 0.125, net::SeparatorConfig::Mode::kDualBranch},
      {16, 12, 3, 0.25, net::SeparatorConfig::Mode::kDualBranch},
      {8, 8, 2, 0.125, net::SeparatorConfig::Mode::kSingleBranch},
      {12, 16, 4, 0.0625, net::SeparatorConfig::Mode::kDualBranch},
      {8, 8, 3, 0.125, net::SeparatorConfig::Mode::kSingleView},
  };
  Rng rng(1006);
  for (const Geometry& g : sweep) {
    net::SeparatorConfig cfg;
    cfg.frames = g.frames;
    cfg.width_scale = g.scale;
    cfg.mode = g.mode;
    if (g.mode == net::SeparatorConfig::Mode::kSingleView)
      cfg.include_diversity = false;
    nn::ParamStore store;
    Rng init(41);
    net::SeparatorNet sep(store, cfg, init);
    Tensor in = oracle::random_tensor(cfg.input_channels(), g.rows, g.cols, rng);
    nn::NodePtr out =
        g.mode == net::SeparatorConfig::Mode::kDualBranch
            ? sep.separate(in, in).first
            : (g.mode == net::SeparatorConfig::Mode::kSingleBranch
                   ? sep.separate_single_branch(in)
                   : sep.separate_single_view(in));
    c.require(out->value.chans == cfg.output_channels() &&
                  out->value.rows == g.rows && out->value.cols == g.cols,
              "separator shape contract violated");
    c.require(store.scalar_count() == net::SeparatorNet::param_count(cfg),
              "parameter count mismatch");

    for (const nn::NodePtr& p : store.all()) p->value.fill(0.0f);
    nn::NodePtr zero =
        g.mode == net::SeparatorConfig::Mode::kDualBranch
            ? sep.separate(in, in).first
            : (g.mode == net::SeparatorConfig::Mode::kSingleBranch
                   ? sep.separate_single_branch(in)
                   : sep.separate_single_view(in));
    c.require(max_abs(zero->value) == 0.0, "zero weights must give zero output");
  }

  // Tiny fixed-weight forwards against the straight-line oracles.
  {
    net::SeparatorConfig cfg;
    cfg.frames = 2;
    cfg.width_scale = 0.125;
    nn::ParamStore store;
    Rng init(43);
    net::SeparatorNet sep(store, cfg, init);
    Tensor in1 = oracle::random_tensor(cfg.input_channels(), 8, 8, rng);
    Tensor in2 = oracle::random_tensor(cfg.input_channels(), 8, 8, rng);
    auto [x1, x2] = sep.separate(in1, in2);
    const double d1 = max_abs_diff(
        x1->value, oracle::separator_branch(store, "separator.branch1", cfg, in1));
    const double d2 = max_abs_diff(
        x2->value, oracle::separator_branch(store, "separator.branch2", cfg, in2));
    c.require(d1 < 1e-5 && d2 < 1e-5,
              "separator oracle deviation " + std::to_string(std::max(d1, d2)));

    net::RefineConfig rcfg;
    rcfg.frames = 2;
    rcfg.width_scale = 0.125;
    net::RefineCell cell(store, rcfg, init);
    Tensor xp = oracle::random_tensor(1, 8, 8, rng);
    Tensor ff = oracle::random_tensor(2, 8, 8, rng, -1.0, 1.0);
    Tensor fb = oracle::random_tensor(2, 8, 8, rng, -1.0, 1.0);
    Tensor d4 = oracle::random_tensor(4, 8, 8, rng, -1.0, 1.0);
    Tensor h = oracle::random_tensor(cell.hidden_width(), 8, 8, rng);
    net::RefineCell::Step s =
        cell.step(nn::constant(xp), nn::constant(ff), nn::constant(fb),
                  nn::constant(d4), nn::constant(h));
    oracle::CellOut e = oracle::refine_cell(store, rcfg, xp, ff, fb, d4, h);
    const double dc = std::max(max_abs_diff(s.frame->value, e.frame),
                               max_abs_diff(s.hidden->value, e.hidden));
    c.require(dc < 1e-5, "refine cell oracle deviation " + std::to_string(dc));

    // Zero-weight fixed point with a nonzero hidden state.
    for (const nn::NodePtr& p : store.all()) p->value.fill(0.0f);
    net::RefineCell::Step z =
        cell.step(nn::constant(xp), nn::constant(ff), nn::constant(fb),
                  nn::constant(d4), nn::constant(h));
    c.require(max_abs(z.frame->value) == 0.0 && max_abs(z.hidden->value) == 0.0,
              "zero-weight refine cell must emit zeros");
  }

  // Gradient checks on the full tiny assembly at a generic parameter point.
  {
    net::ModelConfig cfg;
    cfg.frames = 2;
    cfg.width_scale = 0.125;
    cfg.flow.iterations_per_level = 10;
    cfg.flow.pyramid_levels = 2;
    cfg.amplifier.smoothing.sigma = 1.0;
    cfg.amplifier.smoothing.radius = 3;
    cfg.init_seed = 7;
    net::Model model(cfg);
    Rng prng(99);
    for (const auto& p : model.params().all())
      for (float& v : p->value.v)
        v += static_cast<float>(prng.uniform(-0.08, 0.08));
    core::MaskSet masks = core::generate_masks(8, 8, 2, 0.5, {0, 2}, 5);
    auto corpus = train::synth_corpus(8, 8, 2, 1, 29);
    train::GradCheckReport rep =
        train::grad_check(model, corpus[0], masks, 24, 1e-6, 71);
    c.require(rep.max_rel_error < 1e-3,
              "gradient check error " + std::to_string(rep.max_rel_error));
    c.note("gradient check max relative error " +
           std::to_string(rep.max_rel_error));
  }
}

// ---- criterion 7: end-to-end overfit -------------------------------------------

void criterion_7(Check& c) {
  net::ModelConfig mcfg;
  mcfg.frames = 4;
  mcfg.width_scale = 0.25;
  mcfg.init_seed = 12345;
  net::Model model(mcfg);

  core::MaskSet masks = core::generate_masks(64, 64, 4, 0.5, {0, 10}, 7);
  std::vector<train::TrainPair> corpus = train::synth_corpus(64, 64, 4, 10, 91);

  // Deterministic measurements, regenerated once (the mask set is fixed).
  std::vector<core::Measurement> meas;
  for (const auto& p : corpus)
    meas.push_back(core::encode(p.x1, p.x2, masks, 0.0f, 0));

  auto full_train_loss = [&]() {
    double total = 0.0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      net::Model::Forward f = model.forward_dual(meas[i], masks);
      total += train::loss_value(f.coarse1->value, f.coarse2->value,
                                 f.refined1->value, f.refined2->value,
                                 corpus[i].x1.data, corpus[i].x2.data, 0.5);
    }
    return total / corpus.size();
  };
  auto train_set_psnrs = [&]() {
    double coarse = 0.0, refined = 0.0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      net::Model::Forward f = model.forward_dual(meas[i], masks);
      coarse += eval::framewise_report(corpus[i].x1.data, f.coarse1->value).mean_psnr;
      coarse += eval::framewise_report(corpus[i].x2.data, f.coarse2->value).mean_psnr;
      refined += eval::framewise_report(corpus[i].x1.data, f.refined1->value).mean_psnr;
      refined += eval::framewise_report(corpus[i].x2.data, f.refined2->value).mean_psnr;
    }
    return std::pair<double, double>(coarse / (2.0 * corpus.size()),
                                     refined / (2.0 * corpus.size()));
  };

  const double initial = full_train_loss();
  train::Adam adam(model.trainable());
  // Desk-scale recipe: single-sample steps and a half-weight coarse loss let
  // the deep recurrent head catch the shallow separator inside the step cap.
  const float alpha = 0.5f;
  const int batch = 1;
  const int max_steps = 2000;
  int steps = 0;
  double last_loss = initial;
  std::pair<double, double> psnrs{0.0, 0.0};
  bool done = false;
  Rng shuffle_rng(4242);
  std::vector<int> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::size_t cursor = order.size();

  while (steps < max_steps && !done) {
    adam.zero_grads();
    double batch_loss = 0.0;
    for (int j = 0; j < batch; ++j) {
      if (cursor == order.size()) {
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
          std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);
        cursor = 0;
      }
      const int idx = order[cursor++];
      net::Model::Forward f = model.forward_dual(meas[idx], masks);
      nn::NodePtr loss =
          train::loss_node(f.coarse1, f.coarse2, f.refined1, f.refined2,
                           corpus[idx].x1.data, corpus[idx].x2.data, alpha);
      batch_loss += loss->value.v[0];
      nn::backward(loss);
    }
    // 2000 desk-scale steps sit inside the first decay period of the
    // reference schedule (its epochs span thousands of steps), so the rate
    // stays at its initial value throughout.
    adam.step(3e-4, 1.0 / batch);
    ++steps;
    last_loss = batch_loss / batch;

    if (steps % 100 == 0 || steps == max_steps) {
      const double full = full_train_loss();
      std::fprintf(stderr, "  step %4d  batch loss %.1f  train loss %.1f (%.1f%% of initial)\n",
                   steps, last_loss, full, 100.0 * full / initial);
      if (full <= 0.1 * initial) {
        psnrs = train_set_psnrs();
        std::fprintf(stderr, "  step %4d  coarse %.2f dB  refined %.2f dB\n",
                     steps, psnrs.first, psnrs.second);
        if (psnrs.second >= psnrs.first) done = true;
      }
    }
  }
  const double final_loss = full_train_loss();
  if (psnrs.first == 0.0) psnrs = train_set_psnrs();
  c.require(final_loss <= 0.1 * initial,
            "train loss only reached " + std::to_string(final_loss / initial) +
                " of initial");
  c.require(psnrs.second >= psnrs.first,
            "refined train PSNR " + std::to_string(psnrs.second) +
                " fell below the coarse PSNR " + std::to_string(psnrs.first));
  std::ostringstream ss;
  ss.precision(4);
  ss << std::fixed << steps << " steps, loss " << initial << " -> "
     << final_loss << " (" << 100.0 * final_loss / initial
     << "% of initial), coarse " << psnrs.first << " dB, refined "
     << psnrs.second << " dB";
  c.note(ss.str());
  (void)last_loss;
}

// ---- criterion 8: recurrence causality ------------------------------------------

void criterion_8(Check& c) {
  nn::ParamStore store;
  net::RefineConfig cfg;
  cfg.frames = 4;
  cfg.width_scale = 0.125;
  Rng init(13);
  net::RefineCell cell(store, cfg, init);
  Rng rng(14);
  Tensor coarse = oracle::random_tensor(4, 8, 8, rng);
  Tensor d4 = oracle::random_tensor(4, 8, 8, rng, -1.0, 1.0);
  flow::Estimator est(flow::EstimatorSpec{});

  auto run = [&](const Tensor& cube) {
    net::ViewFlowNodes flows;
    for (int t = 0; t + 1 < cube.chans; ++t) {
      Tensor a = cube.slice(t, 1);
      Tensor b = cube.slice(t + 1, 1);
      flows.fwd.push_back(nn::constant(est.estimate(a, b).uv));
      flows.bwd.push_back(nn::constant(est.estimate(b, a).uv));
    }
    auto [r1, r2] = net::refine(cell, nn::constant(cube), nn::constant(cube),
                                flows, flows, d4, net::AblationFlags{});
    (void)r2;
    return r1->value;
  };
  Tensor base = run(coarse);
  Tensor poked = coarse;
  poked.at(3, 4, 4) += 0.25f;
  Tensor out = run(poked);
  for (int t = 0; t < 3; ++t)
    c.require(max_abs_diff(base.slice(t, 1), out.slice(t, 1)) == 0.0,
              "frame " + std::to_string(t + 1) +
                  " changed after perturbing a later coarse frame");
  c.require(max_abs_diff(base.slice(3, 1), out.slice(3, 1)) > 0.0,
            "the perturbed frame itself must respond");
}

// ---- criterion 9: protocol reproduction at shape level ----------------------------

void criterion_9(Check& c) {
  std::vector<train::TrainPair> tp = train::synth_corpus(32, 32, 14, 1, 77);
  std::vector<eval::ScenePair> scenes;
  scenes.push_back({std::move(tp[0].x1), std::move(tp[0].x2)});

  solver::GapTvConfig scfg;
  scfg.iterations = 30;
  eval::Reconstructor gaptv = [scfg](const core::Measurement& m,
                                     const core::MaskSet& masks) {
    solver::DualViewResult r = solver::gap_tv(m, masks, scfg);
    return std::make_pair(r.x1, r.x2);
  };

  {
    std::vector<eval::ScenePair> short_scenes;
    short_scenes.push_back(
        {{scenes[0].x1.data.slice(0, 4), core::ViewId::kView1},
         {scenes[0].x2.data.slice(0, 4), core::ViewId::kView2}});
    core::MaskSet masks = core::generate_masks(32, 32, 4, 0.5, {0, 6}, 55);
    const std::vector<double> grid = {0.0, 0.01, 0.05, 0.1, 0.2};
    std::vector<eval::SweepRow> rows =
        eval::noise_sweep(gaptv, short_scenes, masks, grid, 5);
    c.require(rows.size() == 5, "noise sweep must emit one row per sigma");
    for (std::size_t i = 0; i < rows.size(); ++i)
      c.require(rows[i].param == grid[i], "noise sweep grid mismatch");
  }
  {
    eval::RateSweepInputs inputs;
    inputs.scenes = scenes;
    inputs.make_reconstructor = [&](int) { return gaptv; };
    inputs.make_masks = [](int frames) {
      return core::generate_masks(32, 32, frames, 0.5, {0, 6}, 66);
    };
    std::vector<eval::SweepRow> rows = eval::rate_sweep(inputs, {6, 10, 14});
    c.require(rows.size() == 3, "rate sweep must emit one row per rate");
    c.require(rows[0].param == 6 && rows[1].param == 10 && rows[2].param == 14,
              "rate sweep grid mismatch");
    for (const auto& r : rows)
      c.require(r.seconds >= 0.0, "rate sweep must record timing");
  }
  {
    core::MaskSet masks = core::generate_masks(32, 32, 6, 0.5, {0, 6}, 67);
    core::VideoCube x1{scenes[0].x1.data.slice(0, 6), core::ViewId::kView1};
    core::VideoCube x2{scenes[0].x2.data.slice(0, 6), core::ViewId::kView2};
    core::Measurement m = core::encode(x1, x2, masks, 0.0f, 0);
    auto [e1, e2] = gaptv(m, masks);
    eval::ViewScores curves = eval::framewise_report(x1.data, e1);
    c.require(curves.frames.size() == 6,
              "framewise report must emit one point per frame");
    (void)e2;
  }
}

// ---- criterion 10: determinism -----------------------------------------------------

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(f),
                           std::istreambuf_iterator<char>());
}

void criterion_10(Check& c) {
  const fs::path root = fs::temp_directory_path() / "dvsci_acceptance_det";
  fs::remove_all(root);
  auto run_pipeline = [&](const char* tag) {
    const fs::path d = root / tag;
    auto arg = [&](const char* s) { return (d / s).string(); };
    std::vector<std::vector<std::string>> commands = {
        {"mask-gen", "--out", arg("m"), "--rows", "32", "--cols", "32",
         "--frames", "2", "--seed", "3"},
        {"scene-gen", "--out1", arg("s1"), "--out2", arg("s2"), "--rows", "32",
         "--cols", "32", "--frames", "2", "--seed", "5"},
        {"simulate", "--scene1", arg("s1"), "--scene2", arg("s2"), "--masks",
         arg("m"), "--out", arg("y"), "--noise-sigma", "0.05", "--seed", "7"},
        {"reconstruct", "--algo", "gaptv", "--measurement", arg("y"),
         "--masks", arg("m"), "--out", arg("r"), "--iters", "10"},
        {"evaluate", "--ref1", arg("s1"), "--ref2", arg("s2"), "--est1",
         arg("r/est1"), "--est2", arg("r/est2"), "--out", arg("e")},
    };
    for (const auto& cmd : commands)
      if (cli::run(cmd) != 0) return false;
    return true;
  };
  c.require(run_pipeline("a") && run_pipeline("b"), "pipeline commands failed");
  for (const char* artifact :
       {"y/y.f32", "r/est1/data.f32", "r/est2/data.f32", "e/report.txt",
        "e/framewise.csv"}) {
    c.require(file_bytes(root / "a" / artifact) ==
                  file_bytes(root / "b" / artifact),
              std::string("artifact differs between runs: ") + artifact);
  }

  // Training determinism under fixed seeds (single worker).
  auto train_params = [&]() {
    net::ModelConfig cfg;
    cfg.frames = 2;
    cfg.width_scale = 0.125;
    cfg.flow.iterations_per_level = 5;
    cfg.flow.pyramid_levels = 2;
    cfg.amplifier.smoothing.sigma = 1.0;
    cfg.amplifier.smoothing.radius = 3;
    cfg.init_seed = 11;
    net::Model model(cfg);
    core::MaskSet masks = core::generate_masks(8, 8, 2, 0.5, {0, 2}, 5);
    auto corpus = train::synth_corpus(8, 8, 2, 2, 13);
    train::TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 2;
    tc.seed = 17;
    train::train(model, corpus, masks, tc);
    std::vector<float> flat;
    for (const auto& p : model.params().all())
      flat.insert(flat.end(), p->value.v.begin(), p->value.v.end());
    return flat;
  };
  c.require(train_params() == train_params(),
            "training is not bit-reproducible");
  fs::remove_all(root);
}

struct Criterion {
  int id;
  const char* title;
  std::function<void(Check&)> fn;
  double budget_seconds;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "forward-model oracle equivalence", criterion_1, 10.0},
      {2, "adjoint identity", criterion_2, 5.0},
      {3, "amplifier identities", criterion_3, 5.0},
      {4, "gap-tv exactness and desk-scale quality", criterion_4, 60.0},
      {5, "classical flow recovery", criterion_5, 20.0},
      {6, "network correctness", criterion_6, 120.0},
      {7, "end-to-end overfit", criterion_7, 1800.0},
      {8, "recurrence causality", criterion_8, 60.0},
      {9, "protocol shape reproduction", criterion_9, 600.0},
      {10, "seeded determinism", criterion_10, 300.0},
  };
  int selected = 0;
  if (argc > 1) selected = std::atoi(argv[1]);

  int failures = 0;
  for (const Criterion& crit : criteria) {
    if (selected != 0 && crit.id != selected) continue;
    Check check;
    const double t0 = now_s();
    try {
      crit.fn(check);
    } catch (const std::exception& e) {
      check.require(false, std::string("exception: ") + e.what());
    }
    const double elapsed = now_s() - t0;
    if (elapsed > crit.budget_seconds)
      check.require(false, "runtime " + std::to_string(elapsed) +
                               "s over the " +
                               std::to_string(crit.budget_seconds) +
                               "s budget");
    std::printf("[%s] criterion %d: %s (%.2fs)%s%s\n",
                check.ok ? "PASS" : "FAIL", crit.id, crit.title, elapsed,
                check.detail.str().empty() ? "" : " -- ",
                check.detail.str().c_str());
    std::fflush(stdout);
    if (!check.ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
