#include "dvsci/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "dvsci/amplifier.hpp"
#include "dvsci/eval.hpp"
#include "dvsci/flow.hpp"
#include "dvsci/io/artifacts.hpp"
#include "dvsci/io/image_io.hpp"
#include "dvsci/pipeline.hpp"
#include "dvsci/solvers.hpp"
#include "dvsci/train.hpp"

namespace dvsci::cli {

namespace {

namespace fs = std::filesystem;

// Canonical key=value record of the options a command actually ran under;
// hashed (FNV-1a 64) for provenance.
class Provenance {
 public:
  explicit Provenance(std::string command) : command_(std::move(command)) {}

  void add(const std::string& key, const std::string& value) {
    kv_.emplace_back(key, value);
  }
  void add(const std::string& key, double value) {
    std::ostringstream ss;
    ss.precision(17);
    ss << value;
    add(key, ss.str());
  }
  void add(const std::string& key, int value) { add(key, std::to_string(value)); }
  void add(const std::string& key, std::uint64_t value) {
    add(key, std::to_string(value));
  }

  std::string canonical() const {
    auto sorted = kv_;
    std::sort(sorted.begin(), sorted.end());
    std::string s = "command=" + command_ + "\n";
    for (const auto& [k, v] : sorted) s += k + "=" + v + "\n";
    return s;
  }

  std::string hash() const {
    const std::string s = canonical();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
  }

  void announce() const { std::cout << "config-hash: " << hash() << "\n"; }

  void write(const fs::path& dir) const {
    fs::create_directories(dir);
    std::ofstream f(dir / "provenance.txt", std::ios::trunc);
    f << "config-hash " << hash() << "\n" << canonical();
  }

 private:
  std::string command_;
  std::vector<std::pair<std::string, std::string>> kv_;
};

fs::path data_root_relative(const std::string& path) {
  fs::path p(path);
  if (p.is_absolute() || fs::exists(p)) return p;
  if (const char* root = std::getenv("DVSCI_DATA_ROOT")) return fs::path(root) / p;
  return p;
}

struct MaskArgs {
  int rows = 64, cols = 64, frames = 4;
  double density = 0.5;
  int shift_row = 0, shift_col = 10;
  std::uint64_t seed = 0;

  core::MaskSet build() const {
    return core::generate_masks(rows, cols, frames, density,
                                {shift_row, shift_col}, seed);
  }
  void describe(Provenance& p) const {
    p.add("masks.rows", rows);
    p.add("masks.cols", cols);
    p.add("masks.frames", frames);
    p.add("masks.density", density);
    p.add("masks.shift_row", shift_row);
    p.add("masks.shift_col", shift_col);
    p.add("masks.seed", seed);
  }
};

struct ModelArgs {
  double width_scale = 1.0;
  std::string flags = "none";
  std::string mode = "dual";
  std::string branch = "dual";
  std::string flow_kind = "classical";
  std::string flow_weights;
  bool flow_fine_tune = false;
  int flow_levels = 3;
  int flow_iters = 50;
  double flow_alpha = 0.1;
  std::uint64_t init_seed = 1;

  void add_options(CLI::App* cmd, bool with_flags = true) {
    cmd->add_option("--width-scale", width_scale, "uniform channel-width scale");
    if (with_flags)
      cmd->add_option("--flags", flags,
                      "ablations: none or csv of no_flow,no_backward,"
                      "no_diversity,no_refine");
    cmd->add_option("--mode", mode, "dual or single (view count)")
        ->check(CLI::IsMember({"dual", "single"}));
    cmd->add_option("--branch", branch, "dual or single (separator branches)")
        ->check(CLI::IsMember({"dual", "single"}));
    cmd->add_option("--flow", flow_kind, "classical or adapter")
        ->check(CLI::IsMember({"classical", "adapter"}));
    cmd->add_option("--flow-weights", flow_weights,
                    "adapter weight container directory");
    cmd->add_flag("--flow-fine-tune", flow_fine_tune,
                  "let the adapter weights train");
    cmd->add_option("--flow-levels", flow_levels, "classical pyramid levels");
    cmd->add_option("--flow-iters", flow_iters, "classical iterations per level");
    cmd->add_option("--flow-alpha", flow_alpha,
                    "classical regularization weight");
    cmd->add_option("--init-seed", init_seed, "weight init seed");
  }

  net::ModelConfig build(int frames) const {
    net::ModelConfig cfg;
    cfg.mode = mode == "single" ? net::ViewMode::kSingle : net::ViewMode::kDual;
    cfg.frames = frames;
    cfg.width_scale = width_scale;
    cfg.branch_mode = branch == "single"
                          ? net::SeparatorConfig::Mode::kSingleBranch
                          : net::SeparatorConfig::Mode::kDualBranch;
    cfg.flags = net::AblationFlags::parse(flags);
    cfg.flow.kind = flow_kind == "adapter" ? flow::Kind::kLearnedAdapter
                                           : flow::Kind::kClassical;
    cfg.flow.weight_file = flow_weights;
    cfg.flow.fine_tunable = flow_fine_tune;
    cfg.flow.pyramid_levels = flow_levels;
    cfg.flow.iterations_per_level = flow_iters;
    cfg.flow.regularization = flow_alpha;
    cfg.init_seed = init_seed;
    return cfg;
  }

  void describe(Provenance& p) const {
    p.add("model.width_scale", width_scale);
    p.add("model.flags", flags);
    p.add("model.mode", mode);
    p.add("model.branch", branch);
    p.add("model.flow", flow_kind);
    p.add("model.flow_weights", flow_weights);
    p.add("model.flow_fine_tune", flow_fine_tune ? 1 : 0);
    p.add("model.init_seed", init_seed);
  }
};

struct SolverArgs {
  int iters = 100;
  double tv_lambda = 0.07;
  int tv_inner = 5;
  bool accelerated = false;
  std::string denoiser = "tv";
  double denoise_sigma = 1.0;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--iters", iters, "outer iterations");
    cmd->add_option("--tv-lambda", tv_lambda, "TV weight");
    cmd->add_option("--tv-inner", tv_inner, "TV inner iterations");
    cmd->add_flag("--accelerated", accelerated, "accelerated projection");
    cmd->add_option("--denoiser", denoiser, "pnp-tv denoiser: tv, gauss, identity")
        ->check(CLI::IsMember({"tv", "gauss", "identity"}));
    cmd->add_option("--denoise-sigma", denoise_sigma,
                    "gauss denoiser smoothing sigma");
  }

  solver::GapTvConfig build() const {
    solver::GapTvConfig cfg;
    cfg.iterations = iters;
    cfg.tv_lambda = tv_lambda;
    cfg.tv_inner_iterations = tv_inner;
    cfg.accelerated = accelerated;
    return cfg;
  }

  void describe(Provenance& p) const {
    p.add("solver.iters", iters);
    p.add("solver.tv_lambda", tv_lambda);
    p.add("solver.tv_inner", tv_inner);
    p.add("solver.accelerated", accelerated ? 1 : 0);
    p.add("solver.denoiser", denoiser);
  }
};

solver::Denoiser make_denoiser(const SolverArgs& args) {
  if (args.denoiser == "identity")
    return [](const TensorD& x) { return x; };
  if (args.denoiser == "gauss") {
    const double sigma = args.denoise_sigma;
    return [sigma](const TensorD& x) {
      amp::SmoothingConfig cfg;
      cfg.sigma = sigma;
      cfg.radius = std::max(3, static_cast<int>(std::ceil(3.0 * sigma)));
      Tensor xf = x.cast<float>();
      Tensor sm = amp::gaussian_smooth(xf, cfg);
      return sm.cast<double>();
    };
  }
  return solver::make_tv_denoiser(args.tv_lambda, args.tv_inner);
}

void load_model_weights(net::Model& model, const std::string& weights_dir) {
  if (weights_dir.empty()) return;
  io::Container c = io::Container::load(data_root_relative(weights_dir));
  model.params().load_from(c);
}

eval::Reconstructor net_reconstructor(const std::shared_ptr<net::Model>& model) {
  return [model](const core::Measurement& m, const core::MaskSet& masks) {
    return model->reconstruct(m, masks);
  };
}

// ---- commands -------------------------------------------------------------

int cmd_mask_gen(const MaskArgs& margs, const std::string& out,
                 std::uint64_t /*unused*/) {
  Provenance prov("mask-gen");
  margs.describe(prov);
  prov.add("out", out);
  core::MaskSet masks = margs.build();
  io::save_masks(out, masks, prov.hash());
  prov.write(out);
  prov.announce();
  std::cout << "mask id: " << masks.id() << "\n";
  return 0;
}

struct SceneGenArgs {
  std::string out1, out2;
  int rows = 64, cols = 64, frames = 4;
  std::uint64_t seed = 0;
  double max_velocity = 3.0;
  double texture = 0.15;
  bool hard_edges = false;
};

int cmd_scene_gen(const SceneGenArgs& a) {
  Provenance prov("scene-gen");
  prov.add("rows", a.rows);
  prov.add("cols", a.cols);
  prov.add("frames", a.frames);
  prov.add("seed", a.seed);
  prov.add("max_velocity", a.max_velocity);
  prov.add("texture", a.texture);
  prov.add("hard_edges", a.hard_edges ? 1 : 0);
  train::SynthOptions opts;
  opts.max_velocity = a.max_velocity;
  opts.texture_amplitude = a.texture;
  opts.hard_edges = a.hard_edges;
  std::vector<train::TrainPair> pair =
      train::synth_corpus(a.rows, a.cols, a.frames, 1, a.seed, opts);
  io::save_cube(a.out1, pair[0].x1, prov.hash());
  prov.write(a.out1);
  if (!a.out2.empty()) {
    io::save_cube(a.out2, pair[0].x2, prov.hash());
    prov.write(a.out2);
  }
  prov.announce();
  return 0;
}

struct SimulateArgs {
  std::string scene1, scene2, masks_dir, out;
  std::string mode = "dual";
  double noise_sigma = 0.0;
  bool normalize = false;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a) {
  Provenance prov("simulate");
  prov.add("scene1", a.scene1);
  prov.add("scene2", a.scene2);
  prov.add("masks", a.masks_dir);
  prov.add("mode", a.mode);
  prov.add("noise_sigma", a.noise_sigma);
  prov.add("normalize", a.normalize ? 1 : 0);
  prov.add("seed", a.seed);
  core::MaskSet masks = io::load_masks(data_root_relative(a.masks_dir));
  core::VideoCube x1 = io::load_cube(data_root_relative(a.scene1));
  x1.validate();
  core::Measurement m;
  if (a.mode == "single") {
    m = core::encode_single(x1, masks.c1, 0.0f, a.seed);
  } else {
    if (a.scene2.empty())
      throw std::invalid_argument("simulate: dual mode needs --scene2");
    core::VideoCube x2 = io::load_cube(data_root_relative(a.scene2));
    x2.validate();
    m = core::encode(x1, x2, masks, 0.0f, a.seed);
  }
  if (a.normalize || a.noise_sigma > 0.0)
    m = core::normalize_and_add_noise(m, static_cast<float>(a.noise_sigma),
                                      a.seed + 1);
  m.meta.mask_ref = masks.id();
  io::save_measurement(a.out, m, prov.hash(), a.seed);
  prov.write(a.out);
  prov.announce();
  return 0;
}

struct AmplifyArgs {
  std::string measurement, masks_dir, out;
  double sigma_g = 5.0;
  int radius = 15;
  bool by_sum = false;
};

int cmd_amplify(const AmplifyArgs& a) {
  Provenance prov("amplify");
  prov.add("measurement", a.measurement);
  prov.add("masks", a.masks_dir);
  prov.add("sigma_g", a.sigma_g);
  prov.add("radius", a.radius);
  prov.add("normalize_by_sum", a.by_sum ? 1 : 0);
  core::Measurement m = io::load_measurement(data_root_relative(a.measurement));
  core::MaskSet masks = io::load_masks(data_root_relative(a.masks_dir));
  amp::AmplifierConfig cfg;
  cfg.smoothing.sigma = a.sigma_g;
  cfg.smoothing.radius = a.radius;
  cfg.normalize_by_sum = a.by_sum;
  amp::DiversityBundle b = amp::build_bundle(m, masks, cfg);

  io::Container c;
  c.set_attr("kind", std::string("diversity_bundle"));
  c.set_attr("sigma_g", a.sigma_g);
  c.set_attr("radius", a.radius);
  c.set_attr("clamped_ybar", b.clamped_ybar);
  c.set_attr("clamped_d1", b.clamped_d1);
  c.set_attr("clamped_d2", b.clamped_d2);
  c.set_attr("config_hash", prov.hash());
  c.put("ybar", b.ybar);
  c.put("d1", b.d1);
  c.put("d2", b.d2);
  c.put("d3", b.d3);
  c.put("d4", b.d4);
  c.save(a.out);
  io::write_png(fs::path(a.out) / "ybar.png", b.ybar);
  io::write_png(fs::path(a.out) / "d1.png", b.d1);
  io::write_png(fs::path(a.out) / "d2.png", b.d2);
  io::write_png(fs::path(a.out) / "d3.png", b.d3);
  io::write_png(fs::path(a.out) / "d4.png", b.d4);
  prov.write(a.out);
  prov.announce();
  std::cout << "degenerate pixels: ybar=" << b.clamped_ybar
            << " d1=" << b.clamped_d1 << " d2=" << b.clamped_d2 << "\n";
  return 0;
}

struct TrainArgs {
  std::string out;
  std::string corpus = "synth";
  std::string corpus_root;
  int crop = 64;
  int rows = 64, cols = 64;
  int pairs = 200;
  int epochs = 90;
  int batch = 2;
  double lr = 3e-4;
  double lr_decay = 0.9;
  int lr_decay_epochs = 10;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  int max_steps = 0;
  double stop_ratio = 0.0;
};

int cmd_train(const TrainArgs& a, const MaskArgs& margs, ModelArgs& model_args) {
  Provenance prov("train");
  prov.add("corpus", a.corpus);
  prov.add("corpus_root", a.corpus_root);
  prov.add("rows", a.rows);
  prov.add("cols", a.cols);
  prov.add("pairs", a.pairs);
  prov.add("epochs", a.epochs);
  prov.add("batch", a.batch);
  prov.add("lr", a.lr);
  prov.add("lr_decay", a.lr_decay);
  prov.add("alpha", a.alpha);
  prov.add("seed", a.seed);
  prov.add("max_steps", a.max_steps);
  prov.add("stop_ratio", a.stop_ratio);
  margs.describe(prov);
  model_args.describe(prov);

  MaskArgs m = margs;
  m.rows = a.rows;
  m.cols = a.cols;
  core::MaskSet masks = m.build();

  std::vector<train::TrainPair> corpus;
  if (a.corpus == "synth") {
    corpus = train::synth_corpus(a.rows, a.cols, m.frames, a.pairs, a.seed);
  } else {
    corpus = train::build_corpus(data_root_relative(a.corpus_root.empty()
                                                        ? a.corpus
                                                        : a.corpus_root),
                                 a.crop, m.frames, a.pairs, a.seed);
  }

  net::Model model(model_args.build(m.frames));
  train::TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.lr_initial = a.lr;
  cfg.lr_decay = a.lr_decay;
  cfg.lr_decay_epochs = a.lr_decay_epochs;
  cfg.alpha = a.alpha;
  cfg.seed = a.seed;
  cfg.max_steps = a.max_steps;
  cfg.stop_loss_ratio = a.stop_ratio;
  cfg.config_hash = prov.hash();

  train::TrainResult res = train::train(model, corpus, masks, cfg, a.out);
  prov.write(a.out);
  prov.announce();
  std::cout << "steps: " << res.steps << "\ninitial loss: " << res.initial_loss
            << "\nfinal loss: " << res.final_loss << "\n";
  return 0;
}

struct ReconstructArgs {
  std::string algo = "gaptv";
  std::string measurement, masks_dir, out, weights;
  std::string dump_flows;  // directory for flow tensors + color previews
};

int cmd_reconstruct(const ReconstructArgs& a, const SolverArgs& sargs,
                    ModelArgs& model_args) {
  Provenance prov("reconstruct");
  const std::string mode = model_args.mode;
  prov.add("algo", a.algo);
  prov.add("measurement", a.measurement);
  prov.add("masks", a.masks_dir);
  prov.add("weights", a.weights);
  sargs.describe(prov);
  model_args.describe(prov);

  core::Measurement m = io::load_measurement(data_root_relative(a.measurement));
  core::MaskSet masks = io::load_masks(data_root_relative(a.masks_dir));
  fs::create_directories(a.out);

  const auto save_views = [&](const Tensor& x1, const Tensor& x2) {
    io::save_cube(fs::path(a.out) / "est1",
                  core::VideoCube{x1, core::ViewId::kView1}, prov.hash());
    if (x2.chans > 0)
      io::save_cube(fs::path(a.out) / "est2",
                    core::VideoCube{x2, core::ViewId::kView2}, prov.hash());
  };

  if (a.algo == "net") {
    auto model = std::make_shared<net::Model>(model_args.build(masks.frames()));
    load_model_weights(*model, a.weights);
    const auto dump_flows = [&](const net::FlowValues& flows) {
      if (a.dump_flows.empty()) return;
      io::Container c;
      c.set_attr("kind", std::string("flow_fields"));
      c.set_attr("config_hash", prov.hash());
      auto add = [&](const char* prefix, const std::vector<Tensor>& fields) {
        for (std::size_t t = 0; t < fields.size(); ++t) {
          const std::string name = std::string(prefix) + std::to_string(t);
          c.put(name, fields[t]);
          io::write_png(fs::path(a.dump_flows) / (name + ".png"),
                        flow::flow_color(fields[t]));
        }
      };
      fs::create_directories(a.dump_flows);
      add("fwd1_", flows.fwd1);
      add("bwd1_", flows.bwd1);
      add("fwd2_", flows.fwd2);
      add("bwd2_", flows.bwd2);
      c.save(a.dump_flows);
    };
    if (mode == "single") {
      net::Model::Forward f = model->forward_single(m, masks.c1);
      save_views(f.refined1->value, Tensor());
      dump_flows(f.flows);
    } else {
      net::Model::Forward f = model->forward_dual(m, masks);
      save_views(f.refined1->value, f.refined2->value);
      dump_flows(f.flows);
    }
  } else if (a.algo == "gaptv" || a.algo == "pnp-tv") {
    const solver::GapTvConfig cfg = sargs.build();
    if (mode == "single") {
      auto [x, state] = solver::gap_tv_single(m, masks.c1, cfg);
      save_views(x, Tensor());
      std::ofstream res(fs::path(a.out) / "residuals.csv");
      res << solver::residual_table(state);
    } else {
      solver::DualViewResult r =
          a.algo == "gaptv" ? solver::gap_tv(m, masks, cfg)
                            : solver::pnp_solve(m, masks, make_denoiser(sargs), cfg);
      save_views(r.x1, r.x2);
      std::ofstream res(fs::path(a.out) / "residuals.csv");
      res << solver::residual_table(r.state);
    }
  } else {
    throw std::invalid_argument("reconstruct: unknown algo " + a.algo);
  }
  prov.write(a.out);
  prov.announce();
  return 0;
}

struct EvaluateArgs {
  std::string ref1, ref2, est1, est2, out;
  std::string mode = "dual";
};

int cmd_evaluate(const EvaluateArgs& a) {
  Provenance prov("evaluate");
  prov.add("ref1", a.ref1);
  prov.add("ref2", a.ref2);
  prov.add("est1", a.est1);
  prov.add("est2", a.est2);
  prov.add("mode", a.mode);

  eval::EvalReport rep;
  if (a.mode == "single") {
    core::VideoCube ref = io::load_cube(data_root_relative(a.ref1));
    core::VideoCube est = io::load_cube(data_root_relative(a.est1));
    rep.views.push_back(eval::framewise_report(ref.data, est.data));
    rep.avg_psnr = rep.views[0].mean_psnr;
    rep.avg_ssim = rep.views[0].mean_ssim;
  } else {
    core::VideoCube r1 = io::load_cube(data_root_relative(a.ref1));
    core::VideoCube r2 = io::load_cube(data_root_relative(a.ref2));
    core::VideoCube e1 = io::load_cube(data_root_relative(a.est1));
    core::VideoCube e2 = io::load_cube(data_root_relative(a.est2));
    rep = eval::evaluate_pair(r1.data, e1.data, r2.data, e2.data);
  }
  rep.config_hash = prov.hash();
  fs::create_directories(a.out);
  {
    std::ofstream f(fs::path(a.out) / "report.txt");
    f << eval::report_table(rep);
    std::ofstream g(fs::path(a.out) / "framewise.csv");
    g << eval::report_csv(rep);
  }
  prov.write(a.out);
  prov.announce();
  std::cout << eval::report_table(rep);
  return 0;
}

struct SweepArgs {
  std::string type = "noise";
  std::string algo = "gaptv";
  std::string out;
  std::string weights_pattern;
  int rows = 64, cols = 64, frames = 4;
  int pairs = 1;
  std::uint64_t seed = 0;
  std::vector<double> sigmas;
  std::vector<int> frames_list;
};

int cmd_sweep(const SweepArgs& a, const MaskArgs& margs, const SolverArgs& sargs,
              ModelArgs& model_args) {
  Provenance prov("sweep");
  prov.add("type", a.type);
  prov.add("algo", a.algo);
  prov.add("rows", a.rows);
  prov.add("cols", a.cols);
  prov.add("frames", a.frames);
  prov.add("pairs", a.pairs);
  prov.add("seed", a.seed);
  sargs.describe(prov);

  const auto make_algo = [&](int frames) -> eval::Reconstructor {
    if (a.algo == "gaptv") {
      solver::GapTvConfig cfg = sargs.build();
      return [cfg](const core::Measurement& m, const core::MaskSet& masks) {
        solver::DualViewResult r = solver::gap_tv(m, masks, cfg);
        return std::make_pair(r.x1, r.x2);
      };
    }
    if (a.algo == "net") {
      std::string weights = a.weights_pattern;
      const std::string token = "{b}";
      const auto at = weights.find(token);
      if (at != std::string::npos)
        weights.replace(at, token.size(), std::to_string(frames));
      if (!weights.empty() && !fs::exists(data_root_relative(weights)))
        throw std::invalid_argument("sweep: no model for frame count " +
                                    std::to_string(frames) + " at " + weights);
      auto model = std::make_shared<net::Model>(model_args.build(frames));
      load_model_weights(*model, weights);
      return net_reconstructor(model);
    }
    throw std::invalid_argument("sweep: unknown algo " + a.algo);
  };

  std::vector<eval::SweepRow> rows;
  const char* param_name = "sigma";
  if (a.type == "noise") {
    std::vector<double> sigmas = a.sigmas;
    if (sigmas.empty()) sigmas = {0.0, 0.01, 0.05, 0.1, 0.2};
    for (double s : sigmas) prov.add("sigma_" + std::to_string(s), s);
    MaskArgs m = margs;
    m.rows = a.rows;
    m.cols = a.cols;
    m.frames = a.frames;
    core::MaskSet masks = m.build();
    std::vector<train::TrainPair> tp =
        train::synth_corpus(a.rows, a.cols, a.frames, a.pairs, a.seed);
    std::vector<eval::ScenePair> scenes;
    for (auto& p : tp) scenes.push_back({std::move(p.x1), std::move(p.x2)});
    rows = eval::noise_sweep(make_algo(a.frames), scenes, masks, sigmas, a.seed);
  } else if (a.type == "rate") {
    param_name = "frames";
    std::vector<int> list = a.frames_list;
    if (list.empty()) list = {6, 10, 14};
    const int max_frames = *std::max_element(list.begin(), list.end());
    std::vector<train::TrainPair> tp =
        train::synth_corpus(a.rows, a.cols, max_frames, a.pairs, a.seed);
    eval::RateSweepInputs inputs;
    for (auto& p : tp) inputs.scenes.push_back({std::move(p.x1), std::move(p.x2)});
    inputs.make_reconstructor = make_algo;
    inputs.make_masks = [&](int frames) {
      MaskArgs m = margs;
      m.rows = a.rows;
      m.cols = a.cols;
      m.frames = frames;
      return m.build();
    };
    rows = eval::rate_sweep(inputs, list);
  } else {
    throw std::invalid_argument("sweep: unknown type " + a.type);
  }

  const std::string table = eval::sweep_table(rows, param_name);
  fs::create_directories(a.out);
  std::ofstream f(fs::path(a.out) /
                  (a.type == "noise" ? "noise_sweep.csv" : "rate_sweep.csv"));
  f << table;
  prov.write(a.out);
  prov.announce();
  std::cout << table;
  return 0;
}

struct AblateArgs {
  std::string out;
  std::string flags = "no_flow,no_backward,no_diversity,no_refine";
  int rows = 64, cols = 64, frames = 4;
  std::uint64_t seed = 0;
  std::string weights;
};

int cmd_ablate(const AblateArgs& a, const MaskArgs& margs, ModelArgs& model_args) {
  Provenance prov("ablate");
  prov.add("flags", a.flags);
  prov.add("rows", a.rows);
  prov.add("cols", a.cols);
  prov.add("frames", a.frames);
  prov.add("seed", a.seed);
  model_args.describe(prov);

  std::vector<std::string> variants;
  {
    std::istringstream ss(a.flags);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) variants.push_back(item);
  }
  if (variants.empty())
    throw std::invalid_argument("ablate: no flags listed");
  for (const std::string& v : variants)
    (void)net::AblationFlags::parse(v);  // reject unknown names up front

  MaskArgs m = margs;
  m.rows = a.rows;
  m.cols = a.cols;
  m.frames = a.frames;
  core::MaskSet masks = m.build();
  std::vector<train::TrainPair> tp =
      train::synth_corpus(a.rows, a.cols, a.frames, 1, a.seed);
  core::Measurement meas = core::encode(tp[0].x1, tp[0].x2, masks, 0.0f, a.seed);

  std::ostringstream table;
  table << "variant,psnr_db,ssim,seconds\n";
  for (const std::string& v : variants) {
    ModelArgs va = model_args;
    va.flags = v;
    auto model = std::make_shared<net::Model>(va.build(a.frames));
    load_model_weights(*model, a.weights);
    const auto t0 = std::chrono::steady_clock::now();
    auto [x1, x2] = model->reconstruct(meas, masks);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    eval::EvalReport rep =
        eval::evaluate_pair(tp[0].x1.data, x1, tp[0].x2.data, x2);
    table.setf(std::ios::fixed);
    table.precision(4);
    table << v << "," << rep.avg_psnr << "," << rep.avg_ssim << "," << secs
          << "\n";
  }
  fs::create_directories(a.out);
  std::ofstream f(fs::path(a.out) / "ablate.csv");
  f << table.str();
  prov.write(a.out);
  prov.announce();
  std::cout << table.str();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"dual-view video snapshot compressive imaging toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file with [command] sections");

  int rc = 0;

  // mask-gen
  MaskArgs mg_masks;
  std::string mg_out;
  std::uint64_t mg_seed = 0;
  CLI::App* mask_gen = app.add_subcommand("mask-gen", "generate a paired mask set");
  mask_gen->add_option("--out", mg_out)->required();
  mask_gen->add_option("--rows", mg_masks.rows);
  mask_gen->add_option("--cols", mg_masks.cols);
  mask_gen->add_option("--frames", mg_masks.frames);
  mask_gen->add_option("--density", mg_masks.density);
  mask_gen->add_option("--shift-row", mg_masks.shift_row);
  mask_gen->add_option("--shift-col", mg_masks.shift_col);
  mask_gen->add_option("--seed", mg_masks.seed);
  mask_gen->callback([&] { rc = cmd_mask_gen(mg_masks, mg_out, mg_seed); });

  // scene-gen
  SceneGenArgs sg;
  CLI::App* scene_gen =
      app.add_subcommand("scene-gen", "write a synthetic scene pair");
  scene_gen->add_option("--out1", sg.out1)->required();
  scene_gen->add_option("--out2", sg.out2);
  scene_gen->add_option("--rows", sg.rows);
  scene_gen->add_option("--cols", sg.cols);
  scene_gen->add_option("--frames", sg.frames);
  scene_gen->add_option("--seed", sg.seed);
  scene_gen->add_option("--max-velocity", sg.max_velocity);
  scene_gen->add_option("--texture", sg.texture);
  scene_gen->add_flag("--hard-edges", sg.hard_edges);
  scene_gen->callback([&] { rc = cmd_scene_gen(sg); });

  // simulate
  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "encode scenes into a snapshot");
  simulate->add_option("--scene1", sim.scene1)->required();
  simulate->add_option("--scene2", sim.scene2);
  simulate->add_option("--masks", sim.masks_dir)->required();
  simulate->add_option("--out", sim.out)->required();
  simulate->add_option("--mode", sim.mode)->check(CLI::IsMember({"dual", "single"}));
  simulate->add_option("--noise-sigma", sim.noise_sigma);
  simulate->add_flag("--normalize", sim.normalize);
  simulate->add_option("--seed", sim.seed);
  simulate->callback([&] { rc = cmd_simulate(sim); });

  // amplify
  AmplifyArgs amp_args;
  CLI::App* amplify = app.add_subcommand("amplify", "normalized measurement and diversity images");
  amplify->add_option("--measurement", amp_args.measurement)->required();
  amplify->add_option("--masks", amp_args.masks_dir)->required();
  amplify->add_option("--out", amp_args.out)->required();
  amplify->add_option("--sigma-g", amp_args.sigma_g);
  amplify->add_option("--radius", amp_args.radius);
  amplify->add_flag("--normalize-by-sum", amp_args.by_sum);
  amplify->callback([&] { rc = cmd_amplify(amp_args); });

  // train
  TrainArgs tr;
  MaskArgs tr_masks;
  ModelArgs tr_model;
  CLI::App* train_cmd = app.add_subcommand("train", "train the reconstruction network");
  train_cmd->add_option("--out", tr.out)->required();
  train_cmd->add_option("--corpus", tr.corpus, "synth or a sequence directory root");
  train_cmd->add_option("--corpus-root", tr.corpus_root);
  train_cmd->add_option("--crop", tr.crop);
  train_cmd->add_option("--rows", tr.rows);
  train_cmd->add_option("--cols", tr.cols);
  train_cmd->add_option("--frames", tr_masks.frames);
  train_cmd->add_option("--pairs", tr.pairs);
  train_cmd->add_option("--epochs", tr.epochs);
  train_cmd->add_option("--batch", tr.batch);
  train_cmd->add_option("--lr", tr.lr);
  train_cmd->add_option("--lr-decay", tr.lr_decay);
  train_cmd->add_option("--lr-decay-epochs", tr.lr_decay_epochs);
  train_cmd->add_option("--alpha", tr.alpha);
  train_cmd->add_option("--seed", tr.seed);
  train_cmd->add_option("--max-steps", tr.max_steps);
  train_cmd->add_option("--stop-ratio", tr.stop_ratio);
  train_cmd->add_option("--density", tr_masks.density);
  train_cmd->add_option("--shift-row", tr_masks.shift_row);
  train_cmd->add_option("--shift-col", tr_masks.shift_col);
  train_cmd->add_option("--mask-seed", tr_masks.seed);
  tr_model.add_options(train_cmd);
  train_cmd->callback([&] { rc = cmd_train(tr, tr_masks, tr_model); });

  // reconstruct
  ReconstructArgs rec;
  SolverArgs rec_solver;
  ModelArgs rec_model;
  CLI::App* reconstruct = app.add_subcommand("reconstruct", "decode a measurement");
  reconstruct->add_option("--algo", rec.algo)
      ->check(CLI::IsMember({"gaptv", "pnp-tv", "net"}));
  reconstruct->add_option("--measurement", rec.measurement)->required();
  reconstruct->add_option("--masks", rec.masks_dir)->required();
  reconstruct->add_option("--out", rec.out)->required();
  reconstruct->add_option("--weights", rec.weights);
  reconstruct->add_option("--dump-flows", rec.dump_flows,
                          "also write the flow fields and color previews");
  rec_solver.add_options(reconstruct);
  rec_model.add_options(reconstruct);
  reconstruct->callback([&] { rc = cmd_reconstruct(rec, rec_solver, rec_model); });

  // evaluate
  EvaluateArgs ev;
  CLI::App* evaluate = app.add_subcommand("evaluate", "PSNR/SSIM report");
  evaluate->add_option("--ref1", ev.ref1)->required();
  evaluate->add_option("--ref2", ev.ref2);
  evaluate->add_option("--est1", ev.est1)->required();
  evaluate->add_option("--est2", ev.est2);
  evaluate->add_option("--out", ev.out)->required();
  evaluate->add_option("--mode", ev.mode)->check(CLI::IsMember({"dual", "single"}));
  evaluate->callback([&] { rc = cmd_evaluate(ev); });

  // sweep
  SweepArgs sw;
  MaskArgs sw_masks;
  SolverArgs sw_solver;
  ModelArgs sw_model;
  CLI::App* sweep = app.add_subcommand("sweep", "noise or compression-rate sweep");
  sweep->add_option("--type", sw.type)->check(CLI::IsMember({"noise", "rate"}));
  sweep->add_option("--algo", sw.algo)->check(CLI::IsMember({"gaptv", "net"}));
  sweep->add_option("--out", sw.out)->required();
  sweep->add_option("--rows", sw.rows);
  sweep->add_option("--cols", sw.cols);
  sweep->add_option("--frames", sw.frames);
  sweep->add_option("--pairs", sw.pairs);
  sweep->add_option("--seed", sw.seed);
  sweep->add_option("--sigmas", sw.sigmas)->delimiter(',');
  sweep->add_option("--frames-list", sw.frames_list)->delimiter(',');
  sweep->add_option("--weights-pattern", sw.weights_pattern,
                    "net weights dir, {b} replaced by the frame count");
  sweep->add_option("--density", sw_masks.density);
  sweep->add_option("--shift-row", sw_masks.shift_row);
  sweep->add_option("--shift-col", sw_masks.shift_col);
  sweep->add_option("--mask-seed", sw_masks.seed);
  sw_solver.add_options(sweep);
  sw_model.add_options(sweep);
  sweep->callback([&] { rc = cmd_sweep(sw, sw_masks, sw_solver, sw_model); });

  // ablate
  AblateArgs ab;
  MaskArgs ab_masks;
  ModelArgs ab_model;
  CLI::App* ablate = app.add_subcommand("ablate", "run ablation variants");
  ablate->add_option("--out", ab.out)->required();
  ablate->add_option("--flags", ab.flags);
  ablate->add_option("--rows", ab.rows);
  ablate->add_option("--cols", ab.cols);
  ablate->add_option("--frames", ab.frames);
  ablate->add_option("--seed", ab.seed);
  ablate->add_option("--weights", ab.weights);
  ablate->add_option("--density", ab_masks.density);
  ablate->add_option("--shift-row", ab_masks.shift_row);
  ablate->add_option("--shift-col", ab_masks.shift_col);
  ablate->add_option("--mask-seed", ab_masks.seed);
  ab_model.add_options(ablate, /*with_flags=*/false);
  ablate->callback([&] { rc = cmd_ablate(ab, ab_masks, ab_model); });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 3;
  }
  return rc;
}

}  // namespace dvsci::cli
