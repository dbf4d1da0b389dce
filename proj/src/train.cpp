#include "dvsci/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "dvsci/io/container.hpp"
#include "dvsci/io/image_io.hpp"

namespace dvsci::train {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double sum_sq_diff_d(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "loss");
  double s = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    const double d = static_cast<double>(a.v[i]) - static_cast<double>(b.v[i]);
    s += d * d;
  }
  return s;
}

struct Shape {
  bool disk = false;
  double r0 = 0, c0 = 0;     // initial center
  double vr = 0, vc = 0;     // velocity, px/frame
  double half_r = 0, half_c = 0;  // rectangle half sizes / disk radius in half_r
  double intensity = 0;
};

float coverage(const Shape& s, double r, double c, int frame, bool hard) {
  const double cr = s.r0 + frame * s.vr;
  const double cc = s.c0 + frame * s.vc;
  if (s.disk) {
    const double d = std::sqrt((r - cr) * (r - cr) + (c - cc) * (c - cc));
    if (hard) return d <= s.half_r ? 1.0f : 0.0f;
    return static_cast<float>(std::min(1.0, std::max(0.0, s.half_r + 0.5 - d)));
  }
  const double dr = std::abs(r - cr), dc = std::abs(c - cc);
  if (hard) return (dr <= s.half_r && dc <= s.half_c) ? 1.0f : 0.0f;
  const double covr = std::min(1.0, std::max(0.0, s.half_r + 0.5 - dr));
  const double covc = std::min(1.0, std::max(0.0, s.half_c + 0.5 - dc));
  return static_cast<float>(covr * covc);
}

core::VideoCube synth_view(int rows, int cols, int frames, Rng& rng,
                           const SynthOptions& opts, core::ViewId view) {
  const double base = rng.uniform(0.25, 0.45);
  const double f1r = rng.uniform(0.5, 2.0) / rows;
  const double f1c = rng.uniform(0.5, 2.0) / cols;
  const double f2r = rng.uniform(2.0, 4.0) / rows;
  const double f2c = rng.uniform(2.0, 4.0) / cols;
  const double p1 = rng.uniform(0.0, 6.2831853);
  const double p2 = rng.uniform(0.0, 6.2831853);

  std::vector<Shape> shapes;
  for (int s = 0; s < opts.shapes_per_view; ++s) {
    Shape sh;
    sh.disk = rng.bernoulli(0.5);
    sh.half_r = rng.uniform(rows / 10.0, rows / 5.0);
    sh.half_c = sh.disk ? sh.half_r : rng.uniform(cols / 10.0, cols / 5.0);
    sh.r0 = rng.uniform(rows * 0.3, rows * 0.7);
    sh.c0 = rng.uniform(cols * 0.3, cols * 0.7);
    const double speed = opts.fixed_velocity >= 0.0
                             ? opts.fixed_velocity
                             : rng.uniform(0.3 * opts.max_velocity,
                                           opts.max_velocity);
    const double angle = rng.uniform(0.0, 6.2831853);
    sh.vr = speed * std::sin(angle);
    sh.vc = speed * std::cos(angle);
    sh.intensity = rng.uniform(0.55, 0.95);
    shapes.push_back(sh);
  }

  core::VideoCube cube;
  cube.view = view;
  cube.data = Tensor(frames, rows, cols);
  for (int b = 0; b < frames; ++b) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        double x = base;
        if (opts.texture_amplitude > 0.0)
          x += opts.texture_amplitude *
               (0.5 * std::sin(6.2831853 * (f1r * r + f1c * c) + p1) +
                0.5 * std::sin(6.2831853 * (f2r * r + f2c * c) + p2));
        for (const Shape& sh : shapes) {
          const float cov = coverage(sh, r, c, b, opts.hard_edges);
          x = x * (1.0 - cov) + sh.intensity * cov;
        }
        cube.data.at(b, r, c) =
            static_cast<float>(std::min(1.0, std::max(0.0, x)));
      }
    }
  }
  return cube;
}

void write_checkpoint(const std::filesystem::path& dir,
                      const nn::ParamStore& store, int step, int epoch,
                      const std::string& config_hash) {
  io::Container c;
  c.set_attr("kind", std::string("checkpoint"));
  c.set_attr("step", step);
  c.set_attr("epoch", epoch);
  if (!config_hash.empty()) c.set_attr("config_hash", config_hash);
  store.save_into(c);
  c.save(dir);
}

}  // namespace

double TrainConfig::lr_at_epoch(int epoch) const {
  return lr_initial * std::pow(lr_decay, epoch / lr_decay_epochs);
}

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1 || lr_decay_epochs < 1)
    throw std::invalid_argument("train: epochs, batch size and decay period must be positive");
  if (lr_initial < 0.0 || lr_decay <= 0.0)
    throw std::invalid_argument("train: bad learning-rate settings");
  if (alpha < 0.0) throw std::invalid_argument("train: alpha must be >= 0");
}

std::vector<TrainPair> build_corpus(const std::filesystem::path& root,
                                    int crop, int frames, int count,
                                    std::uint64_t seed) {
  if (crop < 1 || frames < 1 || count < 0)
    throw std::invalid_argument("build_corpus: bad geometry");
  std::vector<std::vector<std::filesystem::path>> sequences;
  std::vector<std::filesystem::path> dirs;
  if (!std::filesystem::is_directory(root))
    throw std::invalid_argument("build_corpus: no such corpus root " +
                                root.string());
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.is_regular_file() && io::is_pnm_file(e.path()))
        files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (static_cast<int>(files.size()) >= frames)
      sequences.push_back(std::move(files));
  }
  if (sequences.size() < 2)
    throw std::invalid_argument(
        "build_corpus: needs at least two sequences with enough frames");

  std::vector<TrainPair> pairs;
  for (int i = 0; i < count; ++i) {
    Rng rng(seed + 7919ull * static_cast<std::uint64_t>(i));
    const int s1 = rng.uniform_int(0, static_cast<int>(sequences.size()) - 1);
    int s2 = rng.uniform_int(0, static_cast<int>(sequences.size()) - 2);
    if (s2 >= s1) ++s2;
    TrainPair pair;
    auto load_view = [&](const std::vector<std::filesystem::path>& seq,
                         core::ViewId view) {
      const int start = rng.uniform_int(0, static_cast<int>(seq.size()) - frames);
      core::VideoCube cube;
      cube.view = view;
      int off_r = -1, off_c = -1;
      for (int b = 0; b < frames; ++b) {
        Tensor img = io::to_gray(io::read_pnm(seq[start + b]));
        if (img.rows < crop || img.cols < crop)
          throw std::invalid_argument("build_corpus: frame smaller than crop in " +
                                      seq[start + b].string());
        if (off_r < 0) {
          off_r = rng.uniform_int(0, img.rows - crop);
          off_c = rng.uniform_int(0, img.cols - crop);
        }
        if (b == 0) cube.data = Tensor(frames, crop, crop);
        for (int r = 0; r < crop; ++r)
          for (int c = 0; c < crop; ++c)
            cube.data.at(b, r, c) = img.at(0, off_r + r, off_c + c);
      }
      return cube;
    };
    pair.x1 = load_view(sequences[s1], core::ViewId::kView1);
    pair.x2 = load_view(sequences[s2], core::ViewId::kView2);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<TrainPair> synth_corpus(int rows, int cols, int frames, int count,
                                    std::uint64_t seed,
                                    const SynthOptions& opts) {
  if (rows < 1 || cols < 1 || frames < 1 || count < 0)
    throw std::invalid_argument("synth_corpus: bad geometry");
  std::vector<TrainPair> pairs;
  for (int i = 0; i < count; ++i) {
    Rng rng(seed + 7919ull * static_cast<std::uint64_t>(i));
    TrainPair pair;
    pair.x1 = synth_view(rows, cols, frames, rng, opts, core::ViewId::kView1);
    pair.x2 = synth_view(rows, cols, frames, rng, opts, core::ViewId::kView2);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

nn::NodePtr loss_node(const nn::NodePtr& coarse1, const nn::NodePtr& coarse2,
                      const nn::NodePtr& refined1, const nn::NodePtr& refined2,
                      const Tensor& x1, const Tensor& x2, float alpha) {
  nn::NodePtr lc1 = nn::sum_sq_diff(coarse1, x1);
  nn::NodePtr lc2 = nn::sum_sq_diff(coarse2, x2);
  nn::NodePtr lr1 = nn::sum_sq_diff(refined1, x1);
  nn::NodePtr lr2 = nn::sum_sq_diff(refined2, x2);
  return nn::scalar_combine(
      {{alpha, lc1}, {alpha, lc2}, {1.0f, lr1}, {1.0f, lr2}});
}

double loss_value(const Tensor& coarse1, const Tensor& coarse2,
                  const Tensor& refined1, const Tensor& refined2,
                  const Tensor& x1, const Tensor& x2, double alpha) {
  return alpha * (sum_sq_diff_d(coarse1, x1) + sum_sq_diff_d(coarse2, x2)) +
         sum_sq_diff_d(refined1, x1) + sum_sq_diff_d(refined2, x2);
}

Adam::Adam(std::vector<nn::NodePtr> params, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const nn::NodePtr& p : params_) {
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

void Adam::zero_grads() {
  for (const nn::NodePtr& p : params_)
    if (!p->grad.empty()) p->grad.fill(0.0f);
}

void Adam::step(double lr, double grad_scale) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    nn::Node& p = *params_[k];
    if (p.grad.empty()) p.ensure_grad();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = static_cast<double>(p.grad.v[i]) * grad_scale;
      m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g;
      v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g * g;
      const double mhat = m_[k][i] / bc1;
      const double vhat = v_[k][i] / bc2;
      p.value.v[i] = static_cast<float>(
          static_cast<double>(p.value.v[i]) - lr * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

TrainResult train(net::Model& model, std::vector<TrainPair>& corpus,
                  const core::MaskSet& masks, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir) {
  cfg.validate();
  if (corpus.empty()) throw std::invalid_argument("train: empty corpus");
  const bool single_view = model.config().mode == net::ViewMode::kSingle;
  // One mask set is the fixed system calibration for the whole run.
  for (TrainPair& pair : corpus) {
    if (!pair.mask_ref.empty() && pair.mask_ref != masks.id())
      throw std::invalid_argument("train: pair bound to a different mask set");
    pair.mask_ref = masks.id();
  }

  std::ofstream log_file;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log_file.open(out_dir / "train.log", std::ios::trunc);
    log_file << "step epoch loss lr seconds\n";
  }

  Adam adam(model.trainable());
  TrainResult result;
  const double t_start = now_seconds();
  bool stop = false;

  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    const double lr = cfg.lr_at_epoch(epoch);
    std::vector<int> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng shuffle_rng(cfg.seed * 1000003ull + static_cast<std::uint64_t>(epoch) + 1ull);
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);

    for (std::size_t at = 0; at < order.size() && !stop; at += cfg.batch_size) {
      adam.zero_grads();
      const std::size_t batch_end =
          std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
      double batch_loss = 0.0;
      for (std::size_t j = at; j < batch_end; ++j) {
        const TrainPair& pair = corpus[order[j]];
        nn::NodePtr loss;
        if (single_view) {
          core::Measurement m = core::encode_single(pair.x1, masks.c1, 0.0f, 0);
          net::Model::Forward f = model.forward_single(m, masks.c1);
          nn::NodePtr lc = nn::sum_sq_diff(f.coarse1, pair.x1.data);
          nn::NodePtr lrn = nn::sum_sq_diff(f.refined1, pair.x1.data);
          loss = nn::scalar_combine(
              {{static_cast<float>(cfg.alpha), lc}, {1.0f, lrn}});
        } else {
          core::Measurement m = core::encode(pair.x1, pair.x2, masks, 0.0f, 0);
          net::Model::Forward f = model.forward_dual(m, masks);
          loss = loss_node(f.coarse1, f.coarse2, f.refined1, f.refined2,
                           pair.x1.data, pair.x2.data,
                           static_cast<float>(cfg.alpha));
        }
        const double value = loss->value.v[0];
        if (!std::isfinite(value)) {
          if (!out_dir.empty()) {
            std::ofstream dump(out_dir / "diagnostic_dump.txt", std::ios::trunc);
            dump << "non-finite loss at step " << (result.steps + 1)
                 << " epoch " << epoch << " lr " << lr << "\n";
            for (const nn::NodePtr& p : model.params().all())
              dump << p->name << " max_abs=" << max_abs(p->value) << "\n";
          }
          throw std::runtime_error("train: non-finite loss, aborting");
        }
        batch_loss += value;
        nn::backward(loss);
      }
      const double n_in_batch = static_cast<double>(batch_end - at);
      adam.step(lr, 1.0 / n_in_batch);

      ++result.steps;
      TrainLogRow row;
      row.step = result.steps;
      row.epoch = epoch;
      row.loss = batch_loss / n_in_batch;
      row.lr = lr;
      row.seconds = now_seconds() - t_start;
      result.log.push_back(row);
      if (log_file)
        log_file << row.step << " " << row.epoch << " " << row.loss << " "
                 << row.lr << " " << row.seconds << "\n";
      if (result.steps == 1) result.initial_loss = row.loss;
      result.final_loss = row.loss;
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) stop = true;
      if (cfg.stop_loss_ratio > 0.0 &&
          row.loss <= cfg.stop_loss_ratio * result.initial_loss)
        stop = true;
    }
    result.epochs_completed = epoch + 1;
    if (!out_dir.empty()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "checkpoint-epoch-%04d", epoch);
      write_checkpoint(out_dir / buf, model.params(), result.steps, epoch,
                       cfg.config_hash);
    }
  }
  if (!out_dir.empty())
    write_checkpoint(out_dir / "checkpoint-final", model.params(),
                     result.steps, result.epochs_completed - 1,
                     cfg.config_hash);
  return result;
}

namespace {

// Double-precision shadow of the forward pass, used only by grad_check. The
// float32 forward is dense with rectifier kinks at feasible step sizes, so
// central differences on it cannot resolve gradients to 1e-3; the shadow
// evaluates the same architecture in double, where a small step stays inside
// one smooth piece. The parameter under test is poked by `delta` at read
// time, the stored float weights are never touched.
struct ShadowEval {
  const net::Model& model;
  const nn::Node* poked = nullptr;
  int poked_elem = -1;
  double delta = 0.0;

  double wv(const nn::NodePtr& p, std::size_t i) const {
    double v = p->value.v[i];
    if (p.get() == poked && static_cast<int>(i) == poked_elem) v += delta;
    return v;
  }

  TensorD conv(const TensorD& x, const std::string& name, int cout, int kh,
               int kw, int stride, bool act) const {
    const nn::NodePtr w = model.params().get(name + ".weight");
    const nn::NodePtr b = model.params().get(name + ".bias");
    const int cin = x.chans;
    const int ph = kh / 2, pw = kw / 2;
    const int ho = (x.rows + 2 * ph - kh) / stride + 1;
    const int wo = (x.cols + 2 * pw - kw) / stride + 1;
    TensorD y(cout, ho, wo);
    for (int oc = 0; oc < cout; ++oc)
      for (int r = 0; r < ho; ++r)
        for (int c = 0; c < wo; ++c) {
          double acc = wv(b, oc);
          for (int ic = 0; ic < cin; ++ic)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int xi = r * stride - ph + ky;
                const int xj = c * stride - pw + kx;
                if (xi < 0 || xi >= x.rows || xj < 0 || xj >= x.cols) continue;
                acc += x.at(ic, xi, xj) *
                       wv(w, ((static_cast<std::size_t>(oc) * cin + ic) * kh + ky) * kw + kx);
              }
          y.at(oc, r, c) = act ? (acc > 0 ? acc : 0.01 * acc) : acc;
        }
    return y;
  }

  TensorD deconv(const TensorD& x, const std::string& name, int cout,
                 bool act) const {
    const nn::NodePtr w = model.params().get(name + ".weight");
    const nn::NodePtr b = model.params().get(name + ".bias");
    const int cin = x.chans;
    TensorD y(cout, 2 * x.rows, 2 * x.cols);
    for (int oc = 0; oc < cout; ++oc) {
      for (int p = 0; p < y.rows; ++p)
        for (int q = 0; q < y.cols; ++q) y.at(oc, p, q) = wv(b, oc);
      for (int ic = 0; ic < cin; ++ic)
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx)
            for (int r = 0; r < x.rows; ++r)
              for (int c = 0; c < x.cols; ++c) {
                const int p = 2 * r + ky - 1, q = 2 * c + kx - 1;
                if (p < 0 || p >= y.rows || q < 0 || q >= y.cols) continue;
                y.at(oc, p, q) +=
                    x.at(ic, r, c) *
                    wv(w, ((static_cast<std::size_t>(oc) * cin + ic) * 3 + ky) * 3 + kx);
              }
    }
    if (act)
      for (double& v : y.v) v = v > 0 ? v : 0.01 * v;
    return y;
  }

  TensorD resblock(const TensorD& x, const std::string& name, int width) const {
    TensorD y = conv(x, name + ".conv0", width, 3, 3, 1, true);
    y = conv(y, name + ".conv1", width, 1, 1, 1, true);
    y = conv(y, name + ".conv2", width, 3, 3, 1, false);
    TensorD skip =
        x.chans == width ? x : conv(x, name + ".proj", width, 1, 1, 1, false);
    for (std::size_t i = 0; i < y.v.size(); ++i) {
      const double t = y.v[i] + skip.v[i];
      y.v[i] = t > 0 ? t : 0.01 * t;
    }
    return y;
  }

  TensorD separator_branch(const TensorD& in, const std::string& prefix) const {
    const net::SeparatorConfig cfg = model.config().separator_config();
    const int w32 = cfg.scaled(32), w64 = cfg.scaled(64);
    TensorD fine = conv(in, prefix + ".stage1.conv0", w32, 5, 5, 1, true);
    fine = conv(fine, prefix + ".stage1.conv1", w64, 3, 3, 1, true);
    fine = conv(fine, prefix + ".stage1.conv2", w64, 1, 1, 1, true);
    fine = conv(fine, prefix + ".stage1.conv3", w64, 3, 3, 2, true);
    TensorD deep = fine;
    for (int i = 0; i < 3; ++i)
      deep = resblock(deep, prefix + ".stage2.res" + std::to_string(i), w64);
    TensorD cat = concat_chans<double>({&deep, &fine});
    TensorD up = deconv(cat, prefix + ".stage3.up", w64, true);
    up = conv(up, prefix + ".stage3.conv0", w64, 1, 1, 1, true);
    up = conv(up, prefix + ".stage3.conv1", w32, 3, 3, 1, true);
    return conv(up, prefix + ".stage3.conv2", cfg.output_channels(), 1, 1, 1,
                false);
  }

  TensorD embed5(const TensorD& x, const std::string& p, int w) const {
    TensorD y = conv(x, p + ".conv0", w, 5, 5, 1, true);
    y = conv(y, p + ".conv1", w, 1, 1, 1, true);
    y = conv(y, p + ".conv2", w, 3, 3, 1, true);
    y = conv(y, p + ".conv3", w, 1, 1, 1, true);
    return conv(y, p + ".conv4", w, 3, 3, 1, true);
  }

  TensorD embed_flow(const TensorD& x, const std::string& p, int w) const {
    TensorD y = conv(x, p + ".conv0", w, 5, 5, 1, true);
    y = conv(y, p + ".conv1", w, 3, 3, 1, true);
    return conv(y, p + ".conv2", w, 1, 1, 1, true);
  }

  std::pair<TensorD, TensorD> cell_step(const TensorD& x_prev,
                                        const TensorD& f_fwd,
                                        const TensorD& f_bwd,
                                        const TensorD& d_embed,
                                        const TensorD& h_prev) const {
    const net::RefineConfig cfg = model.config().refine_config();
    const int e20 = cfg.scaled(20), e40 = cfg.scaled(40), e30 = cfg.scaled(30);
    TensorD fx = embed5(x_prev, "refine.frame_embed", e20);
    TensorD ff = embed_flow(f_fwd, "refine.fwd_flow_embed", e40);
    TensorD fb = embed_flow(f_bwd, "refine.bwd_flow_embed", e40);
    TensorD cat = concat_chans<double>({&fx, &ff, &fb, &d_embed, &h_prev});
    TensorD h = resblock(cat, "refine.fusion.res0", e40);
    h = resblock(h, "refine.fusion.res1", e40);
    h = conv(h, "refine.fusion.conv0", e20, 1, 3, 1, true);
    h = conv(h, "refine.fusion.conv1", e20, 3, 1, 1, true);
    h = conv(h, "refine.fusion.conv2", cfg.hidden_width(), 1, 3, 1, true);
    TensorD r = conv(h, "refine.frame_head.conv0", e40, 3, 3, 1, true);
    r = conv(r, "refine.frame_head.conv1", e30, 1, 1, 1, true);
    r = conv(r, "refine.frame_head.conv2", e20, 3, 3, 1, true);
    r = conv(r, "refine.frame_head.conv3", e20, 1, 1, 1, true);
    r = conv(r, "refine.frame_head.conv4", e20, 3, 3, 1, true);
    r = conv(r, "refine.frame_head.conv5", 1, 1, 1, 1, false);
    return {std::move(r), std::move(h)};
  }

  TensorD adapter_flow(const TensorD& a, const TensorD& b) const {
    TensorD x = concat_chans<double>({&a, &b});
    x = conv(x, "flow_adapter.conv0", 16, 5, 5, 1, true);
    x = conv(x, "flow_adapter.conv1", 16, 3, 3, 1, true);
    return conv(x, "flow_adapter.conv2", 2, 3, 3, 1, false);
  }

  TensorD refine_view(const TensorD& coarse, const std::vector<Tensor>& fwd,
                      const std::vector<Tensor>& bwd,
                      const TensorD& d_embed) const {
    const net::AblationFlags& flags = model.config().flags;
    const bool adapter =
        model.config().flow.kind == flow::Kind::kLearnedAdapter;
    const int frames = coarse.chans;
    const TensorD zero_flow(2, coarse.rows, coarse.cols);
    const TensorD h0(model.config().refine_config().hidden_width(), coarse.rows,
                     coarse.cols);
    std::vector<TensorD> fwd_d, bwd_d;
    for (int t = 0; t + 1 < frames && !flags.no_flow; ++t) {
      if (adapter) {
        TensorD a = coarse.slice(t, 1);
        TensorD b = coarse.slice(t + 1, 1);
        fwd_d.push_back(adapter_flow(a, b));
        bwd_d.push_back(adapter_flow(b, a));
      } else {
        fwd_d.push_back(fwd.at(t).cast<double>());
        bwd_d.push_back(bwd.at(t).cast<double>());
      }
    }
    auto fwd_at = [&](int t) -> const TensorD& {
      return flags.no_flow ? zero_flow : fwd_d.at(t);
    };
    auto bwd_at = [&](int t) -> const TensorD& {
      return flags.no_flow || flags.no_backward ? zero_flow : bwd_d.at(t);
    };
    std::vector<TensorD> frames_out;
    frames_out.push_back(
        cell_step(coarse.slice(0, 1), zero_flow, bwd_at(0), d_embed, h0).first);
    TensorD h = h0;
    for (int t = 0; t + 1 < frames; ++t) {
      auto [frame, hidden] =
          cell_step(coarse.slice(t, 1), fwd_at(t), bwd_at(t), d_embed, h);
      frames_out.push_back(std::move(frame));
      h = std::move(hidden);
    }
    std::vector<const TensorD*> parts;
    for (const TensorD& f : frames_out) parts.push_back(&f);
    return concat_chans<double>(parts);
  }
};

double sum_sq_diff_dd(const TensorD& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    const double d = a.v[i] - static_cast<double>(b.v[i]);
    s += d * d;
  }
  return s;
}

}  // namespace

GradCheckReport grad_check(net::Model& model, const TrainPair& sample,
                           const core::MaskSet& masks, int k, double eps,
                           std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("grad_check: k must be >= 1");
  const bool single_view = model.config().mode == net::ViewMode::kSingle;
  const net::AblationFlags& flags = model.config().flags;
  core::Measurement m =
      single_view ? core::encode_single(sample.x1, masks.c1, 0.0f, 0)
                  : core::encode(sample.x1, sample.x2, masks, 0.0f, 0);

  // Classical displacement fields enter the graph as constants; freeze them
  // from the base pass so both sides differentiate the same function. The
  // learned adapter stays live in both paths.
  net::Model::Forward base = single_view ? model.forward_single(m, masks.c1)
                                         : model.forward_dual(m, masks);
  const net::FlowValues frozen = base.flows;
  const net::FlowValues* freeze =
      model.config().flow.kind == flow::Kind::kClassical ? &frozen : nullptr;

  // Analytic gradients at the base point.
  model.params().zero_grads();
  {
    net::Model::Forward f = single_view
                                ? model.forward_single(m, masks.c1, freeze)
                                : model.forward_dual(m, masks, freeze);
    nn::NodePtr loss;
    if (single_view) {
      nn::NodePtr lc = nn::sum_sq_diff(f.coarse1, sample.x1.data);
      nn::NodePtr lrn = nn::sum_sq_diff(f.refined1, sample.x1.data);
      loss = nn::scalar_combine({{1.0f, lc}, {1.0f, lrn}});
    } else {
      loss = loss_node(f.coarse1, f.coarse2, f.refined1, f.refined2,
                       sample.x1.data, sample.x2.data, 1.0f);
    }
    nn::backward(loss);
  }

  // Constant network inputs, shared by every shadow evaluation.
  TensorD in1_d, in2_d, d4_d, ybar_d;
  if (single_view) {
    Tensor ybar = amp::normalize_measurement_single(
        m, masks.c1, model.config().amplifier.normalize_by_sum);
    in1_d = net::assemble_single_view_input(ybar, masks.c1).cast<double>();
    d4_d = TensorD(4, m.rows(), m.cols());
  } else {
    amp::DiversityBundle bundle =
        amp::build_bundle(m, masks, model.config().amplifier);
    const bool with_div = !flags.no_diversity;
    if (model.config().branch_mode == net::SeparatorConfig::Mode::kSingleBranch) {
      in1_d = net::assemble_single_branch_input(bundle, masks, with_div)
                  .cast<double>();
    } else {
      auto [i1, i2] = net::assemble_inputs(bundle, masks, with_div);
      in1_d = i1.cast<double>();
      in2_d = i2.cast<double>();
    }
    Tensor d4 = concat_chans<float>(
        {&bundle.d1, &bundle.d2, &bundle.d3, &bundle.d4});
    if (flags.no_diversity) d4.fill(0.0f);
    d4_d = d4.cast<double>();
  }

  ShadowEval shadow{model};
  auto shadow_loss = [&](const nn::Node* poked, int elem, double delta) {
    shadow.poked = poked;
    shadow.poked_elem = elem;
    shadow.delta = delta;
    const int frames = model.config().frames;
    TensorD c1, c2;
    if (single_view) {
      c1 = shadow.separator_branch(in1_d, "separator.branch1");
    } else if (model.config().branch_mode ==
               net::SeparatorConfig::Mode::kSingleBranch) {
      TensorD both = shadow.separator_branch(in1_d, "separator.branch1");
      c1 = both.slice(0, frames);
      c2 = both.slice(frames, frames);
    } else {
      c1 = shadow.separator_branch(in1_d, "separator.branch1");
      c2 = shadow.separator_branch(in2_d, "separator.branch2");
    }
    double loss = sum_sq_diff_dd(c1, sample.x1.data);
    if (!single_view) loss += sum_sq_diff_dd(c2, sample.x2.data);
    if (flags.no_refine) return 2.0 * loss;
    TensorD d_embed = shadow.embed5(d4_d, "refine.diversity_embed",
                                    model.config().refine_config().scaled(20));
    TensorD r1 = shadow.refine_view(c1, frozen.fwd1, frozen.bwd1, d_embed);
    loss += sum_sq_diff_dd(r1, sample.x1.data);
    if (!single_view) {
      TensorD r2 = shadow.refine_view(c2, frozen.fwd2, frozen.bwd2, d_embed);
      loss += sum_sq_diff_dd(r2, sample.x2.data);
    }
    return loss;
  };

  std::vector<nn::NodePtr> params = model.trainable();
  if (params.empty()) throw std::invalid_argument("grad_check: no parameters");
  Rng rng(seed);
  std::vector<double> analytic, numeric;
  for (int i = 0; i < k; ++i) {
    const int pi = rng.uniform_int(0, static_cast<int>(params.size()) - 1);
    nn::Node& p = *params[pi];
    const int ei = rng.uniform_int(0, static_cast<int>(p.value.size()) - 1);
    analytic.push_back(p.grad.empty() ? 0.0 : p.grad.v[ei]);
    const double lp = shadow_loss(&p, ei, eps);
    const double lm = shadow_loss(&p, ei, -eps);
    numeric.push_back((lp - lm) / (2.0 * eps));
  }

  double scale = 0.0;
  for (int i = 0; i < k; ++i)
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  const double floor = 1e-3 * scale + 1e-12;
  GradCheckReport report;
  report.checked = k;
  for (int i = 0; i < k; ++i) {
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    report.max_rel_error =
        std::max(report.max_rel_error, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return report;
}

}  // namespace dvsci::train
