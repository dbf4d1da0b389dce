#include "dvsci/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace dvsci::eval {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Tensor clamp01(const Tensor& t) {
  Tensor out = t;
  for (float& x : out.v) x = std::min(1.0f, std::max(0.0f, x));
  return out;
}

struct SsimWindow {
  static constexpr int kRadius = 5;
  double w[11][11];
  SsimWindow() {
    const double sigma = 1.5;
    double sum = 0.0;
    for (int i = -kRadius; i <= kRadius; ++i)
      for (int j = -kRadius; j <= kRadius; ++j) {
        w[i + kRadius][j + kRadius] =
            std::exp(-0.5 * (i * i + j * j) / (sigma * sigma));
        sum += w[i + kRadius][j + kRadius];
      }
    for (auto& row : w)
      for (double& x : row) x /= sum;
  }
};

}  // namespace

double psnr(const Tensor& ref, const Tensor& est, double peak) {
  require_same_shape(ref, est, "psnr");
  double sq = 0.0;
  for (std::size_t i = 0; i < ref.v.size(); ++i) {
    const double d = static_cast<double>(ref.v[i]) - static_cast<double>(est.v[i]);
    sq += d * d;
  }
  const double mse = sq / static_cast<double>(ref.v.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Tensor& ref, const Tensor& est) {
  require_same_shape(ref, est, "ssim");
  if (ref.chans != 1)
    throw std::invalid_argument("ssim: expected single-plane images");
  if (ref.rows < 11 || ref.cols < 11)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  static const SsimWindow win;
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  double total = 0.0;
  long count = 0;
  for (int r = SsimWindow::kRadius; r < ref.rows - SsimWindow::kRadius; ++r) {
    for (int c = SsimWindow::kRadius; c < ref.cols - SsimWindow::kRadius; ++c) {
      double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
      for (int i = -SsimWindow::kRadius; i <= SsimWindow::kRadius; ++i) {
        for (int j = -SsimWindow::kRadius; j <= SsimWindow::kRadius; ++j) {
          const double wv = win.w[i + SsimWindow::kRadius][j + SsimWindow::kRadius];
          const double x = ref.at(0, r + i, c + j);
          const double y = est.at(0, r + i, c + j);
          mx += wv * x;
          my += wv * y;
          mxx += wv * x * x;
          myy += wv * y * y;
          mxy += wv * x * y;
        }
      }
      const double vx = mxx - mx * mx;
      const double vy = myy - my * my;
      const double cov = mxy - mx * my;
      total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

ViewScores framewise_report(const Tensor& ref_cube, const Tensor& est_cube) {
  require_same_shape(ref_cube, est_cube, "framewise_report");
  const Tensor est = clamp01(est_cube);
  ViewScores out;
  double sp = 0.0, ss = 0.0;
  for (int b = 0; b < ref_cube.chans; ++b) {
    FrameScore fs;
    fs.frame = b;
    fs.psnr = psnr(ref_cube.slice(b, 1), est.slice(b, 1));
    fs.ssim = ssim(ref_cube.slice(b, 1), est.slice(b, 1));
    sp += std::isinf(fs.psnr) ? 0.0 : fs.psnr;
    ss += fs.ssim;
    out.frames.push_back(fs);
  }
  out.mean_psnr = sp / ref_cube.chans;
  out.mean_ssim = ss / ref_cube.chans;
  return out;
}

EvalReport evaluate_pair(const Tensor& ref1, const Tensor& est1,
                         const Tensor& ref2, const Tensor& est2) {
  EvalReport rep;
  rep.views.push_back(framewise_report(ref1, est1));
  rep.views.push_back(framewise_report(ref2, est2));
  rep.avg_psnr = (rep.views[0].mean_psnr + rep.views[1].mean_psnr) / 2.0;
  rep.avg_ssim = (rep.views[0].mean_ssim + rep.views[1].mean_ssim) / 2.0;
  return rep;
}

std::string report_table(const EvalReport& report) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(4);
  for (std::size_t v = 0; v < report.views.size(); ++v) {
    ss << "view " << (v + 1) << ": psnr_db=" << report.views[v].mean_psnr
       << " ssim=" << report.views[v].mean_ssim << "\n";
  }
  ss << "average: psnr_db=" << report.avg_psnr << " ssim=" << report.avg_ssim;
  if (report.seconds > 0.0) ss << " seconds=" << report.seconds;
  ss << "\n";
  return ss.str();
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(6);
  ss << "view,frame,psnr_db,ssim\n";
  for (std::size_t v = 0; v < report.views.size(); ++v)
    for (const FrameScore& f : report.views[v].frames)
      ss << (v + 1) << "," << f.frame << "," << f.psnr << "," << f.ssim << "\n";
  return ss.str();
}

std::vector<SweepRow> noise_sweep(const Reconstructor& algo,
                                  const std::vector<ScenePair>& scenes,
                                  const core::MaskSet& masks,
                                  const std::vector<double>& sigmas,
                                  std::uint64_t seed) {
  if (sigmas.empty())
    throw std::invalid_argument("noise_sweep: sigma list must be nonempty");
  if (scenes.empty())
    throw std::invalid_argument("noise_sweep: empty dataset");
  std::vector<SweepRow> rows;
  for (std::size_t si = 0; si < sigmas.size(); ++si) {
    SweepRow row;
    row.param = sigmas[si];
    double t_total = 0.0;
    for (std::size_t k = 0; k < scenes.size(); ++k) {
      core::Measurement m = core::encode(scenes[k].x1, scenes[k].x2, masks,
                                         0.0f, seed);
      m = core::normalize_and_add_noise(
          m, static_cast<float>(sigmas[si]), seed + 1000 * si + k);
      const double t0 = now_seconds();
      auto [est1, est2] = algo(m, masks);
      t_total += now_seconds() - t0;
      EvalReport rep = evaluate_pair(scenes[k].x1.data, est1,
                                     scenes[k].x2.data, est2);
      row.psnr_view1 += rep.views[0].mean_psnr;
      row.psnr_view2 += rep.views[1].mean_psnr;
      row.ssim_view1 += rep.views[0].mean_ssim;
      row.ssim_view2 += rep.views[1].mean_ssim;
    }
    const double n = static_cast<double>(scenes.size());
    row.psnr_view1 /= n;
    row.psnr_view2 /= n;
    row.ssim_view1 /= n;
    row.ssim_view2 /= n;
    row.avg_psnr = (row.psnr_view1 + row.psnr_view2) / 2.0;
    row.avg_ssim = (row.ssim_view1 + row.ssim_view2) / 2.0;
    row.seconds = t_total / n;
    for (const SweepRow& prev : rows)
      if (prev.param < row.param && row.avg_psnr > prev.avg_psnr)
        row.beats_cleaner_row = true;
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepRow> rate_sweep(const RateSweepInputs& inputs,
                                 const std::vector<int>& frame_counts) {
  if (frame_counts.empty())
    throw std::invalid_argument("rate_sweep: frame-count list must be nonempty");
  if (inputs.scenes.empty())
    throw std::invalid_argument("rate_sweep: empty dataset");
  std::vector<SweepRow> rows;
  for (int frames : frame_counts) {
    Reconstructor algo = inputs.make_reconstructor(frames);
    core::MaskSet masks = inputs.make_masks(frames);
    SweepRow row;
    row.param = frames;
    double t_total = 0.0;
    for (const ScenePair& scene : inputs.scenes) {
      if (scene.x1.frames() < frames)
        throw std::invalid_argument("rate_sweep: scene shorter than frame count");
      core::VideoCube x1{scene.x1.data.slice(0, frames), core::ViewId::kView1};
      core::VideoCube x2{scene.x2.data.slice(0, frames), core::ViewId::kView2};
      core::Measurement m = core::encode(x1, x2, masks, 0.0f, 0);
      const double t0 = now_seconds();
      auto [est1, est2] = algo(m, masks);
      t_total += now_seconds() - t0;
      EvalReport rep = evaluate_pair(x1.data, est1, x2.data, est2);
      row.psnr_view1 += rep.views[0].mean_psnr;
      row.psnr_view2 += rep.views[1].mean_psnr;
      row.ssim_view1 += rep.views[0].mean_ssim;
      row.ssim_view2 += rep.views[1].mean_ssim;
    }
    const double n = static_cast<double>(inputs.scenes.size());
    row.psnr_view1 /= n;
    row.psnr_view2 /= n;
    row.ssim_view1 /= n;
    row.ssim_view2 /= n;
    row.avg_psnr = (row.psnr_view1 + row.psnr_view2) / 2.0;
    row.avg_ssim = (row.ssim_view1 + row.ssim_view2) / 2.0;
    row.seconds = t_total / n;
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_table(const std::vector<SweepRow>& rows,
                        const char* param_name) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(4);
  ss << param_name
     << ",psnr_db,ssim,psnr_view1,psnr_view2,ssim_view1,ssim_view2,seconds,"
        "beats_cleaner_row\n";
  for (const SweepRow& r : rows)
    ss << r.param << "," << r.avg_psnr << "," << r.avg_ssim << ","
       << r.psnr_view1 << "," << r.psnr_view2 << "," << r.ssim_view1 << ","
       << r.ssim_view2 << "," << r.seconds << ","
       << (r.beats_cleaner_row ? 1 : 0) << "\n";
  return ss.str();
}

double time_reconstruction(const Reconstructor& algo,
                           const core::Measurement& m,
                           const core::MaskSet& masks, int repetitions) {
  if (repetitions < 1)
    throw std::invalid_argument("time_reconstruction: repetitions must be >= 1");
  std::vector<double> samples;
  samples.reserve(repetitions);
  for (int i = 0; i < repetitions; ++i) {
    const double t0 = now_seconds();
    (void)algo(m, masks);
    samples.push_back(now_seconds() - t0);
  }
  std::sort(samples.begin(), samples.end());
  return samples[samples.size() / 2];
}

}  // namespace dvsci::eval
