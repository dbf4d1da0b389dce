#ifndef DVSCI_TRAIN_HPP
#define DVSCI_TRAIN_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "dvsci/pipeline.hpp"
#include "dvsci/sci_core.hpp"

namespace dvsci::train {

// Ground-truth scene pair; the measurement is regenerated on the fly from
// the shared mask set.
struct TrainPair {
  core::VideoCube x1;
  core::VideoCube x2;
  std::string mask_ref;
};

struct TrainConfig {
  int epochs = 90;
  int batch_size = 2;
  double lr_initial = 3e-4;
  double lr_decay = 0.9;  // multiplicative, applied every lr_decay_epochs
  int lr_decay_epochs = 10;
  double alpha = 1.0;  // coarse-loss weight
  std::uint64_t seed = 0;
  int max_steps = 0;            // 0: run all epochs
  double stop_loss_ratio = 0.0; // >0: stop once loss <= ratio * initial
  std::string config_hash;

  double lr_at_epoch(int epoch) const;
  void validate() const;
};

// Corpus ingestion from a directory of sequences (one subdirectory per
// sequence, PGM/PPM frames in sorted order). Crops are square, grayscale by
// luma weighting, values in [0,1]. Pairs draw two distinct sequences.
std::vector<TrainPair> build_corpus(const std::filesystem::path& root,
                                    int crop, int frames, int count,
                                    std::uint64_t seed);

struct SynthOptions {
  double max_velocity = 3.0;      // px/frame
  double fixed_velocity = -1.0;   // >= 0 pins the speed for every shape
  double texture_amplitude = 0.15;
  bool hard_edges = false;        // piecewise-constant scenes
  int shapes_per_view = 2;
};

// Deterministic synthetic scenes: translating rectangles/disks over textured
// backgrounds. No external data needed.
std::vector<TrainPair> synth_corpus(int rows, int cols, int frames, int count,
                                    std::uint64_t seed,
                                    const SynthOptions& opts = {});

// Training objective: alpha * (coarse errors) + (refined errors), squared
// Euclidean norms summed over frames and views.
nn::NodePtr loss_node(const nn::NodePtr& coarse1, const nn::NodePtr& coarse2,
                      const nn::NodePtr& refined1, const nn::NodePtr& refined2,
                      const Tensor& x1, const Tensor& x2, float alpha);

double loss_value(const Tensor& coarse1, const Tensor& coarse2,
                  const Tensor& refined1, const Tensor& refined2,
                  const Tensor& x1, const Tensor& x2, double alpha);

class Adam {
 public:
  explicit Adam(std::vector<nn::NodePtr> params, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void zero_grads();
  // Applies one update from the accumulated gradients scaled by grad_scale.
  void step(double lr, double grad_scale = 1.0);
  long steps_taken() const { return t_; }

 private:
  std::vector<nn::NodePtr> params_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
  double beta1_, beta2_, eps_;
};

struct TrainLogRow {
  int step = 0;
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps = 0;
  int epochs_completed = 0;
};

// End-to-end loop: regenerate measurement, forward, loss, Adam update, with
// the learning-rate schedule and per-epoch checkpoints (out_dir empty: keep
// everything in memory). A non-finite loss aborts with a diagnostic dump.
TrainResult train(net::Model& model, std::vector<TrainPair>& corpus,
                  const core::MaskSet& masks, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir = {});

struct GradCheckReport {
  double max_rel_error = 0.0;
  int checked = 0;
};

// Central-difference check of the analytic gradients for k randomly sampled
// scalar parameters. Classical displacement fields are held fixed; the
// differencing runs on a double-precision shadow of the forward pass so the
// step can sit inside one smooth piece of the rectifier landscape (a float32
// forward cannot resolve 1e-3 there at any usable step size).
GradCheckReport grad_check(net::Model& model, const TrainPair& sample,
                           const core::MaskSet& masks, int k, double eps,
                           std::uint64_t seed);

}  // namespace dvsci::train

#endif
