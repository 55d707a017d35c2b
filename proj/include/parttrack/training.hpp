#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "parttrack/config.hpp"
#include "parttrack/dataio.hpp"
#include "parttrack/losses.hpp"
#include "parttrack/model.hpp"

namespace parttrack {

/// Frame indices of one training triplet within a sequence.
struct TripletIndices {
  std::size_t sequence = 0;
  std::size_t search = 0;
  std::size_t template_frame = 0;
  std::size_t pseudo = 0;  // always search - 1
};

/// Picks search in [1, length-1] (or the forced index), template within
/// frame_range of it (never equal to it), pseudo = search - 1.
/// Throws DataError for sequences shorter than two frames.
TripletIndices sample_triplet_indices(std::size_t length, int frame_range, Rng& rng,
                                      std::optional<std::size_t> forced_search = std::nullopt);

/// Uniform sequence choice, then sample_triplet_indices.
TripletIndices sample_triplet(const std::vector<Sequence>& dataset, int frame_range, Rng& rng);

struct JitterParams {
  double shift_fraction = 0.08;  // max |shift| per axis as a fraction of the context side
  double scale_min = 0.8;
  double scale_max = 1.25;
  double context_factor = 2.0;
};

/// Random shift (uniform in +-shift_fraction * context side, per axis) and
/// independent w/h rescale, clipped to the frame.
BBox<double> jitter(const BBox<double>& gt, Rng& rng, const JitterParams& params, int frame_width, int frame_height);

/// Learning rate at a (fractional) epoch: linear warm-up from lr_start to
/// lr_peak, then exponential decay reaching lr_end at the last epoch.
double lr_schedule(double epoch, const TrainConfig& cfg);

/// Crops and labels of one triplet, ready for the network.
struct TrainingExample {
  Patch template_patch;
  Patch pseudo_patch;
  Patch search_patch;
  TargetMask mask;
  BBox<double> gt;  // search-normalized
};

TrainingExample make_example(const Sequence& seq, const TripletIndices& idx, Rng& rng, const Config& cfg);

/// Mean loss of a batch as a differentiable scalar plus its report.
TotalLoss<double> batch_loss(const std::vector<TrainingExample>& batch, const ModelParams<double>& params,
                             const Config& cfg, Rng& rng);

struct TrainState {
  ModelParams<double> params;
  std::uint64_t step = 0;
  double epoch = 0;
  Rng rng;
  double best_loss = std::numeric_limits<double>::infinity();
};

struct StepResult {
  LossReport report;
  double lr = 0;
  bool aborted = false;
  std::string error;
};

/// SGD with momentum (or Adam) over a TrainState.
class Trainer {
 public:
  Trainer(Config cfg, TrainState state);

  /// One update on total_loss. Non-finite losses or gradients abort the
  /// step and leave the parameters untouched.
  StepResult train_step(const std::vector<TrainingExample>& batch, double lr);

  /// Freezes backbone blocks according to the schedule for this epoch.
  void apply_freeze_schedule(double epoch);

  const TrainState& state() const { return state_; }
  TrainState& state() { return state_; }
  const Config& config() const { return cfg_; }

 private:
  Config cfg_;
  TrainState state_;
  std::vector<Mat<double>> velocity_;
  std::vector<Mat<double>> second_moment_;
  std::uint64_t updates_ = 0;
};

/// Key=value metrics line for one step.
std::string format_metrics_line(std::uint64_t step, double epoch, const StepResult& r);

struct TrainRunResult {
  std::filesystem::path final_checkpoint;
  std::uint64_t steps = 0;
  std::uint64_t aborted_steps = 0;
  LossReport last_report;
};

/// Full schedule over a dataset: sample batches, step, log, checkpoint.
/// Throws NumericError after more than 10 consecutive aborted steps.
TrainRunResult run_training(const Config& cfg, const std::vector<Sequence>& dataset,
                            const std::filesystem::path& out_dir,
                            const std::function<void(const StepResult&, std::uint64_t)>& on_step = {});

}  // namespace parttrack
