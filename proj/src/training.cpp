#include "parttrack/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "parttrack/checkpoint.hpp"

namespace parttrack {
namespace fs = std::filesystem;

TripletIndices sample_triplet_indices(std::size_t length, int frame_range, Rng& rng,
                                      std::optional<std::size_t> forced_search) {
  if (length < 2) throw DataError("sample_triplet: sequence needs at least 2 frames");
  if (frame_range < 1) throw ParameterError("sample_triplet: frame_range must be >= 1");
  TripletIndices idx;
  if (forced_search) {
    if (*forced_search < 1 || *forced_search >= length) throw ParameterError("sample_triplet: search index out of range");
    idx.search = *forced_search;
  } else {
    idx.search = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(length) - 1));
  }
  const auto s = static_cast<std::int64_t>(idx.search);
  const std::int64_t lo = std::max<std::int64_t>(0, s - frame_range);
  const std::int64_t hi = std::min<std::int64_t>(static_cast<std::int64_t>(length) - 1, s + frame_range);
  // Draw from the window with the search frame itself removed.
  std::int64_t t = rng.uniform_int(lo, hi - 1);
  if (t >= s) ++t;
  idx.template_frame = static_cast<std::size_t>(t);
  idx.pseudo = idx.search - 1;
  return idx;
}

TripletIndices sample_triplet(const std::vector<Sequence>& dataset, int frame_range, Rng& rng) {
  if (dataset.empty()) throw DataError("sample_triplet: empty dataset");
  const auto seq = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(dataset.size()) - 1));
  TripletIndices idx = sample_triplet_indices(dataset[seq].size(), frame_range, rng);
  idx.sequence = seq;
  return idx;
}

BBox<double> jitter(const BBox<double>& gt, Rng& rng, const JitterParams& p, int frame_width, int frame_height) {
  const double delta = p.shift_fraction * context_side(gt, p.context_factor);
  double cx = gt.cx + rng.uniform(-delta, delta);
  double cy = gt.cy + rng.uniform(-delta, delta);
  double w = gt.w * rng.uniform(p.scale_min, p.scale_max);
  double h = gt.h * rng.uniform(p.scale_min, p.scale_max);
  cx = std::clamp(cx, 0.0, static_cast<double>(frame_width));
  cy = std::clamp(cy, 0.0, static_cast<double>(frame_height));
  const double x1 = std::max(0.0, cx - w / 2), x2 = std::min<double>(frame_width, cx + w / 2);
  const double y1 = std::max(0.0, cy - h / 2), y2 = std::min<double>(frame_height, cy + h / 2);
  return BBox<double>::from_top_left(x1, y1, x2 - x1, y2 - y1, gt.frame);
}

double lr_schedule(double epoch, const TrainConfig& cfg) {
  if (!(epoch >= 0) || epoch > cfg.epochs) throw ParameterError("lr_schedule: epoch outside [0, epochs]");
  if (epoch < cfg.warmup_epochs) {
    return cfg.lr_start + (cfg.lr_peak - cfg.lr_start) * epoch / cfg.warmup_epochs;
  }
  const double progress = (epoch - cfg.warmup_epochs) / (cfg.epochs - cfg.warmup_epochs);
  return cfg.lr_peak * std::pow(cfg.lr_end / cfg.lr_peak, progress);
}

TrainingExample make_example(const Sequence& seq, const TripletIndices& idx, Rng& rng, const Config& cfg) {
  const auto& m = cfg.model;
  const auto& t = cfg.train;
  const Image& search_frame = seq.frames.at(idx.search);
  TrainingExample ex;

  const BBox<double>& z_gt = seq.gt.at(idx.template_frame);
  const auto z_win = CropWindow::centered(z_gt.cx, z_gt.cy, context_side(z_gt, m.template_context));
  ex.template_patch = crop_region(seq.frames.at(idx.template_frame), z_gt.cx, z_gt.cy, z_win.side, m.template_size);
  ex.mask = template_mask(m, z_win.to_crop_pixels(z_gt, m.template_size));

  const Image& pseudo_frame = seq.frames.at(idx.pseudo);
  const auto y_box = jitter(seq.gt.at(idx.pseudo), rng, {t.jitter_shift, t.jitter_scale_min, t.jitter_scale_max, m.template_context},
                            pseudo_frame.width, pseudo_frame.height);
  ex.pseudo_patch = crop_region(pseudo_frame, y_box.cx, y_box.cy, context_side(y_box, m.template_context), m.template_size);

  const BBox<double>& x_gt = seq.gt.at(idx.search);
  const auto x_box = jitter(x_gt, rng, {t.search_jitter_shift, t.jitter_scale_min, t.jitter_scale_max, m.search_context},
                            search_frame.width, search_frame.height);
  const auto x_win = CropWindow::centered(x_box.cx, x_box.cy, context_side(x_box, m.search_context));
  ex.search_patch = crop_region(search_frame, x_box.cx, x_box.cy, x_win.side, m.search_size);
  ex.gt = x_win.to_normalized(x_gt);
  return ex;
}

TotalLoss<double> batch_loss(const std::vector<TrainingExample>& batch, const ModelParams<double>& params,
                             const Config& cfg, Rng& rng) {
  if (batch.empty()) throw ParameterError("batch_loss: empty batch");
  const auto& lc = cfg.loss;
  const double lambda = cfg.train.no_attention_loss ? 0.0 : lc.lambda;
  const int grid = cfg.model.search_grid();
  const Mat<double> coords = normalized_part_coords<double>(grid, grid);

  std::optional<Tensor<double>> total;
  LossReport sum{0, 0, 0, 0, lambda, lc.w_l1, lc.w_giou};
  for (const auto& ex : batch) {
    const auto f_z = extract_features(ex.template_patch, params, PartSource::Template);
    const auto f_y = extract_features(ex.pseudo_patch, params, PartSource::Pseudo);
    const auto f_x = extract_features(ex.search_patch, params, PartSource::Search);
    const auto fw = forward_parts(f_z, f_y, f_x, ex.mask, params, !cfg.train.no_updater);
    const auto box = estimate_bbox(fw.locations, ex.mask, lc.sigma, lc.bbox_scale_formula);
    const auto terms = bbox_loss_terms(box, box_tensor(ex.gt));
    const auto a = hard_attention(fw.encoded.h_z, fw.encoded.h_x, lc.tau, rng, lc.gumbel_hard);
    const auto att = attention_loss(a, coords, fw.locations, ex.mask, lc.atten_loss_unmasked);
    const auto tl = total_loss(terms, att, lambda, lc.w_l1, lc.w_giou);
    total = total ? add(*total, tl.total) : tl.total;
    sum.l1 += tl.report.l1;
    sum.giou_loss += tl.report.giou_loss;
    sum.attention += tl.report.attention;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  sum.l1 *= inv;
  sum.giou_loss *= inv;
  sum.attention *= inv;
  auto mean_total = scale(*total, inv);
  sum.total = mean_total.item();
  return {mean_total, sum};
}

Trainer::Trainer(Config cfg, TrainState state) : cfg_(std::move(cfg)), state_(std::move(state)) {
  for (const auto& p : state_.params.named()) {
    velocity_.push_back(Mat<double>::Zero(p.tensor.rows(), p.tensor.cols()));
    second_moment_.push_back(Mat<double>::Zero(p.tensor.rows(), p.tensor.cols()));
  }
}

void Trainer::apply_freeze_schedule(double epoch) {
  const auto& t = cfg_.train;
  const std::size_t n = state_.params.backbone.size();
  const bool all_frozen = epoch < t.freeze_backbone_fraction * t.epochs;
  const std::size_t first_trainable = n - std::min<std::size_t>(n, static_cast<std::size_t>(t.trainable_backbone_blocks));
  for (std::size_t i = 0; i < n; ++i) {
    const bool trainable = !all_frozen && i >= first_trainable;
    for (auto p : state_.params.backbone_block(i)) p.set_requires_grad(trainable);
  }
}

StepResult Trainer::train_step(const std::vector<TrainingExample>& batch, double lr) {
  StepResult result;
  result.lr = lr;
  auto named = state_.params.named();
  for (auto& p : named) p.tensor.zero_grad();

  try {
    auto loss = batch_loss(batch, state_.params, cfg_, state_.rng);
    result.report = loss.report;
    if (!std::isfinite(loss.report.total)) throw NumericError("non-finite loss");
    loss.total.backward();
    for (const auto& p : named) {
      if (p.tensor.has_grad() && !p.tensor.grad().allFinite()) throw NumericError("non-finite gradient in " + p.name);
    }
  } catch (const NumericError& e) {
    for (auto& p : named) p.tensor.zero_grad();
    result.aborted = true;
    result.error = e.what();
    ++state_.step;
    return result;
  }

  double clip = 1.0;
  if (cfg_.train.grad_clip > 0) {
    double sq = 0;
    for (const auto& p : named)
      if (p.tensor.has_grad()) sq += p.tensor.grad().squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > cfg_.train.grad_clip) clip = cfg_.train.grad_clip / norm;
  }
  const double mu = cfg_.train.momentum;
  const bool adam = cfg_.train.optimizer == "adam";
  const double b2 = cfg_.train.adam_beta2;
  ++updates_;
  const double c1 = 1 - std::pow(mu, static_cast<double>(updates_));
  const double c2 = 1 - std::pow(b2, static_cast<double>(updates_));
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto& p = named[i].tensor;
    if (!p.has_grad()) continue;
    const Mat<double> g = clip * p.grad();
    if (adam) {
      velocity_[i] = mu * velocity_[i] + (1 - mu) * g;
      second_moment_[i] = b2 * second_moment_[i] + (1 - b2) * g.cwiseAbs2();
      p.mutable_value().array() -=
          lr * (velocity_[i].array() / c1) / ((second_moment_[i].array() / c2).sqrt() + 1e-8);
    } else {
      velocity_[i] = mu * velocity_[i] + g;
      p.mutable_value() -= lr * velocity_[i];
    }
    p.zero_grad();
  }
  state_.best_loss = std::min(state_.best_loss, result.report.total);
  ++state_.step;
  return result;
}

std::string format_metrics_line(std::uint64_t step, double epoch, const StepResult& r) {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "step=%llu epoch=%.6f lr=%.9g lambda=%.9g l1=%.9g giou=%.9g atten=%.9g total=%.9g status=%s",
                static_cast<unsigned long long>(step), epoch, r.lr, r.report.lambda, r.report.l1,
                r.report.giou_loss, r.report.attention, r.report.total, r.aborted ? "aborted" : "ok");
  return buf;
}

TrainRunResult run_training(const Config& cfg, const std::vector<Sequence>& dataset, const fs::path& out_dir,
                            const std::function<void(const StepResult&, std::uint64_t)>& on_step) {
  cfg.validate();
  if (dataset.empty()) throw DataError("run_training: empty dataset");
  fs::create_directories(out_dir);

  Rng master(cfg.train.seed);
  Rng init_rng = master.split();
  TrainState state;
  state.params = ModelParams<double>::init(cfg.model, init_rng);
  state.rng = master.split();
  Trainer trainer(cfg, std::move(state));

  std::ofstream log(out_dir / "metrics.log", std::ios::trunc);
  if (!log) throw DataError("cannot open metrics log in " + out_dir.string());

  auto save = [&](const fs::path& path) {
    const auto& s = trainer.state();
    save_checkpoint(path, Checkpoint{cfg, s.params, s.step, s.epoch, s.rng.seed(), s.rng.counter()});
  };

  TrainRunResult run;
  int consecutive_aborts = 0;
  const int steps = cfg.train.steps_per_epoch;
  for (int e = 0; e < cfg.train.epochs; ++e) {
    for (int s = 0; s < steps; ++s) {
      const double epoch = e + static_cast<double>(s) / steps;
      trainer.state().epoch = epoch;
      trainer.apply_freeze_schedule(epoch);
      std::vector<TrainingExample> batch;
      for (int b = 0; b < cfg.train.batch_size; ++b) {
        Rng& rng = trainer.state().rng;
        // Resample the rare crops whose template box covers no part center.
        for (int attempt = 0;; ++attempt) {
          const auto idx = sample_triplet(dataset, cfg.train.frame_range, rng);
          auto ex = make_example(dataset[idx.sequence], idx, rng, cfg);
          if (ex.mask.n_target > 0 || attempt >= 20) {
            if (ex.mask.n_target > 0) batch.push_back(std::move(ex));
            break;
          }
        }
      }
      if (batch.empty()) throw DataError("run_training: no usable triplets (template masks empty)");
      const auto result = trainer.train_step(batch, lr_schedule(epoch, cfg.train));
      ++run.steps;
      log << format_metrics_line(trainer.state().step, epoch, result) << "\n";
      if (on_step) on_step(result, trainer.state().step);
      if (result.aborted) {
        ++run.aborted_steps;
        if (++consecutive_aborts > 10) {
          log.flush();
          throw NumericError("training aborted: more than 10 consecutive non-finite steps (last: " + result.error + ")");
        }
      } else {
        consecutive_aborts = 0;
        run.last_report = result.report;
      }
    }
    log.flush();
    if (cfg.train.checkpoint_every > 0 && (e + 1) % cfg.train.checkpoint_every == 0 && e + 1 < cfg.train.epochs) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03d.ckpt", e + 1);
      save(out_dir / name);
    }
  }
  trainer.state().epoch = cfg.train.epochs;
  run.final_checkpoint = out_dir / "final.ckpt";
  save(run.final_checkpoint);
  return run;
}

}  // namespace parttrack
