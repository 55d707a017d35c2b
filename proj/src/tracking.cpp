#include "parttrack/tracking.hpp"

#include <algorithm>
#include <cmath>

namespace parttrack {
namespace {

bool finite_box(const BBox<double>& b) {
  return std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.w) && std::isfinite(b.h);
}

Patch template_crop(const Image& frame, const BBox<double>& box, const ModelConfig& m) {
  return crop_region(frame, box.cx, box.cy, context_side(box, m.template_context), m.template_size);
}

std::optional<BBox<double>> clamp_to_frame(const BBox<double>& b, const Image& frame) {
  const double x1 = std::max(0.0, b.left()), x2 = std::min<double>(frame.width, b.right());
  const double y1 = std::max(0.0, b.top()), y2 = std::min<double>(frame.height, b.bottom());
  if (!(x2 > x1) || !(y2 > y1)) return std::nullopt;
  return BBox<double>::from_top_left(x1, y1, x2 - x1, y2 - y1);
}

}  // namespace

TrackerState init(const Image& frame, const BBox<double>& gt, std::shared_ptr<const ModelParams<double>> params,
                  const TrackerOptions& options) {
  if (!params) throw TrackingError("init: no model parameters");
  if (frame.empty()) throw TrackingError("init: empty frame");
  if (!finite_box(gt) || !(gt.w > 0) || !(gt.h > 0)) throw TrackingError("init: degenerate ground-truth box");
  if (gt.right() <= 0 || gt.bottom() <= 0 || gt.left() >= frame.width || gt.top() >= frame.height)
    throw TrackingError("init: ground-truth box lies outside the frame");

  const auto& m = params->config;
  TrackerState s;
  s.options = options;
  const double side = context_side(gt, m.template_context);
  const auto window = CropWindow::centered(gt.cx, gt.cy, side);
  s.template_mask = template_mask(m, window.to_crop_pixels(gt, m.template_size));
  if (s.template_mask.n_target == 0) {
    throw TrackingError("init: template mask is all zero (no part center inside the ground-truth box)");
  }
  s.pseudo_patch = crop_region(frame, gt.cx, gt.cy, side, m.template_size);
  s.template_parts = extract_features(s.pseudo_patch, *params, PartSource::Template);
  s.last_box = gt;
  s.last_box.frame = BoxFrame::ImagePixels;
  s.params = std::move(params);
  return s;
}

TrackStep track(const TrackerState& state, const Image& frame) {
  if (!state.params) throw TrackingError("track: tracker not initialized");
  const auto& params = *state.params;
  const auto& m = params.config;
  const auto& prev = state.last_box;

  const auto window = CropWindow::centered(prev.cx, prev.cy, context_side(prev, m.search_context));
  const auto search = crop_region(frame, prev.cx, prev.cy, window.side, m.search_size);
  const auto f_y = extract_features(state.pseudo_patch, params, PartSource::Pseudo);
  const auto f_x = extract_features(search, params, PartSource::Search);
  const auto pass = forward_parts(state.template_parts, f_y, f_x, state.template_mask, params, state.options.use_updater);
  const Mat<double>& loc = pass.locations.value();

  std::optional<BBox<double>> out;
  try {
    const auto box_n = estimate_bbox(loc, state.template_mask, state.options.sigma, state.options.formula);
    if (finite_box(box_n) && box_n.w >= state.options.min_extent && box_n.h >= state.options.min_extent) {
      out = clamp_to_frame(window.to_pixels(box_n), frame);
    }
  } catch (const EstimationError&) {
  }

  TrackStep step{state, prev};
  step.state.frame = state.frame + 1;
  step.state.coasted = !out.has_value();
  if (out) step.box = *out;
  step.state.last_box = step.box;

  Mat<double> parts(state.template_mask.n_target, 2);
  for (Index i = 0, r = 0; i < loc.rows(); ++i) {
    if (!state.template_mask.values[static_cast<std::size_t>(i)]) continue;
    parts(r, 0) = window.x0 + loc(i, 0) * window.side;
    parts(r, 1) = window.y0 + loc(i, 1) * window.side;
    ++r;
  }
  step.state.last_parts = std::move(parts);
  step.state.pseudo_patch = template_crop(frame, step.box, m);
  return step;
}

std::vector<FrameResult> track_sequence(const Sequence& seq, std::shared_ptr<const ModelParams<double>> params,
                                        const TrackerOptions& options) {
  if (seq.size() == 0 || seq.gt.empty()) throw DataError("track_sequence: sequence '" + seq.name + "' is empty");
  std::vector<FrameResult> results;
  results.reserve(seq.size());
  auto state = init(seq.frames[0], seq.gt[0], std::move(params), options);
  results.push_back({state.last_box, {}, false});
  for (std::size_t t = 1; t < seq.size(); ++t) {
    auto step = track(state, seq.frames[t]);
    state = std::move(step.state);
    results.push_back({step.box, state.last_parts, state.coasted});
  }
  return results;
}

std::vector<BBox<double>> boxes_of(const std::vector<FrameResult>& results) {
  std::vector<BBox<double>> boxes;
  boxes.reserve(results.size());
  for (const auto& r : results) boxes.push_back(r.box);
  return boxes;
}

Image draw_overlay(const Image& frame, const BBox<double>& box, const Mat<double>& parts) {
  Image out = frame;
  auto put = [&](int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= out.width || y >= out.height) return;
    out.at(x, y, 0) = r;
    out.at(x, y, 1) = g;
    out.at(x, y, 2) = b;
  };
  if (finite_box(box)) {
    const int x1 = static_cast<int>(std::lround(box.left())), x2 = static_cast<int>(std::lround(box.right())) - 1;
    const int y1 = static_cast<int>(std::lround(box.top())), y2 = static_cast<int>(std::lround(box.bottom())) - 1;
    for (int x = x1; x <= x2; ++x) {
      put(x, y1, 0, 255, 0);
      put(x, y2, 0, 255, 0);
    }
    for (int y = y1; y <= y2; ++y) {
      put(x1, y, 0, 255, 0);
      put(x2, y, 0, 255, 0);
    }
  }
  for (Index i = 0; i < parts.rows(); ++i) {
    if (!std::isfinite(parts(i, 0)) || !std::isfinite(parts(i, 1))) continue;
    const int cx = static_cast<int>(std::floor(parts(i, 0))), cy = static_cast<int>(std::floor(parts(i, 1)));
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) put(cx + dx, cy + dy, 255, 0, 0);
  }
  return out;
}

}  // namespace parttrack
