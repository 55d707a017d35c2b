#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "parttrack/config.hpp"
#include "parttrack/dataio.hpp"
#include "parttrack/model.hpp"

namespace parttrack {

struct TrackerOptions {
  double sigma = 3.0;
  BoxScaleFormula formula = BoxScaleFormula::StdDev;
  bool use_updater = true;
  double min_extent = 1e-6;  // smallest normalized w or h accepted from the estimator

  static TrackerOptions from(const Config& cfg) {
    return {cfg.loss.sigma, cfg.loss.bbox_scale_formula, !cfg.train.no_updater, 1e-6};
  }
};

struct TrackerState {
  std::shared_ptr<const ModelParams<double>> params;
  TrackerOptions options;
  PartSet<double> template_parts;  // fixed after init
  TargetMask template_mask;
  Patch pseudo_patch;
  BBox<double> last_box;  // image pixels
  int frame = 0;          // index of the frame last_box belongs to
  bool coasted = false;   // last_box was carried over because estimation failed
  Mat<double> last_parts;  // predicted centers of the target parts, image pixels
};

/// Featurizes the template crop of the first frame. Throws TrackingError for
/// a degenerate or out-of-frame box and when no template part center falls
/// inside the box.
TrackerState init(const Image& frame, const BBox<double>& gt, std::shared_ptr<const ModelParams<double>> params,
                  const TrackerOptions& options);

struct TrackStep {
  TrackerState state;
  BBox<double> box;
};

/// One frame: search crop around last_box, one updater and encoder pass, box
/// estimate mapped back to the frame and clamped to it. When the estimate is
/// unusable the previous box is returned and the state is flagged coasted.
TrackStep track(const TrackerState& state, const Image& frame);

struct FrameResult {
  BBox<double> box;
  Mat<double> parts;  // empty on the init frame
  bool coasted = false;
};

/// Runs a whole sequence; the first result is the ground-truth init box.
std::vector<FrameResult> track_sequence(const Sequence& seq, std::shared_ptr<const ModelParams<double>> params,
                                        const TrackerOptions& options);

std::vector<BBox<double>> boxes_of(const std::vector<FrameResult>& results);

/// Box outline and 3x3 part dots drawn onto a copy of the frame.
Image draw_overlay(const Image& frame, const BBox<double>& box, const Mat<double>& parts);

}  // namespace parttrack
