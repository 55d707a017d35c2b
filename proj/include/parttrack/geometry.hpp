#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "parttrack/image.hpp"
#include "parttrack/numerics/tensor.hpp"

namespace parttrack {

enum class BoxFrame { ImagePixels, SearchNormalized };

/// Axis-aligned box stored by center and extent.
template <typename S = double>
struct BBox {
  S cx = 0, cy = 0, w = 0, h = 0;
  BoxFrame frame = BoxFrame::ImagePixels;

  S left() const { return cx - w / 2; }
  S top() const { return cy - h / 2; }
  S right() const { return cx + w / 2; }
  S bottom() const { return cy + h / 2; }
  S area() const { return w * h; }

  static BBox from_top_left(S x, S y, S w, S h, BoxFrame frame = BoxFrame::ImagePixels) {
    return BBox{x + w / 2, y + h / 2, w, h, frame};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

template <typename S = double>
struct PartGrid {
  int grid_h = 0;
  int grid_w = 0;
  S stride = 0;
  std::vector<Eigen::Matrix<S, 2, 1>> centers;  // row-major, image pixels

  std::size_t size() const { return centers.size(); }
};

enum class MaskWarning { None, DegenerateBox, EmptyIntersection };

/// Binary indicator over template grid cells; 1 marks a target part.
struct TargetMask {
  std::vector<std::uint8_t> values;
  int n_target = 0;
  MaskWarning warning = MaskWarning::None;

  std::size_t size() const { return values.size(); }

  /// The mask as an N x 1 column.
  template <typename S>
  Mat<S> column() const {
    Mat<S> m(static_cast<Index>(values.size()), 1);
    for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Index>(i), 0) = values[i] ? S(1) : S(0);
    return m;
  }

  static TargetMask all_ones(std::size_t n) {
    return TargetMask{std::vector<std::uint8_t>(n, 1), static_cast<int>(n), MaskWarning::None};
  }
};

/// How the box extent is derived from the spread of part locations.
///   StdDev:  s = sigma * sqrt(mean of squared deviations)
///   Literal: s = (sigma / N_t) * sqrt(sum of squared deviations)
enum class BoxScaleFormula { StdDev, Literal };

template <typename S>
PartGrid<S> part_centers(int grid_h, int grid_w, S stride);

/// Marks parts whose centers lie inside gt (boundary inclusive). A zero-area
/// box or a box that covers no center yields an all-zero mask with a warning.
template <typename S>
TargetMask target_mask(const PartGrid<S>& grid, const BBox<S>& gt);

/// Normalized (x, y) centers of a grid_h x grid_w search grid as an N x 2
/// matrix, row-major over cells: ((col + 0.5) / grid_w, (row + 0.5) / grid_h).
template <typename S>
Mat<S> normalized_part_coords(int grid_h, int grid_w);

/// Box (1 x 4: cx, cy, w, h) from masked part locations (N x 2: x, y).
/// Differentiable w.r.t. locations. Throws EstimationError when the mask is
/// empty.
template <typename S>
Tensor<S> estimate_bbox(const Tensor<S>& locations, const TargetMask& mask, S sigma,
                        BoxScaleFormula formula = BoxScaleFormula::StdDev);

/// Plain-value overload; returns a normalized-frame box.
template <typename S>
BBox<S> estimate_bbox(const Mat<S>& locations, const TargetMask& mask, S sigma,
                      BoxScaleFormula formula = BoxScaleFormula::StdDev);

template <typename S>
S iou(const BBox<S>& a, const BBox<S>& b);

template <typename S>
S giou(const BBox<S>& a, const BBox<S>& b);

/// Differentiable GIoU of two 1 x 4 (cx, cy, w, h) tensors.
template <typename S>
Tensor<S> giou(const Tensor<S>& a, const Tensor<S>& b);

template <typename S>
Tensor<S> box_tensor(const BBox<S>& box) {
  Mat<S> m(1, 4);
  m << box.cx, box.cy, box.w, box.h;
  return Tensor<S>(std::move(m));
}

template <typename S>
BBox<S> box_from_row(const Mat<S>& row, BoxFrame frame) {
  return BBox<S>{row(0, 0), row(0, 1), row(0, 2), row(0, 3), frame};
}

/// Square window of a frame, side `side`, top-left at (x0, y0) in pixels.
struct CropWindow {
  double x0 = 0, y0 = 0, side = 1;

  static CropWindow centered(double cx, double cy, double side) {
    return CropWindow{cx - side / 2, cy - side / 2, side};
  }

  /// Image-pixel box -> window-normalized [0,1] box.
  BBox<double> to_normalized(const BBox<double>& b) const {
    return BBox<double>{(b.cx - x0) / side, (b.cy - y0) / side, b.w / side, b.h / side,
                        BoxFrame::SearchNormalized};
  }
  /// Window-normalized box -> image pixels.
  BBox<double> to_pixels(const BBox<double>& b) const {
    return BBox<double>{x0 + b.cx * side, y0 + b.cy * side, b.w * side, b.h * side, BoxFrame::ImagePixels};
  }
  /// Image-pixel box -> pixels of an out_size x out_size crop of this window.
  BBox<double> to_crop_pixels(const BBox<double>& b, int out_size) const {
    const double k = out_size / side;
    return BBox<double>{(b.cx - x0) * k, (b.cy - y0) * k, b.w * k, b.h * k, BoxFrame::ImagePixels};
  }
};

/// Side of the square context window around a box: factor * sqrt(w * h).
double context_side(const BBox<double>& box, double factor);

/// Square crop of side context_size centered at (cx, cy), bilinearly resampled
/// to out_size x out_size. Samples that fall outside the frame read the
/// per-channel frame mean. Values are scaled to [0, 1].
Patch crop_region(const Image& frame, double cx, double cy, double context_size, int out_size);

}  // namespace parttrack
