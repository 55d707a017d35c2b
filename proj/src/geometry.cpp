#include "parttrack/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "parttrack/numerics/ops.hpp"

namespace parttrack {

template <typename S>
PartGrid<S> part_centers(int grid_h, int grid_w, S stride) {
  if (grid_h < 1 || grid_w < 1 || !(stride >= S(1))) {
    throw ParameterError("part_centers: grid extents and stride must be >= 1");
  }
  PartGrid<S> grid{grid_h, grid_w, stride, {}};
  grid.centers.reserve(static_cast<std::size_t>(grid_h) * grid_w);
  for (int r = 0; r < grid_h; ++r)
    for (int c = 0; c < grid_w; ++c)
      grid.centers.emplace_back((c + S(0.5)) * stride, (r + S(0.5)) * stride);
  return grid;
}

template <typename S>
TargetMask target_mask(const PartGrid<S>& grid, const BBox<S>& gt) {
  if (gt.frame != BoxFrame::ImagePixels) throw ParameterError("target_mask: gt must be in image pixels");
  TargetMask mask;
  mask.values.assign(grid.size(), 0);
  if (!(gt.w > 0) || !(gt.h > 0)) {
    mask.warning = MaskWarning::DegenerateBox;
    return mask;
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& c = grid.centers[i];
    if (c.x() >= gt.left() && c.x() <= gt.right() && c.y() >= gt.top() && c.y() <= gt.bottom()) {
      mask.values[i] = 1;
      ++mask.n_target;
    }
  }
  if (mask.n_target == 0) mask.warning = MaskWarning::EmptyIntersection;
  return mask;
}

template <typename S>
Mat<S> normalized_part_coords(int grid_h, int grid_w) {
  Mat<S> p(static_cast<Index>(grid_h) * grid_w, 2);
  for (int r = 0; r < grid_h; ++r)
    for (int c = 0; c < grid_w; ++c) {
      p(r * grid_w + c, 0) = (c + S(0.5)) / grid_w;
      p(r * grid_w + c, 1) = (r + S(0.5)) / grid_h;
    }
  return p;
}

template <typename S>
Tensor<S> estimate_bbox(const Tensor<S>& locations, const TargetMask& mask, S sigma,
                        BoxScaleFormula formula) {
  if (locations.cols() != 2 || locations.rows() != static_cast<Index>(mask.size())) {
    throw ShapeError("estimate_bbox: locations must be N x 2 with N equal to the mask length");
  }
  if (mask.n_target <= 0) throw EstimationError("estimate_bbox: no target parts in mask");
  const S n_t = static_cast<S>(mask.n_target);
  const Tensor<S> mask_row(mask.column<S>().transpose());
  const Tensor<S> weights(mask.column<S>().transpose() / n_t);

  auto center = matmul(weights, locations);
  auto dev = sub_row(locations, center);
  auto sq = mul(dev, dev);
  Tensor<S> extent;
  if (formula == BoxScaleFormula::StdDev) {
    extent = scale(sqrt(matmul(weights, sq)), sigma);
  } else {
    extent = scale(sqrt(matmul(mask_row, sq)), sigma / n_t);
  }
  return concat_cols<S>({center, extent});
}

template <typename S>
BBox<S> estimate_bbox(const Mat<S>& locations, const TargetMask& mask, S sigma, BoxScaleFormula formula) {
  const auto box = estimate_bbox(Tensor<S>(locations), mask, sigma, formula);
  return box_from_row<S>(box.value(), BoxFrame::SearchNormalized);
}

namespace {

// Areas from the same corner arithmetic as the intersection, so that a box
// overlaps itself exactly.
template <typename S>
S corner_area(const BBox<S>& b) {
  return (b.right() - b.left()) * (b.bottom() - b.top());
}

template <typename S>
struct Overlap {
  S inter, uni;
};

template <typename S>
Overlap<S> overlap_of(const BBox<S>& a, const BBox<S>& b) {
  const S iw = std::max(S(0), std::min(a.right(), b.right()) - std::max(a.left(), b.left()));
  const S ih = std::max(S(0), std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top()));
  const S inter = iw * ih;
  return {inter, corner_area(a) + corner_area(b) - inter};
}

}  // namespace

template <typename S>
S iou(const BBox<S>& a, const BBox<S>& b) {
  const auto [inter, uni] = overlap_of(a, b);
  if (!(uni > 0)) return S(0);
  return inter / uni;
}

template <typename S>
S giou(const BBox<S>& a, const BBox<S>& b) {
  const auto [inter, uni] = overlap_of(a, b);
  const S overlap = uni > 0 ? inter / uni : S(0);
  const S hull = (std::max(a.right(), b.right()) - std::min(a.left(), b.left())) *
                 (std::max(a.bottom(), b.bottom()) - std::min(a.top(), b.top()));
  if (!(hull > 0)) return overlap;
  // Rounding can leave the hull a hair below the union when the two coincide.
  return overlap - std::max(S(0), hull - uni) / hull;
}

template <typename S>
Tensor<S> giou(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rows() != 1 || a.cols() != 4 || b.rows() != 1 || b.cols() != 4) {
    throw ShapeError("giou: boxes must be 1x4 (cx, cy, w, h)");
  }
  auto corners = [](const Tensor<S>& box) {
    auto c = slice_cols(box, 0, 2);
    auto half = scale(slice_cols(box, 2, 2), S(0.5));
    return std::pair{sub(c, half), add(c, half)};  // (x1, y1), (x2, y2)
  };
  auto [a_lo, a_hi] = corners(a);
  auto [b_lo, b_hi] = corners(b);
  const Tensor<S> zero = Tensor<S>::zeros(1, 2);
  const Tensor<S> tiny = Tensor<S>::scalar(std::numeric_limits<S>::min() * S(1e6));

  auto product = [](const Tensor<S>& wh) { return mul(slice_cols(wh, 0, 1), slice_cols(wh, 1, 1)); };
  auto inter = product(maximum(sub(minimum(a_hi, b_hi), maximum(a_lo, b_lo)), zero));
  auto area_a = product(slice_cols(a, 2, 2));
  auto area_b = product(slice_cols(b, 2, 2));
  auto uni = sub(add(area_a, area_b), inter);
  auto hull = product(sub(maximum(a_hi, b_hi), minimum(a_lo, b_lo)));
  auto overlap = div(inter, maximum(uni, tiny));
  return sub(overlap, div(sub(hull, uni), maximum(hull, tiny)));
}

double context_side(const BBox<double>& box, double factor) {
  return factor * std::sqrt(std::max(box.w, 0.0) * std::max(box.h, 0.0));
}

Patch crop_region(const Image& frame, double cx, double cy, double context_size, int out_size) {
  if (frame.empty()) throw ParameterError("crop_region: empty frame");
  if (out_size < 1) throw ParameterError("crop_region: out_size must be >= 1");
  if (!(context_size > 0) || !std::isfinite(cx) || !std::isfinite(cy)) {
    throw ParameterError("crop_region: context size must be positive and center finite");
  }

  std::array<double, 3> channel_mean{0, 0, 0};
  for (std::size_t i = 0; i < frame.rgb.size(); ++i) channel_mean[i % 3] += frame.rgb[i];
  const double n_pix = static_cast<double>(frame.width) * frame.height;
  for (auto& m : channel_mean) m /= n_pix * 255.0;

  auto sample = [&](int x, int y, int c) {
    if (x < 0 || y < 0 || x >= frame.width || y >= frame.height) return channel_mean[c];
    return frame.at(x, y, c) / 255.0;
  };

  Patch patch;
  patch.size = out_size;
  patch.pixels.resize(static_cast<Index>(out_size) * out_size, 3);
  const double step = context_size / out_size;
  const double x0 = cx - context_size / 2;
  const double y0 = cy - context_size / 2;
  for (int i = 0; i < out_size; ++i) {
    const double sy = y0 + (i + 0.5) * step - 0.5;
    const int iy = static_cast<int>(std::floor(sy));
    const double fy = sy - iy;
    for (int j = 0; j < out_size; ++j) {
      const double sx = x0 + (j + 0.5) * step - 0.5;
      const int ix = static_cast<int>(std::floor(sx));
      const double fx = sx - ix;
      for (int c = 0; c < 3; ++c) {
        double v = (1 - fy) * (1 - fx) * sample(ix, iy, c);
        if (fx > 0) v += (1 - fy) * fx * sample(ix + 1, iy, c);
        if (fy > 0) v += fy * (1 - fx) * sample(ix, iy + 1, c);
        if (fx > 0 && fy > 0) v += fy * fx * sample(ix + 1, iy + 1, c);
        patch.pixels(static_cast<Index>(i) * out_size + j, c) = v;
      }
    }
  }
  return patch;
}

#define PARTTRACK_INSTANTIATE_GEOMETRY(S)                                                           \
  template PartGrid<S> part_centers(int, int, S);                                                   \
  template TargetMask target_mask(const PartGrid<S>&, const BBox<S>&);                              \
  template Mat<S> normalized_part_coords<S>(int, int);                                              \
  template Tensor<S> estimate_bbox(const Tensor<S>&, const TargetMask&, S, BoxScaleFormula);        \
  template BBox<S> estimate_bbox(const Mat<S>&, const TargetMask&, S, BoxScaleFormula);             \
  template S iou(const BBox<S>&, const BBox<S>&);                                                   \
  template S giou(const BBox<S>&, const BBox<S>&);                                                  \
  template Tensor<S> giou(const Tensor<S>&, const Tensor<S>&);

PARTTRACK_INSTANTIATE_GEOMETRY(float)
PARTTRACK_INSTANTIATE_GEOMETRY(double)

}  // namespace parttrack
