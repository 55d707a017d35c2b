#pragma once

#include "parttrack/config.hpp"
#include "parttrack/geometry.hpp"
#include "parttrack/numerics/ops.hpp"

namespace parttrack {

/// Per-step loss summary. total == l1 * w_l1 + giou_loss * w_giou + lambda * attention.
struct LossReport {
  double l1 = 0;
  double giou_loss = 0;
  double attention = 0;
  double total = 0;
  double lambda = 0;
  double w_l1 = 1;
  double w_giou = 1;
};

template <typename S>
struct BoxLossTerms {
  Tensor<S> l1;         // |dcx| + |dcy| + |dw| + |dh|
  Tensor<S> giou_loss;  // 1 - giou
};

/// Unweighted L1 and GIoU terms between two 1 x 4 (cx, cy, w, h) boxes.
template <typename S>
BoxLossTerms<S> bbox_loss_terms(const Tensor<S>& pred, const Tensor<S>& gt);

/// w_l1 * L1 + w_giou * (1 - GIoU).
template <typename S>
Tensor<S> bbox_loss(const Tensor<S>& pred, const Tensor<S>& gt, S w_l1, S w_giou);

/// Plain-value overload on normalized-frame boxes.
double bbox_loss(const BBox<double>& pred, const BBox<double>& gt, double w_l1, double w_giou);

/// sum_i mask(i) * || a_i P - l_i ||_1 with a: N_z x N_x one-hot rows, coords:
/// N_x x 2 search-part coordinates, locations: N_z x 2. With unmasked = true
/// every row counts.
template <typename S>
Tensor<S> attention_loss(const Tensor<S>& a, const Mat<S>& coords, const Tensor<S>& locations,
                         const TargetMask& mask, bool unmasked = false);

template <typename S>
struct TotalLoss {
  Tensor<S> total;
  LossReport report;
};

/// L_bbox + lambda * L_atten. Throws ParameterError for negative lambda.
template <typename S>
TotalLoss<S> total_loss(const BoxLossTerms<S>& box, const Tensor<S>& attention, S lambda, S w_l1 = 1,
                        S w_giou = 1);

/// Report-only combination of plain numbers.
LossReport total_loss(double bbox_l1, double bbox_giou, double attention, double lambda, double w_l1 = 1,
                      double w_giou = 1);

}  // namespace parttrack
