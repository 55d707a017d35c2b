#include "parttrack/losses.hpp"

namespace parttrack {

template <typename S>
BoxLossTerms<S> bbox_loss_terms(const Tensor<S>& pred, const Tensor<S>& gt) {
  if (pred.rows() != 1 || pred.cols() != 4 || gt.rows() != 1 || gt.cols() != 4) {
    throw ShapeError("bbox_loss: boxes must be 1x4");
  }
  return {l1_distance(pred, gt), add_scalar(neg(giou(pred, gt)), S(1))};
}

template <typename S>
Tensor<S> bbox_loss(const Tensor<S>& pred, const Tensor<S>& gt, S w_l1, S w_giou) {
  const auto terms = bbox_loss_terms(pred, gt);
  return add(scale(terms.l1, w_l1), scale(terms.giou_loss, w_giou));
}

double bbox_loss(const BBox<double>& pred, const BBox<double>& gt, double w_l1, double w_giou) {
  return bbox_loss(box_tensor(pred), box_tensor(gt), w_l1, w_giou).item();
}

template <typename S>
Tensor<S> attention_loss(const Tensor<S>& a, const Mat<S>& coords, const Tensor<S>& locations,
                         const TargetMask& mask, bool unmasked) {
  if (a.cols() != coords.rows() || coords.cols() != 2) throw ShapeError("attention_loss: coords must be N_x x 2");
  if (a.rows() != locations.rows() || locations.cols() != 2) {
    throw ShapeError("attention_loss: locations must be N_z x 2");
  }
  if (!unmasked && static_cast<Index>(mask.size()) != a.rows()) throw ShapeError("attention_loss: mask length");
  auto diff = abs(sub(matmul(a, Tensor<S>(coords)), locations));
  if (!unmasked) diff = mul_col(diff, Tensor<S>(mask.column<S>()));
  return sum(diff);
}

template <typename S>
TotalLoss<S> total_loss(const BoxLossTerms<S>& box, const Tensor<S>& attention, S lambda, S w_l1, S w_giou) {
  if (!(lambda >= S(0))) throw ParameterError("total_loss: lambda must be >= 0");
  auto bbox = add(scale(box.l1, w_l1), scale(box.giou_loss, w_giou));
  auto total = lambda == S(0) ? bbox : add(bbox, scale(attention, lambda));
  LossReport r{static_cast<double>(box.l1.item()), static_cast<double>(box.giou_loss.item()),
               static_cast<double>(attention.item()), static_cast<double>(total.item()),
               static_cast<double>(lambda), static_cast<double>(w_l1), static_cast<double>(w_giou)};
  return {total, r};
}

LossReport total_loss(double bbox_l1, double bbox_giou, double attention, double lambda, double w_l1,
                      double w_giou) {
  if (!(lambda >= 0)) throw ParameterError("total_loss: lambda must be >= 0");
  return {bbox_l1, bbox_giou, attention, bbox_l1 * w_l1 + bbox_giou * w_giou + lambda * attention, lambda, w_l1,
          w_giou};
}

#define PARTTRACK_INSTANTIATE_LOSSES(S)                                                                  \
  template BoxLossTerms<S> bbox_loss_terms(const Tensor<S>&, const Tensor<S>&);                          \
  template Tensor<S> bbox_loss(const Tensor<S>&, const Tensor<S>&, S, S);                                \
  template Tensor<S> attention_loss(const Tensor<S>&, const Mat<S>&, const Tensor<S>&, const TargetMask&, \
                                    bool);                                                               \
  template TotalLoss<S> total_loss(const BoxLossTerms<S>&, const Tensor<S>&, S, S, S);

PARTTRACK_INSTANTIATE_LOSSES(float)
PARTTRACK_INSTANTIATE_LOSSES(double)

}  // namespace parttrack
