#pragma once

#include <optional>
#include <string>
#include <vector>

#include "parttrack/config.hpp"
#include "parttrack/geometry.hpp"
#include "parttrack/image.hpp"
#include "parttrack/numerics/ops.hpp"
#include "parttrack/numerics/rng.hpp"

namespace parttrack {

enum class PartSource { Template, Pseudo, Search };

/// Grid of part feature vectors, N x C with N = grid_h * grid_w (row-major).
template <typename S>
struct PartSet {
  Tensor<S> features;
  int grid_h = 0;
  int grid_w = 0;
  PartSource source = PartSource::Search;

  Index size() const { return features.rows(); }
  Index channels() const { return features.cols(); }
};

template <typename S>
struct Linear {
  Tensor<S> weight;               // in x out
  std::optional<Tensor<S>> bias;  // 1 x out
};

template <typename S>
Tensor<S> apply(const Linear<S>& layer, const Tensor<S>& x) {
  auto y = matmul(x, layer.weight);
  return layer.bias ? add_row(y, *layer.bias) : y;
}

template <typename S>
struct LayerNorm {
  Tensor<S> gamma;
  Tensor<S> beta;
};

template <typename S>
struct MultiHeadAttention {
  Linear<S> query, key, value, out;
  int heads = 1;
};

template <typename S>
struct EncoderLayer {
  MultiHeadAttention<S> attention;
  LayerNorm<S> norm1;
  Linear<S> ff1, ff2;
  LayerNorm<S> norm2;
};

/// 3x3 stride-2 convolution (as im2col + matmul), relu, layer norm.
template <typename S>
struct ConvBlock {
  Linear<S> conv;  // 9*in x out
  LayerNorm<S> norm;
  int in_channels = 0;
  int out_channels = 0;
};

template <typename S>
struct NamedTensor {
  std::string name;
  Tensor<S> tensor;
};

/// All learnable state. Tensor handles share storage, so copies of a
/// ModelParams alias the same weights; use clone() for an independent copy.
template <typename S>
struct ModelParams {
  ModelConfig config;
  std::vector<ConvBlock<S>> backbone;
  Tensor<S> template_pos;  // learnable N_z x C
  MultiHeadAttention<S> updater;
  std::vector<EncoderLayer<S>> encoder;
  Linear<S> head_hidden;
  Linear<S> head_out;

  static ModelParams init(const ModelConfig& config, Rng& rng);

  /// Every parameter with a stable dotted name, in a fixed order.
  std::vector<NamedTensor<S>> named() const;
  /// Parameters of one backbone block.
  std::vector<Tensor<S>> backbone_block(std::size_t i) const;

  ModelParams clone() const;
  template <typename T>
  ModelParams<T> cast() const;
};

/// Channel widths of the backbone blocks for a given config.
std::vector<int> backbone_widths(const ModelConfig& config);

template <typename S>
PartSet<S> extract_features(const Patch& patch, const ModelParams<S>& params, PartSource source);

/// 2-D sine/cosine table, N x C. The first C/2 columns encode the row index,
/// the last C/2 the column index; within each half, columns (2k, 2k+1) are
/// (sin, cos) of p / 10000^(2k / (C/2)), where p is the row (column) index
/// scaled to [0, 2*pi) by the grid height (width).
template <typename S>
Mat<S> sinusoidal_pos(int grid_h, int grid_w, int channels);

/// f_z + Pos_z + MHA(Q = f_z, K = V = f_y). With use_updater = false the
/// attention term is dropped.
template <typename S>
PartSet<S> update_parts(const PartSet<S>& f_z, const PartSet<S>& f_y, const ModelParams<S>& params,
                        bool use_updater = true);

template <typename S>
struct Encoded {
  Tensor<S> h_x;  // N_x x C
  Tensor<S> h_z;  // N_z x C
};

/// Masks background template rows, concatenates [search + pos; template] and
/// runs the encoder stack.
template <typename S>
Encoded<S> encode(const PartSet<S>& search, const PartSet<S>& dyn_template, const TargetMask& mask,
                  const ModelParams<S>& params, bool add_search_pos = true);

/// Two-layer MLP with sigmoid output: N_z x C -> N_z x 2 in [0, 1]^2.
template <typename S>
Tensor<S> localize(const Tensor<S>& h_z, const ModelParams<S>& params);

/// Head selected by the config. The soft_argmax head adds the MLP output,
/// recentred and bounded to one grid cell, to the softmax-weighted mean of the
/// search part coordinates under the h_z h_x^T / sqrt(C) scores.
template <typename S>
Tensor<S> localize(const Tensor<S>& h_z, const Tensor<S>& h_x, int grid_h, int grid_w, const ModelParams<S>& params);

/// Row-wise Gumbel-softmax of the raw dot products h_z h_x^T.
template <typename S>
Tensor<S> hard_attention(const Tensor<S>& h_z, const Tensor<S>& h_x, S tau, Rng& rng, bool hard = true);

template <typename S>
struct ForwardPass {
  PartSet<S> dyn_template;
  Encoded<S> encoded;
  Tensor<S> locations;  // N_z x 2, normalized search coordinates
};

/// Updater, encoder and localization head from precomputed part features.
template <typename S>
ForwardPass<S> forward_parts(const PartSet<S>& f_z, const PartSet<S>& f_y, const PartSet<S>& f_x,
                             const TargetMask& mask, const ModelParams<S>& params, bool use_updater = true);

/// Template mask for a template crop whose ground-truth box (in crop pixels)
/// is given.
TargetMask template_mask(const ModelConfig& config, const BBox<double>& box_in_crop);

}  // namespace parttrack
