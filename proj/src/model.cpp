#include "parttrack/model.hpp"

#include <cmath>

namespace parttrack {
namespace {

template <typename S>
Tensor<S> uniform_tensor(Index rows, Index cols, double bound, Rng& rng) {
  Mat<S> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(rng.uniform(-bound, bound));
  return Tensor<S>(std::move(m), true);
}

template <typename S>
Linear<S> make_linear(int in, int out, bool bias, Rng& rng, double gain = 1.0) {
  Linear<S> l;
  l.weight = uniform_tensor<S>(in, out, gain * std::sqrt(6.0 / (in + out)), rng);
  if (bias) l.bias = Tensor<S>::zeros(1, out, true);
  return l;
}

template <typename S>
LayerNorm<S> make_norm(int width) {
  return LayerNorm<S>{Tensor<S>(Mat<S>::Ones(1, width), true), Tensor<S>::zeros(1, width, true)};
}

template <typename S>
MultiHeadAttention<S> make_attention(int c, int heads, bool value_bias, Rng& rng) {
  MultiHeadAttention<S> a;
  a.query = make_linear<S>(c, c, true, rng);
  a.key = make_linear<S>(c, c, true, rng);
  a.value = make_linear<S>(c, c, value_bias, rng);
  a.out = make_linear<S>(c, c, value_bias, rng);
  a.heads = heads;
  return a;
}

template <typename S>
Tensor<S> attend(const MultiHeadAttention<S>& a, const Tensor<S>& query_in, const Tensor<S>& kv_in,
                 const std::optional<Tensor<S>>& key_bias = std::nullopt) {
  const auto q = apply(a.query, query_in);
  const auto k = apply(a.key, kv_in);
  const auto v = apply(a.value, kv_in);
  const Index width = q.cols() / a.heads;
  std::vector<Tensor<S>> heads;
  heads.reserve(static_cast<std::size_t>(a.heads));
  for (int h = 0; h < a.heads; ++h) {
    heads.push_back(scaled_dot_product_attention(slice_cols(q, h * width, width),
                                                 slice_cols(k, h * width, width),
                                                 slice_cols(v, h * width, width), key_bias));
  }
  return apply(a.out, a.heads == 1 ? heads.front() : concat_cols(heads));
}

template <typename S>
Tensor<S> norm(const LayerNorm<S>& n, const Tensor<S>& x) {
  return layer_norm(x, n.gamma, n.beta);
}

template <typename S>
void push_linear(std::vector<NamedTensor<S>>& out, const std::string& name, const Linear<S>& l) {
  out.push_back({name + ".weight", l.weight});
  if (l.bias) out.push_back({name + ".bias", *l.bias});
}

template <typename S>
void push_norm(std::vector<NamedTensor<S>>& out, const std::string& name, const LayerNorm<S>& n) {
  out.push_back({name + ".gamma", n.gamma});
  out.push_back({name + ".beta", n.beta});
}

template <typename S>
void push_attention(std::vector<NamedTensor<S>>& out, const std::string& name, const MultiHeadAttention<S>& a) {
  push_linear(out, name + ".query", a.query);
  push_linear(out, name + ".key", a.key);
  push_linear(out, name + ".value", a.value);
  push_linear(out, name + ".out", a.out);
}

template <typename S, typename F>
void for_each_tensor(ModelParams<S>& p, F&& f) {
  auto lin = [&](Linear<S>& l) {
    f(l.weight);
    if (l.bias) f(*l.bias);
  };
  auto nrm = [&](LayerNorm<S>& n) {
    f(n.gamma);
    f(n.beta);
  };
  auto att = [&](MultiHeadAttention<S>& a) {
    lin(a.query);
    lin(a.key);
    lin(a.value);
    lin(a.out);
  };
  for (auto& b : p.backbone) {
    lin(b.conv);
    nrm(b.norm);
  }
  f(p.template_pos);
  att(p.updater);
  for (auto& e : p.encoder) {
    att(e.attention);
    nrm(e.norm1);
    lin(e.ff1);
    lin(e.ff2);
    nrm(e.norm2);
  }
  lin(p.head_hidden);
  lin(p.head_out);
}

}  // namespace

std::vector<int> backbone_widths(const ModelConfig& config) {
  std::vector<int> widths;
  const int n = config.backbone_blocks;
  const int floor_width = std::min(config.channels, 16);
  for (int b = 0; b < n; ++b) widths.push_back(std::max(floor_width, config.channels >> (n - 1 - b)));
  return widths;
}

template <typename S>
ModelParams<S> ModelParams<S>::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams p;
  p.config = config;
  const int c = config.channels;
  int in = 3;
  for (int width : backbone_widths(config)) {
    ConvBlock<S> block;
    block.conv.weight = uniform_tensor<S>(9 * in, width, std::sqrt(6.0 / (9 * in)), rng);
    block.conv.bias = Tensor<S>::zeros(1, width, true);
    block.norm = make_norm<S>(width);
    block.in_channels = in;
    block.out_channels = width;
    p.backbone.push_back(std::move(block));
    in = width;
  }
  const int n_z = config.template_grid() * config.template_grid();
  p.template_pos = uniform_tensor<S>(n_z, c, 0.1, rng);
  // Bias-free value/output projections keep a zero pseudo template from
  // moving the template parts at all.
  p.updater = make_attention<S>(c, config.heads, false, rng);
  for (int l = 0; l < config.layers; ++l) {
    EncoderLayer<S> e;
    e.attention = make_attention<S>(c, config.heads, true, rng);
    e.norm1 = make_norm<S>(c);
    e.ff1 = make_linear<S>(c, config.feed_forward_dim(), true, rng);
    e.ff2 = make_linear<S>(config.feed_forward_dim(), c, true, rng);
    e.norm2 = make_norm<S>(c);
    p.encoder.push_back(std::move(e));
  }
  p.head_hidden = make_linear<S>(c, c, true, rng);
  p.head_out = make_linear<S>(c, 2, true, rng, 0.1);
  return p;
}

template <typename S>
std::vector<NamedTensor<S>> ModelParams<S>::named() const {
  std::vector<NamedTensor<S>> out;
  for (std::size_t i = 0; i < backbone.size(); ++i) {
    const std::string base = "backbone." + std::to_string(i);
    push_linear(out, base + ".conv", backbone[i].conv);
    push_norm(out, base + ".norm", backbone[i].norm);
  }
  out.push_back({"template_pos", template_pos});
  push_attention(out, "updater", updater);
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    const std::string base = "encoder." + std::to_string(i);
    push_attention(out, base + ".attention", encoder[i].attention);
    push_norm(out, base + ".norm1", encoder[i].norm1);
    push_linear(out, base + ".ff1", encoder[i].ff1);
    push_linear(out, base + ".ff2", encoder[i].ff2);
    push_norm(out, base + ".norm2", encoder[i].norm2);
  }
  push_linear(out, "head.hidden", head_hidden);
  push_linear(out, "head.out", head_out);
  return out;
}

template <typename S>
std::vector<Tensor<S>> ModelParams<S>::backbone_block(std::size_t i) const {
  const auto& b = backbone.at(i);
  return {b.conv.weight, *b.conv.bias, b.norm.gamma, b.norm.beta};
}

template <typename S>
ModelParams<S> ModelParams<S>::clone() const {
  ModelParams copy = *this;
  for_each_tensor(copy, [](Tensor<S>& t) { t = Tensor<S>(t.value(), t.requires_grad()); });
  return copy;
}

template <typename S>
template <typename T>
ModelParams<T> ModelParams<S>::cast() const {
  auto conv = [](const Tensor<S>& t) { return Tensor<T>(t.value().template cast<T>(), t.requires_grad()); };
  auto lin = [&](const Linear<S>& l) {
    Linear<T> o;
    o.weight = conv(l.weight);
    if (l.bias) o.bias = conv(*l.bias);
    return o;
  };
  auto nrm = [&](const LayerNorm<S>& n) { return LayerNorm<T>{conv(n.gamma), conv(n.beta)}; };
  auto att = [&](const MultiHeadAttention<S>& a) {
    MultiHeadAttention<T> o;
    o.query = lin(a.query);
    o.key = lin(a.key);
    o.value = lin(a.value);
    o.out = lin(a.out);
    o.heads = a.heads;
    return o;
  };
  ModelParams<T> p;
  p.config = config;
  for (const auto& b : backbone) p.backbone.push_back({lin(b.conv), nrm(b.norm), b.in_channels, b.out_channels});
  p.template_pos = conv(template_pos);
  p.updater = att(updater);
  for (const auto& e : encoder) p.encoder.push_back({att(e.attention), nrm(e.norm1), lin(e.ff1), lin(e.ff2), nrm(e.norm2)});
  p.head_hidden = lin(head_hidden);
  p.head_out = lin(head_out);
  return p;
}

template <typename S>
PartSet<S> extract_features(const Patch& patch, const ModelParams<S>& params, PartSource source) {
  const int stride = params.config.stride();
  if (patch.size <= 0 || patch.size % stride != 0) {
    throw ShapeError("extract_features: patch side " + std::to_string(patch.size) +
                     " is not a multiple of the stride " + std::to_string(stride));
  }
  if (patch.pixels.rows() != static_cast<Index>(patch.size) * patch.size || patch.pixels.cols() != 3) {
    throw ShapeError("extract_features: patch pixels must be (size*size) x 3");
  }
  Tensor<S> x(
      (patch.pixels.array() - params.config.input_mean).matrix().template cast<S>().eval());
  int side = patch.size;
  for (const auto& block : params.backbone) {
    auto cols = im2col(x, side, side, 3, 2, 1);
    side /= 2;
    x = norm(block.norm, relu(apply(block.conv, cols)));
  }
  return PartSet<S>{x, side, side, source};
}

template <typename S>
Mat<S> sinusoidal_pos(int grid_h, int grid_w, int channels) {
  if (channels <= 0 || channels % 4 != 0) throw ParameterError("sinusoidal_pos: channels must be divisible by 4");
  if (grid_h < 1 || grid_w < 1) throw ParameterError("sinusoidal_pos: empty grid");
  const int half = channels / 2;
  Mat<S> pos(static_cast<Index>(grid_h) * grid_w, channels);
  const double two_pi = 2 * std::acos(-1.0);
  for (int r = 0; r < grid_h; ++r)
    for (int c = 0; c < grid_w; ++c) {
      const Index row = static_cast<Index>(r) * grid_w + c;
      // Grid coordinates scaled to [0, 2*pi).
      const double y = two_pi * r / grid_h, x = two_pi * c / grid_w;
      for (int k = 0; k < half / 2; ++k) {
        const double freq = std::pow(10000.0, -2.0 * k / half);
        pos(row, 2 * k) = static_cast<S>(std::sin(y * freq));
        pos(row, 2 * k + 1) = static_cast<S>(std::cos(y * freq));
        pos(row, half + 2 * k) = static_cast<S>(std::sin(x * freq));
        pos(row, half + 2 * k + 1) = static_cast<S>(std::cos(x * freq));
      }
    }
  return pos;
}

template <typename S>
PartSet<S> update_parts(const PartSet<S>& f_z, const PartSet<S>& f_y, const ModelParams<S>& params,
                        bool use_updater) {
  if (f_z.channels() != f_y.channels()) throw ShapeError("update_parts: template and pseudo widths differ");
  if (f_z.features.rows() != params.template_pos.rows() || f_z.channels() != params.template_pos.cols()) {
    throw ShapeError("update_parts: template grid does not match the positional table");
  }
  auto updated = add(f_z.features, params.template_pos);
  if (use_updater) updated = add(updated, attend(params.updater, f_z.features, f_y.features));
  return PartSet<S>{updated, f_z.grid_h, f_z.grid_w, PartSource::Template};
}

template <typename S>
Encoded<S> encode(const PartSet<S>& search, const PartSet<S>& dyn_template, const TargetMask& mask,
                  const ModelParams<S>& params, bool add_search_pos) {
  if (search.channels() != dyn_template.channels()) throw ShapeError("encode: search and template widths differ");
  if (static_cast<Index>(mask.size()) != dyn_template.size()) throw ShapeError("encode: mask length mismatch");
  auto x = search.features;
  if (add_search_pos) {
    x = add(x, Tensor<S>(sinusoidal_pos<S>(search.grid_h, search.grid_w, static_cast<int>(search.channels()))));
  }
  auto z = mul_col(dyn_template.features, Tensor<S>(mask.column<S>()));
  auto seq = concat_rows(x, z);

  std::optional<Tensor<S>> key_bias;
  if (params.config.exclude_masked_keys) {
    Mat<S> bias = Mat<S>::Zero(1, seq.rows());
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (!mask.values[i]) bias(0, search.size() + static_cast<Index>(i)) = S(-1e9);
    key_bias = Tensor<S>(std::move(bias));
  }
  for (const auto& layer : params.encoder) {
    seq = norm(layer.norm1, add(seq, attend(layer.attention, seq, seq, key_bias)));
    seq = norm(layer.norm2, add(seq, apply(layer.ff2, relu(apply(layer.ff1, seq)))));
  }
  return Encoded<S>{slice_rows(seq, 0, search.size()), slice_rows(seq, search.size(), dyn_template.size())};
}

template <typename S>
Tensor<S> localize(const Tensor<S>& h_z, const ModelParams<S>& params) {
  return sigmoid(apply(params.head_out, relu(apply(params.head_hidden, h_z))));
}

template <typename S>
Tensor<S> hard_attention(const Tensor<S>& h_z, const Tensor<S>& h_x, S tau, Rng& rng, bool hard) {
  if (h_z.cols() != h_x.cols()) throw ShapeError("hard_attention: widths differ");
  return gumbel_softmax(matmul(h_z, transpose(h_x)), tau, hard, rng);
}

template <typename S>
Tensor<S> localize(const Tensor<S>& h_z, const Tensor<S>& h_x, int grid_h, int grid_w, const ModelParams<S>& params) {
  auto mlp = localize(h_z, params);
  if (params.config.head == "mlp") return mlp;
  const S inv_sqrt_c = S(1) / std::sqrt(static_cast<S>(h_z.cols()));
  const auto weights = softmax(scale(matmul(h_z, transpose(h_x)), inv_sqrt_c), 1);
  const auto attended = matmul(weights, Tensor<S>(normalized_part_coords<S>(grid_h, grid_w)));
  return add(attended, scale(add_scalar(mlp, S(-0.5)), S(2) / static_cast<S>(std::max(grid_h, grid_w))));
}

template <typename S>
ForwardPass<S> forward_parts(const PartSet<S>& f_z, const PartSet<S>& f_y, const PartSet<S>& f_x,
                             const TargetMask& mask, const ModelParams<S>& params, bool use_updater) {
  ForwardPass<S> out;
  out.dyn_template = update_parts(f_z, f_y, params, use_updater);
  out.encoded = encode(f_x, out.dyn_template, mask, params);
  out.locations = localize(out.encoded.h_z, out.encoded.h_x, f_x.grid_h, f_x.grid_w, params);
  return out;
}

TargetMask template_mask(const ModelConfig& config, const BBox<double>& box_in_crop) {
  const auto grid = part_centers<double>(config.template_grid(), config.template_grid(), config.stride());
  return target_mask(grid, box_in_crop);
}

#define PARTTRACK_INSTANTIATE_MODEL(S)                                                                       \
  template struct ModelParams<S>;                                                                            \
  template PartSet<S> extract_features(const Patch&, const ModelParams<S>&, PartSource);                     \
  template Mat<S> sinusoidal_pos<S>(int, int, int);                                                          \
  template PartSet<S> update_parts(const PartSet<S>&, const PartSet<S>&, const ModelParams<S>&, bool);       \
  template Encoded<S> encode(const PartSet<S>&, const PartSet<S>&, const TargetMask&, const ModelParams<S>&, \
                             bool);                                                                          \
  template Tensor<S> localize(const Tensor<S>&, const ModelParams<S>&);                                      \
  template Tensor<S> localize(const Tensor<S>&, const Tensor<S>&, int, int, const ModelParams<S>&);          \
  template Tensor<S> hard_attention(const Tensor<S>&, const Tensor<S>&, S, Rng&, bool);                      \
  template ForwardPass<S> forward_parts(const PartSet<S>&, const PartSet<S>&, const PartSet<S>&,             \
                                        const TargetMask&, const ModelParams<S>&, bool);

PARTTRACK_INSTANTIATE_MODEL(float)
PARTTRACK_INSTANTIATE_MODEL(double)

template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

}  // namespace parttrack
