#include "parttrack/numerics/ops.hpp"

#include <cmath>
#include <string>

namespace parttrack {
namespace {

std::string shape_str(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }

template <typename S>
void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) +
                     " vs " + shape_str(b.rows(), b.cols()));
  }
}

template <typename S>
void require_finite(const Mat<S>& m, const char* op, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(op) + ": non-finite " + what);
}

// Wraps a freshly computed value into a graph node. The backward closure is
// kept only when some parent needs a gradient.
template <typename S>
Tensor<S> make_result(Mat<S> value, std::initializer_list<Tensor<S>> parents, const char* op,
                      std::function<void(Node<S>&)> backward) {
  require_finite(value, op, "output");
  auto node = std::make_shared<Node<S>>();
  node->value = std::move(value);
  node->op = op;
  for (const auto& p : parents) {
    if (p.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor<S>::from_node(std::move(node));
}

template <typename S>
Node<S>& parent(Node<S>& n, std::size_t i) {
  return *n.parents[i];
}

}  // namespace

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + shape_str(a.rows(), a.cols()) + " * " +
                     shape_str(b.rows(), b.cols()));
  }
  Mat<S> out = a.value() * b.value();
  return make_result<S>(std::move(out), {a, b}, "matmul", [](Node<S>& n) {
    Node<S>& pa = parent(n, 0);
    Node<S>& pb = parent(n, 1);
    if (pa.requires_grad) accumulate_grad<S>(pa, n.grad * pb.value.transpose());
    if (pb.requires_grad) accumulate_grad<S>(pb, pa.value.transpose() * n.grad);
  });
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
  Mat<S> out = a.value().transpose();
  return make_result<S>(std::move(out), {a}, "transpose", [](Node<S>& n) {
    accumulate_grad<S>(parent(n, 0), n.grad.transpose());
  });
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a, b, "add");
  Mat<S> out = a.value() + b.value();
  return make_result<S>(std::move(out), {a, b}, "add", [](Node<S>& n) {
    accumulate_grad<S>(parent(n, 0), n.grad);
    accumulate_grad<S>(parent(n, 1), n.grad);
  });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a, b, "sub");
  Mat<S> out = a.value() - b.value();
  return make_result<S>(std::move(out), {a, b}, "sub", [](Node<S>& n) {
    accumulate_grad<S>(parent(n, 0), n.grad);
    accumulate_grad<S>(parent(n, 1), (-n.grad).eval());
  });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a, b, "mul");
  Mat<S> out = a.value().cwiseProduct(b.value());
  return make_result<S>(std::move(out), {a, b}, "mul", [](Node<S>& n) {
    Node<S>& pa = parent(n, 0);
    Node<S>& pb = parent(n, 1);
    if (pa.requires_grad) accumulate_grad<S>(pa, n.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) accumulate_grad<S>(pb, n.grad.cwiseProduct(pa.value));
  });
}

template <typename S>
Tensor<S> div(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a, b, "div");
  Mat<S> out = a.value().cwiseQuotient(b.value());
  return make_result<S>(std::move(out), {a, b}, "div", [](Node<S>& n) {
    Node<S>& pa = parent(n, 0);
    Node<S>& pb = parent(n, 1);
    if (pa.requires_grad) accumulate_grad<S>(pa, n.grad.cwiseQuotient(pb.value));
    if (pb.requires_grad) {
      Mat<S> g = -n.grad.cwiseProduct(n.value).cwiseQuotient(pb.value);
      accumulate_grad<S>(pb, g);
    }
  });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S factor) {
  Mat<S> out = a.value() * factor;
  return make_result<S>(std::move(out), {a}, "scale", [factor](Node<S>& n) {
    accumulate_grad<S>(parent(n, 0), (n.grad * factor).eval());
  });
}

template <typename S>
Tensor<S> add_scalar(const Tensor<S>& a, S offset) {
  Mat<S> out = a.value().array() + offset;
  return make_result<S>(std::move(out), {a}, "add_scalar",
                        [](Node<S>& n) { accumulate_grad<S>(parent(n, 0), n.grad); });
}

template <typename S>
Tensor<S> neg(const Tensor<S>& a) {
  return scale(a, S(-1));
}

template <typename S>
Tensor<S> maximum(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a, b, "maximum");
  Mat<S> out = a.value().cwiseMax(b.value());
  return make_result<S>(std::move(out), {a, b}, "maximum", [](Node<S>& n) {
    Node<S>& pa = parent(n, 0);
    Node<S>& pb = parent(n, 1);
    // Ties route the gradient to the first argument.
    const auto pick_a = (pa.value.array() >= pb.value.array()).template cast<S>();
    if (pa.requires_grad) accumulate_grad<S>(pa, (n.grad.array() * pick_a).matrix().eval());
    if (pb.requires_grad) accumulate_grad<S>(pb, (n.grad.array() * (1 - pick_a)).matrix().eval());
  });
}

template <typename S>
Tensor<S> minimum(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a, b, "minimum");
  Mat<S> out = a.value().cwiseMin(b.value());
  return make_result<S>(std::move(out), {a, b}, "minimum", [](Node<S>& n) {
    Node<S>& pa = parent(n, 0);
    Node<S>& pb = parent(n, 1);
    const auto pick_a = (pa.value.array() <= pb.value.array()).template cast<S>();
    if (pa.requires_grad) accumulate_grad<S>(pa, (n.grad.array() * pick_a).matrix().eval());
    if (pb.requires_grad) accumulate_grad<S>(pb, (n.grad.array() * (1 - pick_a)).matrix().eval());
  });
}

template <typename S>
Tensor<S> add_row(const Tensor<S>& a, const Tensor<S>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: row must be 1x" + std::to_string(a.cols()) + ", got " +
                     shape_str(row.rows(), row.cols()));
  }
  Mat<S> out = a.value().rowwise() + row.value().row(0);
  return make_result<S>(std::move(out), {a, row}, "add_row", [](Node<S>& n) {
    accumulate_grad<S>(parent(n, 0), n.grad);
    accumulate_grad<S>(parent(n, 1), n.grad.colwise().sum().eval());
  });
}

template <typename S>
Tensor<S> sub_row(const Tensor<S>& a, const Tensor<S>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("sub_row: row must be 1x" + std::to_string(a.cols()));
  }
  Mat<S> out = a.value().rowwise() - row.value().row(0);
  return make_result<S>(std::move(out), {a, row}, "sub_row", [](Node<S>& n) {
    accumulate_grad<S>(parent(n, 0), n.grad);
    accumulate_grad<S>(parent(n, 1), (-n.grad.colwise().sum()).eval());
  });
}

template <typename S>
Tensor<S> mul_col(const Tensor<S>& a, const Tensor<S>& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw ShapeError("mul_col: column must be " + std::to_string(a.rows()) + "x1, got " +
                     shape_str(col.rows(), col.cols()));
  }
  Mat<S> out = col.value().col(0).asDiagonal() * a.value();
  return make_result<S>(std::move(out), {a, col}, "mul_col", [](Node<S>& n) {
    Node<S>& pa = parent(n, 0);
    Node<S>& pc = parent(n, 1);
    if (pa.requires_grad) accumulate_grad<S>(pa, (pc.value.col(0).asDiagonal() * n.grad).eval());
    if (pc.requires_grad) {
      Mat<S> g = n.grad.cwiseProduct(pa.value).rowwise().sum();
      accumulate_grad<S>(pc, g);
    }
  });
}

template <typename S>
Tensor<S> relu(const Tensor<S>& a) {
  Mat<S> out = a.value().cwiseMax(S(0));
  return make_result<S>(std::move(out), {a}, "relu", [](Node<S>& n) {
    const auto active = (n.value.array() > S(0)).template cast<S>();
    accumulate_grad<S>(parent(n, 0), (n.grad.array() * active).matrix().eval());
  });
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& a) {
  // Branch on sign so exp() never overflows.
  Mat<S> out = a.value().unaryExpr([](S x) {
    if (x >= 0) return S(1) / (S(1) + std::exp(-x));
    const S e = std::exp(x);
    return e / (S(1) + e);
  });
  return make_result<S>(std::move(out), {a}, "sigmoid", [](Node<S>& n) {
    Mat<S> g = (n.grad.array() * n.value.array() * (1 - n.value.array())).matrix();
    accumulate_grad<S>(parent(n, 0), g);
  });
}

template <typename S>
Tensor<S> abs(const Tensor<S>& a) {
  Mat<S> out = a.value().cwiseAbs();
  return make_result<S>(std::move(out), {a}, "abs", [](Node<S>& n) {
    Node<S>& pa = parent(n, 0);
    Mat<S> g = (n.grad.array() * pa.value.array().sign()).matrix();
    accumulate_grad<S>(pa, g);
  });
}

template <typename S>
Tensor<S> sqrt(const Tensor<S>& a) {
  if ((a.value().array() < S(0)).any()) throw NumericError("sqrt: negative input");
  Mat<S> out = a.value().cwiseSqrt();
  return make_result<S>(std::move(out), {a}, "sqrt", [](Node<S>& n) {
    Mat<S> g = (n.grad.array() / (S(2) * n.value.array().max(S(1e-12)))).matrix();
    accumulate_grad<S>(parent(n, 0), g);
  });
}

template <typename S>
Tensor<S> sum(const Tensor<S>& a) {
  Mat<S> out(1, 1);
  out(0, 0) = a.value().sum();
  const Index r = a.rows(), c = a.cols();
  return make_result<S>(std::move(out), {a}, "sum", [r, c](Node<S>& n) {
    accumulate_grad<S>(parent(n, 0), Mat<S>::Constant(r, c, n.grad(0, 0)).eval());
  });
}

template <typename S>
Tensor<S> mean(const Tensor<S>& a) {
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), S(1) / static_cast<S>(a.size()));
}

template <typename S>
Tensor<S> sum_rows(const Tensor<S>& a) {
  Mat<S> out = a.value().colwise().sum();
  const Index r = a.rows();
  return make_result<S>(std::move(out), {a}, "sum_rows", [r](Node<S>& n) {
    accumulate_grad<S>(parent(n, 0), n.grad.replicate(r, 1).eval());
  });
}

template <typename S>
Tensor<S> l1_distance(const Tensor<S>& a, const Tensor<S>& b) {
  return sum(abs(sub(a, b)));
}

template <typename S>
Tensor<S> concat_rows(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.cols() != b.cols()) throw ShapeError("concat_rows: column counts differ");
  Mat<S> out(a.rows() + b.rows(), a.cols());
  out << a.value(), b.value();
  const Index ra = a.rows(), rb = b.rows();
  return make_result<S>(std::move(out), {a, b}, "concat_rows", [ra, rb](Node<S>& n) {
    accumulate_grad<S>(parent(n, 0), n.grad.topRows(ra).eval());
    accumulate_grad<S>(parent(n, 1), n.grad.bottomRows(rb).eval());
  });
}

template <typename S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  std::vector<Index> widths;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Mat<S> out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  require_finite(out, "concat_cols", "output");
  auto node = std::make_shared<Node<S>>();
  node->value = std::move(out);
  node->op = "concat_cols";
  for (const auto& p : parts) node->requires_grad = node->requires_grad || p.requires_grad();
  if (node->requires_grad) {
    for (const auto& p : parts) node->parents.push_back(p.node());
    node->backward = [widths](Node<S>& n) {
      Index off = 0;
      for (std::size_t i = 0; i < widths.size(); ++i) {
        accumulate_grad<S>(*n.parents[i], n.grad.middleCols(off, widths[i]).eval());
        off += widths[i];
      }
    };
  }
  return Tensor<S>::from_node(std::move(node));
}

template <typename S>
Tensor<S> slice_rows(const Tensor<S>& a, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > a.rows()) throw ShapeError("slice_rows: out of range");
  Mat<S> out = a.value().middleRows(begin, count);
  const Index r = a.rows(), c = a.cols();
  return make_result<S>(std::move(out), {a}, "slice_rows", [=](Node<S>& n) {
    Mat<S> g = Mat<S>::Zero(r, c);
    g.middleRows(begin, count) = n.grad;
    accumulate_grad<S>(parent(n, 0), g);
  });
}

template <typename S>
Tensor<S> slice_cols(const Tensor<S>& a, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) throw ShapeError("slice_cols: out of range");
  Mat<S> out = a.value().middleCols(begin, count);
  const Index r = a.rows(), c = a.cols();
  return make_result<S>(std::move(out), {a}, "slice_cols", [=](Node<S>& n) {
    Mat<S> g = Mat<S>::Zero(r, c);
    g.middleCols(begin, count) = n.grad;
    accumulate_grad<S>(parent(n, 0), g);
  });
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& a, Index rows, Index cols) {
  if (rows * cols != a.size()) throw ShapeError("reshape: element count changes");
  Mat<S> out = Eigen::Map<const Mat<S>>(a.value().data(), rows, cols);
  const Index r = a.rows(), c = a.cols();
  return make_result<S>(std::move(out), {a}, "reshape", [r, c](Node<S>& n) {
    Mat<S> g = Eigen::Map<const Mat<S>>(n.grad.data(), r, c);
    accumulate_grad<S>(parent(n, 0), g);
  });
}

namespace {

template <typename S>
Mat<S> softmax_rows(const Mat<S>& x) {
  Mat<S> out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const S m = x.row(i).maxCoeff();
    out.row(i) = (x.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

// Vector-Jacobian product of a row-wise softmax with output y.
template <typename S>
Mat<S> softmax_rows_vjp(const Mat<S>& y, const Mat<S>& g) {
  Mat<S> dot = (g.cwiseProduct(y)).rowwise().sum();
  return (y.array() * (g.colwise() - dot.col(0)).array()).matrix();
}

}  // namespace

template <typename S>
Tensor<S> softmax(const Tensor<S>& a, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
  require_finite(a.value(), "softmax", "input");
  if (axis == 1) {
    Mat<S> out = softmax_rows<S>(a.value());
    return make_result<S>(std::move(out), {a}, "softmax", [](Node<S>& n) {
      accumulate_grad<S>(parent(n, 0), softmax_rows_vjp<S>(n.value, n.grad));
    });
  }
  Mat<S> out = softmax_rows<S>(a.value().transpose()).transpose();
  return make_result<S>(std::move(out), {a}, "softmax", [](Node<S>& n) {
    Mat<S> g = softmax_rows_vjp<S>(n.value.transpose(), n.grad.transpose()).transpose();
    accumulate_grad<S>(parent(n, 0), g);
  });
}

template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta, S eps) {
  const Index n = x.rows(), c = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c) {
    throw ShapeError("layer_norm: gamma/beta must be 1x" + std::to_string(c));
  }
  Mat<S> xhat(n, c);
  Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std(n);
  for (Index i = 0; i < n; ++i) {
    const S mu = x.value().row(i).mean();
    const auto centered = (x.value().row(i).array() - mu).eval();
    const S var = centered.square().mean();
    inv_std(i) = S(1) / std::sqrt(var + eps);
    xhat.row(i) = centered * inv_std(i);
  }
  Mat<S> out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
               beta.value().row(0).array();
  return make_result<S>(std::move(out), {x, gamma, beta}, "layer_norm",
                        [xhat, inv_std, c](Node<S>& nd) {
                          Node<S>& px = parent(nd, 0);
                          Node<S>& pg = parent(nd, 1);
                          Node<S>& pb = parent(nd, 2);
                          if (pg.requires_grad)
                            accumulate_grad<S>(pg, nd.grad.cwiseProduct(xhat).colwise().sum().eval());
                          if (pb.requires_grad) accumulate_grad<S>(pb, nd.grad.colwise().sum().eval());
                          if (px.requires_grad) {
                            Mat<S> dxhat = nd.grad.array().rowwise() * pg.value.row(0).array();
                            Mat<S> dx(dxhat.rows(), c);
                            for (Index i = 0; i < dxhat.rows(); ++i) {
                              const S m1 = dxhat.row(i).mean();
                              const S m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
                              dx.row(i) = inv_std(i) * (dxhat.row(i).array() - m1 -
                                                        xhat.row(i).array() * m2);
                            }
                            accumulate_grad<S>(px, dx);
                          }
                        });
}

template <typename S>
Tensor<S> im2col(const Tensor<S>& x, int height, int width, int kernel, int stride, int pad) {
  if (height <= 0 || width <= 0 || kernel <= 0 || stride <= 0 || pad < 0) {
    throw ParameterError("im2col: non-positive geometry");
  }
  if (x.rows() != static_cast<Index>(height) * width) {
    throw ShapeError("im2col: expected " + std::to_string(height * width) + " rows, got " +
                     std::to_string(x.rows()));
  }
  const int out_h = (height + 2 * pad - kernel) / stride + 1;
  const int out_w = (width + 2 * pad - kernel) / stride + 1;
  const Index ch = x.cols();
  // Source row per (output position, kernel tap); -1 marks padding.
  std::vector<Index> src(static_cast<std::size_t>(out_h) * out_w * kernel * kernel, -1);
  std::size_t t = 0;
  for (int oy = 0; oy < out_h; ++oy)
    for (int ox = 0; ox < out_w; ++ox)
      for (int ky = 0; ky < kernel; ++ky)
        for (int kx = 0; kx < kernel; ++kx, ++t) {
          const int iy = oy * stride - pad + ky;
          const int ix = ox * stride - pad + kx;
          if (iy >= 0 && iy < height && ix >= 0 && ix < width) src[t] = static_cast<Index>(iy) * width + ix;
        }
  const int taps = kernel * kernel;
  Mat<S> out = Mat<S>::Zero(static_cast<Index>(out_h) * out_w, taps * ch);
  for (Index r = 0; r < out.rows(); ++r)
    for (int k = 0; k < taps; ++k) {
      const Index s = src[static_cast<std::size_t>(r) * taps + k];
      if (s >= 0) out.row(r).segment(k * ch, ch) = x.value().row(s);
    }
  const Index in_rows = x.rows();
  return make_result<S>(std::move(out), {x}, "im2col",
                        [src = std::move(src), taps, ch, in_rows](Node<S>& n) {
                          Mat<S> g = Mat<S>::Zero(in_rows, ch);
                          for (Index r = 0; r < n.grad.rows(); ++r)
                            for (int k = 0; k < taps; ++k) {
                              const Index s = src[static_cast<std::size_t>(r) * taps + k];
                              if (s >= 0) g.row(s) += n.grad.row(r).segment(k * ch, ch);
                            }
                          accumulate_grad<S>(parent(n, 0), g);
                        });
}

template <typename S>
Tensor<S> gumbel_softmax(const Tensor<S>& logits, S tau, bool hard, Rng& rng) {
  if (!(tau > S(0))) throw ParameterError("gumbel_softmax: tau must be positive");
  require_finite(logits.value(), "gumbel_softmax", "input");
  Mat<S> perturbed = logits.value();
  for (Index i = 0; i < perturbed.rows(); ++i)
    for (Index j = 0; j < perturbed.cols(); ++j) {
      const double u = rng.uniform_open();
      perturbed(i, j) += static_cast<S>(-std::log(-std::log(u)));
    }
  perturbed /= tau;
  Mat<S> soft = softmax_rows<S>(perturbed);
  Mat<S> out = soft;
  if (hard) {
    out.setZero();
    for (Index i = 0; i < soft.rows(); ++i) {
      Index j;
      soft.row(i).maxCoeff(&j);
      out(i, j) = S(1);
    }
  }
  return make_result<S>(std::move(out), {logits}, "gumbel_softmax",
                        [soft = std::move(soft), tau](Node<S>& n) {
                          Mat<S> g = softmax_rows_vjp<S>(soft, n.grad) / tau;
                          accumulate_grad<S>(parent(n, 0), g);
                        });
}

template <typename S>
Tensor<S> hard_argmax(const Tensor<S>& logits) {
  require_finite(logits.value(), "hard_argmax", "input");
  Mat<S> out = Mat<S>::Zero(logits.rows(), logits.cols());
  for (Index i = 0; i < out.rows(); ++i) {
    Index j;
    logits.value().row(i).maxCoeff(&j);
    out(i, j) = S(1);
  }
  return Tensor<S>(std::move(out));
}

template <typename S>
Tensor<S> scaled_dot_product_attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                                       const std::optional<Tensor<S>>& key_bias) {
  if (q.cols() != k.cols()) throw ShapeError("attention: query/key widths differ");
  if (k.rows() != v.rows()) throw ShapeError("attention: key/value counts differ");
  auto logits = scale(matmul(q, transpose(k)), S(1) / std::sqrt(static_cast<S>(q.cols())));
  if (key_bias) logits = add_row(logits, *key_bias);
  return matmul(softmax(logits, 1), v);
}

#define PARTTRACK_INSTANTIATE_OPS(S)                                                          \
  template Tensor<S> matmul(const Tensor<S>&, const Tensor<S>&);                              \
  template Tensor<S> transpose(const Tensor<S>&);                                             \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                 \
  template Tensor<S> sub(const Tensor<S>&, const Tensor<S>&);                                 \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                                 \
  template Tensor<S> div(const Tensor<S>&, const Tensor<S>&);                                 \
  template Tensor<S> scale(const Tensor<S>&, S);                                              \
  template Tensor<S> add_scalar(const Tensor<S>&, S);                                         \
  template Tensor<S> neg(const Tensor<S>&);                                                   \
  template Tensor<S> maximum(const Tensor<S>&, const Tensor<S>&);                             \
  template Tensor<S> minimum(const Tensor<S>&, const Tensor<S>&);                             \
  template Tensor<S> add_row(const Tensor<S>&, const Tensor<S>&);                             \
  template Tensor<S> sub_row(const Tensor<S>&, const Tensor<S>&);                             \
  template Tensor<S> mul_col(const Tensor<S>&, const Tensor<S>&);                             \
  template Tensor<S> relu(const Tensor<S>&);                                                  \
  template Tensor<S> sigmoid(const Tensor<S>&);                                               \
  template Tensor<S> abs(const Tensor<S>&);                                                   \
  template Tensor<S> sqrt(const Tensor<S>&);                                                  \
  template Tensor<S> sum(const Tensor<S>&);                                                   \
  template Tensor<S> mean(const Tensor<S>&);                                                  \
  template Tensor<S> sum_rows(const Tensor<S>&);                                              \
  template Tensor<S> l1_distance(const Tensor<S>&, const Tensor<S>&);                         \
  template Tensor<S> concat_rows(const Tensor<S>&, const Tensor<S>&);                         \
  template Tensor<S> concat_cols(const std::vector<Tensor<S>>&);                              \
  template Tensor<S> slice_rows(const Tensor<S>&, Index, Index);                              \
  template Tensor<S> slice_cols(const Tensor<S>&, Index, Index);                              \
  template Tensor<S> reshape(const Tensor<S>&, Index, Index);                                 \
  template Tensor<S> softmax(const Tensor<S>&, int);                                          \
  template Tensor<S> layer_norm(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, S);     \
  template Tensor<S> im2col(const Tensor<S>&, int, int, int, int, int);                       \
  template Tensor<S> gumbel_softmax(const Tensor<S>&, S, bool, Rng&);                         \
  template Tensor<S> hard_argmax(const Tensor<S>&);                                           \
  template Tensor<S> scaled_dot_product_attention(const Tensor<S>&, const Tensor<S>&,         \
                                                  const Tensor<S>&, const std::optional<Tensor<S>>&);

PARTTRACK_INSTANTIATE_OPS(float)
PARTTRACK_INSTANTIATE_OPS(double)

}  // namespace parttrack
