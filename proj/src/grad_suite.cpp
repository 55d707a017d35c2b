#include "parttrack/grad_suite.hpp"

#include <algorithm>
#include <functional>

#include "parttrack/numerics/grad_check.hpp"
#include "parttrack/training.hpp"

namespace parttrack {
namespace {

using T = Tensor<double>;
using M = Mat<double>;

struct Gen {
  Rng rng;

  int dim(int lo = 2, int hi = 5) { return static_cast<int>(rng.uniform_int(lo, hi)); }
  M normal(Index r, Index c) {
    M m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
  }
  // Magnitudes in [lo, hi] with random signs.
  M away_from_zero(Index r, Index c, double lo = 0.1, double hi = 2.0) {
    M m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(lo, hi);
    return m;
  }
  M positive(Index r, Index c, double lo = 0.5, double hi = 2.0) {
    M m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
  }
};

T leaf(M m) {
  T t(std::move(m));
  t.set_requires_grad(true);
  return t;
}

// Contracts an op's output with fixed random weights so every output entry
// contributes a distinct gradient.
std::function<T()> weighted(std::function<T()> op, Gen& g) {
  auto probe = op();
  T w(g.normal(probe.rows(), probe.cols()));
  return [op, w] { return sum(mul(op(), w)); };
}

using Case = std::function<std::pair<std::function<T()>, std::vector<T>>(Gen&)>;

std::vector<std::pair<std::string, Case>> cases() {
  std::vector<std::pair<std::string, Case>> c;
  auto unary = [&c](std::string name, std::function<T(const T&)> op, std::function<M(Gen&, int, int)> make) {
    c.emplace_back(std::move(name), [op, make](Gen& g) {
      const int r = g.dim(), k = g.dim();
      auto x = leaf(make(g, r, k));
      return std::make_pair(weighted([op, x] { return op(x); }, g), std::vector<T>{x});
    });
  };
  auto binary = [&c](std::string name, std::function<T(const T&, const T&)> op,
                     std::function<std::pair<M, M>(Gen&, int, int)> make) {
    c.emplace_back(std::move(name), [op, make](Gen& g) {
      const int r = g.dim(), k = g.dim();
      auto [ma, mb] = make(g, r, k);
      auto a = leaf(ma), b = leaf(mb);
      return std::make_pair(weighted([op, a, b] { return op(a, b); }, g), std::vector<T>{a, b});
    });
  };
  auto normal = [](Gen& g, int r, int k) { return g.normal(r, k); };
  auto two_normal = [](Gen& g, int r, int k) { return std::make_pair(g.normal(r, k), g.normal(r, k)); };
  auto separated = [](Gen& g, int r, int k) {
    M a = g.normal(r, k);
    return std::make_pair(a, M(a + g.away_from_zero(r, k)));
  };

  c.emplace_back("matmul", [](Gen& g) {
    const int r = g.dim(), k = g.dim(), n = g.dim();
    auto a = leaf(g.normal(r, k)), b = leaf(g.normal(k, n));
    return std::make_pair(weighted([a, b] { return matmul(a, b); }, g), std::vector<T>{a, b});
  });
  unary("transpose", [](const T& x) { return transpose(x); }, normal);
  binary("add", [](const T& a, const T& b) { return add(a, b); }, two_normal);
  binary("sub", [](const T& a, const T& b) { return sub(a, b); }, two_normal);
  binary("mul", [](const T& a, const T& b) { return mul(a, b); }, two_normal);
  binary("div", [](const T& a, const T& b) { return div(a, b); },
         [](Gen& g, int r, int k) { return std::make_pair(g.normal(r, k), g.away_from_zero(r, k, 0.5, 2.0)); });
  unary("scale", [](const T& x) { return scale(x, 1.7); }, normal);
  unary("add_scalar", [](const T& x) { return add_scalar(x, -0.3); }, normal);
  unary("neg", [](const T& x) { return neg(x); }, normal);
  binary("maximum", [](const T& a, const T& b) { return maximum(a, b); }, separated);
  binary("minimum", [](const T& a, const T& b) { return minimum(a, b); }, separated);
  c.emplace_back("add_row", [](Gen& g) {
    const int r = g.dim(), k = g.dim();
    auto a = leaf(g.normal(r, k)), row = leaf(g.normal(1, k));
    return std::make_pair(weighted([a, row] { return add_row(a, row); }, g), std::vector<T>{a, row});
  });
  c.emplace_back("sub_row", [](Gen& g) {
    const int r = g.dim(), k = g.dim();
    auto a = leaf(g.normal(r, k)), row = leaf(g.normal(1, k));
    return std::make_pair(weighted([a, row] { return sub_row(a, row); }, g), std::vector<T>{a, row});
  });
  c.emplace_back("mul_col", [](Gen& g) {
    const int r = g.dim(), k = g.dim();
    auto a = leaf(g.normal(r, k)), col = leaf(g.normal(r, 1));
    return std::make_pair(weighted([a, col] { return mul_col(a, col); }, g), std::vector<T>{a, col});
  });
  unary("relu", [](const T& x) { return relu(x); }, [](Gen& g, int r, int k) { return g.away_from_zero(r, k); });
  unary("sigmoid", [](const T& x) { return sigmoid(x); }, [](Gen& g, int r, int k) { M m = 3 * g.normal(r, k); return m; });
  unary("abs", [](const T& x) { return abs(x); }, [](Gen& g, int r, int k) { return g.away_from_zero(r, k); });
  unary("sqrt", [](const T& x) { return sqrt(x); }, [](Gen& g, int r, int k) { return g.positive(r, k); });
  unary("sum", [](const T& x) { return sum(x); }, normal);
  unary("mean", [](const T& x) { return mean(x); }, normal);
  unary("sum_rows", [](const T& x) { return sum_rows(x); }, normal);
  binary("l1_distance", [](const T& a, const T& b) { return l1_distance(a, b); }, separated);
  binary("concat_rows", [](const T& a, const T& b) { return concat_rows(a, b); }, two_normal);
  binary("concat_cols", [](const T& a, const T& b) { return concat_cols<double>({a, b, a}); }, two_normal);
  unary("slice_rows", [](const T& x) { return slice_rows(x, 1, x.rows() - 1); }, normal);
  unary("slice_cols", [](const T& x) { return slice_cols(x, 1, x.cols() - 1); }, normal);
  unary("reshape", [](const T& x) { return reshape(x, x.cols(), x.rows()); }, normal);
  unary("softmax_rows", [](const T& x) { return softmax(x, 1); }, normal);
  unary("softmax_cols", [](const T& x) { return softmax(x, 0); }, normal);
  c.emplace_back("layer_norm", [](Gen& g) {
    const int r = g.dim(), k = g.dim(3, 6);
    auto x = leaf(g.normal(r, k)), gamma = leaf(g.normal(1, k)), beta = leaf(g.normal(1, k));
    return std::make_pair(weighted([x, gamma, beta] { return layer_norm(x, gamma, beta); }, g),
                          std::vector<T>{x, gamma, beta});
  });
  c.emplace_back("im2col", [](Gen& g) {
    const int h = g.dim(3, 6), w = g.dim(3, 6), ch = g.dim(1, 3);
    auto x = leaf(g.normal(h * w, ch));
    return std::make_pair(weighted([x, h, w] { return im2col(x, h, w, 3, 2, 1); }, g), std::vector<T>{x});
  });
  c.emplace_back("gumbel_softmax_soft", [](Gen& g) {
    const int r = g.dim(), k = g.dim();
    auto x = leaf(g.normal(r, k));
    const std::uint64_t noise_seed = g.rng.next_u64();
    auto op = [x, noise_seed] {
      Rng noise(noise_seed);
      return gumbel_softmax(x, 0.7, false, noise);
    };
    return std::make_pair(weighted(op, g), std::vector<T>{x});
  });
  c.emplace_back("attention", [](Gen& g) {
    const int nq = g.dim(), nk = g.dim(), d = g.dim(), dv = g.dim();
    auto q = leaf(g.normal(nq, d)), k = leaf(g.normal(nk, d)), v = leaf(g.normal(nk, dv));
    auto bias = leaf(g.normal(1, nk));
    return std::make_pair(weighted([q, k, v, bias] { return scaled_dot_product_attention(q, k, v, std::optional<T>(bias)); }, g),
                          std::vector<T>{q, k, v, bias});
  });
  return c;
}

}  // namespace

std::vector<GradCheckEntry> primitive_grad_suite(int trials, std::uint64_t seed) {
  std::vector<GradCheckEntry> out;
  Rng master(seed);
  for (const auto& [name, make] : cases()) {
    Gen g{master.split()};
    GradCheckEntry e{name, 0.0, trials};
    for (int t = 0; t < trials; ++t) {
      auto [f, leaves] = make(g);
      e.max_error = std::max(e.max_error, grad_check_params<double>(f, leaves, 1e-6));
    }
    out.push_back(e);
  }
  return out;
}

Config toy_config() {
  Config cfg;
  auto& m = cfg.model;
  m.template_size = 16;
  m.search_size = 32;
  m.channels = 8;
  m.backbone_blocks = 3;
  m.heads = 2;
  m.layers = 1;
  cfg.loss.gumbel_hard = false;
  cfg.train.batch_size = 1;
  return cfg;
}

double toy_total_loss_grad_check(std::uint64_t seed, Index max_coords_per_param) {
  // A 2x2 template grid needs a box that spans more than half the crop.
  Config cfg = toy_config();
  cfg.model.template_context = 1.5;
  Rng rng(seed);
  Rng init_rng = rng.split();
  const auto params = ModelParams<double>::init(cfg.model, init_rng);

  SynthConfig sc;
  sc.width = sc.height = 64;
  sc.shapes = "rectangle";
  sc.aspect_min = sc.aspect_max = 1.0;
  sc.object_size_min = 14;
  sc.object_size_max = 18;
  sc.speed = 1.5;
  sc.seed = rng.next_u64();
  Rng seq_rng(sc.seed);
  const auto seq = gen_synthetic(sc, 6, seq_rng);
  const auto idx = sample_triplet_indices(seq.size(), 5, rng, 4);
  const std::vector<TrainingExample> batch{make_example(seq, idx, rng, cfg)};

  const std::uint64_t noise_seed = rng.next_u64();
  auto f = [&] {
    Rng noise(noise_seed);
    return batch_loss(batch, params, cfg, noise).total;
  };
  std::vector<Tensor<double>> leaves;
  for (const auto& p : params.named()) leaves.push_back(p.tensor);
  return grad_check_params<double>(f, leaves, 1e-6, max_coords_per_param);
}

}  // namespace parttrack
