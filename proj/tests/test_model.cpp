#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "parttrack/grad_suite.hpp"
#include "parttrack/model.hpp"
#include "parttrack/numerics/grad_check.hpp"

using namespace parttrack;
using T = Tensor<double>;
using M = Mat<double>;

namespace {

ModelConfig small(int layers = 1, int heads = 2, int channels = 16) {
  ModelConfig m;
  m.template_size = 32;
  m.search_size = 64;
  m.channels = channels;
  m.backbone_blocks = 3;
  m.heads = heads;
  m.layers = layers;
  return m;
}

Patch random_patch(int size, Rng& rng) {
  Patch p{size, M(size * size, 3)};
  for (Index i = 0; i < p.pixels.size(); ++i) p.pixels.data()[i] = rng.uniform();
  return p;
}

M random_mat(Index r, Index c, Rng& rng, double scale = 1.0) {
  M m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

PartSet<double> parts(M f, int gh, int gw, PartSource src) { return PartSet<double>{T(std::move(f)), gh, gw, src}; }

double max_abs(const M& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("feature extraction shapes and determinism") {
  Rng rng(1);
  ModelConfig cfg;
  cfg.channels = 64;
  cfg.layers = 1;
  const auto params = ModelParams<double>::init(cfg, rng);
  const auto p128 = random_patch(128, rng);
  const auto f = extract_features(p128, params, PartSource::Template);
  CHECK(f.grid_h == 8);
  CHECK(f.grid_w == 8);
  CHECK(f.size() == 64);
  CHECK(f.channels() == 64);
  CHECK(extract_features(p128, params, PartSource::Template).features.value() == f.features.value());

  const auto f256 = extract_features(random_patch(256, rng), params, PartSource::Search);
  CHECK(f256.grid_h == 16);
  CHECK(f256.size() == 256);

  CHECK_THROWS_AS(extract_features(random_patch(120, rng), params, PartSource::Search), ShapeError);
}

TEST_CASE("default configuration shape contract") {
  Rng rng(2);
  const ModelConfig cfg;
  CHECK(cfg.template_grid() == 8);
  CHECK(cfg.search_grid() == 16);
  const auto params = ModelParams<double>::init(cfg, rng);
  const auto fz = extract_features(random_patch(128, rng), params, PartSource::Template);
  const auto fy = extract_features(random_patch(128, rng), params, PartSource::Pseudo);
  const auto fx = extract_features(random_patch(256, rng), params, PartSource::Search);
  CHECK(fz.size() == 64);
  CHECK(fx.size() == 256);
  const auto fp = forward_parts(fz, fy, fx, TargetMask::all_ones(64), params);
  CHECK(fp.encoded.h_z.rows() + fp.encoded.h_x.rows() == 320);
  CHECK(fp.locations.rows() == 64);
  CHECK(fp.locations.cols() == 2);
  CHECK(fp.locations.value().allFinite());
}

TEST_CASE("sinusoidal position table") {
  const M pos = sinusoidal_pos<double>(5, 7, 16);
  REQUIRE(pos.rows() == 35);
  REQUIRE(pos.cols() == 16);
  CHECK(pos.cwiseAbs().maxCoeff() <= 1.0);
  for (Index i = 0; i < pos.rows(); ++i)
    for (Index j = i + 1; j < pos.rows(); ++j) CHECK((pos.row(i) - pos.row(j)).norm() > 1e-6);
  // Origin: every sine is 0 and every cosine is 1.
  for (int k = 0; k < 16; k += 2) {
    CHECK(pos(0, k) == 0.0);
    CHECK(pos(0, k + 1) == 1.0);
  }
  CHECK(sinusoidal_pos<double>(5, 7, 16) == pos);
  CHECK_THROWS_AS(sinusoidal_pos<double>(2, 2, 6), ParameterError);
}

TEST_CASE("updater") {
  Rng rng(3);
  const auto params = ModelParams<double>::init(small(), rng);
  const int nz = 16;
  const M fz = random_mat(nz, 16, rng);
  const auto zset = parts(fz, 4, 4, PartSource::Template);
  const M base = fz + params.template_pos.value();

  SUBCASE("zero pseudo template leaves f_z + Pos_z exactly") {
    const auto out = update_parts(zset, parts(M::Zero(16, 16), 4, 4, PartSource::Pseudo), params);
    CHECK(out.features.value() == base);
  }
  SUBCASE("singleton pseudo template attends with weight one") {
    const M fy = random_mat(1, 16, rng);
    const auto out = update_parts(zset, parts(fy, 1, 1, PartSource::Pseudo), params);
    const Eigen::RowVectorXd proj = fy * params.updater.value.weight.value() * params.updater.out.weight.value();
    for (int i = 0; i < nz; ++i) CHECK(max_abs(out.features.value().row(i) - base.row(i) - proj) < 1e-12);
  }
  SUBCASE("pseudo template row order does not matter") {
    const M fy = random_mat(16, 16, rng);
    std::vector<int> perm(16);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    std::swap(perm[0], perm[5]);
    M fy_p(16, 16);
    for (int i = 0; i < 16; ++i) fy_p.row(i) = fy.row(perm[i]);
    const auto a = update_parts(zset, parts(fy, 4, 4, PartSource::Pseudo), params);
    const auto b = update_parts(zset, parts(fy_p, 4, 4, PartSource::Pseudo), params);
    CHECK(max_abs(a.features.value() - b.features.value()) < 1e-12);
  }
  SUBCASE("disabled updater keeps only the positional term") {
    const auto out = update_parts(zset, parts(random_mat(16, 16, rng), 4, 4, PartSource::Pseudo), params, false);
    CHECK(out.features.value() == base);
  }
}

TEST_CASE("encoder") {
  Rng rng(4);
  const M fx = random_mat(64, 16, rng), fz = random_mat(16, 16, rng);
  const auto xset = parts(fx, 8, 8, PartSource::Search);
  const auto zset = parts(fz, 4, 4, PartSource::Template);
  TargetMask mask{std::vector<std::uint8_t>(16, 0), 0, MaskWarning::None};
  for (int i : {5, 6, 9, 10}) mask.values[i] = 1;
  mask.n_target = 4;

  SUBCASE("zero layers is the identity on the masked input") {
    const auto params = ModelParams<double>::init(small(0), rng);
    const auto enc = encode(xset, zset, mask, params);
    CHECK(enc.h_x.value() == M(fx + sinusoidal_pos<double>(8, 8, 16)));
    for (int i = 0; i < 16; ++i) {
      if (mask.values[i]) CHECK(enc.h_z.value().row(i) == fz.row(i));
      else CHECK(enc.h_z.value().row(i).isZero(0));
    }
  }
  SUBCASE("all-zero mask zeroes every template row") {
    const auto params = ModelParams<double>::init(small(0), rng);
    TargetMask none{std::vector<std::uint8_t>(16, 0), 0, MaskWarning::EmptyIntersection};
    CHECK(encode(xset, zset, none, params).h_z.value().isZero(0));
  }
  SUBCASE("without positions the encoder is equivariant to search row order") {
    const auto params = ModelParams<double>::init(small(2), rng);
    std::vector<int> perm(64);
    std::iota(perm.begin(), perm.end(), 0);
    Rng prng(8);
    for (int i = 63; i > 0; --i) std::swap(perm[i], perm[prng.uniform_int(0, i)]);
    M fx_p(64, 16);
    for (int i = 0; i < 64; ++i) fx_p.row(i) = fx.row(perm[i]);
    const auto a = encode(xset, zset, mask, params, false);
    const auto b = encode(parts(fx_p, 8, 8, PartSource::Search), zset, mask, params, false);
    for (int i = 0; i < 64; ++i) CHECK(max_abs(b.h_x.value().row(i) - a.h_x.value().row(perm[i])) < 1e-10);
    CHECK(max_abs(b.h_z.value() - a.h_z.value()) < 1e-10);
  }
}

TEST_CASE("localization head") {
  Rng rng(5);
  auto params = ModelParams<double>::init(small(), rng);
  const M hz = random_mat(16, 16, rng);

  SUBCASE("zero output layer predicts the centre") {
    auto p = params.clone();
    p.head_out.weight.mutable_value().setZero();
    if (p.head_out.bias) p.head_out.bias->mutable_value().setZero();
    const M l = localize(T(hz), p).value();
    CHECK((l.array() == 0.5).all());
  }
  SUBCASE("identical rows give identical locations") {
    M same(6, 16);
    same.rowwise() = hz.row(0);
    const M l = localize(T(same), params).value();
    for (int i = 1; i < 6; ++i) CHECK(l.row(i) == l.row(0));
    CHECK((l.array() > 0).all());
    CHECK((l.array() < 1).all());
  }
  SUBCASE("gradient of the mean location") {
    std::function<T(const T&)> f = [&](const T& x) { return mean(localize(x, params)); };
    CHECK(grad_check<double>(f, hz, 1e-6) < 1e-5);
  }
}

TEST_CASE("soft-argmax head") {
  Rng rng(6);
  auto cfg = small();
  cfg.head = "soft_argmax";
  auto params = ModelParams<double>::init(cfg, rng);
  const M hz = random_mat(16, 16, rng, 0.5), hx = random_mat(64, 16, rng, 0.5);

  // Zero offset branch: the location is the score-weighted grid coordinate.
  auto p = params.clone();
  p.head_out.weight.mutable_value().setZero();
  if (p.head_out.bias) p.head_out.bias->mutable_value().setZero();
  const M l = localize(T(hz), T(hx), 8, 8, p).value();
  const M coords = normalized_part_coords<double>(8, 8);
  for (int i = 0; i < 16; ++i) {
    Eigen::RowVectorXd s = hz.row(i) * hx.transpose() / 4.0;
    Eigen::RowVectorXd w = (s.array() - s.maxCoeff()).exp();
    w /= w.sum();
    CHECK(max_abs(l.row(i) - w * coords) < 1e-12);
  }

  std::function<T(const T&)> f = [&](const T& x) { return mean(localize(x, T(hx), 8, 8, params)); };
  CHECK(grad_check<double>(f, hz, 1e-6) < 1e-5);
}

TEST_CASE("hard attention") {
  Rng rng(7);
  SUBCASE("rows are one-hot") {
    const M hz = random_mat(5, 8, rng), hx = random_mat(12, 8, rng);
    const M a = hard_attention(T(hz), T(hx), 1.0, rng).value();
    for (int i = 0; i < 5; ++i) {
      CHECK(a.row(i).sum() == 1.0);
      CHECK((a.row(i).array() == 1.0).count() == 1);
    }
  }
  SUBCASE("a dot-product margin of 10 selects the aligned part") {
    M hz(1, 2), hx(4, 2);
    hz << 1, 0;
    hx << 0, 1, 10, 0, 0, -1, -3, 0;
    int hits = 0;
    for (int t = 0; t < 1000; ++t) hits += hard_attention(T(hz), T(hx), 1.0, rng).value()(0, 1) == 1.0;
    CHECK(hits >= 990);
  }
  SUBCASE("duplicate parts split the mass") {
    M hz(1, 2), hx(3, 2);
    hz << 1, 0;
    hx << 2, 0, 2, 0, -2, 0;
    int first = 0, second = 0;
    for (int t = 0; t < 1000; ++t) {
      const M a = hard_attention(T(hz), T(hx), 1.0, rng).value();
      first += a(0, 0) == 1.0;
      second += a(0, 1) == 1.0;
    }
    CHECK(first + second >= 950);
    CHECK(std::abs(first - second) < 120);
  }
}

TEST_CASE("inference forward is deterministic") {
  Rng rng(9);
  const auto params = ModelParams<double>::init(small(), rng);
  const auto fz = extract_features(random_patch(32, rng), params, PartSource::Template);
  const auto fy = extract_features(random_patch(32, rng), params, PartSource::Pseudo);
  const auto fx = extract_features(random_patch(64, rng), params, PartSource::Search);
  const auto mask = TargetMask::all_ones(16);
  const auto a = forward_parts(fz, fy, fx, mask, params);
  const auto b = forward_parts(fz, fy, fx, mask, params);
  CHECK(a.locations.value() == b.locations.value());
}

TEST_CASE("parameters clone, cast and name consistently") {
  Rng rng(10);
  const auto params = ModelParams<double>::init(small(), rng);
  const auto named = params.named();
  std::vector<std::string> names;
  for (const auto& n : named) {
    names.push_back(n.name);
    CHECK(n.tensor.value().allFinite());
  }
  auto sorted = names;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  CHECK(params.template_pos.rows() == 16);

  auto copy = params.clone();
  copy.template_pos.mutable_value()(0, 0) += 1.0;
  CHECK(copy.template_pos.value()(0, 0) != params.template_pos.value()(0, 0));

  const auto f = params.cast<float>();
  CHECK(f.named().size() == named.size());
  CHECK(f.template_pos.value()(3, 2) == static_cast<float>(params.template_pos.value()(3, 2)));

  auto bad = small();
  bad.heads = 3;
  CHECK_THROWS_AS(ModelParams<double>::init(bad, rng), ConfigError);
}

TEST_CASE("template mask for a crop") {
  const auto cfg = small();
  // 32-pixel template crop with stride 8: centres at 4, 12, 20, 28.
  const auto m = template_mask(cfg, BBox<double>::from_top_left(8, 8, 16, 16));
  CHECK(m.n_target == 4);
  CHECK(m.values[5] == 1);
  CHECK(m.values[10] == 1);
  CHECK(m.values[0] == 0);
}

TEST_CASE("toy network total loss matches finite differences") {
  const auto cfg = toy_config();
  CHECK(cfg.model.template_grid() == 2);
  CHECK(cfg.model.search_grid() == 4);
  CHECK(cfg.model.channels == 8);
  CHECK(cfg.model.layers == 1);
  CHECK(cfg.model.heads == 2);
  CHECK(toy_total_loss_grad_check(11) < 1e-4);
}
