#include <doctest.h>

#include <cmath>

#include "parttrack/geometry.hpp"
#include "parttrack/numerics/grad_check.hpp"
#include "parttrack/numerics/ops.hpp"

using namespace parttrack;
using B = BBox<double>;
using M = Mat<double>;

namespace {

const double kSqrt12 = std::sqrt(12.0);

// Exact area oracle for boxes with integer corners: count unit cells.
struct IntBox {
  int x0, y0, x1, y1;
  B box() const { return B::from_top_left(x0, y0, x1 - x0, y1 - y0); }
};

long cells_in(const IntBox& a, int x, int y) { return x >= a.x0 && x < a.x1 && y >= a.y0 && y < a.y1; }

std::pair<double, double> counted_iou_giou(const IntBox& a, const IntBox& b) {
  const int lo_x = std::min(a.x0, b.x0), hi_x = std::max(a.x1, b.x1);
  const int lo_y = std::min(a.y0, b.y0), hi_y = std::max(a.y1, b.y1);
  long inter = 0, uni = 0, hull = 0;
  for (int y = lo_y; y < hi_y; ++y) {
    for (int x = lo_x; x < hi_x; ++x) {
      const long ia = cells_in(a, x, y), ib = cells_in(b, x, y);
      inter += ia & ib;
      uni += ia | ib;
      ++hull;
    }
  }
  const double iou = uni ? double(inter) / uni : 0.0;
  return {iou, hull ? iou - double(hull - uni) / hull : 0.0};
}

TargetMask ones(std::size_t n) { return TargetMask::all_ones(n); }

}  // namespace

TEST_CASE("part centers") {
  auto g = part_centers<double>(1, 1, 16);
  REQUIRE(g.size() == 1);
  CHECK(g.centers[0] == Eigen::Vector2d(8, 8));

  g = part_centers<double>(2, 2, 16);
  REQUIRE(g.size() == 4);
  CHECK(g.centers[0] == Eigen::Vector2d(8, 8));
  CHECK(g.centers[1] == Eigen::Vector2d(24, 8));
  CHECK(g.centers[2] == Eigen::Vector2d(8, 24));
  CHECK(g.centers[3] == Eigen::Vector2d(24, 24));

  g = part_centers<double>(8, 8, 16);
  CHECK(g.size() == 64);
  CHECK(g.centers.back() == Eigen::Vector2d(120, 120));

  g = part_centers<double>(3, 5, 4);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 5; ++c) CHECK(g.centers[r * 5 + c] == Eigen::Vector2d((c + 0.5) * 4, (r + 0.5) * 4));

  CHECK_THROWS_AS(part_centers<double>(0, 2, 16), ParameterError);
  CHECK_THROWS_AS(part_centers<double>(2, 2, 0.5), ParameterError);
}

TEST_CASE("target mask") {
  const auto g = part_centers<double>(2, 2, 16);
  auto m = target_mask(g, B::from_top_left(0, 0, 32, 32));
  CHECK(m.values == std::vector<std::uint8_t>{1, 1, 1, 1});
  CHECK(m.n_target == 4);

  m = target_mask(g, B::from_top_left(0, 0, 12, 12));
  CHECK(m.values == std::vector<std::uint8_t>{1, 0, 0, 0});
  CHECK(m.n_target == 1);
  CHECK(m.warning == MaskWarning::None);

  // A boundary point counts as inside.
  m = target_mask(g, B::from_top_left(8, 8, 16, 16));
  CHECK(m.values == std::vector<std::uint8_t>{1, 1, 1, 1});

  m = target_mask(g, B::from_top_left(100, 100, 10, 10));
  CHECK(m.n_target == 0);
  CHECK(m.warning == MaskWarning::EmptyIntersection);

  m = target_mask(g, B::from_top_left(0, 0, 0, 20));
  CHECK(m.n_target == 0);
  CHECK(m.warning == MaskWarning::DegenerateBox);
}

TEST_CASE("shifting the box by one stride shifts the mask by one cell") {
  const auto g = part_centers<double>(8, 8, 16);
  Rng rng(12);
  for (int t = 0; t < 200; ++t) {
    const double w = rng.uniform(10, 50), h = rng.uniform(10, 50);
    const double x = rng.uniform(16, 120 - w - 16), y = rng.uniform(16, 120 - h - 16);
    const auto base = target_mask(g, B::from_top_left(x, y, w, h));
    const auto right = target_mask(g, B::from_top_left(x + 16, y, w, h));
    const auto down = target_mask(g, B::from_top_left(x, y + 16, w, h));
    CHECK(base.n_target == int(std::count(base.values.begin(), base.values.end(), 1)));
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) {
        if (c + 1 < 8) CHECK(right.values[r * 8 + c + 1] == base.values[r * 8 + c]);
        if (r + 1 < 8) CHECK(down.values[(r + 1) * 8 + c] == base.values[r * 8 + c]);
      }
    }
  }
}

TEST_CASE("normalized part coordinates") {
  const M c = normalized_part_coords<double>(2, 4);
  REQUIRE(c.rows() == 8);
  CHECK(c(0, 0) == 0.125);
  CHECK(c(0, 1) == 0.25);
  CHECK(c(5, 0) == 0.375);
  CHECK(c(5, 1) == 0.75);
}

TEST_CASE("estimate_bbox examples") {
  M loc = M::Constant(5, 2, 0.5);
  auto b = estimate_bbox<double>(loc, ones(5), 3.0);
  CHECK(b.cx == 0.5);
  CHECK(b.cy == 0.5);
  CHECK(b.w == 0.0);
  CHECK(b.h == 0.0);

  loc.resize(4, 2);
  loc << 0.25, 0.25, 0.75, 0.25, 0.25, 0.75, 0.75, 0.75;
  b = estimate_bbox<double>(loc, ones(4), kSqrt12);
  CHECK(b.cx == doctest::Approx(0.5));
  CHECK(b.cy == doctest::Approx(0.5));
  CHECK(b.w == doctest::Approx(kSqrt12 * 0.25));
  CHECK(b.w == doctest::Approx(0.866).epsilon(1e-3));
  CHECK(b.h == doctest::Approx(0.866).epsilon(1e-3));
  CHECK(b.frame == BoxFrame::SearchNormalized);
}

TEST_CASE("estimate_bbox recovers a uniformly filled box") {
  const int nx = 80, ny = 40;
  M loc(nx * ny, 2);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) loc.row(j * nx + i) << 0.3 + 0.4 * (i + 0.5) / nx, 0.4 + 0.2 * (j + 0.5) / ny;
  // Brute-force population statistics.
  const double mx = loc.col(0).mean(), my = loc.col(1).mean();
  const double sx = std::sqrt((loc.col(0).array() - mx).square().mean());
  const double sy = std::sqrt((loc.col(1).array() - my).square().mean());

  const auto b = estimate_bbox<double>(loc, ones(nx * ny), kSqrt12);
  CHECK(b.cx == doctest::Approx(mx).epsilon(1e-12));
  CHECK(b.w == doctest::Approx(kSqrt12 * sx).epsilon(1e-12));
  CHECK(b.h == doctest::Approx(kSqrt12 * sy).epsilon(1e-12));
  CHECK(std::abs(b.cx - 0.5) <= 0.05 * 0.5);
  CHECK(std::abs(b.cy - 0.5) <= 0.05 * 0.5);
  CHECK(std::abs(b.w - 0.4) <= 0.05 * 0.4);
  CHECK(std::abs(b.h - 0.2) <= 0.05 * 0.2);
}

TEST_CASE("estimate_bbox uses only masked parts") {
  M loc(3, 2);
  loc << 0.1, 0.2, 0.9, 0.9, 0.3, 0.4;
  TargetMask m{{1, 0, 1}, 2, MaskWarning::None};
  const auto b = estimate_bbox<double>(loc, m, 3.0);
  CHECK(b.cx == doctest::Approx(0.2));
  CHECK(b.cy == doctest::Approx(0.3));
  CHECK(b.w == doctest::Approx(3.0 * 0.1));
  CHECK(b.h == doctest::Approx(3.0 * 0.1));

  // Literal form divides by N_t outside the square root.
  const auto lit = estimate_bbox<double>(loc, m, 3.0, BoxScaleFormula::Literal);
  CHECK(lit.w == doctest::Approx(3.0 / 2.0 * std::sqrt(0.02)));

  TargetMask empty{{0, 0, 0}, 0, MaskWarning::EmptyIntersection};
  CHECK_THROWS_AS(estimate_bbox<double>(loc, empty, 3.0), EstimationError);
}

TEST_CASE("estimate_bbox equivariance") {
  Rng rng(21);
  for (int t = 0; t < 100; ++t) {
    const int n = 12;
    M loc(n, 2);
    TargetMask m;
    for (int i = 0; i < n; ++i) {
      loc(i, 0) = rng.uniform();
      loc(i, 1) = rng.uniform();
      m.values.push_back(i < 2 || rng.uniform() < 0.6);
      m.n_target += m.values.back();
    }
    const auto b = estimate_bbox<double>(loc, m, 3.0);
    const double dx = rng.uniform(-1, 1), dy = rng.uniform(-1, 1);
    M shifted = loc;
    shifted.col(0).array() += dx;
    shifted.col(1).array() += dy;
    const auto bs = estimate_bbox<double>(shifted, m, 3.0);
    CHECK(bs.cx == doctest::Approx(b.cx + dx).epsilon(1e-12));
    CHECK(bs.cy == doctest::Approx(b.cy + dy).epsilon(1e-12));
    CHECK(bs.w == doctest::Approx(b.w).epsilon(1e-9));
    CHECK(bs.h == doctest::Approx(b.h).epsilon(1e-9));

    const double k = rng.uniform(0.2, 3);
    M scaled = loc;
    for (int i = 0; i < n; ++i) {
      scaled(i, 0) = b.cx + k * (loc(i, 0) - b.cx);
      scaled(i, 1) = b.cy + k * (loc(i, 1) - b.cy);
    }
    const auto bk = estimate_bbox<double>(scaled, m, 3.0);
    CHECK(bk.w == doctest::Approx(k * b.w).epsilon(1e-9));
    CHECK(bk.h == doctest::Approx(k * b.h).epsilon(1e-9));
  }
}

TEST_CASE("estimate_bbox gradient") {
  Rng rng(5);
  TargetMask m{{1, 1, 0, 1, 1, 1}, 5, MaskWarning::None};
  const Tensor<double> w(M::Random(1, 4));
  for (auto formula : {BoxScaleFormula::StdDev, BoxScaleFormula::Literal}) {
    std::function<Tensor<double>(const Tensor<double>&)> f = [&](const Tensor<double>& x) {
      return sum(mul(estimate_bbox(x, m, 3.0, formula), w));
    };
    for (int t = 0; t < 20; ++t) {
      M loc(6, 2);
      for (Index i = 0; i < loc.size(); ++i) loc.data()[i] = rng.uniform();
      CHECK(grad_check<double>(f, loc, 1e-6) < 1e-5);
    }
  }
}

TEST_CASE("iou and giou examples") {
  const B unit = B::from_top_left(0, 0, 1, 1);
  const B half = B::from_top_left(0.5, 0, 1, 1);
  CHECK(iou(unit, unit) == 1.0);
  CHECK(giou(unit, unit) == 1.0);
  CHECK(iou(unit, half) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(giou(unit, half) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const B far = B::from_top_left(3, 0, 1, 1);
  CHECK(iou(unit, far) == 0.0);
  CHECK(giou(unit, far) == doctest::Approx(-(4.0 - 2.0) / 4.0));
  double prev = 0;
  for (double d : {10.0, 100.0, 1000.0}) {
    const double g = giou(unit, B::from_top_left(d, d, 1, 1));
    const double hull = (d + 1) * (d + 1);
    CHECK(g == doctest::Approx(-(hull - 2) / hull));
    CHECK(g < prev);
    prev = g;
  }
  CHECK(prev > -1.0);
  const B zero = B::from_top_left(0, 0, 0, 0);
  CHECK(iou(zero, zero) == 0.0);
  CHECK(giou(zero, zero) == 0.0);
}

TEST_CASE("iou and giou agree with cell counting") {
  Rng rng(77);
  for (int t = 0; t < 2000; ++t) {
    auto rand_box = [&] {
      const int x0 = int(rng.uniform_int(0, 20)), y0 = int(rng.uniform_int(0, 20));
      return IntBox{x0, y0, x0 + int(rng.uniform_int(1, 12)), y0 + int(rng.uniform_int(1, 12))};
    };
    const IntBox a = rand_box(), b = rand_box();
    const auto [ci, cg] = counted_iou_giou(a, b);
    CHECK(iou(a.box(), b.box()) == doctest::Approx(ci).epsilon(1e-12));
    CHECK(giou(a.box(), b.box()) == doctest::Approx(cg).epsilon(1e-12));
    const double gt = giou(box_tensor(a.box()), box_tensor(b.box())).item();
    CHECK(gt == doctest::Approx(cg).epsilon(1e-12));
  }
}

TEST_CASE("giou properties over random pairs") {
  Rng rng(2024);
  for (int t = 0; t < 10000; ++t) {
    const B a{rng.uniform(), rng.uniform(), rng.uniform(0, 0.5), rng.uniform(0, 0.5)};
    const B b{rng.uniform(), rng.uniform(), rng.uniform(0, 0.5), rng.uniform(0, 0.5)};
    const double g = giou(a, b), i = iou(a, b);
    CHECK(g <= i + 1e-15);
    CHECK(g == giou(b, a));
    CHECK(i == iou(b, a));
    CHECK((g >= -1.0 && g <= 1.0));
    CHECK((i >= 0.0 && i <= 1.0));
    if (a.area() > 0) CHECK(giou(a, a) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("giou tensor gradient") {
  Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    const M target = (M(1, 4) << rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.1, 0.4),
                      rng.uniform(0.1, 0.4))
                         .finished();
    M pred = target;
    pred(0, 0) += rng.uniform(-0.2, 0.2);
    pred(0, 1) += rng.uniform(-0.2, 0.2);
    pred(0, 2) *= rng.uniform(0.5, 1.5);
    pred(0, 3) *= rng.uniform(0.5, 1.5);
    std::function<Tensor<double>(const Tensor<double>&)> f = [&](const Tensor<double>& x) {
      return giou(x, Tensor<double>(target));
    };
    CHECK(grad_check<double>(f, pred, 1e-6) < 1e-5);
  }
}

TEST_CASE("crop region") {
  Image flat(40, 30, 100);
  auto p = crop_region(flat, 20, 15, 10, 8);
  CHECK(p.size == 8);
  CHECK(p.pixels.rows() == 64);
  CHECK(((p.pixels.array() - 100.0 / 255.0).abs() < 1e-12).all());

  // Left half red, right half blue; a crop centered on the right border has
  // its outside half at the frame mean.
  Image two(20, 20);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) two.at(x, y, x < 10 ? 0 : 2) = 255;
  p = crop_region(two, 20, 10, 8, 8);
  for (int r = 0; r < 8; ++r) {
    for (int c = 4; c < 8; ++c) {
      CHECK(p.pixels(r * 8 + c, 0) == doctest::Approx(0.5));
      CHECK(p.pixels(r * 8 + c, 1) == doctest::Approx(0.0));
      CHECK(p.pixels(r * 8 + c, 2) == doctest::Approx(0.5));
    }
  }

  Image ramp(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      ramp.at(x, y, 0) = static_cast<std::uint8_t>(x * 13);
      ramp.at(x, y, 1) = static_cast<std::uint8_t>(y * 11);
      ramp.at(x, y, 2) = static_cast<std::uint8_t>((x * y) % 256);
    }
  p = crop_region(ramp, 8, 8, 16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int ch = 0; ch < 3; ++ch) CHECK(p.pixels(y * 16 + x, ch) == doctest::Approx(ramp.at(x, y, ch) / 255.0));

  CHECK_THROWS_AS(crop_region(Image(), 1, 1, 4, 4), ParameterError);
  CHECK_THROWS_AS(crop_region(flat, 1, 1, 4, 0), ParameterError);
}

TEST_CASE("crop windows map boxes consistently") {
  const B gt = B::from_top_left(30, 40, 20, 10);
  const double side = context_side(gt, 4.0);
  CHECK(side == doctest::Approx(4.0 * std::sqrt(200.0)));
  const auto win = CropWindow::centered(gt.cx, gt.cy, side);
  const auto n = win.to_normalized(gt);
  CHECK(n.cx == doctest::Approx(0.5));
  CHECK(n.cy == doctest::Approx(0.5));
  const auto back = win.to_pixels(n);
  CHECK(back.cx == doctest::Approx(gt.cx));
  CHECK(back.w == doctest::Approx(gt.w));
  const auto cp = win.to_crop_pixels(gt, 128);
  CHECK(cp.cx == doctest::Approx(64));
  CHECK(cp.w == doctest::Approx(20 * 128 / side));
}
