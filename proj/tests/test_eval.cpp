#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "parttrack/dataio.hpp"
#include "parttrack/eval.hpp"

using namespace parttrack;
namespace fs = std::filesystem;
using B = BBox<double>;

namespace {

bool close(double a, double b) { return std::abs(a - b) <= 1e-12; }

std::vector<B> unit_boxes(std::size_t n) { return std::vector<B>(n, B::from_top_left(0, 0, 1, 1)); }

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("parttrack_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("overlap series") {
  const auto gt = unit_boxes(4);
  auto ious = overlap_series(gt, gt);
  CHECK(ious == std::vector<double>{1, 1, 1});

  std::vector<B> far(4, B::from_top_left(5, 5, 1, 1));
  CHECK(overlap_series(far, gt) == std::vector<double>{0, 0, 0});

  // Init frame first, then one matching and one half-offset frame.
  const std::vector<B> pred{gt[0], gt[0], B::from_top_left(0.5, 0, 1, 1)};
  ious = overlap_series(pred, unit_boxes(3));
  REQUIRE(ious.size() == 2);
  CHECK(close(ious[0], 1.0));
  CHECK(close(ious[1], 1.0 / 3.0));
  CHECK(overlap_series(pred, unit_boxes(3), false).size() == 3);

  CHECK_THROWS_AS(overlap_series(pred, unit_boxes(4)), DataError);
  CHECK_THROWS_AS(center_errors(pred, unit_boxes(2)), DataError);
}

TEST_CASE("center errors") {
  const std::vector<B> gt{B{0, 0, 1, 1}, B{0, 0, 1, 1}, B{10, 10, 2, 2}};
  const std::vector<B> pred{B{9, 9, 1, 1}, B{3, 4, 1, 1}, B{10, 10, 5, 5}};
  const auto e = center_errors(pred, gt);
  REQUIRE(e.size() == 2);
  CHECK(close(e[0], 5.0));
  CHECK(close(e[1], 0.0));
}

TEST_CASE("success curve examples") {
  auto s = success_auc({1, 1, 1});
  REQUIRE(s.curve.thresholds.size() == 51);
  CHECK(close(s.curve.thresholds[25], 0.5));
  CHECK(close(s.curve.thresholds[50], 1.0));
  CHECK(s.curve.values[49] == 1.0);
  CHECK(s.curve.values[50] == 0.0);
  CHECK(close(s.auc, 50.0 / 51.0));

  s = success_auc({0, 0});
  CHECK(s.auc == 0.0);

  s = success_auc({0.5, 0.5, 0.5});
  for (int k = 0; k < 51; ++k) CHECK(s.curve.values[k] == (k < 25 ? 1.0 : 0.0));
  CHECK(close(s.auc, 25.0 / 51.0));

  CHECK_THROWS_AS(success_auc({}), ParameterError);
}

TEST_CASE("ao and success rates") {
  auto m = ao_sr({1, 1, 1});
  CHECK(m.ao == 1.0);
  CHECK(m.sr50 == 1.0);
  CHECK(m.sr75 == 1.0);

  m = ao_sr({0.6, 0.8, 0.4});
  CHECK(close(m.ao, 0.6));
  CHECK(close(m.sr50, 2.0 / 3.0));
  CHECK(close(m.sr75, 1.0 / 3.0));

  m = ao_sr({0.5});
  CHECK(m.sr50 == 0.0);
  CHECK(m.ao == 0.5);

  CHECK_THROWS_AS(ao_sr({}), ParameterError);
}

TEST_CASE("precision curve") {
  const auto p = precision_curve({0, 20, 20.5, 60});
  REQUIRE(p.curve.thresholds.size() == 51);
  CHECK(p.curve.values[0] == 0.25);
  CHECK(p.at20 == 0.5);
  CHECK(p.curve.values[21] == 0.75);
  CHECK(p.curve.values[50] == 0.75);
}

TEST_CASE("metric properties over random lists") {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> ious(static_cast<std::size_t>(rng.uniform_int(1, 40)));
    for (auto& v : ious) v = rng.uniform() < 0.1 ? 0.0 : rng.uniform();
    const auto m = ao_sr(ious);
    double sum = 0;
    for (double v : ious) sum += v;
    CHECK(std::abs(m.ao - sum / ious.size()) < 1e-12);
    const auto s = success_auc(ious);
    CHECK(s.curve.values[0] == std::count_if(ious.begin(), ious.end(), [](double v) { return v > 0; }) /
                                    double(ious.size()));
    for (std::size_t k = 1; k < s.curve.values.size(); ++k) CHECK(s.curve.values[k] <= s.curve.values[k - 1]);

    std::vector<double> errs(ious.size());
    for (auto& e : errs) e = rng.uniform(0, 80);
    const auto p = precision_curve(errs);
    for (std::size_t k = 1; k < p.curve.values.size(); ++k) CHECK(p.curve.values[k] >= p.curve.values[k - 1]);

    auto shuffled = ious;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto m2 = ao_sr(shuffled);
    CHECK(std::abs(m2.ao - m.ao) < 1e-12);
    CHECK(m2.sr50 == m.sr50);
    CHECK(std::abs(success_auc(shuffled).auc - s.auc) < 1e-12);
  }
}

TEST_CASE("aggregate is frame weighted") {
  const auto gt3 = unit_boxes(3), gt5 = unit_boxes(5);
  auto p5 = gt5;
  for (std::size_t t = 1; t < 5; ++t) p5[t] = B::from_top_left(0.5, 0, 1, 1);
  const auto a = evaluate_sequence("b_seq", gt3, gt3);
  const auto b = evaluate_sequence("a_seq", p5, gt5);
  CHECK(a.metrics.ao == 1.0);
  CHECK(close(b.metrics.ao, 1.0 / 3.0));
  const auto r = aggregate({a, b});
  CHECK(r.frames == 6);
  CHECK(close(r.metrics.ao, (2 * 1.0 + 4 * (1.0 / 3.0)) / 6));
  CHECK(r.sequences[0].name == "a_seq");
}

TEST_CASE("evaluating result files") {
  const auto dir = scratch("eval");
  SynthConfig sc;
  sc.width = sc.height = 64;
  sc.object_size_min = 12;
  sc.object_size_max = 16;
  sc.length = 5;
  sc.num_sequences = 2;
  sc.speed = 1;
  std::vector<fs::path> dirs;
  for (const auto& s : gen_synthetic_set(sc)) {
    save_sequence(dir / "data" / s.name, s);
    dirs.push_back(dir / "data" / s.name);
    fs::create_directories(dir / "results");
    write_boxes(dir / "results" / (s.name + ".txt"), s.gt);
  }
  write_manifest(dir / "manifest.txt", dirs);

  const auto r = evaluate_results(dir / "results", dir / "manifest.txt");
  CHECK(r.metrics.ao == 1.0);
  CHECK(r.frames == 8);
  write_report(dir / "out", r);
  for (const char* f : {"report.json", "success.csv", "precision.csv"}) CHECK(fs::exists(dir / "out" / f));
  const auto j = nlohmann::json::parse(std::ifstream(dir / "out" / "report.json"));
  CHECK(j["aggregate"]["ao"].get<double>() == 1.0);
  CHECK(j["sequences"].size() == 2);

  const auto missing = dirs[1].filename().string();
  fs::remove(dir / "results" / (missing + ".txt"));
  CHECK_THROWS_WITH_AS(evaluate_results(dir / "results", dir / "manifest.txt"), doctest::Contains(missing.c_str()), DataError);
}
