#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "parttrack/checkpoint.hpp"
#include "parttrack/grad_suite.hpp"
#include "parttrack/training.hpp"

using namespace parttrack;
namespace fs = std::filesystem;
using B = BBox<double>;

namespace {

Config tiny_config() {
  Config cfg = toy_config();
  cfg.model.template_size = 32;
  cfg.model.search_size = 64;
  cfg.model.backbone_blocks = 3;
  cfg.train.batch_size = 2;
  cfg.train.epochs = 2;
  cfg.train.warmup_epochs = 1;
  cfg.train.steps_per_epoch = 3;
  cfg.train.frame_range = 5;
  return cfg;
}

std::vector<Sequence> tiny_dataset(int n = 2, int length = 6) {
  SynthConfig sc;
  sc.width = sc.height = 80;
  sc.object_size_min = 16;
  sc.object_size_max = 20;
  sc.speed = 1.5;
  sc.length = length;
  sc.num_sequences = n;
  sc.seed = 4;
  return gen_synthetic_set(sc);
}

std::vector<TrainingExample> tiny_batch(const Config& cfg, const std::vector<Sequence>& data, Rng& rng) {
  std::vector<TrainingExample> batch;
  for (const auto& seq : data) {
    auto idx = sample_triplet_indices(seq.size(), cfg.train.frame_range, rng);
    batch.push_back(make_example(seq, idx, rng, cfg));
  }
  return batch;
}

TrainState fresh_state(const Config& cfg, std::uint64_t seed) {
  Rng init(seed);
  TrainState st;
  st.params = ModelParams<double>::init(cfg.model, init);
  st.rng = Rng(seed + 1);
  return st;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("parttrack_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("triplet sampling") {
  Rng rng(1);
  SUBCASE("two frames force the triplet") {
    for (int t = 0; t < 50; ++t) {
      const auto idx = sample_triplet_indices(2, 100, rng);
      CHECK(idx.template_frame == 0);
      CHECK(idx.search == 1);
      CHECK(idx.pseudo == 0);
    }
  }
  SUBCASE("template stays within the frame range of the search frame") {
    bool saw_lo = false, saw_hi = false;
    for (int t = 0; t < 1000; ++t) {
      const auto idx = sample_triplet_indices(201, 100, rng, 150);
      CHECK(idx.search == 150);
      CHECK(idx.template_frame >= 50);
      CHECK(idx.template_frame <= 200);
      CHECK(idx.template_frame != 150);
      CHECK(idx.pseudo == 149);
      saw_lo = saw_lo || idx.template_frame < 80;
      saw_hi = saw_hi || idx.template_frame > 180;
    }
    CHECK(saw_lo);
    CHECK(saw_hi);
  }
  SUBCASE("pseudo is always the previous frame") {
    for (int t = 0; t < 1000; ++t) {
      const auto idx = sample_triplet_indices(30, 10, rng);
      CHECK(idx.search >= 1);
      CHECK(idx.pseudo == idx.search - 1);
      const auto gap = std::abs(static_cast<long>(idx.search) - static_cast<long>(idx.template_frame));
      CHECK(gap <= 10);
      CHECK(gap >= 1);
    }
  }
  SUBCASE("deterministic and validated") {
    Rng a(3), b(3);
    for (int t = 0; t < 20; ++t) {
      const auto x = sample_triplet_indices(50, 7, a), y = sample_triplet_indices(50, 7, b);
      CHECK(x.search == y.search);
      CHECK(x.template_frame == y.template_frame);
    }
    CHECK_THROWS_AS(sample_triplet_indices(1, 10, rng), DataError);
  }
}

TEST_CASE("jitter") {
  Rng rng(2);
  const B gt = B::from_top_left(40, 50, 20, 30);
  SUBCASE("zero shift and unit scale is the identity") {
    const JitterParams id{0.0, 1.0, 1.0, 2.0};
    for (int t = 0; t < 10; ++t) CHECK(jitter(gt, rng, id, 200, 200) == gt);
  }
  SUBCASE("shift is uniform within its bound") {
    const JitterParams p{0.08, 1.0, 1.0, 2.0};
    const double delta = 0.08 * context_side(gt, 2.0);
    std::vector<int> bins(10, 0);
    const int n = 10000;
    for (int t = 0; t < n; ++t) {
      const auto j = jitter(gt, rng, p, 1000, 1000);
      const double dx = j.cx - gt.cx, dy = j.cy - gt.cy;
      CHECK(std::abs(dx) <= delta);
      CHECK(std::abs(dy) <= delta);
      CHECK(j.w == doctest::Approx(gt.w));
      bins[std::min(9, static_cast<int>((dx + delta) / (2 * delta) * 10))]++;
    }
    // Coarse KS-style check: every decile holds close to a tenth of the mass.
    int cum = 0;
    for (int k = 0; k < 10; ++k) {
      cum += bins[k];
      CHECK(std::abs(cum / double(n) - (k + 1) / 10.0) < 0.02);
    }
  }
  SUBCASE("scales stay within bounds and vary independently") {
    const JitterParams p{0.0, 0.8, 1.25, 2.0};
    int differ = 0;
    for (int t = 0; t < 1000; ++t) {
      const auto j = jitter(gt, rng, p, 1000, 1000);
      const double sw = j.w / gt.w, sh = j.h / gt.h;
      CHECK((sw >= 0.8 - 1e-12 && sw <= 1.25 + 1e-12));
      CHECK((sh >= 0.8 - 1e-12 && sh <= 1.25 + 1e-12));
      differ += std::abs(sw - sh) > 1e-6;
    }
    CHECK(differ > 900);
  }
  SUBCASE("clamped to the frame near the edge") {
    const B edge = B::from_top_left(0, 0, 20, 20);
    const JitterParams p{0.5, 0.8, 1.25, 2.0};
    for (int t = 0; t < 1000; ++t) {
      const auto j = jitter(edge, rng, p, 64, 48);
      CHECK(j.left() >= -1e-12);
      CHECK(j.top() >= -1e-12);
      CHECK(j.right() <= 64 + 1e-12);
      CHECK(j.bottom() <= 48 + 1e-12);
      CHECK(j.w > 0);
      CHECK(j.h > 0);
    }
  }
}

TEST_CASE("learning rate schedule") {
  const TrainConfig t;
  CHECK(std::abs(lr_schedule(0, t) - 0.001) < 1e-9);
  CHECK(std::abs(lr_schedule(5, t) - 0.005) < 1e-9);
  CHECK(std::abs(lr_schedule(40, t) - 0.0005) < 1e-9);
  CHECK(lr_schedule(2.5, t) == doctest::Approx(0.003));
  // Geometric midpoint of the decay.
  CHECK(lr_schedule(22.5, t) == doctest::Approx(std::sqrt(0.005 * 0.0005)));
  double prev = lr_schedule(0, t);
  for (int i = 1; i <= 4000; ++i) {
    const double lr = lr_schedule(i * 0.01, t);
    CHECK(lr > 0);
    CHECK(std::abs(lr - prev) < 2e-5);
    prev = lr;
  }
  CHECK(std::abs(lr_schedule(5 - 1e-9, t) - lr_schedule(5 + 1e-9, t)) < 1e-9);
  CHECK_THROWS_AS(lr_schedule(-0.1, t), ParameterError);
  CHECK_THROWS_AS(lr_schedule(40.1, t), ParameterError);
}

TEST_CASE("training examples are labelled in the search window") {
  const Config cfg = tiny_config();
  const auto data = tiny_dataset(1, 8);
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto ex = make_example(data[0], sample_triplet_indices(8, 5, rng), rng, cfg);
    CHECK(ex.template_patch.size == 32);
    CHECK(ex.pseudo_patch.size == 32);
    CHECK(ex.search_patch.size == 64);
    CHECK(ex.mask.size() == 16);
    CHECK(ex.gt.frame == BoxFrame::SearchNormalized);
    CHECK((ex.gt.cx > 0 && ex.gt.cx < 1));
    CHECK((ex.gt.w > 0 && ex.gt.w < 1));
  }
}

TEST_CASE("train step") {
  const Config cfg = tiny_config();
  const auto data = tiny_dataset();
  Rng rng(4);
  const auto batch = tiny_batch(cfg, data, rng);

  SUBCASE("same state and batch give identical reports") {
    Trainer a(cfg, fresh_state(cfg, 7)), b(cfg, fresh_state(cfg, 7));
    for (int s = 0; s < 3; ++s) {
      const auto ra = a.train_step(batch, 0.001), rb = b.train_step(batch, 0.001);
      CHECK(ra.report.total == rb.report.total);
      CHECK(ra.report.attention == rb.report.attention);
    }
    CHECK(a.state().params.head_out.weight.value() == b.state().params.head_out.weight.value());
    CHECK(a.state().step == 3);
  }
  SUBCASE("zero learning rate leaves parameters unchanged") {
    Trainer tr(cfg, fresh_state(cfg, 7));
    const auto before = tr.state().params.clone();
    for (int s = 0; s < 2; ++s) CHECK_FALSE(tr.train_step(batch, 0.0).aborted);
    const auto x = before.named(), y = tr.state().params.named();
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].tensor.value() == y[i].tensor.value());
  }
  SUBCASE("non-finite input aborts without touching parameters") {
    auto bad = batch;
    bad[0].search_patch.pixels(0, 0) = std::numeric_limits<double>::quiet_NaN();
    Trainer tr(cfg, fresh_state(cfg, 7));
    const auto before = tr.state().params.clone();
    const auto r = tr.train_step(bad, 0.01);
    CHECK(r.aborted);
    CHECK_FALSE(r.error.empty());
    CHECK(tr.state().step == 1);
    const auto x = before.named(), y = tr.state().params.named();
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].tensor.value() == y[i].tensor.value());
  }
  SUBCASE("ablations change only their own term") {
    auto no_att = cfg;
    no_att.train.no_attention_loss = true;
    Trainer full(cfg, fresh_state(cfg, 7)), abl(no_att, fresh_state(cfg, 7));
    const auto rf = full.train_step(batch, 0.0), ra = abl.train_step(batch, 0.0);
    CHECK(ra.report.lambda == 0.0);
    CHECK(ra.report.l1 == rf.report.l1);
    CHECK(ra.report.total == doctest::Approx(ra.report.l1 + ra.report.giou_loss));

    auto no_upd = cfg;
    no_upd.train.no_updater = true;
    Trainer upd(no_upd, fresh_state(cfg, 7));
    const auto ru = upd.train_step(batch, 0.0);
    CHECK(ru.report.lambda == doctest::Approx(0.1));
    CHECK(ru.report.l1 != rf.report.l1);
  }
  SUBCASE("loss falls on a fixed batch") {
    Trainer tr(cfg, fresh_state(cfg, 7));
    const double first = tr.train_step(batch, 0.01).report.total;
    double last = first;
    for (int s = 0; s < 40; ++s) last = tr.train_step(batch, 0.01).report.total;
    CHECK(last < first);
  }
}

TEST_CASE("freeze schedule") {
  Config cfg = tiny_config();
  cfg.model.backbone_blocks = 4;
  cfg.model.template_size = 64;
  cfg.model.search_size = 128;
  cfg.train.epochs = 40;
  Trainer tr(cfg, fresh_state(cfg, 1));
  auto trainable = [&](std::size_t b) { return tr.state().params.backbone_block(b)[0].requires_grad(); };
  tr.apply_freeze_schedule(5.0);
  for (std::size_t b = 0; b < 4; ++b) CHECK_FALSE(trainable(b));
  tr.apply_freeze_schedule(10.0);
  CHECK_FALSE(trainable(0));
  for (std::size_t b = 1; b < 4; ++b) CHECK(trainable(b));
  CHECK(tr.state().params.template_pos.requires_grad());
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const Config cfg = tiny_config();
  Rng rng(5);
  auto params = ModelParams<double>::init(cfg.model, rng);
  params.head_out.weight.mutable_value()(0, 0) = 0.1 + 0.2;  // not representable in short decimal
  const auto dir = scratch("ckpt");
  save_checkpoint(dir / "a.ckpt", Checkpoint{cfg, params, 17, 1.5, 99, 1234});
  const auto back = load_checkpoint(dir / "a.ckpt");
  CHECK(back.step == 17);
  CHECK(back.epoch == 1.5);
  CHECK(back.rng_seed == 99);
  CHECK(back.rng_counter == 1234);
  CHECK(to_text(back.config) == to_text(cfg));
  const auto x = params.named(), y = back.params.named();
  REQUIRE(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x[i].name == y[i].name);
    CHECK(x[i].tensor.value() == y[i].tensor.value());
  }

  const auto data = tiny_dataset(1);
  Rng er(6);
  const auto batch = tiny_batch(cfg, data, er);
  const auto& ex = batch[0];
  auto run = [&](const ModelParams<double>& p) {
    const auto fz = extract_features(ex.template_patch, p, PartSource::Template);
    const auto fy = extract_features(ex.pseudo_patch, p, PartSource::Pseudo);
    const auto fx = extract_features(ex.search_patch, p, PartSource::Search);
    return forward_parts(fz, fy, fx, ex.mask, p).locations.value();
  };
  CHECK(run(params) == run(back.params));

  auto other = cfg.model;
  other.channels = 16;
  CHECK_THROWS_AS(load_checkpoint(dir / "a.ckpt", other), ConfigError);
  std::ofstream(dir / "junk.ckpt") << "not a checkpoint\n";
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), DataError);
}

TEST_CASE("training runs are reproducible") {
  const Config cfg = tiny_config();
  const auto data = tiny_dataset();
  const auto a = scratch("run_a"), b = scratch("run_b");
  const auto ra = run_training(cfg, data, a);
  run_training(cfg, data, b);
  CHECK(ra.steps == 6);
  CHECK(fs::exists(ra.final_checkpoint));
  const auto log = slurp(a / "metrics.log");
  CHECK(log == slurp(b / "metrics.log"));
  CHECK(std::count(log.begin(), log.end(), '\n') == 6);
  CHECK(log.rfind("step=1 ", 0) == 0);
  for (const char* key : {"lr=", "l1=", "giou=", "atten=", "total=", "epoch="}) CHECK(log.find(key) != std::string::npos);
  CHECK(slurp(a / "final.ckpt") == slurp(b / "final.ckpt"));
}

TEST_CASE("metrics line format") {
  StepResult r;
  r.report = total_loss(0.5, 0.25, 2.0, 0.1);
  r.lr = 0.001;
  const auto line = format_metrics_line(3, 0.75, r);
  CHECK(line == "step=3 epoch=0.750000 lr=0.001 lambda=0.1 l1=0.5 giou=0.25 atten=2 total=0.95 status=ok");
}
