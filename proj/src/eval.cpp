#include "parttrack/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>

#include <json.hpp>

#include "parttrack/dataio.hpp"

namespace parttrack {
namespace fs = std::filesystem;

namespace {

void check_lengths(const std::vector<BBox<double>>& pred, const std::vector<BBox<double>>& gt) {
  if (pred.size() != gt.size()) {
    throw DataError("prediction has " + std::to_string(pred.size()) + " frames but ground truth has " +
                    std::to_string(gt.size()));
  }
}

double fraction_above(const std::vector<double>& v, double t) {
  const auto n = std::count_if(v.begin(), v.end(), [t](double x) { return x > t; });
  return static_cast<double>(n) / static_cast<double>(v.size());
}

void require_nonempty(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw ParameterError(std::string(what) + ": no frames to score");
}

}  // namespace

std::vector<double> overlap_series(const std::vector<BBox<double>>& pred, const std::vector<BBox<double>>& gt,
                                   bool exclude_first) {
  check_lengths(pred, gt);
  std::vector<double> out;
  for (std::size_t i = exclude_first ? 1 : 0; i < pred.size(); ++i) out.push_back(iou(pred[i], gt[i]));
  return out;
}

std::vector<double> center_errors(const std::vector<BBox<double>>& pred, const std::vector<BBox<double>>& gt,
                                  bool exclude_first) {
  check_lengths(pred, gt);
  std::vector<double> out;
  for (std::size_t i = exclude_first ? 1 : 0; i < pred.size(); ++i)
    out.push_back(std::hypot(pred[i].cx - gt[i].cx, pred[i].cy - gt[i].cy));
  return out;
}

SuccessResult success_auc(const std::vector<double>& ious) {
  require_nonempty(ious, "success_auc");
  SuccessResult r;
  for (int k = 0; k <= 50; ++k) {
    const double t = k / 50.0;
    r.curve.thresholds.push_back(t);
    r.curve.values.push_back(fraction_above(ious, t));
  }
  r.auc = std::accumulate(r.curve.values.begin(), r.curve.values.end(), 0.0) / 51.0;
  return r;
}

PrecisionResult precision_curve(const std::vector<double>& errors) {
  require_nonempty(errors, "precision_curve");
  PrecisionResult r;
  for (int t = 0; t <= 50; ++t) {
    const auto n = std::count_if(errors.begin(), errors.end(), [t](double e) { return e <= t; });
    r.curve.thresholds.push_back(t);
    r.curve.values.push_back(static_cast<double>(n) / static_cast<double>(errors.size()));
  }
  r.at20 = r.curve.values[20];
  return r;
}

AoSr ao_sr(const std::vector<double>& ious) {
  require_nonempty(ious, "ao_sr");
  return {std::accumulate(ious.begin(), ious.end(), 0.0) / static_cast<double>(ious.size()),
          fraction_above(ious, 0.5), fraction_above(ious, 0.75)};
}

SequenceReport evaluate_sequence(const std::string& name, const std::vector<BBox<double>>& pred,
                                 const std::vector<BBox<double>>& gt) {
  SequenceReport r;
  r.name = name;
  r.ious = overlap_series(pred, gt);
  r.errors = center_errors(pred, gt);
  r.success = success_auc(r.ious);
  r.precision = precision_curve(r.errors);
  r.metrics = ao_sr(r.ious);
  return r;
}

EvalReport aggregate(std::vector<SequenceReport> sequences) {
  std::sort(sequences.begin(), sequences.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  EvalReport report;
  std::vector<double> ious, errors;
  for (const auto& s : sequences) {
    ious.insert(ious.end(), s.ious.begin(), s.ious.end());
    errors.insert(errors.end(), s.errors.begin(), s.errors.end());
  }
  report.frames = ious.size();
  report.success = success_auc(ious);
  report.precision = precision_curve(errors);
  report.metrics = ao_sr(ious);
  report.sequences = std::move(sequences);
  return report;
}

EvalReport evaluate_results(const fs::path& results_dir, const fs::path& manifest) {
  const auto dirs = read_manifest(manifest);
  if (dirs.empty()) throw DataError("manifest " + manifest.string() + " lists no sequences");
  std::vector<std::string> missing;
  for (const auto& d : dirs) {
    const auto name = d.filename().string();
    if (!fs::exists(results_dir / (name + ".txt"))) missing.push_back(name);
  }
  if (!missing.empty()) {
    std::string msg = "missing result files for:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  std::vector<std::future<SequenceReport>> jobs;
  for (const auto& d : dirs) {
    jobs.push_back(std::async(std::launch::async, [d, &results_dir] {
      const auto name = d.filename().string();
      return evaluate_sequence(name, read_boxes(results_dir / (name + ".txt")), read_boxes(d / "groundtruth.txt"));
    }));
  }
  std::vector<SequenceReport> reports;
  for (auto& j : jobs) reports.push_back(j.get());
  return aggregate(std::move(reports));
}

std::string to_json(const EvalReport& report) {
  using nlohmann::ordered_json;
  auto metrics = [](const AoSr& m, const SuccessResult& s, const PrecisionResult& p) {
    return ordered_json{{"ao", m.ao}, {"sr50", m.sr50}, {"sr75", m.sr75}, {"success_auc", s.auc},
                        {"precision20", p.at20}};
  };
  ordered_json j;
  j["aggregate"] = metrics(report.metrics, report.success, report.precision);
  j["aggregate"]["frames"] = report.frames;
  j["sequences"] = ordered_json::array();
  for (const auto& s : report.sequences) {
    auto e = metrics(s.metrics, s.success, s.precision);
    e["name"] = s.name;
    e["frames"] = s.ious.size();
    e["ious"] = s.ious;
    j["sequences"].push_back(std::move(e));
  }
  return j.dump(2);
}

void write_report(const fs::path& out_dir, const EvalReport& report) {
  fs::create_directories(out_dir);
  std::ofstream(out_dir / "report.json") << to_json(report) << "\n";

  auto write_csv = [&](const fs::path& path, auto curve_of, const Curve& all) {
    std::ofstream out(path);
    out << "threshold";
    for (const auto& s : report.sequences) out << "," << s.name;
    out << ",all\n";
    for (std::size_t k = 0; k < all.thresholds.size(); ++k) {
      out << all.thresholds[k];
      for (const auto& s : report.sequences) out << "," << curve_of(s).values[k];
      out << "," << all.values[k] << "\n";
    }
  };
  write_csv(out_dir / "success.csv", [](const SequenceReport& s) -> const Curve& { return s.success.curve; },
            report.success.curve);
  write_csv(out_dir / "precision.csv", [](const SequenceReport& s) -> const Curve& { return s.precision.curve; },
            report.precision.curve);
}

}  // namespace parttrack
