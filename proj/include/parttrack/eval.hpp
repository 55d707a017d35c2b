#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "parttrack/geometry.hpp"

namespace parttrack {

/// Frame-wise IoU. The first (init) frame is dropped when exclude_first is
/// set. Throws DataError on a length mismatch.
std::vector<double> overlap_series(const std::vector<BBox<double>>& pred, const std::vector<BBox<double>>& gt,
                                   bool exclude_first = true);

/// Frame-wise center distance in pixels, same frame convention as overlap_series.
std::vector<double> center_errors(const std::vector<BBox<double>>& pred, const std::vector<BBox<double>>& gt,
                                  bool exclude_first = true);

struct Curve {
  std::vector<double> thresholds;
  std::vector<double> values;
};

struct SuccessResult {
  Curve curve;  // fraction of frames with IoU > t for t = 0, 0.02, ..., 1
  double auc = 0;
};

SuccessResult success_auc(const std::vector<double>& ious);

struct PrecisionResult {
  Curve curve;  // fraction of frames with center error <= t for t = 0..50 px
  double at20 = 0;
};

PrecisionResult precision_curve(const std::vector<double>& errors);

struct AoSr {
  double ao = 0;
  double sr50 = 0;
  double sr75 = 0;
};

/// Mean IoU and the fractions of frames with IoU strictly above 0.5 and 0.75.
AoSr ao_sr(const std::vector<double>& ious);

struct SequenceReport {
  std::string name;
  std::vector<double> ious;
  std::vector<double> errors;
  SuccessResult success;
  PrecisionResult precision;
  AoSr metrics;
};

struct EvalReport {
  std::vector<SequenceReport> sequences;  // sorted by name
  SuccessResult success;                  // over all scored frames
  PrecisionResult precision;
  AoSr metrics;
  std::size_t frames = 0;
};

SequenceReport evaluate_sequence(const std::string& name, const std::vector<BBox<double>>& pred,
                                 const std::vector<BBox<double>>& gt);

/// Pools the frames of all sequences, so aggregate AO is the frame-weighted
/// mean of the per-sequence AOs.
EvalReport aggregate(std::vector<SequenceReport> sequences);

/// Evaluates <results_dir>/<sequence name>.txt for every sequence of the
/// manifest. Throws DataError listing every missing result file.
EvalReport evaluate_results(const std::filesystem::path& results_dir, const std::filesystem::path& manifest);

std::string to_json(const EvalReport& report);

/// report.json, success.csv and precision.csv in out_dir.
void write_report(const std::filesystem::path& out_dir, const EvalReport& report);

}  // namespace parttrack
