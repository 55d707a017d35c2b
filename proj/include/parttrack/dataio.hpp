#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "parttrack/geometry.hpp"
#include "parttrack/image.hpp"
#include "parttrack/numerics/rng.hpp"

namespace parttrack {

struct Sequence {
  std::string name;
  std::vector<Image> frames;
  std::vector<BBox<double>> gt;  // image pixels, center form
  std::string metadata;
  // Per-frame object-only masks (width*height, 1 = object pixel). Filled by
  // the generator; empty for sequences loaded from disk.
  std::vector<std::vector<std::uint8_t>> object_masks;

  std::size_t size() const { return frames.size(); }
};

struct SynthConfig {
  int width = 128;
  int height = 128;
  std::string shapes = "ellipse,rectangle,blob";
  double object_size_min = 20;  // base diameter range, pixels
  double object_size_max = 32;
  double aspect_min = 0.7;
  double aspect_max = 1.4;
  double velocity_x = 0;  // pixels per frame
  double velocity_y = 0;
  double speed = 0;             // > 0: start at this speed in a random heading instead
  double direction_change = 0;  // std-dev of per-frame heading change, radians
  double deformation = 0;       // relative amplitude of shape oscillation
  double deformation_period = 24;
  double occluder_probability = 0;  // chance an occluding bar crosses the sequence
  int distractors = 0;
  double texture_noise = 0.04;
  bool bounce = true;  // reflect off canvas borders; off lets the object leave
  int length = 40;
  int num_sequences = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

SynthConfig parse_synth_config(const std::string& text, SynthConfig base = {});
SynthConfig load_synth_config(const std::filesystem::path& path, SynthConfig base = {});
std::string to_text(const SynthConfig& cfg);

/// Renders one sequence. The gt of every frame is the tight box of the
/// rendered object mask. Throws DataError if the object leaves the canvas.
Sequence gen_synthetic(const SynthConfig& cfg, int length, Rng& rng);

/// Generates cfg.num_sequences sequences with seeds derived from cfg.seed.
std::vector<Sequence> gen_synthetic_set(const SynthConfig& cfg);

// Netpbm P6 (binary RGB) image I/O.
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& image);

/// Reads numbered frames (%08d.ppm) and groundtruth.txt ("x,y,w,h" top-left
/// per line).
Sequence load_sequence(const std::filesystem::path& dir);
void save_sequence(const std::filesystem::path& dir, const Sequence& seq);

/// Parses "x,y,w,h" (commas, tabs or spaces) into a center-form box.
BBox<double> parse_box_line(const std::string& line, int line_no);
std::vector<BBox<double>> read_boxes(const std::filesystem::path& path);
void write_boxes(const std::filesystem::path& path, const std::vector<BBox<double>>& boxes);
std::string format_box_line(const BBox<double>& box);

/// Manifest: one sequence directory per line, relative to the manifest.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<std::filesystem::path>& dirs);
std::vector<Sequence> load_manifest(const std::filesystem::path& path);

}  // namespace parttrack
