#include "parttrack/dataio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "parttrack/config.hpp"

namespace parttrack {
namespace fs = std::filesystem;

namespace {

std::vector<detail::Field> synth_fields(SynthConfig& c) {
  return {
      {"width", false, &c.width},
      {"height", false, &c.height},
      {"shapes", false, &c.shapes},
      {"object_size_min", false, &c.object_size_min},
      {"object_size_max", false, &c.object_size_max},
      {"aspect_min", false, &c.aspect_min},
      {"aspect_max", false, &c.aspect_max},
      {"velocity_x", false, &c.velocity_x},
      {"velocity_y", false, &c.velocity_y},
      {"speed", false, &c.speed},
      {"direction_change", false, &c.direction_change},
      {"deformation", false, &c.deformation},
      {"deformation_period", false, &c.deformation_period},
      {"occluder_probability", false, &c.occluder_probability},
      {"distractors", false, &c.distractors},
      {"texture_noise", false, &c.texture_noise},
      {"bounce", false, &c.bounce},
      {"length", false, &c.length},
      {"num_sequences", false, &c.num_sequences},
      {"seed", false, &c.seed},
  };
}

enum class Shape { Ellipse, Rectangle, Blob };

std::vector<Shape> parse_shapes(const std::string& text) {
  std::vector<Shape> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (item == "ellipse") out.push_back(Shape::Ellipse);
    else if (item == "rectangle") out.push_back(Shape::Rectangle);
    else if (item == "blob" || item == "blob-polygon") out.push_back(Shape::Blob);
    else if (!item.empty()) throw ConfigError("synth: unknown shape '" + item + "'");
  }
  if (out.empty()) throw ConfigError("synth: shape set is empty");
  return out;
}

using Color = std::array<double, 3>;

Color hsv(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h * 6.0, 6.0);
  const double x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
  Color rgb{0, 0, 0};
  switch (static_cast<int>(hp)) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  const double m = v - c;
  for (auto& ch : rgb) ch += m;
  return rgb;
}

// One moving, deforming shape.
struct Sprite {
  Shape shape = Shape::Ellipse;
  double cx = 0, cy = 0, vx = 0, vy = 0;
  double rx = 10, ry = 10;
  Color color{}, accent{};
  std::array<double, 2> blob_amp{}, blob_phase{};
  double deform_phase = 0;

  // Radii at frame t under a deformation amplitude.
  std::pair<double, double> radii(int t, double amplitude, double period) const {
    const double w = amplitude * std::sin(2 * std::numbers::pi * t / period + deform_phase);
    return {rx * (1 + w), ry * (1 - w)};
  }

  double reach(double amplitude) const { return 1.3 * std::max(rx, ry) * (1 + amplitude); }

  bool inside(double px, double py, double rxt, double ryt, int t, double amplitude, double period) const {
    const double u = (px - cx) / rxt;
    const double v = (py - cy) / ryt;
    switch (shape) {
      case Shape::Rectangle: return std::abs(u) <= 1 && std::abs(v) <= 1;
      case Shape::Ellipse: return u * u + v * v <= 1;
      case Shape::Blob: {
        const double r = std::hypot(u, v);
        const double th = std::atan2(v, u);
        const double wobble = amplitude * std::sin(2 * std::numbers::pi * t / period);
        const double edge = 1 + (blob_amp[0] + 0.5 * wobble) * std::sin(2 * th + blob_phase[0]) +
                            blob_amp[1] * std::sin(3 * th + blob_phase[1]);
        return r <= edge;
      }
    }
    return false;
  }

  // Second tone: a disc offset toward the upper left of the shape.
  bool in_accent(double px, double py, double rxt, double ryt) const {
    const double u = (px - cx) / rxt + 0.35;
    const double v = (py - cy) / ryt + 0.3;
    return u * u + v * v <= 0.2;
  }

  void step(double direction_change, Rng& rng) {
    if (direction_change > 0) {
      const double a = direction_change * rng.normal();
      const double c = std::cos(a), s = std::sin(a);
      const double nvx = c * vx - s * vy;
      vy = s * vx + c * vy;
      vx = nvx;
    }
    cx += vx;
    cy += vy;
  }

  void bounce(double margin, int width, int height) {
    if (cx < margin) {
      cx = 2 * margin - cx;
      vx = std::abs(vx);
    } else if (cx > width - margin) {
      cx = 2 * (width - margin) - cx;
      vx = -std::abs(vx);
    }
    if (cy < margin) {
      cy = 2 * margin - cy;
      vy = std::abs(vy);
    } else if (cy > height - margin) {
      cy = 2 * (height - margin) - cy;
      vy = -std::abs(vy);
    }
  }
};

Sprite make_sprite(const SynthConfig& cfg, const std::vector<Shape>& shapes, Rng& rng) {
  Sprite s;
  s.shape = shapes[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(shapes.size()) - 1))];
  const double size = rng.uniform(cfg.object_size_min, cfg.object_size_max);
  const double aspect = rng.uniform(cfg.aspect_min, cfg.aspect_max);
  s.rx = size / 2 * std::sqrt(aspect);
  s.ry = size / 2 / std::sqrt(aspect);
  const double hue = rng.uniform();
  s.color = hsv(hue, rng.uniform(0.6, 1.0), rng.uniform(0.6, 1.0));
  s.accent = hsv(std::fmod(hue + 0.5, 1.0), rng.uniform(0.5, 1.0), rng.uniform(0.3, 1.0));
  s.blob_amp = {rng.uniform(0.08, 0.18), rng.uniform(0.05, 0.12)};
  s.blob_phase = {rng.uniform(0, 2 * std::numbers::pi), rng.uniform(0, 2 * std::numbers::pi)};
  s.deform_phase = rng.uniform(0, 2 * std::numbers::pi);
  return s;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (width < 8 || height < 8) throw ConfigError("synth: canvas must be at least 8x8");
  if (!(object_size_min > 0) || object_size_max < object_size_min) throw ConfigError("synth: bad object size range");
  if (!(aspect_min > 0) || aspect_max < aspect_min) throw ConfigError("synth: bad aspect range");
  if (!(deformation >= 0) || deformation >= 0.9) throw ConfigError("synth: deformation must be in [0, 0.9)");
  if (!(deformation_period > 0)) throw ConfigError("synth: deformation_period must be positive");
  if (!(occluder_probability >= 0 && occluder_probability <= 1)) {
    throw ConfigError("synth: occluder_probability must be in [0, 1]");
  }
  if (distractors < 0 || !(texture_noise >= 0) || !(direction_change >= 0) || !(speed >= 0)) {
    throw ConfigError("synth: distractors, texture_noise, direction_change and speed must be >= 0");
  }
  if (length < 2 || num_sequences < 1) throw ConfigError("synth: length must be >= 2 and num_sequences >= 1");
  parse_shapes(shapes);
}

SynthConfig parse_synth_config(const std::string& text, SynthConfig base) {
  detail::parse_fields(text, synth_fields(base));
  return base;
}

SynthConfig load_synth_config(const fs::path& path, SynthConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synth config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_synth_config(ss.str(), std::move(base));
}

std::string to_text(const SynthConfig& cfg) {
  SynthConfig copy = cfg;
  std::string out;
  for (const auto& f : synth_fields(copy)) out += std::string(f.key) + "=" + detail::format_field(f) + "\n";
  return out;
}

Sequence gen_synthetic(const SynthConfig& cfg, int length, Rng& rng) {
  cfg.validate();
  if (length < 2) throw DataError("gen_synthetic: length must be >= 2");
  const auto shapes = parse_shapes(cfg.shapes);
  const int W = cfg.width, H = cfg.height;

  Sprite object = make_sprite(cfg, shapes, rng);
  const double margin = object.reach(cfg.deformation) + 1;
  if (2 * margin >= std::min(W, H)) throw DataError("gen_synthetic: object does not fit on the canvas");
  // Integer start keeps integer velocities producing exact pixel shifts.
  object.cx = std::round(rng.uniform(margin, W - margin));
  object.cy = std::round(rng.uniform(margin, H - margin));
  if (cfg.speed > 0) {
    const double heading = rng.uniform(0, 2 * std::numbers::pi);
    object.vx = cfg.speed * std::cos(heading);
    object.vy = cfg.speed * std::sin(heading);
  } else {
    object.vx = cfg.velocity_x;
    object.vy = cfg.velocity_y;
  }

  std::vector<Sprite> distractors;
  for (int i = 0; i < cfg.distractors; ++i) {
    Sprite d = make_sprite(cfg, shapes, rng);
    const double m = d.reach(cfg.deformation) + 1;
    d.cx = rng.uniform(m, std::max(m, W - m));
    d.cy = rng.uniform(m, std::max(m, H - m));
    const double heading = rng.uniform(0, 2 * std::numbers::pi);
    const double speed = std::max(1.0, std::hypot(object.vx, object.vy));
    d.vx = speed * std::cos(heading);
    d.vy = speed * std::sin(heading);
    distractors.push_back(d);
  }

  // Vertical bar sweeping across the canvas over the sequence.
  const bool occluder = cfg.occluder_probability > 0 && rng.uniform() < cfg.occluder_probability;
  const double bar_width = 0.4 * (cfg.object_size_min + cfg.object_size_max) / 2;
  const double bar_start = rng.uniform(-bar_width, 0.5 * W);
  const double bar_speed = (W - bar_start) / length;

  // Static textured background: smooth gradient plus noise.
  const Color bg0 = hsv(rng.uniform(), rng.uniform(0.0, 0.3), rng.uniform(0.2, 0.6));
  const Color bg1 = hsv(rng.uniform(), rng.uniform(0.0, 0.3), rng.uniform(0.2, 0.6));
  std::vector<double> background(static_cast<std::size_t>(W) * H * 3);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double a = (x + y) / static_cast<double>(W + H);
      for (int c = 0; c < 3; ++c) {
        background[(static_cast<std::size_t>(y) * W + x) * 3 + c] =
            (1 - a) * bg0[c] + a * bg1[c] + cfg.texture_noise * (2 * rng.uniform() - 1);
      }
    }

  Sequence seq;
  seq.metadata = "synthetic " + to_text(cfg);
  std::replace(seq.metadata.begin(), seq.metadata.end(), '\n', ' ');
  std::vector<double> canvas;
  for (int t = 0; t < length; ++t) {
    canvas = background;
    auto paint = [&](int x, int y, const Color& col) {
      for (int c = 0; c < 3; ++c) canvas[(static_cast<std::size_t>(y) * W + x) * 3 + c] = col[c];
    };
    auto draw = [&](const Sprite& s, std::vector<std::uint8_t>* mask) {
      const auto [rxt, ryt] = s.radii(t, cfg.deformation, cfg.deformation_period);
      const double reach = 1.3 * std::max(rxt, ryt) * (1 + cfg.deformation) + 1;
      const int x_lo = std::max(0, static_cast<int>(std::floor(s.cx - reach)));
      const int x_hi = std::min(W - 1, static_cast<int>(std::ceil(s.cx + reach)));
      const int y_lo = std::max(0, static_cast<int>(std::floor(s.cy - reach)));
      const int y_hi = std::min(H - 1, static_cast<int>(std::ceil(s.cy + reach)));
      for (int y = y_lo; y <= y_hi; ++y)
        for (int x = x_lo; x <= x_hi; ++x) {
          const double px = x + 0.5, py = y + 0.5;
          if (!s.inside(px, py, rxt, ryt, t, cfg.deformation, cfg.deformation_period)) continue;
          paint(x, y, s.in_accent(px, py, rxt, ryt) ? s.accent : s.color);
          if (mask) (*mask)[static_cast<std::size_t>(y) * W + x] = 1;
        }
    };

    for (const auto& d : distractors) draw(d, nullptr);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(W) * H, 0);
    draw(object, &mask);
    if (occluder) {
      const double x0 = bar_start + bar_speed * t;
      for (int y = 0; y < H; ++y)
        for (int x = std::max(0, static_cast<int>(x0)); x < std::min(W, static_cast<int>(x0 + bar_width)); ++x)
          paint(x, y, {0.5, 0.5, 0.5});
    }

    // Tight box of the object mask.
    int min_x = W, min_y = H, max_x = -1, max_y = -1;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        if (mask[static_cast<std::size_t>(y) * W + x]) {
          min_x = std::min(min_x, x);
          max_x = std::max(max_x, x);
          min_y = std::min(min_y, y);
          max_y = std::max(max_y, y);
        }
    if (max_x < 0) throw DataError("gen_synthetic: object left the canvas at frame " + std::to_string(t));

    Image frame(W, H);
    for (std::size_t i = 0; i < canvas.size(); ++i) frame.rgb[i] = to_byte(canvas[i]);
    seq.frames.push_back(std::move(frame));
    seq.gt.push_back(BBox<double>::from_top_left(min_x, min_y, max_x - min_x + 1, max_y - min_y + 1));
    seq.object_masks.push_back(std::move(mask));

    object.step(cfg.direction_change, rng);
    if (cfg.bounce) object.bounce(margin, W, H);
    for (auto& d : distractors) {
      d.step(cfg.direction_change, rng);
      d.bounce(d.reach(cfg.deformation) + 1, W, H);
    }
  }
  return seq;
}

std::vector<Sequence> gen_synthetic_set(const SynthConfig& cfg) {
  cfg.validate();
  Rng master(cfg.seed);
  std::vector<Sequence> out;
  for (int i = 0; i < cfg.num_sequences; ++i) {
    Rng rng = master.split();
    Sequence seq = gen_synthetic(cfg, cfg.length, rng);
    char name[32];
    std::snprintf(name, sizeof name, "synth_%04d", i);
    seq.name = name;
    out.push_back(std::move(seq));
  }
  return out;
}

Image read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  auto next_token = [&]() {
    std::string tok;
    char ch;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!tok.empty()) break;
      } else {
        tok.push_back(ch);
      }
    }
    return tok;
  };
  if (next_token() != "P6") throw DataError(path.string() + ": not a binary PPM (P6)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw DataError(path.string() + ": malformed PPM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw DataError(path.string() + ": unsupported PPM dimensions or depth");
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) throw DataError(path.string() + ": truncated PPM");
  return img;
}

void write_ppm(const fs::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image " + path.string());
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
}

BBox<double> parse_box_line(const std::string& line, int line_no) {
  std::string norm = line;
  std::replace_if(norm.begin(), norm.end(), [](char c) { return c == ',' || c == '\t'; }, ' ');
  std::istringstream ss(norm);
  std::array<double, 4> v{};
  for (auto& x : v) {
    if (!(ss >> x)) throw DataError("line " + std::to_string(line_no) + ": expected x,y,w,h, got '" + line + "'");
  }
  std::string extra;
  if (ss >> extra) throw DataError("line " + std::to_string(line_no) + ": trailing data in '" + line + "'");
  return BBox<double>::from_top_left(v[0], v[1], v[2], v[3]);
}

std::vector<BBox<double>> read_boxes(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open box file " + path.string());
  std::vector<BBox<double>> boxes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      boxes.push_back(parse_box_line(line, line_no));
    } catch (const DataError& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  return boxes;
}

std::string format_box_line(const BBox<double>& b) {
  return format_number(b.left()) + "," + format_number(b.top()) + "," + format_number(b.w) + "," +
         format_number(b.h);
}

void write_boxes(const fs::path& path, const std::vector<BBox<double>>& boxes) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write box file " + path.string());
  for (const auto& b : boxes) out << format_box_line(b) << "\n";
}

Sequence load_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("sequence directory not found: " + dir.string());
  std::vector<std::pair<long long, fs::path>> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".ppm") continue;
    const std::string stem = entry.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), ::isdigit)) continue;
    frames.emplace_back(std::stoll(stem), entry.path());
  }
  std::sort(frames.begin(), frames.end());
  const fs::path gt_path = dir / "groundtruth.txt";
  if (!fs::exists(gt_path)) throw DataError(dir.string() + ": missing groundtruth.txt");

  Sequence seq;
  seq.name = dir.filename().string();
  if (seq.name.empty()) seq.name = dir.parent_path().filename().string();
  seq.metadata = "source " + dir.string();
  seq.gt = read_boxes(gt_path);
  if (seq.gt.size() != frames.size()) {
    throw DataError(dir.string() + ": " + std::to_string(frames.size()) + " frames but " +
                    std::to_string(seq.gt.size()) + " ground-truth lines");
  }
  for (std::size_t i = 0; i < seq.gt.size(); ++i) {
    if (!(seq.gt[i].w > 0) || !(seq.gt[i].h > 0)) {
      throw DataError(gt_path.string() + ": line " + std::to_string(i + 1) + " has non-positive area");
    }
  }
  for (const auto& [_, p] : frames) seq.frames.push_back(read_ppm(p));
  return seq;
}

void save_sequence(const fs::path& dir, const Sequence& seq) {
  if (seq.frames.size() != seq.gt.size()) throw DataError("save_sequence: frame/gt count mismatch");
  fs::create_directories(dir);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%08zu.ppm", i + 1);
    write_ppm(dir / name, seq.frames[i]);
  }
  write_boxes(dir / "groundtruth.txt", seq.gt);
}

std::vector<fs::path> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::vector<fs::path> dirs;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    fs::path p(line);
    dirs.push_back(p.is_absolute() ? p : path.parent_path() / p);
  }
  return dirs;
}

void write_manifest(const fs::path& path, const std::vector<fs::path>& dirs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  for (const auto& d : dirs) {
    const fs::path rel = fs::absolute(d).lexically_relative(base);
    out << (rel.empty() ? fs::absolute(d) : rel).generic_string() << "\n";
  }
}

std::vector<Sequence> load_manifest(const fs::path& path) {
  std::vector<Sequence> out;
  for (const auto& dir : read_manifest(path)) out.push_back(load_sequence(dir));
  if (out.empty()) throw DataError("manifest " + path.string() + " lists no sequences");
  return out;
}

}  // namespace parttrack
