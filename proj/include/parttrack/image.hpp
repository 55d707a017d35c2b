#pragma once

#include <cstdint>
#include <vector>

#include "parttrack/numerics/tensor.hpp"

namespace parttrack {

/// 8-bit interleaved RGB frame.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // height * width * 3, row-major

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

  bool empty() const { return width <= 0 || height <= 0 || rgb.empty(); }
  std::uint8_t& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Square float patch in [0, 1], stored as (size*size) x 3 so that it feeds
/// the backbone directly as a (positions x channels) map.
struct Patch {
  int size = 0;
  Mat<double> pixels;
};

}  // namespace parttrack
