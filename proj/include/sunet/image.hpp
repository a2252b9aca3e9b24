// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace sunet {

/// Row-major 2-D raster.
template <typename T>
struct Grid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(std::size_t h, std::size_t w, T fill = T{}) : height(h), width(w), data(h * w, fill) {}

  T& at(std::size_t row, std::size_t col) { return data[row * width + col]; }
  const T& at(std::size_t row, std::size_t col) const { return data[row * width + col]; }
  std::size_t size() const noexcept { return data.size(); }
  bool same_extent(const auto& other) const noexcept { return height == other.height && width == other.width; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using Image = Grid<double>;          // intensities in [0, 1]
using Mask = Grid<std::uint8_t>;     // 0 background, 1 foreground

}  // namespace sunet
