#pragma once

// Domain vocabulary for the absolute-position task: position labels, the
// 3x3 region grid, the 9x9 placement-cell grid, object attributes and the
// pixel <-> cell <-> region <-> label mappings.

#include <apvqa/error.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace apvqa {

inline constexpr int kRegionsPerSide = 3;
inline constexpr int kCellsPerSide = 9;
inline constexpr int kNumLabels = 9;
inline constexpr int kNumCells = kCellsPerSide * kCellsPerSide;

// Row-major order (top -> bottom, left -> right). The numeric value is the
// canonical index used for tie-breaking and in binary formats.
enum class PositionLabel : std::uint8_t {
  TopLeft = 0,
  TopCenter,
  TopRight,
  CenterLeft,
  Center,
  CenterRight,
  BottomLeft,
  BottomCenter,
  BottomRight,
};

inline constexpr std::array<PositionLabel, kNumLabels> kAllLabels = {
    PositionLabel::TopLeft,    PositionLabel::TopCenter,   PositionLabel::TopRight,
    PositionLabel::CenterLeft, PositionLabel::Center,      PositionLabel::CenterRight,
    PositionLabel::BottomLeft, PositionLabel::BottomCenter, PositionLabel::BottomRight,
};

inline constexpr std::array<std::string_view, kNumLabels> kLabelNames = {
    "top left",    "top center", "top right",    "center left", "center",
    "center right", "bottom left", "bottom center", "bottom right",
};

constexpr int index_of(PositionLabel l) { return static_cast<int>(l); }

constexpr std::string_view to_string(PositionLabel l) { return kLabelNames[index_of(l)]; }

inline std::optional<PositionLabel> label_from_string(std::string_view s) {
  for (int i = 0; i < kNumLabels; ++i) {
    if (kLabelNames[i] == s) return kAllLabels[i];
  }
  return std::nullopt;
}

inline PositionLabel label_from_index(int i) {
  if (i < 0 || i >= kNumLabels) throw InputError("label index out of range: " + std::to_string(i));
  return kAllLabels[i];
}

struct Region {
  int row = 0;
  int col = 0;
  friend constexpr bool operator==(const Region&, const Region&) = default;
};

struct Cell {
  int row = 0;
  int col = 0;
  friend constexpr bool operator==(const Cell&, const Cell&) = default;
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

constexpr PositionLabel label_of(Region r) {
  return kAllLabels[r.row * kRegionsPerSide + r.col];
}

constexpr Region region_of(PositionLabel l) {
  return Region{index_of(l) / kRegionsPerSide, index_of(l) % kRegionsPerSide};
}

constexpr bool is_valid(Cell c) {
  return c.row >= 0 && c.row < kCellsPerSide && c.col >= 0 && c.col < kCellsPerSide;
}

constexpr int cell_index(Cell c) { return c.row * kCellsPerSide + c.col; }
constexpr Cell cell_from_index(int i) { return Cell{i / kCellsPerSide, i % kCellsPerSide}; }

constexpr Region region_of_cell(Cell c) {
  return Region{c.row / (kCellsPerSide / kRegionsPerSide), c.col / (kCellsPerSide / kRegionsPerSide)};
}

// ---------------------------------------------------------------------------
// Attributes

enum class ColorName : std::uint8_t { Red, Green, Blue, Cyan, Magenta, Yellow, White };

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend constexpr bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr std::array<ColorName, 6> kTargetColors = {
    ColorName::Red, ColorName::Green, ColorName::Blue,
    ColorName::Cyan, ColorName::Magenta, ColorName::Yellow,
};

constexpr Rgb rgb_of(ColorName c) {
  switch (c) {
    case ColorName::Red: return {255, 0, 0};
    case ColorName::Green: return {0, 255, 0};
    case ColorName::Blue: return {0, 0, 255};
    case ColorName::Cyan: return {0, 255, 255};
    case ColorName::Magenta: return {255, 0, 255};
    case ColorName::Yellow: return {255, 255, 0};
    case ColorName::White: return {255, 255, 255};
  }
  return {};
}

inline constexpr std::array<std::string_view, 7> kColorNames = {
    "red", "green", "blue", "cyan", "magenta", "yellow", "white"};

constexpr std::string_view to_string(ColorName c) { return kColorNames[static_cast<int>(c)]; }

enum class Shape : std::uint8_t { Circle, Triangle, Square, Star, Plus };

inline constexpr std::array<Shape, 4> kEvalShapes = {Shape::Circle, Shape::Triangle,
                                                     Shape::Square, Shape::Star};

inline constexpr std::array<std::string_view, 5> kShapeNames = {"circle", "triangle", "square",
                                                                 "star", "plus"};

constexpr std::string_view to_string(Shape s) { return kShapeNames[static_cast<int>(s)]; }

enum class SizeKind : std::uint8_t { Regular, Small };

inline constexpr std::array<SizeKind, 2> kSizes = {SizeKind::Regular, SizeKind::Small};

inline constexpr int kRegularSidePx = 64;

constexpr int side_px(SizeKind s) {
  return s == SizeKind::Regular ? kRegularSidePx : kRegularSidePx / 2;
}

inline constexpr std::array<std::string_view, 2> kSizeNames = {"regular", "small"};

constexpr std::string_view to_string(SizeKind s) { return kSizeNames[static_cast<int>(s)]; }

template <typename Enum, std::size_t N>
std::optional<Enum> parse_enum(std::string_view s, const std::array<std::string_view, N>& names) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

inline ColorName color_from_string(std::string_view s) {
  if (auto c = parse_enum<ColorName>(s, kColorNames)) return *c;
  throw InputError("unknown color: " + std::string(s));
}

inline Shape shape_from_string(std::string_view s) {
  if (auto v = parse_enum<Shape>(s, kShapeNames)) return *v;
  throw InputError("unknown shape: " + std::string(s));
}

inline SizeKind size_from_string(std::string_view s) {
  if (auto v = parse_enum<SizeKind>(s, kSizeNames)) return *v;
  throw InputError("unknown size: " + std::string(s));
}

// ---------------------------------------------------------------------------
// Image geometry

struct ImageGeometry {
  int width = 672;
  int height = 672;
  int grid_cells = kCellsPerSide;
  int grid_regions = kRegionsPerSide;

  static constexpr ImageGeometry synthetic() { return {}; }
  friend constexpr bool operator==(const ImageGeometry&, const ImageGeometry&) = default;
};

inline constexpr int kSyntheticSidePx = 672;

// Band index of an integer pixel coordinate: min(n-1, floor(v*n/extent)).
constexpr int pixel_band(long long v, long long extent, int n) {
  const long long b = v * n / extent;
  return static_cast<int>(b < n - 1 ? b : n - 1);
}

// Same for a real coordinate in [0, extent].
inline int coord_band(double v, double extent, int n) {
  const double b = std::floor(v * n / extent);
  return b < n - 1 ? static_cast<int>(b) : n - 1;
}

inline Cell cell_of_pixel(int x, int y, const ImageGeometry& geom) {
  if (x < 0 || y < 0 || x >= geom.width || y >= geom.height) {
    throw InputError("pixel (" + std::to_string(x) + "," + std::to_string(y) +
                     ") outside image " + std::to_string(geom.width) + "x" +
                     std::to_string(geom.height));
  }
  return Cell{pixel_band(y, geom.height, geom.grid_cells), pixel_band(x, geom.width, geom.grid_cells)};
}

namespace detail {
inline void check_point(double x, double y, const ImageGeometry& geom) {
  // Bbox centers may sit exactly on the far edge; that point is clamped into the last band.
  if (!(x >= 0.0 && y >= 0.0 && x <= geom.width && y <= geom.height)) {
    throw InputError("point (" + std::to_string(x) + "," + std::to_string(y) +
                     ") outside image " + std::to_string(geom.width) + "x" +
                     std::to_string(geom.height));
  }
}
}  // namespace detail

inline Region region_of_point(double x, double y, const ImageGeometry& geom) {
  detail::check_point(x, y, geom);
  return Region{coord_band(y, geom.height, geom.grid_regions),
                coord_band(x, geom.width, geom.grid_regions)};
}

inline Cell cell_of_point(double x, double y, const ImageGeometry& geom) {
  detail::check_point(x, y, geom);
  return Cell{coord_band(y, geom.height, geom.grid_cells), coord_band(x, geom.width, geom.grid_cells)};
}

struct PixelPoint {
  int x = 0;
  int y = 0;
  friend constexpr bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

// Rendering anchor: round((col + 0.5) * width / 9), likewise for rows.
inline PixelPoint cell_center(Cell c, const ImageGeometry& geom) {
  const auto center = [&](int idx, int extent) {
    return static_cast<int>(std::lround((idx + 0.5) * extent / geom.grid_cells));
  };
  return PixelPoint{center(c.col, geom.width), center(c.row, geom.height)};
}

}  // namespace apvqa
